"""Timing helpers and the same-tier benchmark."""

import os
import time

import numpy as np
import pytest

from lutkan.artifact_io import save_artifact
from lutkan.bench import compare_callables, run_honest_bench, time_callable
from lutkan.lut_compiler import compile_layer, compile_model
from lutkan.model_gen import gen_inputs, gen_model
from lutkan.models import OobConfig, QuantConfig


class TestTimeCallable:
    """Timer protocol."""

    def test_sample_count(self):
        calls = []
        result = time_callable(lambda: calls.append(1), warmup=3, iters=7)
        assert len(result.samples_ms) == 7
        assert len(calls) >= 3 + 7 * result.inner_repeats
        assert result.mean_ms >= 0.0 and result.std_ms >= 0.0

    def test_fast_calls_repeated(self):
        result = time_callable(lambda: None, warmup=0, iters=3)
        assert result.inner_repeats > 1

    def test_slow_first_call_does_not_fix_repeats(self):
        calls = []

        def cold_then_fast():
            calls.append(1)
            if len(calls) == 1:
                time.sleep(0.002)

        result = time_callable(cold_then_fast, warmup=0, iters=3)
        assert result.inner_repeats > 1

    def test_control_ratio_near_one(self):
        X = np.random.default_rng(0).normal(size=(256, 256))
        ratio = compare_callables(lambda: X @ X, lambda: X @ X, warmup=3, iters=20)
        assert 0.4 < ratio < 2.5


class TestHonestBench:
    """Spline vs LUT reports."""

    @pytest.fixture
    def setup(self, sanity_layer):
        artifact = compile_layer(sanity_layer, QuantConfig(L=32), OobConfig())
        X = gen_inputs(0, 64, sanity_layer.grid)
        return sanity_layer, artifact, X

    def test_steady_report(self, setup):
        layer, artifact, X = setup
        report = run_honest_bench(layer, artifact, X, tier='optimized', warmup=2, iters=5, config={'L': 32}, seed=0)
        assert (report.tier, report.mode, report.batch) == ('optimized', 'steady', 64)
        assert (report.warmup_iters, report.timed_iters) == (2, 5)
        assert report.spline_ms_mean > 0 and report.lut_ms_mean > 0
        assert report.speedup == pytest.approx(report.spline_ms_mean / report.lut_ms_mean)
        assert report.memory.q_table_bytes == artifact.q_table.nbytes
        assert report.config == {'L': 32} and report.seed == 0

    def test_scalar_tier(self, setup):
        layer, artifact, X = setup
        report = run_honest_bench(layer, artifact, X[:4], tier='scalar', warmup=1, iters=2)
        assert report.tier == 'scalar' and report.batch == 4

    def test_cold_start_with_temp_copy(self, setup):
        layer, artifact, X = setup
        report = run_honest_bench(layer, artifact, X, mode='cold_start', warmup=1, iters=3)
        assert report.mode == 'cold_start'

    def test_cold_start_from_path(self, tmp_path, setup):
        layer, artifact, X = setup
        path = str(tmp_path / 'a.lut')
        save_artifact(artifact, path)
        report = run_honest_bench(layer, artifact, X, mode='cold_start', artifact_path=path, warmup=1, iters=3)
        assert report.lut_ms_mean > 0
        assert os.path.isfile(path)

    def test_model_chain(self):
        layers = gen_model([6, 4, 1], seed=0)
        artifacts = compile_model(layers, QuantConfig(L=16), OobConfig())
        X = gen_inputs(0, 32, layers[0].grid, in_dim=6)
        report = run_honest_bench(layers, artifacts, X, mode='cold_start', warmup=1, iters=2)
        assert report.memory.q_table_bytes == sum(a.q_table.nbytes for a in artifacts)
