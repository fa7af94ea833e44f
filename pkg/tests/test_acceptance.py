"""Trend-level checks on the seeded sanity layer: accuracy vs L, OOB behaviour, memory and speed."""

import numpy as np
import pytest

from conftest import make_layer
from lutkan.bench import run_honest_bench
from lutkan.lut_compiler import build_float_lut, compile_layer, float_debug_artifact
from lutkan.lut_runtime import lut_edge_phi_batch
from lutkan.metrics import eval_accuracy, memory_breakdown
from lutkan.model_gen import gen_calibration, gen_inputs, gen_sanity_layer
from lutkan.models import KnotGrid, OobConfig, QuantConfig

SEEDS = range(5)
L_VALUES = (16, 32, 64, 128)
STABILITY_ROUNDS = 3


@pytest.fixture(scope='module')
def mean_mae():
    """Seed-averaged in-range MAE per (scheme, L) with clipped inputs, closed/clip_x."""
    results = {}
    for seed in SEEDS:
        layer = gen_sanity_layer(seed)
        X = gen_calibration(seed, layer.grid)
        for scheme in ('symmetric', 'asymmetric'):
            for L in L_VALUES:
                artifact = compile_layer(layer, QuantConfig(L=L, scheme=scheme), OobConfig())
                results.setdefault((scheme, L), []).append(eval_accuracy(layer, artifact, X).mae_inrange)
    return {key: float(np.mean(values)) for key, values in results.items()}


class TestAccuracyTrend:
    """In-range error falls roughly as 1/L."""

    @pytest.mark.parametrize('scheme', ['symmetric', 'asymmetric'])
    @pytest.mark.parametrize('L', [16, 32, 64])
    def test_doubling_L_halves_error(self, mean_mae, scheme, L):
        ratio = mean_mae[(scheme, L)] / mean_mae[(scheme, 2 * L)]
        assert 1.6 <= ratio <= 2.4, ratio

    @pytest.mark.parametrize('L', L_VALUES)
    def test_schemes_agree(self, mean_mae, L):
        sym, asym = mean_mae[('symmetric', L)], mean_mae[('asymmetric', L)]
        assert abs(sym - asym) / max(sym, asym) < 0.15


class TestOobMatrix:
    """Four boundary/policy cells at L=64 with clipped inputs."""

    @pytest.fixture(scope='class')
    def reports(self):
        layer = gen_sanity_layer(0)
        X = gen_calibration(0, layer.grid)
        return {
            (b, p): eval_accuracy(layer, compile_layer(layer, QuantConfig(L=64), OobConfig(b, p)), X)
            for b in ('closed', 'half_open') for p in ('clip_x', 'zero_spline')
        }

    @pytest.mark.parametrize('policy', ['clip_x', 'zero_spline'])
    def test_closed_has_no_oob(self, reports, policy):
        report = reports[('closed', policy)]
        assert report.oob_any_frac == 0.0
        assert report.mae_oob is None and report.maxabs_oob is None

    @pytest.mark.parametrize('policy', ['clip_x', 'zero_spline'])
    def test_half_open_has_oob(self, reports, policy):
        assert reports[('half_open', policy)].oob_any_frac > 0.0

    def test_zero_spline_much_worse_outside(self, reports):
        assert reports[('half_open', 'zero_spline')].maxabs_oob >= 10 * reports[('half_open', 'clip_x')].maxabs_oob

    def test_in_range_identical(self, reports):
        values = [r.mae_inrange for r in reports.values()]
        assert max(values) - min(values) <= 1e-12


class TestMemoryScaling:
    """Byte counts over L."""

    def test_table_bytes_and_fraction(self):
        layer = gen_sanity_layer(0)
        breakdowns = [memory_breakdown(compile_layer(layer, QuantConfig(L=L), OobConfig()), layer) for L in L_VALUES]
        for L, memory in zip(L_VALUES, breakdowns):
            assert memory.q_table_bytes == 80 * 8 * L
        fractions = [m.q_table_fraction for m in breakdowns]
        assert all(a < b for a, b in zip(fractions, fractions[1:]))
        for small, large in zip(breakdowns[1:], breakdowns[2:]):
            assert 1.7 <= large.total / small.total <= 2.1


class TestInterpolationOracleLarge:
    """Unquantized tables match per-segment np.interp over 1e5 inputs."""

    def test_all_oob_configs(self, oob_config):
        rng = np.random.default_rng(99)
        grid = KnotGrid((-1.0, -0.6, -0.1, 0.0, 0.45, 1.0), 3)
        layer = make_layer(4, 2, grid, rng)
        cfg = QuantConfig(L=12, value_repr='phi')
        artifact = float_debug_artifact(layer, cfg, oob_config)
        table = build_float_lut(layer, cfg).values
        X = rng.uniform(-1.4, 1.4, (25_000, 4))
        X[:50] = 1.0
        X[50:100] = -1.0
        phi, inside = lut_edge_phi_batch(artifact, X)

        knots = artifact.knots.astype(np.float64)
        L, K = artifact.L, artifact.num_segments
        upper = np.nextafter(knots[-1], -np.inf) if oob_config.boundary_mode.value == 'half_open' else knots[-1]
        xc = np.clip(X, knots[0], upper)
        seg = np.minimum(np.searchsorted(knots, xc, side='right') - 1, K - 1)
        expected = np.empty_like(phi)
        for i in range(layer.in_dim):
            for j in range(layer.out_dim):
                e = layer.edge_index(i, j)
                for k in range(K):
                    rows = seg[:, i] == k
                    nodes = np.linspace(knots[k], knots[k + 1], L)
                    expected[rows, i, j] = np.interp(xc[rows, i], nodes, table[e, k])
        if oob_config.oob_policy.value == 'zero_spline':
            expected[~inside] = 0.0
        np.testing.assert_allclose(phi, expected, rtol=0, atol=1e-12)


@pytest.mark.slow
class TestSpeed:
    """Same-tier timing on the sanity layer (batch 1024, 50 warmup, 200 timed)."""

    @pytest.fixture(scope='class')
    def setup(self):
        layer = gen_sanity_layer(0)
        return layer, gen_inputs(0, 1024, layer.grid)

    def test_lut_at_least_three_times_faster(self, setup):
        layer, X = setup
        artifact = compile_layer(layer, QuantConfig(L=64), OobConfig())
        report = run_honest_bench(layer, artifact, X, tier='optimized', threads=1)
        assert report.speedup >= 3.0

    def test_lut_latency_stable_across_L(self, setup):
        layer, X = setup
        artifacts = {L: compile_layer(layer, QuantConfig(L=L), OobConfig()) for L in L_VALUES}
        best = {L: float('inf') for L in L_VALUES}
        # rounds interleave the L values; each keeps its fastest median
        for _ in range(STABILITY_ROUNDS):
            for L, artifact in artifacts.items():
                report = run_honest_bench(layer, artifact, X, warmup=20, iters=100, threads=1)
                best[L] = min(best[L], report.lut_ms_median)
        medians = list(best.values())
        assert (max(medians) - min(medians)) / min(medians) < 0.25

    def test_cold_start_loses_speedup(self, setup):
        layer, X = setup
        artifact = compile_layer(layer, QuantConfig(L=64), OobConfig())
        steady = run_honest_bench(layer, artifact, X, mode='steady', warmup=10, iters=50, threads=1)
        cold = run_honest_bench(layer, artifact, X, mode='cold_start', warmup=10, iters=50, threads=1)
        assert cold.speedup < steady.speedup
