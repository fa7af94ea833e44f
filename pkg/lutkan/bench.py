"""
Honest-baseline timing: spline and LUT forwards in the same tier, same inputs,
same iteration protocol.
"""

import os
import tempfile
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from .artifact import LutLayerArtifact
from .artifact_io import load_any, save_artifact, save_model_artifacts
from .logging_config import get_logger, get_structured_logger
from .lut_runtime import lut_model_forward_batch
from .metrics import model_memory_breakdown
from .models import BenchMode, KanLayerSpec, Tier, parse_enum
from .reports import BenchReport
from .spline_core import model_forward_batch
from .threads import pin_threads, resolve_threads

logger = get_logger('bench')
structured_logger = get_structured_logger('bench')

WARMUP_ITERS = 50
TIMED_ITERS = 200
BATCH_SIZE = 1024
MIN_TIMED_REGION_S = 1e-6
MAX_INNER_REPEATS = 1 << 20
CALIBRATION_TRIALS = 5


@dataclass(frozen=True)
class TimingResult:
    """Per-iteration samples in milliseconds (each averaged over ``inner_repeats`` calls)."""

    samples_ms: List[float]
    inner_repeats: int

    @property
    def mean_ms(self) -> float:
        return float(np.mean(self.samples_ms))

    @property
    def std_ms(self) -> float:
        return float(np.std(self.samples_ms))

    @property
    def median_ms(self) -> float:
        return float(np.median(self.samples_ms))


def _region_s(fn: Callable[[], object], repeats: int) -> float:
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return time.perf_counter() - start


def _calibrate_repeats(fn: Callable[[], object]) -> int:
    # a repeat count is long enough only when its fastest trial is
    repeats = 1
    while repeats < MAX_INNER_REPEATS:
        if min(_region_s(fn, repeats) for _ in range(CALIBRATION_TRIALS)) >= MIN_TIMED_REGION_S:
            break
        repeats *= 2
    return repeats


def time_callable(fn: Callable[[], object], warmup: int = WARMUP_ITERS, iters: int = TIMED_ITERS) -> TimingResult:
    """Time ``fn`` after ``warmup`` untimed calls.

    Calls too fast for the clock are repeated inside each timed region until
    it lasts at least 1 us; the repeat count is recorded.
    """
    for _ in range(warmup):
        fn()
    repeats = _calibrate_repeats(fn)
    samples = []
    for _ in range(iters):
        start = time.perf_counter()
        for _ in range(repeats):
            fn()
        samples.append((time.perf_counter() - start) * 1000.0 / repeats)
    return TimingResult(samples_ms=samples, inner_repeats=repeats)


def compare_callables(baseline: Callable[[], object], candidate: Callable[[], object],
                      warmup: int = WARMUP_ITERS, iters: int = TIMED_ITERS) -> float:
    """Speedup of ``candidate`` over ``baseline`` (mean baseline ms / mean candidate ms)."""
    base = time_callable(baseline, warmup, iters)
    cand = time_callable(candidate, warmup, iters)
    return base.mean_ms / cand.mean_ms


def _as_list(value) -> list:
    if isinstance(value, (KanLayerSpec, LutLayerArtifact)):
        return [value]
    return list(value)


def run_honest_bench(layer: Union[KanLayerSpec, Sequence[KanLayerSpec]],
                     artifact: Union[LutLayerArtifact, Sequence[LutLayerArtifact]],
                     X, tier=Tier.OPTIMIZED, mode=BenchMode.STEADY,
                     warmup: int = WARMUP_ITERS, iters: int = TIMED_ITERS,
                     artifact_path: Optional[str] = None, threads: Optional[int] = None,
                     config: Optional[Dict] = None, seed: Optional[int] = None) -> BenchReport:
    """Time the float forward against the LUT forward on identical inputs in one tier.

    Steady mode uses the preloaded artifact. Cold-start mode loads the
    artifact from ``artifact_path`` inside every timed LUT iteration (a
    temporary copy is written first when no path is given); the spline side
    keeps its in-memory model in both modes.
    """
    tier = parse_enum(Tier, tier, 'tier')
    mode = parse_enum(BenchMode, mode, 'mode')
    pin_threads(resolve_threads(threads))
    layers, artifacts = _as_list(layer), _as_list(artifact)
    X = np.ascontiguousarray(X, dtype=np.float64)

    def spline_forward():
        return model_forward_batch(layers, X, tier)

    with tempfile.TemporaryDirectory(prefix='lutkan-bench-') as scratch:
        if mode == BenchMode.COLD_START:
            if artifact_path is None:
                if len(artifacts) == 1:
                    artifact_path = os.path.join(scratch, 'artifact.lut')
                    save_artifact(artifacts[0], artifact_path)
                else:
                    artifact_path = os.path.join(scratch, 'chain')
                    save_model_artifacts(artifacts, artifact_path)
            path = artifact_path

            def lut_forward():
                return lut_model_forward_batch(load_any(path), X, tier)
        else:
            def lut_forward():
                return lut_model_forward_batch(artifacts, X, tier)

        spline = time_callable(spline_forward, warmup, iters)
        lut = time_callable(lut_forward, warmup, iters)

    report = BenchReport(
        tier=tier.value,
        mode=mode.value,
        batch=int(X.shape[0]),
        warmup_iters=warmup,
        timed_iters=iters,
        spline_ms_mean=spline.mean_ms,
        spline_ms_std=spline.std_ms,
        spline_ms_median=spline.median_ms,
        lut_ms_mean=lut.mean_ms,
        lut_ms_std=lut.std_ms,
        lut_ms_median=lut.median_ms,
        spline_inner_repeats=spline.inner_repeats,
        lut_inner_repeats=lut.inner_repeats,
        memory=model_memory_breakdown(artifacts, layers),
        config=dict(config or {}),
        seed=seed,
    )
    structured_logger.log_bench(report.tier, report.mode, report.spline_ms_mean, report.lut_ms_mean,
                                report.speedup, max(report.spline_inner_repeats, report.lut_inner_repeats))
    logger.info(f"{tier.value}/{mode.value}: spline {spline.mean_ms:.3f} ms, LUT {lut.mean_ms:.3f} ms, "
                f"speedup {report.speedup:.2f}x")
    return report
