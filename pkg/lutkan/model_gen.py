"""
Seeded synthetic KAN layers and evaluation inputs for controlled sweeps.

Randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence([seed, stream])``, one stream per purpose, so the layer, the
calibration set and the evaluation set of a seed never share draws.
"""

from typing import List, Sequence, Union

import numpy as np

from .errors import ConfigError
from .models import EdgeParams, KanLayerSpec, KnotGrid
from .spline_core import basis_matrix

# Generator constants (documented in docs/REPORTS.md)
SANITY_IN_DIM = 10
SANITY_OUT_DIM = 8
SANITY_NUM_SEGMENTS = 8
SANITY_DEGREE = 3
KNOT_LOW = -1.0
KNOT_HIGH = 1.0
BREAKPOINT_STD = 0.1
SCALAR_LOW = 0.5
SCALAR_HIGH = 1.5
NUM_CALIBRATION_SAMPLES = 4096

STREAM_LAYER = 1
STREAM_CALIBRATION = 2
STREAM_EVAL = 3
STREAM_MODEL_LAYER = 100


def make_rng(seed: int, stream: int) -> np.random.Generator:
    """PCG64 generator for one (seed, stream) pair."""
    if int(seed) != seed or seed < 0:
        raise ConfigError(f"Seed must be a non-negative integer, got {seed}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(stream)])))


def _draw_layer(rng: np.random.Generator, in_dim: int, out_dim: int, grid: KnotGrid) -> KanLayerSpec:
    E = in_dim * out_dim
    # Spline values at the breakpoints are noise; coefficients are the minimum-norm least-squares fit
    targets = rng.normal(0.0, BREAKPOINT_STD, size=(E, grid.num_segments + 1))
    basis = basis_matrix(grid, np.asarray(grid.breakpoints, dtype=np.float64))
    fitted = np.linalg.lstsq(basis, targets.T, rcond=None)[0].T
    # float32-representable values so compiled edge scalars match the float model exactly
    coeffs = fitted.astype(np.float32).astype(np.float64)
    scalars = rng.uniform(SCALAR_LOW, SCALAR_HIGH, size=(E, 3)).astype(np.float32).astype(np.float64)
    edges = tuple(
        EdgeParams(coeffs=tuple(coeffs[e].tolist()), base_scale=scalars[e, 0],
                   spline_scale=scalars[e, 1], out_scale=scalars[e, 2])
        for e in range(E)
    )
    return KanLayerSpec(in_dim=in_dim, out_dim=out_dim, grid=grid, edges=edges, base_kind='silu')


def gen_sanity_layer(seed: int, in_dim: int = SANITY_IN_DIM, out_dim: int = SANITY_OUT_DIM,
                     num_segments: int = SANITY_NUM_SEGMENTS, degree: int = SANITY_DEGREE) -> KanLayerSpec:
    """Random layer with uniform knots on [-1, 1]; 10x8 edges, K=8, p=3 by default."""
    grid = KnotGrid.uniform(KNOT_LOW, KNOT_HIGH, num_segments, degree)
    return _draw_layer(make_rng(seed, STREAM_LAYER), in_dim, out_dim, grid)


def gen_model(widths: Sequence[int], seed: int, num_segments: int = SANITY_NUM_SEGMENTS,
              degree: int = SANITY_DEGREE) -> List[KanLayerSpec]:
    """Chain of random layers with the given widths, e.g. [78, 32, 16, 1]."""
    widths = [int(w) for w in widths]
    if len(widths) < 2 or any(w < 1 for w in widths):
        raise ConfigError(f"Model widths need at least two positive entries, got {widths}")
    grid = KnotGrid.uniform(KNOT_LOW, KNOT_HIGH, num_segments, degree)
    return [
        _draw_layer(make_rng(seed, STREAM_MODEL_LAYER + index), widths[index], widths[index + 1], grid)
        for index in range(len(widths) - 1)
    ]


def _domain(knots: Union[KnotGrid, Sequence[float]]):
    if isinstance(knots, KnotGrid):
        return knots.t0, knots.tK
    return float(knots[0]), float(knots[-1])


def gen_inputs(seed: int, n: int, knots: Union[KnotGrid, Sequence[float]], clip: bool = True,
               in_dim: int = SANITY_IN_DIM, stream: int = STREAM_EVAL) -> np.ndarray:
    """Standard-normal (n, in_dim) batch, optionally clamped into [t_0, t_K]."""
    if n < 1:
        raise ConfigError(f"Number of samples must be >= 1, got {n}")
    X = make_rng(seed, stream).standard_normal((int(n), int(in_dim)))
    if clip:
        t0, tK = _domain(knots)
        X = np.clip(X, t0, tK)
    return X


def gen_calibration(seed: int, knots: Union[KnotGrid, Sequence[float]], in_dim: int = SANITY_IN_DIM,
                    num_samples: int = NUM_CALIBRATION_SAMPLES, clip: bool = True) -> np.ndarray:
    """Calibration set drawn from its own stream."""
    return gen_inputs(seed, num_samples, knots, clip=clip, in_dim=in_dim, stream=STREAM_CALIBRATION)

