"""
LUT inference.

Every edge evaluation follows the same five steps: clip x into the knot
domain, find its segment by binary search, map it onto the segment's L table
indices, dequantize the two neighbouring entries and interpolate linearly.
The boundary mode decides whether x == t_K is inside the domain and the OOB
policy decides what an out-of-domain input returns.

Arithmetic is float64 in both tiers. Stored knots and parameters are
widened with ``artifact.widen``.
"""

import bisect
import math
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .artifact import LutLayerArtifact, widen
from .errors import DimensionMismatchError, EdgeIndexError, NonFiniteInputError
from .models import BoundaryMode, OobPolicy, Tier, ValueRepr, parse_enum
from .reports import OobStats
from .spline_core import base_fn, base_fn_array, check_chain

_CHUNK_ELEMENTS = 1 << 20


def _upper_bound(t_K: float, boundary_mode: BoundaryMode) -> float:
    if boundary_mode == BoundaryMode.HALF_OPEN:
        return math.nextafter(t_K, -math.inf)
    return t_K


def safe_clip(x: float, knots: Sequence[float], boundary_mode=BoundaryMode.CLOSED) -> float:
    """Clamp x into [t_0, t_K*]; t_K* is the largest float64 below t_K in half_open mode."""
    boundary_mode = parse_enum(BoundaryMode, boundary_mode, 'boundary_mode')
    upper = _upper_bound(float(knots[-1]), boundary_mode)
    return min(max(float(x), float(knots[0])), upper)


def in_domain(x: float, knots: Sequence[float], boundary_mode=BoundaryMode.CLOSED) -> bool:
    """m(x): t_0 <= x < t_K (half_open) or t_0 <= x <= t_K (closed)."""
    boundary_mode = parse_enum(BoundaryMode, boundary_mode, 'boundary_mode')
    t0, tK = float(knots[0]), float(knots[-1])
    if boundary_mode == BoundaryMode.HALF_OPEN:
        return t0 <= x < tK
    return t0 <= x <= tK


def segment_index(knots: Sequence[float], x: float) -> int:
    """searchsorted(knots, x, 'right') - 1, clamped to [0, K - 1]."""
    k = bisect.bisect_right(knots, x) - 1
    return min(max(k, 0), len(knots) - 2)


def interp_coords(knots: Sequence[float], k: int, x: float, L: int) -> Tuple[int, int, float]:
    """Table indices (l0, l1) and weight w of x inside segment k."""
    t_k, t_k1 = float(knots[k]), float(knots[k + 1])
    u = (x - t_k) / (t_k1 - t_k)
    z = u * (L - 1)
    l0 = min(int(math.floor(z)), L - 1)
    l1 = min(l0 + 1, L - 1)
    return l0, l1, z - l0


def _scalar_cache(artifact: LutLayerArtifact) -> Dict:
    cache = artifact._cache.get('scalar')
    if cache is None:
        cache = {
            'knots': widen(artifact.knots).tolist(),
            'q': artifact.q_table.tolist(),
            'scale': widen(artifact.scale).tolist(),
            'y_min': widen(artifact.y_min).tolist(),
        }
        if artifact.value_repr == ValueRepr.SPLINE_COMPONENT:
            cache['base_scale'] = widen(artifact.edge_base_scale).tolist()
            cache['spline_scale'] = widen(artifact.edge_spline_scale).tolist()
            cache['out_scale'] = widen(artifact.edge_out_scale).tolist()
        artifact._cache['scalar'] = cache
    return cache


def _check_finite_scalar(x: float) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise NonFiniteInputError(f"LUT inference requires finite inputs, got {x}")
    return x


def lut_eval_value(artifact: LutLayerArtifact, e: int, x: float) -> Tuple[float, bool]:
    """Table value for edge e at x, and whether x was out of domain."""
    if not 0 <= e < artifact.num_edges:
        raise EdgeIndexError(f"Edge index {e} out of range [0, {artifact.num_edges})")
    x = _check_finite_scalar(x)
    cache = _scalar_cache(artifact)
    knots = cache['knots']

    inside = in_domain(x, knots, artifact.boundary_mode)
    if not inside and artifact.oob_policy == OobPolicy.ZERO_SPLINE:
        return 0.0, True

    xc = safe_clip(x, knots, artifact.boundary_mode)
    k = segment_index(knots, xc)
    l0, l1, w = interp_coords(knots, k, xc, artifact.L)
    a = cache['scale'][e][k]
    b = cache['y_min'][e][k]
    row = cache['q'][e][k]
    v0 = b + a * row[l0]
    v1 = b + a * row[l1]
    return (1.0 - w) * v0 + w * v1, not inside


def lut_eval_phi(artifact: LutLayerArtifact, e: int, x: float) -> float:
    """Edge output: the table value itself (phi), or the analytic base branch plus the table spline."""
    v, _ = lut_eval_value(artifact, e, x)
    if artifact.value_repr == ValueRepr.PHI:
        return v
    cache = _scalar_cache(artifact)
    return cache['out_scale'][e] * (cache['base_scale'][e] * base_fn(artifact.base_kind, x)
                                    + cache['spline_scale'][e] * v)


def lut_layer_forward(artifact: LutLayerArtifact, x: Sequence[float]) -> Tuple[List[float], OobStats]:
    """y_j = sum_i phi_hat_ij(x_i), plus OOB counts for this sample."""
    x = [float(v) for v in x]
    if len(x) != artifact.in_dim:
        raise DimensionMismatchError(f"Expected input of length {artifact.in_dim}, got {len(x)}")
    m = artifact.out_dim
    knots = _scalar_cache(artifact)['knots']
    y = [0.0] * m
    n_oob = 0
    for i, xi in enumerate(x):
        xi = _check_finite_scalar(xi)
        if not in_domain(xi, knots, artifact.boundary_mode):
            n_oob += 1
        for j in range(m):
            y[j] += lut_eval_phi(artifact, i * m + j, xi)
    stats = OobStats(n_samples=1, n_oob_samples=int(n_oob > 0), n_inputs=len(x), n_oob_inputs=n_oob)
    return y, stats


def _vector_cache(artifact: LutLayerArtifact) -> Dict:
    cache = artifact._cache.get('vector')
    if cache is None:
        knots = widen(artifact.knots)
        cache = {
            'knots': knots,
            't0': float(knots[0]),
            'tK': float(knots[-1]),
            'upper': _upper_bound(float(knots[-1]), artifact.boundary_mode),
            'q': artifact.q_table.reshape(-1),
            'scale': widen(artifact.scale).reshape(-1),
            'y_min': widen(artifact.y_min).reshape(-1),
            'edge_ids': np.arange(artifact.num_edges, dtype=np.intp),
        }
        if artifact.value_repr == ValueRepr.SPLINE_COMPONENT:
            cache['base_scale'] = widen(artifact.edge_base_scale)
            cache['spline_scale'] = widen(artifact.edge_spline_scale)
            cache['out_scale'] = widen(artifact.edge_out_scale)
        artifact._cache['vector'] = cache
    return cache


def _as_batch(artifact: LutLayerArtifact, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != artifact.in_dim:
        raise DimensionMismatchError(f"Expected a batch of shape (n, {artifact.in_dim}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInputError("LUT inference requires finite inputs")
    return X


def _domain_mask(cache: Dict, X: np.ndarray, boundary_mode: BoundaryMode) -> np.ndarray:
    if boundary_mode == BoundaryMode.HALF_OPEN:
        return (X >= cache['t0']) & (X < cache['tK'])
    return (X >= cache['t0']) & (X <= cache['tK'])


def _edge_values_optimized(artifact: LutLayerArtifact, cache: Dict, xe: np.ndarray,
                           inside: np.ndarray) -> np.ndarray:
    """Steps 1-5 for every (sample, edge) pair of an (n, E) input block."""
    knots = cache['knots']
    K, L = artifact.num_segments, artifact.L
    xc = np.minimum(np.maximum(xe, cache['t0']), cache['upper'])
    k = np.clip(np.searchsorted(knots, xc, side='right') - 1, 0, K - 1)
    t_k = knots[k]
    u = (xc - t_k) / (knots[k + 1] - t_k)
    z = u * (L - 1)
    l0 = np.minimum(np.floor(z).astype(np.intp), L - 1)
    l1 = np.minimum(l0 + 1, L - 1)
    w = z - l0
    seg = cache['edge_ids'] * K + k
    a = cache['scale'][seg]
    b = cache['y_min'][seg]
    row = seg * L
    v0 = b + a * cache['q'][row + l0]
    v1 = b + a * cache['q'][row + l1]
    v = (1.0 - w) * v0 + w * v1
    if artifact.oob_policy == OobPolicy.ZERO_SPLINE:
        v = np.where(inside, v, 0.0)
    return v


def _edge_phi_optimized(artifact: LutLayerArtifact, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    cache = _vector_cache(artifact)
    n, d = X.shape
    m = artifact.out_dim
    mask = _domain_mask(cache, X, artifact.boundary_mode)
    out = np.empty((n, d, m))
    rows = max(1, _CHUNK_ELEMENTS // artifact.num_edges)
    for start in range(0, n, rows):
        xe = np.repeat(X[start:start + rows], m, axis=1)
        inside = np.repeat(mask[start:start + rows], m, axis=1)
        v = _edge_values_optimized(artifact, cache, xe, inside)
        if artifact.value_repr == ValueRepr.SPLINE_COMPONENT:
            v = cache['out_scale'] * (cache['base_scale'] * base_fn_array(artifact.base_kind, xe)
                                      + cache['spline_scale'] * v)
        out[start:start + rows] = v.reshape(-1, d, m)
    return out, mask


def _stats_from_mask(mask: np.ndarray) -> OobStats:
    oob = ~mask
    return OobStats(
        n_samples=mask.shape[0],
        n_oob_samples=int(np.count_nonzero(oob.any(axis=1))),
        n_inputs=mask.size,
        n_oob_inputs=int(np.count_nonzero(oob)),
    )


def lut_edge_phi_batch(artifact: LutLayerArtifact, X, tier=Tier.OPTIMIZED) -> Tuple[np.ndarray, np.ndarray]:
    """Per-edge outputs of shape (n, d, m) and the (n, d) in-domain mask."""
    tier = parse_enum(Tier, tier, 'tier')
    X = _as_batch(artifact, X)
    if tier == Tier.OPTIMIZED:
        return _edge_phi_optimized(artifact, X)
    n, d, m = X.shape[0], artifact.in_dim, artifact.out_dim
    knots = _scalar_cache(artifact)['knots']
    out = np.empty((n, d, m))
    mask = np.empty((n, d), dtype=bool)
    for row, values in enumerate(X.tolist()):
        for i, x in enumerate(values):
            mask[row, i] = in_domain(x, knots, artifact.boundary_mode)
            for j in range(m):
                out[row, i, j] = lut_eval_phi(artifact, i * m + j, x)
    return out, mask


def lut_layer_forward_batch(artifact: LutLayerArtifact, X, tier=Tier.OPTIMIZED) -> Tuple[np.ndarray, OobStats]:
    """Batched ``lut_layer_forward``; returns (n, m) outputs and the batch's OOB counts."""
    tier = parse_enum(Tier, tier, 'tier')
    X = _as_batch(artifact, X)
    if tier == Tier.OPTIMIZED:
        phi, mask = _edge_phi_optimized(artifact, X)
        return phi.sum(axis=1), _stats_from_mask(mask)
    Y = np.empty((X.shape[0], artifact.out_dim))
    stats = OobStats()
    for row, values in enumerate(X.tolist()):
        Y[row], row_stats = lut_layer_forward(artifact, values)
        stats = stats.merge(row_stats)
    return Y, stats


def _check_artifact_chain(artifacts: Sequence[LutLayerArtifact]) -> None:
    check_chain([(a.in_dim, a.out_dim) for a in artifacts])


def lut_model_forward(artifacts: Sequence[LutLayerArtifact], x: Sequence[float]) -> List[float]:
    """Apply a chain of compiled layers; activations feed the next layer's OOB logic unchanged."""
    _check_artifact_chain(artifacts)
    values = list(x)
    for artifact in artifacts:
        values, _ = lut_layer_forward(artifact, values)
    return values


def lut_model_forward_batch(artifacts: Sequence[LutLayerArtifact], X,
                            tier=Tier.OPTIMIZED) -> Tuple[np.ndarray, List[OobStats]]:
    """Batched chain forward with per-layer OOB counts."""
    _check_artifact_chain(artifacts)
    values = X
    stats = []
    for artifact in artifacts:
        values, layer_stats = lut_layer_forward_batch(artifact, values, tier)
        stats.append(layer_stats)
    return values, stats
