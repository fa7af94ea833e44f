"""
Reference evaluation of B-spline KAN layers.

Two tiers compute the same thing. The scalar tier loops in plain Python over
samples and edges; the optimized tier runs exactly that per-edge evaluation
vectorized over samples and edges with numpy. Both evaluate every edge's
spline on its own, so the optimized tier is the honest spline baseline for
benchmarks: only the loop structure differs from the scalar tier.
"""

import math
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from scipy.special import expit

from .errors import ChainError, DimensionMismatchError, UnsupportedBaseError
from .models import EdgeParams, KanLayerSpec, KnotGrid, Tier, parse_enum

# Upper bound on elements of the largest temporary in the optimized tier
_CHUNK_ELEMENTS = 1 << 21


def _silu(x: float) -> float:
    if x >= 0.0:
        return x / (1.0 + math.exp(-x))
    z = math.exp(x)
    return x * z / (1.0 + z)


def _silu_array(x: np.ndarray) -> np.ndarray:
    return x * expit(x)


_BASE_FUNCTIONS: Dict[str, Tuple[Callable[[float], float], Callable[[np.ndarray], np.ndarray]]] = {
    'silu': (_silu, _silu_array),
}


def register_base_fn(kind: str, scalar_fn: Callable[[float], float],
                     array_fn: Callable[[np.ndarray], np.ndarray]) -> None:
    """Register a base nonlinearity under ``kind`` (scalar and elementwise array forms)."""
    _BASE_FUNCTIONS[kind] = (scalar_fn, array_fn)


def base_kinds() -> List[str]:
    """Identifiers of every registered base function."""
    return sorted(_BASE_FUNCTIONS)


def _lookup_base(kind: str):
    try:
        return _BASE_FUNCTIONS[kind]
    except KeyError:
        raise UnsupportedBaseError(
            f"Unsupported base function '{kind}' (registered: {', '.join(sorted(_BASE_FUNCTIONS))})"
        ) from None


def base_fn(kind: str, x: float) -> float:
    """Fixed base nonlinearity b(x)."""
    return _lookup_base(kind)[0](float(x))


def base_fn_array(kind: str, x: np.ndarray) -> np.ndarray:
    """Elementwise b(x) over an array."""
    return _lookup_base(kind)[1](x)


def basis_values(grid: KnotGrid, x: float) -> List[float]:
    """All R basis values B_{r,p}(x) by the Cox-de Boor recursion over the extended knots.

    Zero-width spans contribute 0 (the 0/0 = 0 convention) through an explicit guard.
    """
    t = grid.extended_knots
    n_intervals = len(t) - 1
    B = [1.0 if t[r] <= x < t[r + 1] else 0.0 for r in range(n_intervals)]
    for q in range(1, grid.degree + 1):
        raised = []
        for r in range(n_intervals - q):
            left_den = t[r + q] - t[r]
            right_den = t[r + q + 1] - t[r + 1]
            left = 0.0 if left_den == 0.0 else (x - t[r]) / left_den * B[r]
            right = 0.0 if right_den == 0.0 else (t[r + q + 1] - x) / right_den * B[r + 1]
            raised.append(left + right)
        B = raised
    return B


def _safe_divide(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros(np.broadcast_shapes(num.shape, den.shape))
    np.divide(num, den, out=out, where=den != 0.0)
    return out


def basis_matrix(grid: KnotGrid, x: np.ndarray) -> np.ndarray:
    """Vectorized ``basis_values``: returns an array of shape ``x.shape + (R,)``."""
    t = grid.extended
    x = np.asarray(x, dtype=np.float64)[..., None]
    B = ((t[:-1] <= x) & (x < t[1:])).astype(np.float64)
    for q in range(1, grid.degree + 1):
        n = B.shape[-1] - 1
        t_r, t_r1 = t[:n], t[1:n + 1]
        t_rq, t_rq1 = t[q:q + n], t[q + 1:q + 1 + n]
        left = _safe_divide(x - t_r, t_rq - t_r) * B[..., :-1]
        right = _safe_divide(t_rq1 - x, t_rq1 - t_r1) * B[..., 1:]
        B = left + right
    return B


def eval_spline(edge: EdgeParams, grid: KnotGrid, x: float) -> float:
    """s(x) = sum_r c_r B_{r,p}(x)."""
    return sum(c * b for c, b in zip(edge.coeffs, basis_values(grid, x)))


def eval_edge_phi(edge: EdgeParams, grid: KnotGrid, base_kind: str, x: float) -> float:
    """phi(x) = s_out * (s_base * b(x) + s_spline * s(x))."""
    return edge.out_scale * (edge.base_scale * base_fn(base_kind, x)
                             + edge.spline_scale * eval_spline(edge, grid, x))


def _check_vector(x: Sequence[float], dim: int) -> List[float]:
    values = [float(v) for v in x]
    if len(values) != dim:
        raise DimensionMismatchError(f"Expected input of length {dim}, got {len(values)}")
    return values


def _as_batch(X, dim: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != dim:
        raise DimensionMismatchError(f"Expected a batch of shape (n, {dim}), got {X.shape}")
    return X


def layer_forward(layer: KanLayerSpec, x: Sequence[float]) -> List[float]:
    """y_j = sum_i phi_ij(x_i)."""
    x = _check_vector(x, layer.in_dim)
    y = []
    for j in range(layer.out_dim):
        total = 0.0
        for i in range(layer.in_dim):
            total += eval_edge_phi(layer.edge(i, j), layer.grid, layer.base_kind, x[i])
        y.append(total)
    return y


def _edge_phi_optimized(layer: KanLayerSpec, X: np.ndarray) -> np.ndarray:
    n, d = X.shape
    m = layer.out_dim
    _lookup_base(layer.base_kind)
    per_row = layer.num_edges * (len(layer.grid.extended) - 1)
    rows = max(1, _CHUNK_ELEMENTS // per_row)
    out = np.empty((n, d, m))
    for start in range(0, n, rows):
        xe = np.repeat(X[start:start + rows], m, axis=1)
        s = (basis_matrix(layer.grid, xe) * layer.coeff_matrix).sum(axis=-1)
        phi = layer.out_scales * (layer.base_scales * base_fn_array(layer.base_kind, xe)
                                  + layer.spline_scales * s)
        out[start:start + rows] = phi.reshape(-1, d, m)
    return out


def edge_phi_batch(layer: KanLayerSpec, X, tier=Tier.OPTIMIZED) -> np.ndarray:
    """Per-edge outputs phi_ij(X[n, i]) as an array of shape (n, d, m)."""
    tier = parse_enum(Tier, tier, 'tier')
    X = _as_batch(X, layer.in_dim)
    if tier == Tier.OPTIMIZED:
        return _edge_phi_optimized(layer, X)
    n, d, m = X.shape[0], layer.in_dim, layer.out_dim
    out = np.empty((n, d, m))
    for row in range(n):
        for i in range(d):
            x = float(X[row, i])
            for j in range(m):
                out[row, i, j] = eval_edge_phi(layer.edge(i, j), layer.grid, layer.base_kind, x)
    return out


def layer_forward_batch(layer: KanLayerSpec, X, tier=Tier.OPTIMIZED) -> np.ndarray:
    """Batched ``layer_forward``; returns an (n, m) array."""
    tier = parse_enum(Tier, tier, 'tier')
    X = _as_batch(X, layer.in_dim)
    if tier == Tier.SCALAR:
        return np.array([layer_forward(layer, row) for row in X.tolist()], dtype=np.float64).reshape(-1, layer.out_dim)
    return _edge_phi_optimized(layer, X).sum(axis=1)


def check_chain(dims: Sequence[Tuple[int, int]]) -> None:
    """Validate that (in_dim, out_dim) pairs connect end to end."""
    if not dims:
        raise ChainError("Model chain is empty")
    for index in range(len(dims) - 1):
        if dims[index][1] != dims[index + 1][0]:
            raise ChainError(
                f"Layer {index} outputs {dims[index][1]} values but layer {index + 1} expects {dims[index + 1][0]}"
            )


def model_forward(layers: Sequence[KanLayerSpec], x: Sequence[float]) -> List[float]:
    """Reference forward through a chain of layers."""
    check_chain([(layer.in_dim, layer.out_dim) for layer in layers])
    values = list(x)
    for layer in layers:
        values = layer_forward(layer, values)
    return values


def model_forward_batch(layers: Sequence[KanLayerSpec], X, tier=Tier.OPTIMIZED) -> np.ndarray:
    """Batched reference forward through a chain of layers."""
    check_chain([(layer.in_dim, layer.out_dim) for layer in layers])
    values = X
    for layer in layers:
        values = layer_forward_batch(layer, values, tier)
    return values
