"""
Compile KAN layers into segment-wise, per-edge quantized lookup tables.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .artifact import LutLayerArtifact, widen
from .errors import ConfigError, LayerCompileError, NonFiniteInputError
from .logging_config import TimingContext, get_logger, get_structured_logger
from .models import (
    KanLayerSpec, KnotGrid, OobConfig, QuantConfig, Scheme, ValueRepr, parse_enum,
)
from .spline_core import base_fn_array, basis_matrix

logger = get_logger('compiler')
structured_logger = get_structured_logger('compiler')

QMAX_SYMMETRIC = 127
QMAX_ASYMMETRIC = 255


@dataclass(frozen=True, eq=False)
class FloatLut:
    """Float table values v[e, k, l] sampled at x[k, l] = t_k + l * (t_{k+1} - t_k) / L.

    t_k are the stored (float32) breakpoints, the domain the runtime sees.
    """
    values: np.ndarray
    sample_points: np.ndarray


@dataclass(frozen=True, eq=False)
class QuantizedLut:
    """Integer table with per-segment dequantization parameters (v_hat = y_min + scale * q)."""
    q: np.ndarray
    scale: np.ndarray
    y_min: np.ndarray


def sample_segment_points(grid: KnotGrid, L: int) -> np.ndarray:
    """Half-open sample points of every segment, shape (K, L); t_{k+1} is never sampled."""
    if int(L) != L or L < 2:
        raise ConfigError(f"L must be an integer >= 2, got {L}")
    t = np.asarray(grid.breakpoints, dtype=np.float64)
    delta = (t[1:] - t[:-1]) / L
    return t[:-1, None] + np.arange(int(L))[None, :] * delta[:, None]


def stored_knots(grid: KnotGrid) -> np.ndarray:
    """Breakpoints as an artifact stores them (float32)."""
    knots = np.asarray(grid.breakpoints, dtype=np.float32)
    if np.any(np.diff(knots) <= 0):
        raise ConfigError(f"Breakpoints {grid.breakpoints} are not strictly increasing in float32")
    return knots


def storage_grid(grid: KnotGrid) -> KnotGrid:
    """The grid with float32-rounded breakpoints; tables are sampled on it."""
    return KnotGrid(tuple(stored_knots(grid).astype(np.float64).tolist()), grid.degree)


def build_float_lut(layer: KanLayerSpec, cfg: QuantConfig) -> FloatLut:
    """Sample phi (or only the spline branch) of every edge at the segment sample points."""
    points = sample_segment_points(storage_grid(layer.grid), cfg.L)
    flat = points.reshape(-1)
    # einsum without optimize keeps a fixed, BLAS-free reduction order
    spline = np.einsum('pr,er->ep', basis_matrix(layer.grid, flat), layer.coeff_matrix)
    if cfg.value_repr == ValueRepr.PHI:
        base = base_fn_array(layer.base_kind, flat)
        values = layer.out_scales[:, None] * (layer.base_scales[:, None] * base[None, :]
                                              + layer.spline_scales[:, None] * spline)
    else:
        values = spline
    K, L = points.shape
    return FloatLut(values=values.reshape(layer.num_edges, K, L), sample_points=points)


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round to nearest integer, ties away from zero."""
    a = np.abs(x)
    f = np.floor(a)
    return np.copysign(f + (a - f >= 0.5), x)


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros(np.broadcast_shapes(num.shape, den.shape))
    np.divide(num, den, out=out, where=den != 0.0)
    return out


def quantize_table(values: np.ndarray, scheme: Scheme,
                   param_dtype=np.float64) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Quantize every segment (last axis) of ``values``.

    Returns ``(q, scale, y_min)`` with q as int8 (symmetric) or uint8
    (asymmetric) and parameters in ``param_dtype``. Degenerate segments
    (all zero, or constant) get scale 0 and q 0, so they dequantize to y_min.
    When parameters are narrower than float64, each entry is moved at most one
    step so that dequantization with the stored parameters stays within half a
    step of the value.
    """
    scheme = parse_enum(Scheme, scheme, 'scheme')
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise NonFiniteInputError("Cannot quantize non-finite table values")

    if scheme == Scheme.SYMMETRIC:
        qmin, qmax, qdtype = -QMAX_SYMMETRIC, QMAX_SYMMETRIC, np.int8
        vmax = np.max(np.abs(values), axis=-1)
        scale = vmax / QMAX_SYMMETRIC
        y_min = np.zeros_like(scale)
        # Normalizing by the range first keeps exact ratios such as 0.5 exact
        q = round_half_away(_ratio(values, vmax[..., None]) * QMAX_SYMMETRIC)
    else:
        qmin, qmax, qdtype = 0, QMAX_ASYMMETRIC, np.uint8
        y_min = np.min(values, axis=-1)
        span = np.max(values, axis=-1) - y_min
        scale = span / QMAX_ASYMMETRIC
        q = round_half_away(_ratio(values - y_min[..., None], span[..., None]) * QMAX_ASYMMETRIC)
    q = np.clip(q, qmin, qmax)

    param_dtype = np.dtype(param_dtype)
    stored_scale = scale.astype(param_dtype)
    stored_y_min = y_min.astype(param_dtype)
    if param_dtype != np.float64:
        a = widen(stored_scale)[..., None]
        b = widen(stored_y_min)[..., None]
        err = b + a * q - values
        step = np.where(err > a / 2, -1.0, np.where(err < -a / 2, 1.0, 0.0))
        q = np.where(a > 0, np.clip(q + step, qmin, qmax), 0.0)
    return q.astype(qdtype), stored_scale, stored_y_min


def quantize_segment_symmetric(values: Sequence[float]) -> Tuple[np.ndarray, float, float]:
    """Symmetric int8 quantization of one segment: scale = max|v| / 127, y_min = 0."""
    q, scale, _ = quantize_table(np.asarray(values, dtype=np.float64)[None, :], Scheme.SYMMETRIC)
    return q[0], float(scale[0]), 0.0


def quantize_segment_asymmetric(values: Sequence[float]) -> Tuple[np.ndarray, float, float]:
    """Asymmetric uint8 quantization of one segment: y_min = min v, scale = (max - min) / 255."""
    q, scale, y_min = quantize_table(np.asarray(values, dtype=np.float64)[None, :], Scheme.ASYMMETRIC)
    return q[0], float(scale[0]), float(y_min[0])


def quantize_float_lut(float_lut: FloatLut, cfg: QuantConfig) -> QuantizedLut:
    q, scale, y_min = quantize_table(float_lut.values, cfg.scheme, cfg.numpy_param_dtype)
    return QuantizedLut(q=q, scale=scale, y_min=y_min)


def dequantize(q: np.ndarray, scale: np.ndarray, y_min: np.ndarray) -> np.ndarray:
    """v_hat = y_min + scale * q in float64, float16 parameters widened through float32."""
    a = widen(scale)
    b = widen(y_min)
    return b[..., None] + a[..., None] * np.asarray(q, dtype=np.float64)


def dequantize_table(artifact: LutLayerArtifact) -> np.ndarray:
    """Dequantized (E, K, L) table of an artifact."""
    return dequantize(artifact.q_table, artifact.scale, artifact.y_min)


def _edge_scalars(layer: KanLayerSpec, cfg: QuantConfig) -> dict:
    if cfg.value_repr != ValueRepr.SPLINE_COMPONENT:
        return {}
    return {
        'base_kind': layer.base_kind,
        'edge_base_scale': layer.base_scales.astype(np.float32),
        'edge_spline_scale': layer.spline_scales.astype(np.float32),
        'edge_out_scale': layer.out_scales.astype(np.float32),
    }


def compile_layer(layer: KanLayerSpec, cfg: QuantConfig, oob: OobConfig,
                  layer_index: Optional[int] = None) -> LutLayerArtifact:
    """Compile one layer into a LutLayerArtifact."""
    with TimingContext(structured_logger, 'compile_layer',
                       {'layer_index': layer_index, 'num_edges': layer.num_edges, 'L': cfg.L}):
        float_lut = build_float_lut(layer, cfg)
        qlut = quantize_float_lut(float_lut, cfg)
        artifact = LutLayerArtifact(
            knots=stored_knots(layer.grid),
            q_table=qlut.q,
            scale=qlut.scale,
            y_min=qlut.y_min,
            in_dim=layer.in_dim,
            out_dim=layer.out_dim,
            scheme=cfg.scheme,
            value_repr=cfg.value_repr,
            boundary_mode=oob.boundary_mode,
            oob_policy=oob.oob_policy,
            interp=cfg.interp,
            param_dtype=cfg.param_dtype,
            **_edge_scalars(layer, cfg),
        )
    structured_logger.log_compile(layer_index, {**cfg.to_dict(), **oob.to_dict()},
                                  artifact.num_edges, artifact.num_segments, artifact.q_table.nbytes)
    return artifact


def compile_model(layers: Sequence[KanLayerSpec], cfg: QuantConfig, oob: OobConfig) -> List[LutLayerArtifact]:
    """Compile every layer independently, preserving order."""
    artifacts = []
    for index, layer in enumerate(layers):
        try:
            artifacts.append(compile_layer(layer, cfg, oob, layer_index=index))
        except Exception as e:
            structured_logger.log_compile(index, {**cfg.to_dict(), **oob.to_dict()},
                                          layer.num_edges, layer.grid.num_segments, 0, error=str(e))
            raise LayerCompileError(index, e) from e
    logger.info(f"Compiled {len(artifacts)} layer(s) at L={cfg.L}, {cfg.scheme.value}/{cfg.dtype.value}")
    return artifacts


def float_debug_artifact(layer: KanLayerSpec, cfg: QuantConfig, oob: OobConfig) -> LutLayerArtifact:
    """Artifact whose table holds the unquantized float LUT (unit scale, zero offset).

    Runs through the same runtime code as quantized artifacts but can not be saved.
    """
    float_lut = build_float_lut(layer, cfg)
    E, K, _ = float_lut.values.shape
    return LutLayerArtifact(
        knots=stored_knots(layer.grid),
        q_table=float_lut.values.astype(np.float64),
        scale=np.ones((E, K), dtype=cfg.numpy_param_dtype),
        y_min=np.zeros((E, K), dtype=cfg.numpy_param_dtype),
        in_dim=layer.in_dim,
        out_dim=layer.out_dim,
        scheme=cfg.scheme,
        value_repr=cfg.value_repr,
        boundary_mode=oob.boundary_mode,
        oob_policy=oob.oob_policy,
        interp=cfg.interp,
        param_dtype=cfg.param_dtype,
        quantized=False,
        **_edge_scalars(layer, cfg),
    )
