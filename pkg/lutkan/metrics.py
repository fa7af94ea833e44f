"""
Accuracy and memory accounting of compiled artifacts against the float model.
"""

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .artifact import EDGE_SCALAR_FIELDS, LutLayerArtifact, widen
from .errors import DimensionMismatchError
from .logging_config import get_structured_logger
from .lut_runtime import lut_edge_phi_batch, lut_model_forward_batch
from .models import KanLayerSpec, Tier
from .reports import EvalReport, MemoryBreakdown
from .spline_core import edge_phi_batch, model_forward_batch

structured_logger = get_structured_logger('metrics')


def _subset_errors(err: np.ndarray, selected: np.ndarray) -> Tuple[Optional[float], Optional[float], int]:
    values = err[selected]
    if values.size == 0:
        return None, None, 0
    return float(values.mean()), float(values.max()), int(values.size)


def eval_accuracy(layer: KanLayerSpec, artifact: LutLayerArtifact, X, seed: Optional[int] = None,
                  config: Optional[Dict] = None) -> EvalReport:
    """Edge-level MAE/MaxAbs of the artifact against the float layer.

    Each input coordinate x_i lands in exactly one subset, shared by the m
    edges it feeds: in-range ([t_0, t_K)), boundary (x == t_K admitted by
    closed mode) or OOB (m(x) == 0). Subsets without inputs report None.
    """
    if (layer.in_dim, layer.out_dim) != (artifact.in_dim, artifact.out_dim):
        raise DimensionMismatchError(
            f"Layer is {layer.in_dim}x{layer.out_dim} but artifact is {artifact.in_dim}x{artifact.out_dim}")
    X = np.asarray(X, dtype=np.float64)
    reference = edge_phi_batch(layer, X, Tier.OPTIMIZED)
    approx, inside = lut_edge_phi_batch(artifact, X, Tier.OPTIMIZED)
    err = np.abs(approx - reference)

    knots = widen(artifact.knots)
    t0, tK = knots[0], knots[-1]
    inrange = (X >= t0) & (X < tK)
    boundary = inside & (X == tK)
    oob = ~inside

    mae_in, max_in, n_in = _subset_errors(err, inrange)
    mae_oob, max_oob, n_oob = _subset_errors(err, oob)
    mae_b, max_b, n_b = _subset_errors(err, boundary)

    layer_err = np.abs(approx.sum(axis=1) - reference.sum(axis=1))
    report = EvalReport(
        mae_inrange=mae_in,
        maxabs_inrange=max_in,
        mae_oob=mae_oob,
        maxabs_oob=max_oob,
        oob_any_frac=float(oob.any(axis=1).mean()) if X.shape[0] else 0.0,
        n_samples=int(X.shape[0]),
        n_inrange_values=n_in,
        n_oob_values=n_oob,
        mae_boundary=mae_b,
        maxabs_boundary=max_b,
        n_boundary_values=n_b,
        boundary_frac=float(boundary.mean()) if boundary.size else 0.0,
        layer_mae=float(layer_err.mean()) if layer_err.size else None,
        layer_maxabs=float(layer_err.max()) if layer_err.size else None,
        config=dict(config or {}),
        seed=seed,
    )
    metrics = report.to_dict()
    metrics.pop('config')
    structured_logger.log_eval(metrics, report.config)
    return report


def eval_model_accuracy(layers: Sequence[KanLayerSpec], artifacts: Sequence[LutLayerArtifact], X,
                        seed: Optional[int] = None, config: Optional[Dict] = None) -> Tuple[List[EvalReport], Dict]:
    """Per-layer reports on reference activations, plus the chain's final-output error.

    Layer l is evaluated on the float model's activations entering it, so each
    report isolates that layer's compilation error.
    """
    if len(layers) != len(artifacts):
        raise DimensionMismatchError(f"{len(layers)} layers but {len(artifacts)} artifacts")
    reports = []
    activations = np.asarray(X, dtype=np.float64)
    for layer, artifact in zip(layers, artifacts):
        reports.append(eval_accuracy(layer, artifact, activations, seed=seed, config=config))
        activations = model_forward_batch([layer], activations, Tier.OPTIMIZED)
    approx, stats = lut_model_forward_batch(artifacts, X, Tier.OPTIMIZED)
    err = np.abs(approx - activations)
    chain = {
        'output_mae': float(err.mean()),
        'output_maxabs': float(err.max()),
        'layer_oob_any_frac': [s.oob_any_frac for s in stats],
    }
    return reports, chain


def memory_breakdown(artifact: LutLayerArtifact, layer: KanLayerSpec) -> MemoryBreakdown:
    """Exact byte counts of the stored arrays; float model = 4 bytes per coefficient and scalar."""
    edge_scalar_bytes = sum(
        getattr(artifact, name).nbytes for name in EDGE_SCALAR_FIELDS if getattr(artifact, name) is not None
    )
    return MemoryBreakdown(
        q_table_bytes=int(artifact.q_table.nbytes),
        scale_bytes=int(artifact.scale.nbytes),
        y_min_bytes=int(artifact.y_min.nbytes),
        knots_bytes=int(artifact.knots.nbytes),
        edge_scalar_bytes=int(edge_scalar_bytes),
        float_model_bytes=4 * layer.parameter_count,
    )


def model_memory_breakdown(artifacts: Sequence[LutLayerArtifact], layers: Sequence[KanLayerSpec]) -> MemoryBreakdown:
    """Sum of per-layer breakdowns."""
    total = None
    for artifact, layer in zip(artifacts, layers):
        part = memory_breakdown(artifact, layer)
        total = part if total is None else total.merge(part)
    if total is None:
        return MemoryBreakdown(0, 0, 0, 0, 0, 0)
    return total
