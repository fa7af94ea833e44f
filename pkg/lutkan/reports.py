"""
Report records produced by evaluation, benchmarking and sweeps.

Every record converts to and from a plain dictionary with stable field names.
Metrics that do not apply (for example OOB error when no input is out of
domain) are stored as None and never zero-filled.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional


def _opt_float(value) -> Optional[float]:
    return None if value is None else float(value)


@dataclass(frozen=True)
class OobStats:
    """Out-of-domain accounting; one input is one (sample, coordinate) pair."""

    n_samples: int = 0
    n_oob_samples: int = 0
    n_inputs: int = 0
    n_oob_inputs: int = 0

    @property
    def oob_any_frac(self) -> float:
        """Fraction of samples with at least one out-of-domain coordinate."""
        return self.n_oob_samples / self.n_samples if self.n_samples else 0.0

    @property
    def oob_input_frac(self) -> float:
        return self.n_oob_inputs / self.n_inputs if self.n_inputs else 0.0

    def merge(self, other: 'OobStats') -> 'OobStats':
        """Accumulate counts over more samples of the same layer."""
        return OobStats(
            n_samples=self.n_samples + other.n_samples,
            n_oob_samples=self.n_oob_samples + other.n_oob_samples,
            n_inputs=self.n_inputs + other.n_inputs,
            n_oob_inputs=self.n_oob_inputs + other.n_oob_inputs,
        )

    def to_dict(self) -> Dict:
        return {
            'n_samples': self.n_samples,
            'n_oob_samples': self.n_oob_samples,
            'n_inputs': self.n_inputs,
            'n_oob_inputs': self.n_oob_inputs,
            'oob_any_frac': self.oob_any_frac,
            'oob_input_frac': self.oob_input_frac,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'OobStats':
        return cls(
            n_samples=int(data['n_samples']),
            n_oob_samples=int(data['n_oob_samples']),
            n_inputs=int(data['n_inputs']),
            n_oob_inputs=int(data['n_oob_inputs']),
        )


@dataclass(frozen=True)
class EvalReport:
    """Edge-level accuracy split into in-range, boundary and out-of-domain subsets.

    In-range inputs lie in [t_0, t_K). Boundary inputs equal t_K exactly and
    are admitted by closed mode; half_open mode counts them as OOB instead.
    """

    mae_inrange: Optional[float]
    maxabs_inrange: Optional[float]
    mae_oob: Optional[float]
    maxabs_oob: Optional[float]
    oob_any_frac: float
    n_samples: int
    n_inrange_values: int = 0
    n_oob_values: int = 0
    mae_boundary: Optional[float] = None
    maxabs_boundary: Optional[float] = None
    n_boundary_values: int = 0
    boundary_frac: float = 0.0
    layer_mae: Optional[float] = None
    layer_maxabs: Optional[float] = None
    config: Dict = field(default_factory=dict)
    seed: Optional[int] = None

    @property
    def has_oob(self) -> bool:
        return self.n_oob_values > 0

    def to_dict(self) -> Dict:
        return {
            'mae_inrange': self.mae_inrange,
            'maxabs_inrange': self.maxabs_inrange,
            'mae_oob': self.mae_oob,
            'maxabs_oob': self.maxabs_oob,
            'mae_boundary': self.mae_boundary,
            'maxabs_boundary': self.maxabs_boundary,
            'oob_any_frac': self.oob_any_frac,
            'boundary_frac': self.boundary_frac,
            'n_samples': self.n_samples,
            'n_inrange_values': self.n_inrange_values,
            'n_oob_values': self.n_oob_values,
            'n_boundary_values': self.n_boundary_values,
            'layer_mae': self.layer_mae,
            'layer_maxabs': self.layer_maxabs,
            'config': dict(self.config),
            'seed': self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'EvalReport':
        return cls(
            mae_inrange=_opt_float(data.get('mae_inrange')),
            maxabs_inrange=_opt_float(data.get('maxabs_inrange')),
            mae_oob=_opt_float(data.get('mae_oob')),
            maxabs_oob=_opt_float(data.get('maxabs_oob')),
            oob_any_frac=float(data['oob_any_frac']),
            n_samples=int(data['n_samples']),
            n_inrange_values=int(data.get('n_inrange_values', 0)),
            n_oob_values=int(data.get('n_oob_values', 0)),
            mae_boundary=_opt_float(data.get('mae_boundary')),
            maxabs_boundary=_opt_float(data.get('maxabs_boundary')),
            n_boundary_values=int(data.get('n_boundary_values', 0)),
            boundary_frac=float(data.get('boundary_frac', 0.0)),
            layer_mae=_opt_float(data.get('layer_mae')),
            layer_maxabs=_opt_float(data.get('layer_maxabs')),
            config=dict(data.get('config') or {}),
            seed=None if data.get('seed') is None else int(data['seed']),
        )


@dataclass(frozen=True)
class MemoryBreakdown:
    """Exact byte counts of a compiled artifact against its float model."""

    q_table_bytes: int
    scale_bytes: int
    y_min_bytes: int
    knots_bytes: int
    edge_scalar_bytes: int
    float_model_bytes: int

    @property
    def total(self) -> int:
        return self.q_table_bytes + self.scale_bytes + self.y_min_bytes + self.knots_bytes + self.edge_scalar_bytes

    @property
    def overhead_ratio(self) -> float:
        return self.total / self.float_model_bytes if self.float_model_bytes else float('nan')

    @property
    def q_table_fraction(self) -> float:
        return self.q_table_bytes / self.total if self.total else 0.0

    def to_dict(self) -> Dict:
        return {
            'q_table_bytes': self.q_table_bytes,
            'scale_bytes': self.scale_bytes,
            'y_min_bytes': self.y_min_bytes,
            'knots_bytes': self.knots_bytes,
            'edge_scalar_bytes': self.edge_scalar_bytes,
            'total': self.total,
            'float_model_bytes': self.float_model_bytes,
            'overhead_ratio': self.overhead_ratio,
            'q_table_fraction': self.q_table_fraction,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'MemoryBreakdown':
        return cls(
            q_table_bytes=int(data['q_table_bytes']),
            scale_bytes=int(data['scale_bytes']),
            y_min_bytes=int(data['y_min_bytes']),
            knots_bytes=int(data['knots_bytes']),
            edge_scalar_bytes=int(data.get('edge_scalar_bytes', 0)),
            float_model_bytes=int(data['float_model_bytes']),
        )

    def merge(self, other: 'MemoryBreakdown') -> 'MemoryBreakdown':
        """Sum of two breakdowns (layers of one model)."""
        return MemoryBreakdown(
            q_table_bytes=self.q_table_bytes + other.q_table_bytes,
            scale_bytes=self.scale_bytes + other.scale_bytes,
            y_min_bytes=self.y_min_bytes + other.y_min_bytes,
            knots_bytes=self.knots_bytes + other.knots_bytes,
            edge_scalar_bytes=self.edge_scalar_bytes + other.edge_scalar_bytes,
            float_model_bytes=self.float_model_bytes + other.float_model_bytes,
        )


@dataclass(frozen=True)
class BenchReport:
    """Same-tier spline vs LUT timing (milliseconds per batch forward)."""

    tier: str
    mode: str
    batch: int
    warmup_iters: int
    timed_iters: int
    spline_ms_mean: float
    spline_ms_std: float
    spline_ms_median: float
    lut_ms_mean: float
    lut_ms_std: float
    lut_ms_median: float
    spline_inner_repeats: int = 1
    lut_inner_repeats: int = 1
    memory: Optional[MemoryBreakdown] = None
    config: Dict = field(default_factory=dict)
    seed: Optional[int] = None

    @property
    def speedup(self) -> float:
        return self.spline_ms_mean / self.lut_ms_mean if self.lut_ms_mean > 0 else float('inf')

    @property
    def spline_ms_per_sample(self) -> float:
        return self.spline_ms_mean / self.batch

    @property
    def lut_ms_per_sample(self) -> float:
        return self.lut_ms_mean / self.batch

    def to_dict(self) -> Dict:
        return {
            'tier': self.tier,
            'mode': self.mode,
            'batch': self.batch,
            'warmup_iters': self.warmup_iters,
            'timed_iters': self.timed_iters,
            'spline_ms_mean': self.spline_ms_mean,
            'spline_ms_std': self.spline_ms_std,
            'spline_ms_median': self.spline_ms_median,
            'lut_ms_mean': self.lut_ms_mean,
            'lut_ms_std': self.lut_ms_std,
            'lut_ms_median': self.lut_ms_median,
            'spline_ms_per_sample': self.spline_ms_per_sample,
            'lut_ms_per_sample': self.lut_ms_per_sample,
            'speedup': self.speedup,
            'spline_inner_repeats': self.spline_inner_repeats,
            'lut_inner_repeats': self.lut_inner_repeats,
            'memory': self.memory.to_dict() if self.memory else None,
            'config': dict(self.config),
            'seed': self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'BenchReport':
        return cls(
            tier=data['tier'],
            mode=data['mode'],
            batch=int(data['batch']),
            warmup_iters=int(data['warmup_iters']),
            timed_iters=int(data['timed_iters']),
            spline_ms_mean=float(data['spline_ms_mean']),
            spline_ms_std=float(data['spline_ms_std']),
            spline_ms_median=float(data['spline_ms_median']),
            lut_ms_mean=float(data['lut_ms_mean']),
            lut_ms_std=float(data['lut_ms_std']),
            lut_ms_median=float(data['lut_ms_median']),
            spline_inner_repeats=int(data.get('spline_inner_repeats', 1)),
            lut_inner_repeats=int(data.get('lut_inner_repeats', 1)),
            memory=MemoryBreakdown.from_dict(data['memory']) if data.get('memory') else None,
            config=dict(data.get('config') or {}),
            seed=None if data.get('seed') is None else int(data['seed']),
        )


@dataclass(frozen=True)
class RunReport:
    """Everything one run (or sweep cell) produced, with its resolved config."""

    config: Dict
    seed: int
    status: str = "ok"
    eval: Optional[EvalReport] = None
    bench: Optional[BenchReport] = None
    memory: Optional[MemoryBreakdown] = None
    layer_stats: List[OobStats] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> Dict:
        return {
            'status': self.status,
            'seed': self.seed,
            'config': dict(self.config),
            'eval': self.eval.to_dict() if self.eval else None,
            'bench': self.bench.to_dict() if self.bench else None,
            'memory': self.memory.to_dict() if self.memory else None,
            'layer_stats': [s.to_dict() for s in self.layer_stats],
            'error': self.error,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'RunReport':
        return cls(
            config=dict(data.get('config') or {}),
            seed=int(data['seed']),
            status=data.get('status', 'ok'),
            eval=EvalReport.from_dict(data['eval']) if data.get('eval') else None,
            bench=BenchReport.from_dict(data['bench']) if data.get('bench') else None,
            memory=MemoryBreakdown.from_dict(data['memory']) if data.get('memory') else None,
            layer_stats=[OobStats.from_dict(s) for s in data.get('layer_stats') or []],
            error=data.get('error'),
        )


REPORT_KINDS = {
    'eval': EvalReport,
    'bench': BenchReport,
    'run': RunReport,
    'memory': MemoryBreakdown,
}
