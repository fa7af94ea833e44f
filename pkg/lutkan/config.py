"""
Run and sweep configuration.

Precedence: dataclass defaults < JSON config file < command-line flags.
"""

import itertools
import json
import os
from dataclasses import dataclass, field, fields, replace
from typing import Dict, List, Optional

from .errors import ConfigError
from .models import (
    BenchMode, BoundaryMode, Interp, OobConfig, OobPolicy, ParamDtype, QuantConfig, Scheme, Tier,
    ValueRepr, parse_enum,
)


def _load_json(filename: str) -> Dict:
    try:
        with open(filename, 'r') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise FileNotFoundError(f"Config file not found: {filename}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {filename} is not valid JSON: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {filename} must hold a JSON object")
    return data


def _check_keys(cls, data: Dict) -> None:
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown {cls.__name__} key(s): {', '.join(unknown)}")


@dataclass(frozen=True)
class RunConfig:
    """Declarative description of one compile/eval/bench run."""

    model: Optional[str] = None
    seed: int = 0
    widths: Optional[List[int]] = None
    num_segments: int = 8
    degree: int = 3
    L: int = 64
    scheme: str = Scheme.SYMMETRIC.value
    dtype: Optional[str] = None
    value_repr: str = ValueRepr.SPLINE_COMPONENT.value
    interp: str = Interp.LINEAR.value
    param_dtype: str = ParamDtype.FLOAT32.value
    boundary_mode: str = BoundaryMode.CLOSED.value
    oob_policy: str = OobPolicy.CLIP_X.value
    batch: int = 1024
    warmup: int = 50
    iters: int = 200
    num_samples: int = 4096
    clip_inputs: bool = True
    tier: str = Tier.OPTIMIZED.value
    mode: str = BenchMode.STEADY.value
    out_dir: str = 'outputs'
    threads: Optional[int] = None

    def __post_init__(self):
        quant, oob = self.quant_config, self.oob_config
        resolved = {**quant.to_dict(), **oob.to_dict(),
                    'tier': parse_enum(Tier, self.tier, 'tier').value,
                    'mode': parse_enum(BenchMode, self.mode, 'mode').value}
        for name, value in resolved.items():
            object.__setattr__(self, name, value)
        if self.widths is not None:
            object.__setattr__(self, 'widths', [int(w) for w in self.widths])
        if self.batch < 1 or self.iters < 1 or self.warmup < 0 or self.num_samples < 1:
            raise ConfigError("batch, iters and num_samples must be >= 1 and warmup >= 0")

    @property
    def quant_config(self) -> QuantConfig:
        return QuantConfig(L=self.L, scheme=self.scheme, dtype=self.dtype, value_repr=self.value_repr,
                           interp=self.interp, param_dtype=self.param_dtype)

    @property
    def oob_config(self) -> OobConfig:
        return OobConfig(boundary_mode=self.boundary_mode, oob_policy=self.oob_policy)

    def with_overrides(self, **overrides) -> 'RunConfig':
        """Copy with every non-None override applied (command-line flags)."""
        _check_keys(RunConfig, overrides)
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> Dict:
        """Convert to dictionary for serialization."""
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Dict) -> 'RunConfig':
        """Create from dictionary; missing keys take defaults, unknown keys are rejected."""
        _check_keys(cls, data)
        return cls(**data)

    def save_to_file(self, filename: str) -> None:
        with open(filename, 'w') as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def load_from_file(cls, filename: str) -> 'RunConfig':
        return cls.from_dict(_load_json(filename))


@dataclass(frozen=True)
class SweepCell:
    """One grid point of a sweep with its seed."""

    L: int
    scheme: str
    boundary_mode: str
    oob_policy: str
    seed: int

    @property
    def name(self) -> str:
        return f"L{self.L}_{self.scheme}_{self.boundary_mode}_{self.oob_policy}"

    @property
    def relpath(self) -> str:
        return os.path.join(self.name, f"seed_{self.seed}")


@dataclass(frozen=True)
class SweepConfig:
    """Grid of compile configurations times seeds over the seeded sanity layer."""

    L_values: List[int] = field(default_factory=lambda: [16, 32, 64, 128])
    schemes: List[str] = field(default_factory=lambda: [s.value for s in Scheme])
    boundary_modes: List[str] = field(default_factory=lambda: [b.value for b in BoundaryMode])
    oob_policies: List[str] = field(default_factory=lambda: [p.value for p in OobPolicy])
    seeds: List[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    value_repr: str = ValueRepr.SPLINE_COMPONENT.value
    interp: str = Interp.LINEAR.value
    param_dtype: str = ParamDtype.FLOAT32.value
    in_dim: int = 10
    out_dim: int = 8
    num_segments: int = 8
    degree: int = 3
    num_samples: int = 4096
    clip_inputs: bool = True
    bench: bool = False
    tier: str = Tier.OPTIMIZED.value
    batch: int = 1024
    warmup: int = 50
    iters: int = 200
    workers: int = 1

    def __post_init__(self):
        for name, enum_cls in (('schemes', Scheme), ('boundary_modes', BoundaryMode), ('oob_policies', OobPolicy)):
            values = [parse_enum(enum_cls, v, name).value for v in getattr(self, name)]
            object.__setattr__(self, name, values)
        object.__setattr__(self, 'L_values', [int(L) for L in self.L_values])
        object.__setattr__(self, 'seeds', [int(s) for s in self.seeds])
        if any(L < 2 for L in self.L_values):
            raise ConfigError(f"Every L must be >= 2, got {self.L_values}")
        if not all((self.L_values, self.schemes, self.boundary_modes, self.oob_policies, self.seeds)):
            raise ConfigError("Sweep grid has an empty axis")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        parse_enum(Tier, self.tier, 'tier')

    def cells(self) -> List[SweepCell]:
        """Every grid point times every seed, in a fixed order."""
        return [
            SweepCell(L, scheme, boundary_mode, oob_policy, seed)
            for L, scheme, boundary_mode, oob_policy, seed in itertools.product(
                self.L_values, self.schemes, self.boundary_modes, self.oob_policies, self.seeds)
        ]

    def run_config(self, cell: SweepCell) -> RunConfig:
        """Resolved RunConfig of one cell."""
        return RunConfig(
            seed=cell.seed,
            widths=[self.in_dim, self.out_dim],
            num_segments=self.num_segments,
            degree=self.degree,
            L=cell.L,
            scheme=cell.scheme,
            value_repr=self.value_repr,
            interp=self.interp,
            param_dtype=self.param_dtype,
            boundary_mode=cell.boundary_mode,
            oob_policy=cell.oob_policy,
            batch=self.batch,
            warmup=self.warmup,
            iters=self.iters,
            num_samples=self.num_samples,
            clip_inputs=self.clip_inputs,
            tier=self.tier,
            threads=1,
        )

    def to_dict(self) -> Dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Dict) -> 'SweepConfig':
        _check_keys(cls, data)
        return cls(**data)

    def save_to_file(self, filename: str) -> None:
        with open(filename, 'w') as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def load_from_file(cls, filename: str) -> 'SweepConfig':
        return cls.from_dict(_load_json(filename))
