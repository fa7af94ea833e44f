"""
Compiled per-layer LUT artifact.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .errors import InvalidArtifactError, ShapeMismatchError
from .models import (
    SCHEME_DTYPES, BoundaryMode, Interp, OobConfig, OobPolicy, ParamDtype, QuantConfig,
    QuantDtype, Scheme, ValueRepr, parse_enum,
)

FORMAT_VERSION = "lutkan/1"

EDGE_SCALAR_FIELDS = ('edge_base_scale', 'edge_spline_scale', 'edge_out_scale')


def widen(array) -> np.ndarray:
    """Stored values as float64. float16 goes through float32; other dtypes are cast directly."""
    array = np.asarray(array)
    if array.dtype == np.float16:
        array = array.astype(np.float32)
    return array.astype(np.float64)


def _freeze(array: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if array is None:
        return None
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class LutLayerArtifact:
    """Quantized segment-wise LUT for one layer plus everything inference needs.

    ``q_table`` has shape (E, K, L); ``scale`` and ``y_min`` have shape (E, K).
    Edge (i -> j) has index ``i * out_dim + j``. The three edge scalar arrays are
    present exactly when ``value_repr`` is spline_component.
    """

    knots: np.ndarray
    q_table: np.ndarray
    scale: np.ndarray
    y_min: np.ndarray
    in_dim: int
    out_dim: int
    scheme: Scheme
    value_repr: ValueRepr
    boundary_mode: BoundaryMode
    oob_policy: OobPolicy
    interp: Interp = Interp.LINEAR
    param_dtype: ParamDtype = ParamDtype.FLOAT32
    base_kind: Optional[str] = None
    edge_base_scale: Optional[np.ndarray] = None
    edge_spline_scale: Optional[np.ndarray] = None
    edge_out_scale: Optional[np.ndarray] = None
    format_version: str = FORMAT_VERSION
    quantized: bool = True
    _cache: Dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        for name, enum_cls in (('scheme', Scheme), ('value_repr', ValueRepr),
                               ('boundary_mode', BoundaryMode), ('oob_policy', OobPolicy),
                               ('interp', Interp), ('param_dtype', ParamDtype)):
            object.__setattr__(self, name, parse_enum(enum_cls, getattr(self, name), name))
        for name in ('knots', 'q_table', 'scale', 'y_min') + EDGE_SCALAR_FIELDS:
            object.__setattr__(self, name, _freeze(getattr(self, name)))
        self._validate()

    def _validate(self) -> None:
        if self.in_dim < 1 or self.out_dim < 1:
            raise ShapeMismatchError(f"Invalid layer dimensions {self.in_dim}x{self.out_dim}")
        if self.knots.ndim != 1 or self.knots.size < 2:
            raise ShapeMismatchError(f"knots must be a 1-D array of at least 2 values, got shape {self.knots.shape}")
        if self.knots.dtype != np.float32:
            raise ShapeMismatchError(f"knots must be float32, got {self.knots.dtype}")
        if not np.all(np.isfinite(self.knots)) or np.any(np.diff(self.knots) <= 0):
            raise InvalidArtifactError("knots must be finite and strictly increasing")

        E, K = self.in_dim * self.out_dim, self.knots.size - 1
        if self.q_table.ndim != 3 or self.q_table.shape[:2] != (E, K) or self.q_table.shape[2] < 2:
            raise ShapeMismatchError(f"q_table shape {self.q_table.shape} does not match (E={E}, K={K}, L>=2)")
        for name in ('scale', 'y_min'):
            array = getattr(self, name)
            if array.shape != (E, K):
                raise ShapeMismatchError(f"{name} shape {array.shape} does not match (E={E}, K={K})")
            if array.dtype != np.dtype(self.param_dtype.value):
                raise ShapeMismatchError(f"{name} dtype {array.dtype} does not match param_dtype {self.param_dtype.value}")
            if not np.all(np.isfinite(array)):
                raise InvalidArtifactError(f"{name} holds non-finite values")

        if self.quantized:
            expected = np.dtype(SCHEME_DTYPES[self.scheme].value)
            if self.q_table.dtype != expected:
                raise InvalidArtifactError(
                    f"Scheme {self.scheme.value} requires {expected} tables, got {self.q_table.dtype}")
            if self.scheme == Scheme.SYMMETRIC and np.any(self.q_table == -128):
                raise InvalidArtifactError("Symmetric tables must stay within [-127, 127]")

        scalars = [getattr(self, name) for name in EDGE_SCALAR_FIELDS]
        if self.value_repr == ValueRepr.SPLINE_COMPONENT:
            if any(s is None for s in scalars) or self.base_kind is None:
                raise InvalidArtifactError("spline_component artifacts need edge scalars and base_kind")
            for name, s in zip(EDGE_SCALAR_FIELDS, scalars):
                if s.shape != (E,) or s.dtype != np.float32:
                    raise ShapeMismatchError(f"{name} must be float32 with shape ({E},), got {s.dtype} {s.shape}")
        elif any(s is not None for s in scalars):
            raise InvalidArtifactError("phi artifacts must not carry edge scalars")

    @property
    def L(self) -> int:
        return self.q_table.shape[2]

    @property
    def num_edges(self) -> int:
        return self.q_table.shape[0]

    @property
    def num_segments(self) -> int:
        return self.q_table.shape[1]

    @property
    def dtype(self) -> QuantDtype:
        return SCHEME_DTYPES[self.scheme]

    @property
    def oob_config(self) -> OobConfig:
        return OobConfig(self.boundary_mode, self.oob_policy)

    @property
    def quant_config(self) -> QuantConfig:
        return QuantConfig(L=self.L, scheme=self.scheme, value_repr=self.value_repr,
                           interp=self.interp, param_dtype=self.param_dtype)

    def metadata(self) -> Dict:
        """Scalar metadata in manifest order."""
        meta = {
            'format_version': self.format_version,
            'value_repr': self.value_repr.value,
            'interp': self.interp.value,
            'boundary_mode': self.boundary_mode.value,
            'oob_policy': self.oob_policy.value,
            'L': self.L,
            'scheme': self.scheme.value,
            'dtype': self.dtype.value,
            'param_dtype': self.param_dtype.value,
            'in_dim': self.in_dim,
            'out_dim': self.out_dim,
            'num_edges': self.num_edges,
            'num_segments': self.num_segments,
        }
        if self.value_repr == ValueRepr.SPLINE_COMPONENT:
            meta['base_kind'] = self.base_kind
        return meta

    def arrays(self) -> Dict[str, np.ndarray]:
        """Stored arrays in blob order."""
        blobs = {
            'knots': self.knots,
            'q_table': self.q_table,
            'scale': self.scale,
            'y_min': self.y_min,
        }
        if self.value_repr == ValueRepr.SPLINE_COMPONENT:
            for name in EDGE_SCALAR_FIELDS:
                blobs[name] = getattr(self, name)
        return blobs

    def equals(self, other: 'LutLayerArtifact') -> bool:
        """Bit-exact comparison of metadata and every stored array."""
        if not isinstance(other, LutLayerArtifact) or self.metadata() != other.metadata():
            return False
        if self.quantized != other.quantized:
            return False
        mine, theirs = self.arrays(), other.arrays()
        if mine.keys() != theirs.keys():
            return False
        return all(
            mine[name].dtype == theirs[name].dtype
            and mine[name].shape == theirs[name].shape
            and mine[name].tobytes() == theirs[name].tobytes()
            for name in mine
        )
