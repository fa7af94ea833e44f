"""
Data models for KAN layers and compilation/runtime contracts.
"""

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Type, TypeVar

import numpy as np

from .errors import ConfigError, InvalidEnumError


class Scheme(Enum):
    """Per-segment affine quantization schemes."""
    SYMMETRIC = "symmetric"
    ASYMMETRIC = "asymmetric"


class QuantDtype(Enum):
    """Integer storage type of the LUT table."""
    INT8 = "int8"
    UINT8 = "uint8"


class ValueRepr(Enum):
    """What the LUT stores: the whole edge output or only its spline branch."""
    PHI = "phi"
    SPLINE_COMPONENT = "spline_component"


class Interp(Enum):
    """Interpolation between adjacent LUT entries."""
    LINEAR = "linear"


class ParamDtype(Enum):
    """Storage type of the per-segment scale and y_min arrays."""
    FLOAT32 = "float32"
    FLOAT16 = "float16"


class BoundaryMode(Enum):
    """Domain membership convention at the right end of the knot grid."""
    HALF_OPEN = "half_open"
    CLOSED = "closed"


class OobPolicy(Enum):
    """Output rule for inputs outside the knot domain."""
    CLIP_X = "clip_x"
    ZERO_SPLINE = "zero_spline"


class Tier(Enum):
    """Implementation tier; speedups are only ever computed within one tier."""
    SCALAR = "scalar"
    OPTIMIZED = "optimized"


class BenchMode(Enum):
    """Steady state (artifact preloaded) or cold start (reload every iteration)."""
    STEADY = "steady"
    COLD_START = "cold_start"


SCHEME_DTYPES = {
    Scheme.SYMMETRIC: QuantDtype.INT8,
    Scheme.ASYMMETRIC: QuantDtype.UINT8,
}

E = TypeVar('E', bound=Enum)


def parse_enum(enum_cls: Type[E], value, field_name: str) -> E:
    """Coerce a string (or enum member) into ``enum_cls``, naming the field on failure."""
    if isinstance(value, enum_cls):
        return value
    try:
        return enum_cls(value)
    except ValueError:
        raise InvalidEnumError(field_name, value, [m.value for m in enum_cls]) from None


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class KnotGrid:
    """Shared knot grid of a layer: breakpoints t_0 < ... < t_K and spline degree p."""

    breakpoints: tuple
    degree: int
    extended: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        points = tuple(float(t) for t in self.breakpoints)
        object.__setattr__(self, 'breakpoints', points)
        if len(points) < 2:
            raise ConfigError(f"Knot grid needs at least 2 breakpoints, got {len(points)}")
        if not all(math.isfinite(t) for t in points):
            raise ConfigError("Knot grid breakpoints must be finite")
        if any(b <= a for a, b in zip(points[:-1], points[1:])):
            raise ConfigError(f"Knot grid breakpoints must be strictly increasing: {points}")
        if int(self.degree) != self.degree or self.degree < 0:
            raise ConfigError(f"Spline degree must be a non-negative integer, got {self.degree}")
        object.__setattr__(self, 'degree', int(self.degree))

        # Uniform continuation of the end segment widths, p knots on each side
        p = self.degree
        h_left = points[1] - points[0]
        h_right = points[-1] - points[-2]
        left = [points[0] - (p - j) * h_left for j in range(p)]
        right = [points[-1] + (j + 1) * h_right for j in range(p)]
        extended = np.array(left + list(points) + right, dtype=np.float64)
        object.__setattr__(self, 'extended', _readonly(extended))

    @property
    def num_segments(self) -> int:
        """K, the number of segments."""
        return len(self.breakpoints) - 1

    @property
    def num_basis(self) -> int:
        """R = K + p, the number of basis functions (and coefficients per edge)."""
        return self.num_segments + self.degree

    @property
    def extended_knots(self) -> List[float]:
        return self.extended.tolist()

    @property
    def t0(self) -> float:
        return self.breakpoints[0]

    @property
    def tK(self) -> float:
        return self.breakpoints[-1]

    @classmethod
    def uniform(cls, low: float, high: float, num_segments: int, degree: int) -> 'KnotGrid':
        """Uniform breakpoints over [low, high]."""
        return cls(tuple(np.linspace(low, high, num_segments + 1).tolist()), degree)


@dataclass(frozen=True)
class EdgeParams:
    """Spline coefficients and scalar gains of one edge."""

    coeffs: tuple
    base_scale: float = 1.0
    spline_scale: float = 1.0
    out_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, 'coeffs', tuple(float(c) for c in self.coeffs))
        for name in ('base_scale', 'spline_scale', 'out_scale'):
            object.__setattr__(self, name, float(getattr(self, name)))

    def to_dict(self) -> Dict:
        """Convert to dictionary for serialization."""
        return {
            'coeffs': list(self.coeffs),
            'base_scale': self.base_scale,
            'spline_scale': self.spline_scale,
            'out_scale': self.out_scale,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'EdgeParams':
        """Create from dictionary."""
        try:
            return cls(
                coeffs=tuple(data['coeffs']),
                base_scale=data['base_scale'],
                spline_scale=data['spline_scale'],
                out_scale=data['out_scale'],
            )
        except KeyError as e:
            raise ConfigError(f"Edge definition is missing key {e}") from None


@dataclass(frozen=True)
class KanLayerSpec:
    """Float reference model for one KAN layer.

    Edges are stored row-major: edge (i -> j) has index ``i * out_dim + j``.
    """

    in_dim: int
    out_dim: int
    grid: KnotGrid
    edges: tuple
    base_kind: str = "silu"
    coeff_matrix: np.ndarray = field(init=False, repr=False, compare=False)
    base_scales: np.ndarray = field(init=False, repr=False, compare=False)
    spline_scales: np.ndarray = field(init=False, repr=False, compare=False)
    out_scales: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'edges', tuple(self.edges))
        if self.in_dim < 1 or self.out_dim < 1:
            raise ConfigError(f"Layer dimensions must be positive, got {self.in_dim}x{self.out_dim}")
        if len(self.edges) != self.in_dim * self.out_dim:
            raise ConfigError(
                f"Layer {self.in_dim}x{self.out_dim} needs {self.in_dim * self.out_dim} edges, got {len(self.edges)}"
            )
        R = self.grid.num_basis
        for e, edge in enumerate(self.edges):
            if len(edge.coeffs) != R:
                raise ConfigError(f"Edge {e} has {len(edge.coeffs)} coefficients, expected K+p = {R}")

        object.__setattr__(self, 'coeff_matrix', _readonly(
            np.array([edge.coeffs for edge in self.edges], dtype=np.float64).reshape(self.num_edges, R)))
        object.__setattr__(self, 'base_scales', _readonly(
            np.array([edge.base_scale for edge in self.edges], dtype=np.float64)))
        object.__setattr__(self, 'spline_scales', _readonly(
            np.array([edge.spline_scale for edge in self.edges], dtype=np.float64)))
        object.__setattr__(self, 'out_scales', _readonly(
            np.array([edge.out_scale for edge in self.edges], dtype=np.float64)))

    @property
    def num_edges(self) -> int:
        return self.in_dim * self.out_dim

    def edge_index(self, i: int, j: int) -> int:
        """Index of edge (i -> j)."""
        return i * self.out_dim + j

    def edge(self, i: int, j: int) -> EdgeParams:
        return self.edges[self.edge_index(i, j)]

    @property
    def parameter_count(self) -> int:
        """Coefficients plus the three scalars of every edge."""
        return self.num_edges * (self.grid.num_basis + 3)

    def to_dict(self) -> Dict:
        """Convert to dictionary for serialization."""
        return {
            'in_dim': self.in_dim,
            'out_dim': self.out_dim,
            'degree': self.grid.degree,
            'breakpoints': list(self.grid.breakpoints),
            'base_kind': self.base_kind,
            'edges': [edge.to_dict() for edge in self.edges],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'KanLayerSpec':
        """Create from dictionary."""
        try:
            return cls(
                in_dim=int(data['in_dim']),
                out_dim=int(data['out_dim']),
                grid=KnotGrid(tuple(data['breakpoints']), int(data['degree'])),
                edges=tuple(EdgeParams.from_dict(edge) for edge in data['edges']),
                base_kind=data.get('base_kind', 'silu'),
            )
        except KeyError as e:
            raise ConfigError(f"Layer definition is missing key {e}") from None

    def save_to_file(self, filename: str) -> None:
        """Save the layer to a JSON model file."""
        with open(filename, 'w') as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def load_from_file(cls, filename: str) -> 'KanLayerSpec':
        """Load a single layer from a JSON model file."""
        layers = load_model(filename)
        if len(layers) != 1:
            raise ConfigError(f"{filename} holds {len(layers)} layers, expected exactly one")
        return layers[0]


def load_model(filename: str) -> List[KanLayerSpec]:
    """Load a model file holding one layer or ``{"layers": [...]}``."""
    try:
        with open(filename, 'r') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise FileNotFoundError(f"Model file not found: {filename}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"Model file {filename} is not valid JSON: {e}") from None
    if 'layers' in data:
        return [KanLayerSpec.from_dict(layer) for layer in data['layers']]
    return [KanLayerSpec.from_dict(data)]


def save_model(layers: Sequence[KanLayerSpec], filename: str) -> None:
    """Save one layer in the plain layer format, several under ``layers``."""
    if len(layers) == 1:
        payload = layers[0].to_dict()
    else:
        payload = {'layers': [layer.to_dict() for layer in layers]}
    with open(filename, 'w') as f:
        json.dump(payload, f, indent=2)


@dataclass(frozen=True)
class QuantConfig:
    """Compilation contract: LUT resolution, quantization and stored representation."""

    L: int = 64
    scheme: Scheme = Scheme.SYMMETRIC
    dtype: Optional[QuantDtype] = None
    value_repr: ValueRepr = ValueRepr.SPLINE_COMPONENT
    interp: Interp = Interp.LINEAR
    param_dtype: ParamDtype = ParamDtype.FLOAT32

    def __post_init__(self):
        if isinstance(self.L, bool) or int(self.L) != self.L or self.L < 2:
            raise ConfigError(f"L must be an integer >= 2, got {self.L}")
        object.__setattr__(self, 'L', int(self.L))
        scheme = parse_enum(Scheme, self.scheme, 'scheme')
        object.__setattr__(self, 'scheme', scheme)
        expected = SCHEME_DTYPES[scheme]
        dtype = expected if self.dtype is None else parse_enum(QuantDtype, self.dtype, 'dtype')
        if dtype != expected:
            raise ConfigError(f"Scheme {scheme.value} requires dtype {expected.value}, got {dtype.value}")
        object.__setattr__(self, 'dtype', dtype)
        object.__setattr__(self, 'value_repr', parse_enum(ValueRepr, self.value_repr, 'value_repr'))
        object.__setattr__(self, 'interp', parse_enum(Interp, self.interp, 'interp'))
        object.__setattr__(self, 'param_dtype', parse_enum(ParamDtype, self.param_dtype, 'param_dtype'))

    @property
    def numpy_dtype(self) -> np.dtype:
        return np.dtype(self.dtype.value)

    @property
    def numpy_param_dtype(self) -> np.dtype:
        return np.dtype(self.param_dtype.value)

    def to_dict(self) -> Dict:
        """Convert to dictionary for serialization."""
        return {
            'L': self.L,
            'scheme': self.scheme.value,
            'dtype': self.dtype.value,
            'value_repr': self.value_repr.value,
            'interp': self.interp.value,
            'param_dtype': self.param_dtype.value,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'QuantConfig':
        """Create from dictionary; missing keys take defaults."""
        defaults = cls()
        return cls(
            L=data.get('L', defaults.L),
            scheme=data.get('scheme', defaults.scheme),
            dtype=data.get('dtype'),
            value_repr=data.get('value_repr', defaults.value_repr),
            interp=data.get('interp', defaults.interp),
            param_dtype=data.get('param_dtype', defaults.param_dtype),
        )


@dataclass(frozen=True)
class OobConfig:
    """Out-of-bounds contract stored with every artifact."""

    boundary_mode: BoundaryMode = BoundaryMode.CLOSED
    oob_policy: OobPolicy = OobPolicy.CLIP_X

    def __post_init__(self):
        object.__setattr__(self, 'boundary_mode', parse_enum(BoundaryMode, self.boundary_mode, 'boundary_mode'))
        object.__setattr__(self, 'oob_policy', parse_enum(OobPolicy, self.oob_policy, 'oob_policy'))

    def to_dict(self) -> Dict:
        """Convert to dictionary for serialization."""
        return {
            'boundary_mode': self.boundary_mode.value,
            'oob_policy': self.oob_policy.value,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'OobConfig':
        """Create from dictionary; missing keys take defaults."""
        defaults = cls()
        return cls(
            boundary_mode=data.get('boundary_mode', defaults.boundary_mode),
            oob_policy=data.get('oob_policy', defaults.oob_policy),
        )
