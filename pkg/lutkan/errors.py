"""
Exception hierarchy for lutkan.
"""

from typing import Optional


class LutKanError(Exception):
    """Base class for all lutkan errors."""


class ConfigError(LutKanError, ValueError):
    """Invalid compilation, runtime or run configuration."""


class InvalidEnumError(ConfigError):
    """A metadata or config field holds a value outside its enumeration."""

    def __init__(self, field: str, value, allowed):
        self.field = field
        self.value = value
        self.allowed = list(allowed)
        super().__init__(f"Invalid value {value!r} for field '{field}' (allowed: {', '.join(self.allowed)})")


class DimensionMismatchError(LutKanError, ValueError):
    """Input shape does not match the layer or model dimensions."""


class ChainError(DimensionMismatchError):
    """A chain of layers or artifacts is empty or its dimensions do not connect."""


class UnsupportedBaseError(LutKanError, ValueError):
    """Unknown base function identifier."""


class NonFiniteInputError(LutKanError, ValueError):
    """NaN or infinite values passed to quantization or inference."""


class EdgeIndexError(LutKanError, IndexError):
    """Edge index outside [0, E)."""


class LayerCompileError(LutKanError):
    """Compilation of one layer in a model failed."""

    def __init__(self, layer_index: int, cause: Exception):
        self.layer_index = layer_index
        self.cause = cause
        super().__init__(f"Layer {layer_index}: {type(cause).__name__}: {cause}")


class ArtifactError(LutKanError):
    """Base class for artifact archive errors."""

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        if path:
            message = f"{message} [{path}]"
        super().__init__(message)


class ArtifactNotFoundError(ArtifactError, FileNotFoundError):
    """Artifact or report path does not exist."""


class MissingKeyError(ArtifactError):
    """A required manifest key or blob is absent."""


class ShapeMismatchError(ArtifactError):
    """Blob shapes or dtypes are inconsistent with each other or the manifest."""


class UnsupportedVersionError(ArtifactError):
    """Manifest carries an unknown format_version."""


class CorruptBlobError(ArtifactError):
    """A blob's bytes can not be decoded (truncated, wrong length, bad CRC)."""


class CorruptArchiveError(ArtifactError):
    """The container itself is not a readable archive."""


class InvalidArtifactError(ArtifactError):
    """Artifact content violates an invariant (knot order, dtype pairing, non-finite params)."""
