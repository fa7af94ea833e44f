"""
Serialization of LUT artifacts, artifact chains and reports.

An artifact is a deflate ZIP archive holding ``manifest.json`` followed by one
raw little-endian blob per array. Entry timestamps, entry order, manifest key
order and compression level are fixed, so saving the same artifact twice gives
identical bytes. See docs/ARTIFACT_FORMAT.md for the byte layout.
"""

import json
import os
import zipfile
import zlib
from typing import Dict, List, Sequence, Union

import numpy as np

from .artifact import EDGE_SCALAR_FIELDS, FORMAT_VERSION, LutLayerArtifact
from .errors import (
    ArtifactError, ArtifactNotFoundError, ChainError, CorruptArchiveError, CorruptBlobError,
    InvalidArtifactError, MissingKeyError, ShapeMismatchError, UnsupportedVersionError,
)
from .logging_config import get_logger, get_structured_logger
from .models import BoundaryMode, Interp, OobPolicy, ParamDtype, QuantDtype, Scheme, ValueRepr, parse_enum
from .reports import REPORT_KINDS, BenchReport, EvalReport, MemoryBreakdown, RunReport
from .spline_core import base_kinds

logger = get_logger('artifact_io')
structured_logger = get_structured_logger('artifact_io')

MANIFEST_NAME = 'manifest.json'
CHAIN_MANIFEST_NAME = 'manifest.json'
CHAIN_FORMAT_VERSION = 'lutkan-chain/1'
ZIP_DATE_TIME = (1980, 1, 1, 0, 0, 0)
COMPRESS_LEVEL = 6

REQUIRED_KEYS = ('format_version', 'value_repr', 'interp', 'boundary_mode', 'oob_policy', 'L',
                 'scheme', 'dtype', 'param_dtype', 'in_dim', 'out_dim', 'num_edges', 'num_segments', 'blobs')
CORE_BLOBS = ('knots', 'q_table', 'scale', 'y_min')
INT_KEYS = ('L', 'in_dim', 'out_dim', 'num_edges', 'num_segments')
STRING_KEYS = ('value_repr', 'interp', 'boundary_mode', 'oob_policy', 'scheme', 'dtype', 'param_dtype')

Report = Union[EvalReport, BenchReport, RunReport, MemoryBreakdown]


def _zip_entry(name: str) -> zipfile.ZipInfo:
    info = zipfile.ZipInfo(name, date_time=ZIP_DATE_TIME)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    return info


def _blob_bytes(array: np.ndarray) -> bytes:
    return np.ascontiguousarray(array, dtype=array.dtype.newbyteorder('<')).tobytes()


def build_manifest(artifact: LutLayerArtifact) -> Dict:
    """Manifest document of an artifact: metadata, then a descriptor per blob in blob order."""
    manifest = artifact.metadata()
    manifest['blobs'] = {
        name: {
            'file': f'{name}.bin',
            'dtype': array.dtype.name,
            'shape': list(array.shape),
            'nbytes': int(array.nbytes),
        }
        for name, array in artifact.arrays().items()
    }
    return manifest


def save_artifact(artifact: LutLayerArtifact, path: str) -> None:
    """Write ``artifact`` as a single deterministic archive at ``path``."""
    if not artifact.quantized:
        raise InvalidArtifactError("Unquantized debug artifacts can not be serialized", path)
    manifest = build_manifest(artifact)
    try:
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        with zipfile.ZipFile(path, 'w', compression=zipfile.ZIP_DEFLATED, compresslevel=COMPRESS_LEVEL) as zf:
            zf.writestr(_zip_entry(MANIFEST_NAME), json.dumps(manifest, indent=2).encode('utf-8'),
                        compresslevel=COMPRESS_LEVEL)
            for name, array in artifact.arrays().items():
                zf.writestr(_zip_entry(manifest['blobs'][name]['file']), _blob_bytes(array),
                            compresslevel=COMPRESS_LEVEL)
    except OSError as e:
        structured_logger.log_artifact_io('save', path, success=False, error=str(e))
        raise
    structured_logger.log_artifact_io('save', path, num_bytes=os.path.getsize(path))


def _read_entry(zf: zipfile.ZipFile, name: str, path: str, error_cls) -> bytes:
    try:
        return zf.read(name)
    except KeyError:
        raise MissingKeyError(f"Archive entry '{name}' is missing", path) from None
    except (zipfile.BadZipFile, zlib.error, EOFError, OSError) as e:
        raise error_cls(f"Archive entry '{name}' can not be read: {e}", path) from None


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _check_manifest_types(manifest: Dict, path: str) -> None:
    """Reject manifests whose values have the wrong JSON type."""
    for key in INT_KEYS:
        if not _is_int(manifest[key]):
            raise CorruptArchiveError(f"Manifest {key} must be an integer, got {manifest[key]!r}", path)
    for key in STRING_KEYS:
        if not isinstance(manifest[key], str):
            raise CorruptArchiveError(f"Manifest {key} must be a string, got {manifest[key]!r}", path)
    if not isinstance(manifest['blobs'], dict):
        raise CorruptArchiveError("Manifest blobs must be an object of blob descriptors", path)


def _check_base_kind(manifest: Dict, path: str) -> str:
    if 'base_kind' not in manifest:
        raise MissingKeyError("Manifest is missing key 'base_kind'", path)
    kind = manifest['base_kind']
    if not isinstance(kind, str) or kind not in base_kinds():
        raise InvalidArtifactError(
            f"Manifest base_kind {kind!r} is not a registered base function ({', '.join(base_kinds())})", path)
    return kind


def _decode_blob(zf: zipfile.ZipFile, name: str, manifest: Dict, path: str) -> np.ndarray:
    descriptor = manifest['blobs'].get(name)
    if descriptor is None:
        raise MissingKeyError(f"Manifest declares no blob '{name}'", path)
    if not isinstance(descriptor, dict):
        raise CorruptArchiveError(f"Blob descriptor '{name}' must be an object, got {descriptor!r}", path)
    for key in ('file', 'dtype', 'shape'):
        if key not in descriptor:
            raise MissingKeyError(f"Blob descriptor '{name}' is missing key '{key}'", path)
    shape = descriptor['shape']
    valid_shape = isinstance(shape, list) and all(_is_int(s) and s >= 0 for s in shape)
    if not (isinstance(descriptor['file'], str) and isinstance(descriptor['dtype'], str) and valid_shape):
        raise ShapeMismatchError(f"Blob '{name}' has an invalid file, dtype or shape: {descriptor!r}", path)
    try:
        dtype = np.dtype(descriptor['dtype']).newbyteorder('<')
    except (TypeError, ValueError) as e:
        raise ShapeMismatchError(f"Blob '{name}' has an invalid dtype: {e}", path) from None
    if dtype.hasobject or dtype.itemsize == 0:
        raise ShapeMismatchError(f"Blob '{name}' has an unsupported dtype {dtype}", path)
    shape = tuple(shape)
    data = _read_entry(zf, descriptor['file'], path, CorruptBlobError)
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(data) != expected:
        raise CorruptBlobError(f"Blob '{name}' holds {len(data)} bytes, expected {expected} for shape {shape}", path)
    return np.frombuffer(data, dtype=dtype).reshape(shape).astype(dtype.newbyteorder('='))


def _check_declared(manifest: Dict, arrays: Dict[str, np.ndarray], path: str) -> None:
    q = arrays['q_table']
    declared = {
        'num_edges': q.shape[0] if q.ndim == 3 else None,
        'num_segments': q.shape[1] if q.ndim == 3 else None,
        'L': q.shape[2] if q.ndim == 3 else None,
    }
    for key, actual in declared.items():
        if int(manifest[key]) != actual:
            raise ShapeMismatchError(f"Manifest {key}={manifest[key]} does not match q_table shape {q.shape}", path)
    if int(manifest['num_edges']) != int(manifest['in_dim']) * int(manifest['out_dim']):
        raise ShapeMismatchError(
            f"num_edges={manifest['num_edges']} is not in_dim*out_dim={manifest['in_dim']}*{manifest['out_dim']}", path)
    if q.dtype.name != manifest['dtype']:
        raise ShapeMismatchError(f"q_table dtype {q.dtype.name} does not match manifest dtype {manifest['dtype']}", path)


def load_artifact(path: str) -> LutLayerArtifact:
    """Read and fully validate an artifact archive."""
    if not os.path.isfile(path):
        raise ArtifactNotFoundError("Artifact file not found", path)
    try:
        zf = zipfile.ZipFile(path, 'r')
    except (zipfile.BadZipFile, OSError) as e:
        structured_logger.log_artifact_io('load', path, success=False, error=str(e))
        raise CorruptArchiveError(f"Not a readable artifact archive: {e}", path) from None

    try:
        with zf:
            raw = _read_entry(zf, MANIFEST_NAME, path, CorruptArchiveError)
            try:
                manifest = json.loads(raw.decode('utf-8'))
            except (UnicodeDecodeError, json.JSONDecodeError) as e:
                raise CorruptArchiveError(f"Manifest is not valid JSON: {e}", path) from None
            if not isinstance(manifest, dict):
                raise CorruptArchiveError("Manifest must be a JSON object", path)
            if 'format_version' not in manifest:
                raise MissingKeyError("Manifest is missing key 'format_version'", path)
            if manifest['format_version'] != FORMAT_VERSION:
                raise UnsupportedVersionError(
                    f"Unsupported format_version {manifest['format_version']!r} (supported: {FORMAT_VERSION})", path)
            for key in REQUIRED_KEYS:
                if key not in manifest:
                    raise MissingKeyError(f"Manifest is missing key '{key}'", path)
            _check_manifest_types(manifest, path)

            value_repr = parse_enum(ValueRepr, manifest['value_repr'], 'value_repr')
            scheme = parse_enum(Scheme, manifest['scheme'], 'scheme')
            parse_enum(QuantDtype, manifest['dtype'], 'dtype')
            fields = dict(
                value_repr=value_repr,
                scheme=scheme,
                interp=parse_enum(Interp, manifest['interp'], 'interp'),
                boundary_mode=parse_enum(BoundaryMode, manifest['boundary_mode'], 'boundary_mode'),
                oob_policy=parse_enum(OobPolicy, manifest['oob_policy'], 'oob_policy'),
                param_dtype=parse_enum(ParamDtype, manifest['param_dtype'], 'param_dtype'),
            )

            names = list(CORE_BLOBS)
            if value_repr == ValueRepr.SPLINE_COMPONENT:
                fields['base_kind'] = _check_base_kind(manifest, path)
                names.extend(EDGE_SCALAR_FIELDS)
            arrays = {name: _decode_blob(zf, name, manifest, path) for name in names}
            _check_declared(manifest, arrays, path)

            artifact = LutLayerArtifact(
                in_dim=int(manifest['in_dim']),
                out_dim=int(manifest['out_dim']),
                **arrays,
                **fields,
            )
    except ArtifactError as e:
        if e.path is None:
            e = type(e)(str(e), path)
        structured_logger.log_artifact_io('load', path, success=False, error=str(e))
        raise e from None
    structured_logger.log_artifact_io('load', path, num_bytes=os.path.getsize(path))
    return artifact


def save_model_artifacts(artifacts: Sequence[LutLayerArtifact], directory: str) -> List[str]:
    """Save a chain as ``directory/manifest.json`` plus ``layer_000.lut``, ``layer_001.lut``, ..."""
    os.makedirs(directory, exist_ok=True)
    layers = []
    paths = []
    for index, artifact in enumerate(artifacts):
        filename = f'layer_{index:03d}.lut'
        save_artifact(artifact, os.path.join(directory, filename))
        layers.append({'file': filename, 'in_dim': artifact.in_dim, 'out_dim': artifact.out_dim})
        paths.append(os.path.join(directory, filename))
    manifest = {'format_version': CHAIN_FORMAT_VERSION, 'num_layers': len(layers), 'layers': layers}
    with open(os.path.join(directory, CHAIN_MANIFEST_NAME), 'w') as f:
        json.dump(manifest, f, indent=2)
    logger.info(f"Saved {len(layers)} layer artifact(s) to {directory}")
    return paths


def load_model_artifacts(directory: str) -> List[LutLayerArtifact]:
    """Load a chain saved by ``save_model_artifacts`` and check its dimensions connect."""
    manifest_path = os.path.join(directory, CHAIN_MANIFEST_NAME)
    if not os.path.isfile(manifest_path):
        raise ArtifactNotFoundError("Chain manifest not found", manifest_path)
    try:
        with open(manifest_path, 'r') as f:
            manifest = json.load(f)
    except json.JSONDecodeError as e:
        raise CorruptArchiveError(f"Chain manifest is not valid JSON: {e}", manifest_path) from None
    if not isinstance(manifest, dict):
        raise CorruptArchiveError("Chain manifest must be a JSON object", manifest_path)
    if manifest.get('format_version') != CHAIN_FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"Unsupported chain format_version {manifest.get('format_version')!r}", manifest_path)
    if 'layers' not in manifest:
        raise MissingKeyError("Chain manifest is missing key 'layers'", manifest_path)
    layers = manifest['layers']
    if not isinstance(layers, list) or not all(isinstance(l, dict) and isinstance(l.get('file'), str) for l in layers):
        raise CorruptArchiveError("Chain manifest layers must be a list of {\"file\": ...} objects", manifest_path)
    artifacts = [load_artifact(os.path.join(directory, layer['file'])) for layer in layers]
    for index in range(len(artifacts) - 1):
        if artifacts[index].out_dim != artifacts[index + 1].in_dim:
            raise ChainError(f"Layer {index} outputs {artifacts[index].out_dim} values but layer "
                             f"{index + 1} expects {artifacts[index + 1].in_dim}")
    return artifacts


def load_any(path: str) -> List[LutLayerArtifact]:
    """Load a single archive or a chain directory as a list of artifacts."""
    if os.path.isdir(path):
        return load_model_artifacts(path)
    return [load_artifact(path)]


def _report_kind(report: Report) -> str:
    for kind, cls in REPORT_KINDS.items():
        if isinstance(report, cls):
            return kind
    raise TypeError(f"Unsupported report type {type(report).__name__}")


def save_report(report: Report, path: str) -> None:
    """Write a report as JSON with a ``kind`` tag and stable field names."""
    payload = {'kind': _report_kind(report), **report.to_dict()}
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(payload, f, indent=2)
    structured_logger.log_artifact_io('save_report', path)


def load_report(path: str) -> Report:
    """Read a report written by ``save_report``."""
    if not os.path.isfile(path):
        raise ArtifactNotFoundError("Report file not found", path)
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise CorruptArchiveError(f"Report is not valid JSON: {e}", path) from None
    kind = data.pop('kind', None)
    if kind not in REPORT_KINDS:
        raise MissingKeyError(f"Report has unknown or missing kind {kind!r}", path)
    try:
        return REPORT_KINDS[kind].from_dict(data)
    except KeyError as e:
        raise MissingKeyError(f"Report is missing key {e}", path) from None
