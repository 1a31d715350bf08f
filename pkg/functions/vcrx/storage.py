"""
Storage Module
Dataset files, training history and key-experiment CSVs, and metrics documents.
Every output embeds the run's config digest and seed.
"""

import csv
import json
import logging
import os
import struct
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import FileFormatError
from .sources import SampleBatch

logger = logging.getLogger(__name__)

DATA_MAGIC = b"VCRXDATA"
DATA_VERSION = 1
_COUNTS = struct.Struct("<4Q")
_U32 = struct.Struct("<I")


def ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def format_value(value) -> str:
    """Shortest round-trip text for floats, empty for missing values."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


################### datasets ###################

def write_dataset(path: str, data: SampleBatch, meta: Mapping[str, object]) -> None:
    """Magic, u32 version, u64 (rows, dx, dy, dz), u32-prefixed JSON metadata, then x, y, z as <f8."""
    ensure_parent(path)
    meta_bytes = json.dumps(dict(meta), sort_keys=True, separators=(",", ":")).encode("utf-8")
    rows = len(data)
    dx, dy, dz = data.dims
    with open(path, "wb") as fh:
        fh.write(DATA_MAGIC)
        fh.write(_U32.pack(DATA_VERSION))
        fh.write(_COUNTS.pack(rows, dx, dy, dz))
        fh.write(_U32.pack(len(meta_bytes)))
        fh.write(meta_bytes)
        for block in (data.x, data.y, data.z):
            fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())
    logger.info(f"Wrote dataset {path}: rows={rows} dims=({dx}, {dy}, {dz})")


def read_dataset(path: str) -> Tuple[SampleBatch, Dict[str, object]]:
    """Inverse of write_dataset.

    Raises:
        FileFormatError: On a bad magic, version or payload size
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    header_len = len(DATA_MAGIC) + _U32.size + _COUNTS.size + _U32.size
    if len(raw) < header_len or raw[:len(DATA_MAGIC)] != DATA_MAGIC:
        raise FileFormatError(f"{path}: not a dataset file")
    offset = len(DATA_MAGIC)
    (version,) = _U32.unpack_from(raw, offset)
    if version != DATA_VERSION:
        raise FileFormatError(f"{path}: unsupported dataset version {version}")
    offset += _U32.size
    rows, dx, dy, dz = _COUNTS.unpack_from(raw, offset)
    offset += _COUNTS.size
    (meta_len,) = _U32.unpack_from(raw, offset)
    offset += _U32.size
    try:
        meta = json.loads(raw[offset:offset + meta_len].decode("utf-8"))
    except ValueError as e:
        raise FileFormatError(f"{path}: corrupt metadata block: {e}") from e
    offset += meta_len

    expected = 8 * rows * (dx + dy + dz)
    if len(raw) - offset != expected:
        raise FileFormatError(f"{path}: payload has {len(raw) - offset} bytes, header declares {expected}")
    blocks = []
    for width in (dx, dy, dz):
        nbytes = 8 * rows * width
        blocks.append(np.frombuffer(raw[offset:offset + nbytes], dtype="<f8").astype(np.float64).reshape(rows, width))
        offset += nbytes
    return SampleBatch(x=blocks[0], y=blocks[1], z=blocks[2]), meta


################### text outputs ###################

def _provenance(digest: str, seed: int) -> str:
    return f"# digest={digest} seed={seed}"


def write_csv(path: str, columns: Sequence[str], rows: Iterable[Sequence], digest: str, seed: int) -> None:
    ensure_parent(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(_provenance(digest, seed) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    logger.info(f"Wrote {path}")


def read_csv(path: str) -> Tuple[Dict[str, str], list]:
    """Returns (provenance fields, list of row dicts)."""
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith("# "):
            raise FileFormatError(f"{path}: missing provenance line")
        provenance = dict(item.split("=", 1) for item in first[2:].split())
        return provenance, list(csv.DictReader(fh))


def write_metrics(path: str, metrics: Mapping[str, object], digest: str, seed: int) -> None:
    """Flat `key = value` document, keys sorted."""
    ensure_parent(path)
    values = dict(metrics)
    values.update(digest=digest, seed=seed)
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(values):
            fh.write(f"{key} = {format_value(values[key])}\n")
    logger.info(f"Wrote metrics {path}")


def read_metrics(path: str) -> Dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, sep, value = line.partition(" = ")
            if not sep:
                raise FileFormatError(f"{path}: malformed line {line!r}")
            out[key] = value
    return out


def model_paths(prefix: str, shared: bool, with_predictor: bool) -> Dict[str, Optional[str]]:
    """File names for a training run's models under a common prefix."""
    return {
        "encoder_x": f"{prefix}.encoder.model" if shared else f"{prefix}.encoder_x.model",
        "encoder_y": None if shared else f"{prefix}.encoder_y.model",
        "predictor": f"{prefix}.predictor.model" if with_predictor else None,
    }
