"""Binary checkpoint format for ParameterMap.

Layout (all integers little-endian)::

    magic      8 bytes   b"HATEFLCK"
    version    uint16
    spec hash  32 bytes  sha256 of the ModelSpec, zeros when unknown
    count      uint32
    entries    count x (uint16 key length, utf-8 key, uint64 n, n x float32)

Entries are written in key order, so equal maps give identical files.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from hatefl.errors import CheckpointError
from hatefl.layout import ModelSpec
from hatefl.params import ParameterMap

MAGIC = b"HATEFLCK"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sH32sI")
_NO_SPEC = bytes(32)


def encode(params: ParameterMap, spec: ModelSpec | None = None) -> bytes:
    spec_hash = bytes.fromhex(spec.digest()) if spec is not None else _NO_SPEC
    chunks = [_HEADER.pack(MAGIC, FORMAT_VERSION, spec_hash, len(params))]
    for key, arr in params.items():
        raw_key = key.encode("utf-8")
        chunks.append(struct.pack("<H", len(raw_key)))
        chunks.append(raw_key)
        chunks.append(struct.pack("<Q", len(arr)))
        chunks.append(arr.astype("<f4").tobytes())
    return b"".join(chunks)


def decode(blob: bytes, expected_spec: ModelSpec | None = None) -> tuple[ParameterMap, str | None]:
    """Returns the map and the stored spec hash (hex, or None if absent)."""
    if len(blob) < _HEADER.size:
        raise CheckpointError("truncated header")
    magic, version, spec_hash, count = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise CheckpointError("not a checkpoint file")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    stored = None if spec_hash == _NO_SPEC else spec_hash.hex()
    if expected_spec is not None and stored is not None and stored != expected_spec.digest():
        raise CheckpointError("checkpoint was written for a different model spec")

    pos = _HEADER.size
    entries = {}
    try:
        for _ in range(count):
            (klen,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            key = blob[pos:pos + klen].decode("utf-8")
            pos += klen
            (n,) = struct.unpack_from("<Q", blob, pos)
            pos += 8
            end = pos + 4 * n
            if end > len(blob):
                raise CheckpointError(f"truncated entry {key!r}")
            entries[key] = np.frombuffer(blob, dtype="<f4", count=n, offset=pos)
            pos = end
    except struct.error as exc:
        raise CheckpointError(f"truncated checkpoint: {exc}") from exc
    if pos != len(blob):
        raise CheckpointError("trailing bytes after last entry")
    return ParameterMap(entries), stored


def save(path: str | Path, params: ParameterMap, spec: ModelSpec | None = None) -> None:
    Path(path).write_bytes(encode(params, spec))


def load(path: str | Path, expected_spec: ModelSpec | None = None) -> tuple[ParameterMap, str | None]:
    return decode(Path(path).read_bytes(), expected_spec)
