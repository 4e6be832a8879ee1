"""Self-describing binary container shared by feature and model files.

Layout (all integers little-endian):

    magic     8 bytes   b"SPKENV1\\n"
    version   u16       currently 1
    kind      u16 length + UTF-8 bytes ("features", "eigenspace", ...)
    meta      u32 length + UTF-8 JSON object (may be empty -> {})
    n_arrays  u16
    per array:
        name  u16 length + UTF-8 bytes
        ndim  u8
        dims  u64 * ndim
        data  float64 * prod(dims), C order

Arrays are written in sorted-name order so identical content yields
identical bytes.  Writes go through a temp file and ``os.replace`` so a
cancelled run never leaves a truncated file behind.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError

MAGIC = b"SPKENV1\n"
VERSION = 1


@dataclass
class Envelope:
    kind: str
    arrays: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)


def write_envelope(path, kind: str, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """Atomically write arrays and JSON metadata to ``path``."""
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    kind_bytes = kind.encode("utf-8")

    chunks = [MAGIC, struct.pack("<H", VERSION)]
    chunks.append(struct.pack("<H", len(kind_bytes)))
    chunks.append(kind_bytes)
    chunks.append(struct.pack("<I", len(meta_bytes)))
    chunks.append(meta_bytes)
    chunks.append(struct.pack("<H", len(arrays)))
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype=np.float64)
        name_bytes = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(name_bytes)))
        chunks.append(name_bytes)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(arr.tobytes())

    directory = os.path.dirname(os.fspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(b"".join(chunks))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"{self.path}: truncated file (wanted {n} more bytes)")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_envelope(path, expected_kind: str | None = None) -> Envelope:
    """Read an envelope file, optionally checking its kind tag."""
    with open(path, "rb") as fh:
        data = fh.read()
    r = _Reader(data, path)

    if r.take(len(MAGIC)) != MAGIC:
        raise FormatError(f"{path}: bad magic bytes, not an envelope file")
    (version,) = r.unpack("<H")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported envelope version {version}")

    (kind_len,) = r.unpack("<H")
    kind = r.take(kind_len).decode("utf-8")
    if expected_kind is not None and kind != expected_kind:
        raise FormatError(f"{path}: kind is '{kind}', expected '{expected_kind}'")

    (meta_len,) = r.unpack("<I")
    try:
        meta = json.loads(r.take(meta_len).decode("utf-8")) if meta_len else {}
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt metadata block: {exc}") from exc

    (n_arrays,) = r.unpack("<H")
    arrays: dict[str, np.ndarray] = {}
    for _ in range(n_arrays):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}Q")
        count = 1
        for d in shape:
            count *= d
        raw = r.take(8 * count)
        arrays[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()

    if r.pos != len(data):
        raise FormatError(f"{path}: {len(data) - r.pos} trailing bytes after payload")
    return Envelope(kind=kind, arrays=arrays, meta=meta)
