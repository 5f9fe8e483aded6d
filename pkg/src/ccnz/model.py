"""In-memory model of complex weight tensors and the CWT raw file format.

A CWT file is the raw-weight interchange format: a 16-byte header followed
by one record per layer, every value stored as an interleaved pair of
little-endian IEEE-754 binary32 components (real, imaginary).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CorruptStream,
    DuplicateLayer,
    IoFailure,
    MagicMismatch,
    NonFiniteWeight,
    TruncatedFile,
    VersionUnsupported,
)

CWT_MAGIC = b"CWT0"
CWT_VERSION = 1
BYTES_PER_WEIGHT = 8  # two binary32 components

COMPLEX_DTYPE = np.dtype("<c8")

_HEADER = struct.Struct("<4sIII")  # magic, version, layer count, reserved


def _frozen_complex64(values) -> np.ndarray:
    """Return a flat, C-contiguous, read-only complex64 copy of `values`."""
    arr = np.asarray(values, dtype=COMPLEX_DTYPE).reshape(-1)
    if arr.flags.writeable or not arr.flags.c_contiguous or arr.base is not None:
        arr = np.ascontiguousarray(arr).copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ComplexTensor:
    """A named dense tensor of complex weights, flattened row-major."""

    name: str
    shape: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        shape = tuple(int(e) for e in self.shape)
        if not shape or any(e < 1 for e in shape):
            raise CorruptStream(f"layer {self.name!r}: invalid shape {shape}")
        values = _frozen_complex64(self.values)
        if values.size != math.prod(shape):
            raise CorruptStream(
                f"layer {self.name!r}: shape {shape} does not match "
                f"{values.size} stored values"
            )
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise NonFiniteWeight(
                f"layer {self.name!r}: non-finite weight at flat index {int(bad[0])}"
            )
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "values", values)

    @property
    def weight_count(self) -> int:
        return self.values.size

    def __eq__(self, other) -> bool:
        """Bit-exact equality: name, shape, and every component's bit pattern."""
        if not isinstance(other, ComplexTensor):
            return NotImplemented
        return (
            self.name == other.name
            and self.shape == other.shape
            and np.array_equal(self.values.view(np.uint64), other.values.view(np.uint64))
        )


@dataclass(eq=False)
class RawModel:
    """An ordered collection of uniquely named layers.

    `metadata` is in-memory bookkeeping only (source framework, export time);
    the CWT format does not persist it, so it is excluded from equality.
    """

    layers: list[ComplexTensor] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        _check_unique_names(self.layers)

    def layer(self, name: str) -> ComplexTensor:
        for t in self.layers:
            if t.name == name:
                return t
        raise KeyError(name)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RawModel):
            return NotImplemented
        return self.layers == other.layers


def _check_unique_names(layers) -> None:
    seen = set()
    for t in layers:
        if t.name in seen:
            raise DuplicateLayer(f"duplicate layer name {t.name!r}")
        seen.add(t.name)


def total_raw_bytes(model: RawModel) -> int:
    """Raw weight payload in bytes: 8 per weight, headers excluded."""
    return sum(BYTES_PER_WEIGHT * t.weight_count for t in model.layers)


def save_raw(model: RawModel, path) -> None:
    """Write `model` to a CWT file; round-trips bit-exactly through load_raw."""
    _check_unique_names(model.layers)
    chunks = [_HEADER.pack(CWT_MAGIC, CWT_VERSION, len(model.layers), 0)]
    for t in model.layers:
        name = t.name.encode("utf-8")
        if len(name) > 0xFFFF:
            raise CorruptStream(f"layer name too long ({len(name)} bytes)")
        if len(t.shape) > 0xFF:
            raise CorruptStream(f"layer {t.name!r}: rank {len(t.shape)} exceeds 255")
        chunks.append(struct.pack("<H", len(name)))
        chunks.append(name)
        chunks.append(struct.pack("<B", len(t.shape)))
        chunks.append(np.asarray(t.shape, dtype="<u4").tobytes())
        chunks.append(t.values.tobytes())
    try:
        with open(path, "wb") as fh:
            fh.write(b"".join(chunks))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


class _Cursor:
    """Sequential reader over a byte buffer that raises on short reads."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFile(
                f"needed {n} bytes at offset {self.pos}, file has {len(self.data)}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def done(self) -> bool:
        return self.pos == len(self.data)


def load_raw(path) -> RawModel:
    """Read a CWT file back into a RawModel with bit-level value fidelity."""
    with open(path, "rb") as fh:
        data = fh.read()
    cur = _Cursor(data)
    magic, version, n_layers, _reserved = _HEADER.unpack(cur.take(_HEADER.size))
    if magic != CWT_MAGIC:
        raise MagicMismatch(f"not a CWT file (magic {magic!r})")
    if version != CWT_VERSION:
        raise VersionUnsupported(f"CWT version {version} unsupported (expected {CWT_VERSION})")
    layers = []
    for _ in range(n_layers):
        (name_len,) = struct.unpack("<H", cur.take(2))
        name = cur.take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<B", cur.take(1))
        if rank == 0:
            raise CorruptStream(f"layer {name!r}: rank 0")
        shape = tuple(int(e) for e in np.frombuffer(cur.take(4 * rank), dtype="<u4"))
        if any(e < 1 for e in shape):
            raise CorruptStream(f"layer {name!r}: zero extent in shape {shape}")
        n = math.prod(shape)
        values = np.frombuffer(cur.take(BYTES_PER_WEIGHT * n), dtype=COMPLEX_DTYPE)
        layers.append(ComplexTensor(name, shape, values))
    if not cur.done():
        raise CorruptStream(f"{len(data) - cur.pos} trailing bytes after last layer")
    return RawModel(layers)
