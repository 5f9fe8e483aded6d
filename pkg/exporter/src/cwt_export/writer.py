"""Standalone CWT writer.

Implements the raw complex-weight interchange format directly so this tool
only couples to the file contract, not to any reader implementation:

  magic "CWT0" | version u32 (=1) | layer count u32 | reserved u32 (=0)
  per layer: name length u16 | UTF-8 name | rank u8 | extents u32 x rank |
             weights as interleaved (re f32, im f32) x n, row-major

Little-endian throughout, no padding, no compression.
"""

from __future__ import annotations

import struct

import numpy as np

CWT_MAGIC = b"CWT0"
CWT_VERSION = 1


def interleave_f32(real: np.ndarray, imag: np.ndarray) -> bytes:
    """Interleaved (re, im) float32 pairs in row-major order, bit-exact."""
    pair = np.empty((real.size, 2), dtype="<f4")
    pair[:, 0] = real.reshape(-1)
    pair[:, 1] = imag.reshape(-1)
    return pair.tobytes()


def write_cwt(layers, path) -> None:
    """Write [(name, shape, real f32 array, imag f32 array), ...] to a CWT file."""
    chunks = [struct.pack("<4sIII", CWT_MAGIC, CWT_VERSION, len(layers), 0)]
    for name, shape, real, imag in layers:
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", len(shape)))
        chunks.append(np.asarray(shape, dtype="<u4").tobytes())
        chunks.append(interleave_f32(real, imag))
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))
