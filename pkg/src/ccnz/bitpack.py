"""Fixed-width bit packing for codebook index arrays.

Values are packed at `width` bits each, value bits least-significant first,
stream bit k landing in bit (k mod 8) of byte (k div 8). Pad bits are zero.
"""

from __future__ import annotations

import math

import numpy as np


def index_bit_width(m: int) -> int:
    """Bits per stored index for an m-entry codebook: ceil(log2 m), minimum 1."""
    if m < 1:
        raise ValueError(f"codebook size must be >= 1, got {m}")
    return max(1, math.ceil(math.log2(m)))


def pack_uints(values, width: int) -> bytes:
    if not 1 <= width <= 32:
        raise ValueError(f"width must be in [1, 32], got {width}")
    v = np.asarray(values, dtype=np.uint64).reshape(-1)
    if v.size == 0:
        return b""
    if int(v.max()) >> width:
        raise ValueError(f"value {int(v.max())} does not fit in {width} bits")
    bits = np.zeros(v.size * width, dtype=np.uint8)
    for j in range(width):
        bits[j::width] = (v >> j) & 1
    return np.packbits(bits, bitorder="little").tobytes()


def unpack_uints(data: bytes, width: int, count: int) -> np.ndarray:
    if not 1 <= width <= 32:
        raise ValueError(f"width must be in [1, 32], got {width}")
    if count == 0:
        return np.zeros(0, dtype=np.uint32)
    need = (count * width + 7) // 8
    if len(data) < need:
        raise ValueError(f"need {need} bytes for {count} x {width}-bit values, got {len(data)}")
    raw = np.frombuffer(data, dtype=np.uint8, count=need)
    bits = np.unpackbits(raw, bitorder="little", count=count * width).astype(np.uint64)
    out = np.zeros(count, dtype=np.uint64)
    for j in range(width):
        out |= bits[j::width] << np.uint64(j)
    return out.astype(np.uint32)


def packed_byte_length(count: int, width: int) -> int:
    return (count * width + 7) // 8
