"""Canonical Huffman coding of quantized weight streams.

Two layer-level modes are supported. `split` codes the real and imaginary
centroid components as two independent streams, each symbolized by the
component's rank in the sorted list of distinct components. `indices` codes
the per-weight codebook index as a single stream. In both modes the CSR
column indices get their own stream and row_ptr stays raw.

Bit order contract: within each payload byte the first code bit occupies
the least-significant bit, and codes are emitted most-significant code bit
first. Trailing pad bits are zero.
"""

from __future__ import annotations

import heapq
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    CorruptStream,
    EmptyHistogram,
    IndexOutOfRange,
    UnknownSymbol,
)
from .model import COMPLEX_DTYPE
from .pruning import SparseComplexMatrix
from .quantization import Codebook, QuantizedLayer

ENTROPY_MODES = ("split", "indices")


@dataclass(frozen=True)
class SymbolHistogram:
    """Occurrence counts per non-negative integer symbol; zero counts omitted."""

    counts: dict[int, int]

    def __post_init__(self):
        counts = {int(s): int(c) for s, c in self.counts.items()}
        for s, c in counts.items():
            if s < 0:
                raise ValueError(f"symbol {s} is negative")
            if c < 1:
                raise ValueError(f"symbol {s} has count {c} < 1")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_symbols(cls, symbols) -> "SymbolHistogram":
        arr = np.asarray(symbols).reshape(-1)
        if arr.size == 0:
            return cls({})
        syms, counts = np.unique(arr, return_counts=True)
        return cls(dict(zip(syms.tolist(), counts.tolist())))

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def _reverse_bits(code: int, length: int) -> int:
    out = 0
    for _ in range(length):
        out = (out << 1) | (code & 1)
        code >>= 1
    return out


@dataclass(frozen=True, eq=False)
class HuffmanCodeTable:
    """Prefix code fully determined by per-symbol code lengths.

    Codes are canonical: symbols sorted by (length, symbol value) receive
    consecutive codes, so the lengths map alone reconstructs the code.
    """

    lengths: dict[int, int]

    def __post_init__(self):
        lengths = {int(s): int(l) for s, l in self.lengths.items()}
        if not lengths:
            raise CorruptStream("code table has no symbols")
        for s, l in lengths.items():
            if s < 0 or l < 1:
                raise CorruptStream(f"invalid table entry symbol={s} length={l}")
        if len(lengths) == 1:
            if next(iter(lengths.values())) != 1:
                raise CorruptStream("single-symbol alphabet must use length 1")
        else:
            max_len = max(lengths.values())
            kraft = sum(1 << (max_len - l) for l in lengths.values())
            if kraft != 1 << max_len:
                raise CorruptStream("code lengths violate Kraft equality")
        order = sorted(lengths.items(), key=lambda kv: (kv[1], kv[0]))
        codes: dict[int, tuple[int, int]] = {}
        enc: dict[int, tuple[int, int]] = {}
        code = 0
        prev_len = order[0][1]
        for i, (sym, l) in enumerate(order):
            if i:
                code = (code + 1) << (l - prev_len)
            codes[sym] = (code, l)
            enc[sym] = (_reverse_bits(code, l), l)
            prev_len = l
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "_order", tuple(sym for sym, _ in order))
        object.__setattr__(self, "_codes", codes)
        object.__setattr__(self, "_enc", enc)

    def code_of(self, symbol: int) -> tuple[int, int]:
        """(code value, length in bits) with the code written MSB-first."""
        return self._codes[symbol]

    @property
    def max_length(self) -> int:
        return max(self.lengths.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, HuffmanCodeTable):
            return NotImplemented
        return self.lengths == other.lengths


def build_table(hist: SymbolHistogram) -> HuffmanCodeTable:
    """Optimal prefix code lengths via the heap merge, then canonical codes.

    Merge ties break on (lower combined count, lower minimum contained
    symbol), which makes the lengths deterministic.
    """
    if not hist.counts:
        raise EmptyHistogram("cannot build a code table from an empty histogram")
    items = sorted(hist.counts.items())
    if len(items) == 1:
        return HuffmanCodeTable({items[0][0]: 1})
    # heap nodes: (count, min contained symbol, node id); leaf ids < len(items)
    heap = [(count, sym, i) for i, (sym, count) in enumerate(items)]
    heapq.heapify(heap)
    children: dict[int, tuple[int, int]] = {}
    next_id = len(items)
    while len(heap) > 1:
        ca, ma, ia = heapq.heappop(heap)
        cb, mb, ib = heapq.heappop(heap)
        children[next_id] = (ia, ib)
        heapq.heappush(heap, (ca + cb, min(ma, mb), next_id))
        next_id += 1
    lengths: dict[int, int] = {}
    stack = [(heap[0][2], 0)]
    while stack:
        node, depth = stack.pop()
        if node < len(items):
            lengths[items[node][0]] = depth
        else:
            a, b = children[node]
            stack.append((a, depth + 1))
            stack.append((b, depth + 1))
    return HuffmanCodeTable(lengths)


@dataclass(frozen=True, eq=False)
class EncodedStream:
    """A Huffman-coded symbol sequence: code table, bit count, packed payload."""

    table: HuffmanCodeTable
    bit_count: int
    payload: bytes

    def __post_init__(self):
        expect = (self.bit_count + 7) // 8
        if len(self.payload) != expect:
            raise CorruptStream(
                f"payload is {len(self.payload)} bytes, expected {expect} "
                f"for {self.bit_count} bits"
            )
        pad = expect * 8 - self.bit_count
        if pad and (self.payload[-1] >> (8 - pad)):
            raise CorruptStream("trailing pad bits are not zero")

    def __eq__(self, other) -> bool:
        if not isinstance(other, EncodedStream):
            return NotImplemented
        return (
            self.table == other.table
            and self.bit_count == other.bit_count
            and self.payload == other.payload
        )


def encode(symbols, table: HuffmanCodeTable) -> EncodedStream:
    """Pack symbols into a bit stream using `table`."""
    enc = table._enc
    acc = 0
    acc_bits = 0
    total = 0
    out = bytearray()
    seq = symbols.tolist() if isinstance(symbols, np.ndarray) else symbols
    for s in seq:
        try:
            rev, length = enc[s]
        except KeyError:
            raise UnknownSymbol(f"symbol {s!r} is not in the code table") from None
        acc |= rev << acc_bits
        acc_bits += length
        total += length
        while acc_bits >= 8:
            out.append(acc & 0xFF)
            acc >>= 8
            acc_bits -= 8
    if acc_bits:
        out.append(acc & 0xFF)
    return EncodedStream(table, total, bytes(out))


def decode(stream: EncodedStream, expected_count: int) -> np.ndarray:
    """Recover exactly `expected_count` symbols; the inverse of encode."""
    out = np.empty(int(expected_count), dtype=np.uint32)
    if expected_count == 0:
        return out
    table = stream.table
    order = table._order
    # canonical decode tables: per code length, the first code, the slice
    # start into `order`, and the number of codes of that length
    by_len: dict[int, tuple[int, int, int]] = {}
    pos = 0
    for length in sorted(set(table.lengths.values())):
        first = None
        count = 0
        for sym in order[pos:]:
            if table.lengths[sym] != length:
                break
            if first is None:
                first = table.code_of(sym)[0]
            count += 1
        by_len[length] = (first, pos, count)
        pos += count
    max_len = table.max_length
    payload = stream.payload
    code = 0
    code_len = 0
    k = 0
    for bit_pos in range(stream.bit_count):
        bit = (payload[bit_pos >> 3] >> (bit_pos & 7)) & 1
        code = (code << 1) | bit
        code_len += 1
        entry = by_len.get(code_len)
        if entry is not None:
            first, start, count = entry
            offset = code - first
            if 0 <= offset < count:
                out[k] = order[start + offset]
                k += 1
                if k == expected_count:
                    return out
                code = 0
                code_len = 0
                continue
        if code_len >= max_len:
            raise CorruptStream(f"invalid code at bit {bit_pos}")
    raise CorruptStream(
        f"bit stream exhausted after {k} of {expected_count} symbols"
    )


@dataclass(frozen=True, eq=False)
class LayerStreams:
    """Entropy-coded representation of one quantized layer."""

    mode: str
    col_idx_stream: EncodedStream
    index_stream: EncodedStream | None = None
    real_dict: np.ndarray | None = None
    imag_dict: np.ndarray | None = None
    real_stream: EncodedStream | None = None
    imag_stream: EncodedStream | None = None

    def __post_init__(self):
        if self.mode not in ENTROPY_MODES:
            raise ValueError(f"mode must be one of {ENTROPY_MODES}, got {self.mode!r}")
        if self.mode == "indices":
            if self.index_stream is None:
                raise ValueError("indices mode requires an index stream")
        else:
            missing = [
                n
                for n in ("real_dict", "imag_dict", "real_stream", "imag_stream")
                if getattr(self, n) is None
            ]
            if missing:
                raise ValueError(f"split mode requires {missing}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, LayerStreams):
            return NotImplemented
        if self.mode != other.mode:
            return False
        if self.mode == "indices":
            return (
                self.col_idx_stream == other.col_idx_stream
                and self.index_stream == other.index_stream
            )
        return (
            self.col_idx_stream == other.col_idx_stream
            and np.array_equal(self.real_dict.view(np.uint32), other.real_dict.view(np.uint32))
            and np.array_equal(self.imag_dict.view(np.uint32), other.imag_dict.view(np.uint32))
            and self.real_stream == other.real_stream
            and self.imag_stream == other.imag_stream
        )


def _encode_array(arr: np.ndarray) -> EncodedStream:
    return encode(arr, build_table(SymbolHistogram.from_symbols(arr)))


def encode_quantized(q: QuantizedLayer, mode: str) -> LayerStreams:
    """Entropy-code a quantized layer in the given mode.

    Requires at least one stored weight; empty layers have nothing to code.
    """
    if mode not in ENTROPY_MODES:
        raise ValueError(f"mode must be one of {ENTROPY_MODES}, got {mode!r}")
    if q.nnz == 0:
        raise EmptyHistogram("layer has no stored weights to code")
    col_stream = _encode_array(q.col_idx)
    if mode == "indices":
        return LayerStreams("indices", col_stream, index_stream=_encode_array(q.indices))
    cent = q.codebook.centroids
    real_dict = np.unique(cent.real)
    imag_dict = np.unique(cent.imag)
    real_syms = np.searchsorted(real_dict, cent.real[q.indices]).astype(np.uint32)
    imag_syms = np.searchsorted(imag_dict, cent.imag[q.indices]).astype(np.uint32)
    return LayerStreams(
        "split",
        col_stream,
        real_dict=real_dict,
        imag_dict=imag_dict,
        real_stream=_encode_array(real_syms),
        imag_stream=_encode_array(imag_syms),
    )


def decode_quantized(
    streams: LayerStreams,
    rows: int,
    cols: int,
    row_ptr: np.ndarray,
    codebook: Codebook,
) -> SparseComplexMatrix:
    """Decode a layer back to its sparse, dequantized form."""
    nnz = int(np.asarray(row_ptr)[-1])
    col_idx = decode(streams.col_idx_stream, nnz)
    if streams.mode == "indices":
        indices = decode(streams.index_stream, nnz)
        if nnz and int(indices.max()) >= len(codebook):
            raise IndexOutOfRange(
                f"decoded index {int(indices.max())} out of range for "
                f"{len(codebook)}-entry codebook"
            )
        values = codebook.centroids[indices]
    else:
        real_syms = decode(streams.real_stream, nnz)
        imag_syms = decode(streams.imag_stream, nnz)
        if nnz and (
            int(real_syms.max()) >= streams.real_dict.size
            or int(imag_syms.max()) >= streams.imag_dict.size
        ):
            raise IndexOutOfRange("decoded component rank out of dictionary range")
        values = np.empty(nnz, dtype=COMPLEX_DTYPE)
        values.real = streams.real_dict[real_syms]
        values.imag = streams.imag_dict[imag_syms]
    return SparseComplexMatrix(rows, cols, row_ptr, col_idx, values)


# --- serialization ---------------------------------------------------------
# table: u16 symbol count, then (u16 symbol, u8 length) pairs sorted by
# symbol; stream: table + u64 bit count + payload. Little-endian throughout.


def serialize_table(table: HuffmanCodeTable) -> bytes:
    items = sorted(table.lengths.items())
    if len(items) > 0xFFFF:
        raise ValueError(f"{len(items)} symbols exceed the u16 table limit")
    out = bytearray(struct.pack("<H", len(items)))
    for sym, length in items:
        if sym > 0xFFFF:
            raise ValueError(f"symbol {sym} exceeds the u16 table limit")
        if length > 0xFF:
            raise ValueError(f"code length {length} exceeds 255 bits")
        out += struct.pack("<HB", sym, length)
    return bytes(out)


def parse_table(buf: bytes, off: int) -> tuple[HuffmanCodeTable, int]:
    if off + 2 > len(buf):
        raise CorruptStream("table truncated")
    (count,) = struct.unpack_from("<H", buf, off)
    off += 2
    if off + 3 * count > len(buf):
        raise CorruptStream("table truncated")
    lengths = {}
    for _ in range(count):
        sym, length = struct.unpack_from("<HB", buf, off)
        off += 3
        lengths[sym] = length
    return HuffmanCodeTable(lengths), off


def serialize_stream(stream: EncodedStream) -> bytes:
    return serialize_table(stream.table) + struct.pack("<Q", stream.bit_count) + stream.payload


def parse_stream(buf: bytes, off: int) -> tuple[EncodedStream, int]:
    table, off = parse_table(buf, off)
    if off + 8 > len(buf):
        raise CorruptStream("stream header truncated")
    (bit_count,) = struct.unpack_from("<Q", buf, off)
    off += 8
    nbytes = (bit_count + 7) // 8
    if off + nbytes > len(buf):
        raise CorruptStream("stream payload truncated")
    payload = bytes(buf[off : off + nbytes])
    off += nbytes
    return EncodedStream(table, bit_count, payload), off
