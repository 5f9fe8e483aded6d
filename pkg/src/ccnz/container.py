"""The CCNZ compressed container and the end-to-end pipeline.

compress() chains prune -> quantize -> huffman over every layer; disabled
stages pass through (no pruning means threshold 0, no quantization stores
exact sparse values, no huffman stores bit-packed indices). Every layer
record in the file is independently decodable.

File layout (little-endian; full byte-level grammar in docs/FORMATS.md):
  magic "CCNZ" | version u16 | flags u16 | layer count u32 | crc32 u32
  config blob length u32 | canonical-JSON config echo
  per layer: name, shape, rows/cols, stage flags, entropy mode, cluster
  count, then length-prefixed sections in fixed order (row_ptr, col_idx,
  codebook, value streams/dictionaries).
The CRC32 covers everything after the 16-byte header.
"""

from __future__ import annotations

import fnmatch
import json
import os
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import huffman
from .bitpack import index_bit_width, pack_uints, unpack_uints
from .errors import (
    CcnzError,
    ChecksumMismatch,
    ConfigError,
    CorruptStream,
    IoFailure,
    MagicMismatch,
    PipelineError,
    TruncatedFile,
    VersionUnsupported,
)
from .model import COMPLEX_DTYPE, ComplexTensor, RawModel
from .pruning import PruneConfig, SparseComplexMatrix, densify, empty_sparse, prune
from .quantization import (
    DEFAULT_MAX_ITERS,
    DEFAULT_REL_TOL,
    Codebook,
    InitScheme,
    KMeansReport,
    QuantizedLayer,
    dequantize_layer,
    quantize_layer,
)

CCNZ_MAGIC = b"CCNZ"
CCNZ_VERSION = 1
HEADER = struct.Struct("<4sHHII")  # magic, version, flags, layer count, crc32

STAGES = ("prune", "quantize", "huffman")
ENTROPY_CHOICES = ("split", "indices", "none")

FLAG_PRUNED = 1
FLAG_QUANTIZED = 2
FLAG_HUFFMAN = 4

_MODE_CODES = {"none": 0, "split": 1, "indices": 2}
_MODE_NAMES = {v: k for k, v in _MODE_CODES.items()}

# section identifiers, written in this order
SEC_ROW_PTR = 1
SEC_COL_IDX_RAW = 2
SEC_COL_IDX_HUFF = 3
SEC_CODEBOOK = 4
SEC_VALUES_RAW = 5
SEC_INDICES_PACKED = 6
SEC_INDEX_STREAM = 7
SEC_DICT_REAL = 8
SEC_DICT_IMAG = 9
SEC_REAL_STREAM = 10
SEC_IMAG_STREAM = 11

SECTION_NAMES = {
    SEC_ROW_PTR: "row_ptr",
    SEC_COL_IDX_RAW: "col_idx",
    SEC_COL_IDX_HUFF: "col_idx_stream",
    SEC_CODEBOOK: "codebook",
    SEC_VALUES_RAW: "values",
    SEC_INDICES_PACKED: "indices_packed",
    SEC_INDEX_STREAM: "index_stream",
    SEC_DICT_REAL: "dict_real",
    SEC_DICT_IMAG: "dict_imag",
    SEC_REAL_STREAM: "real_stream",
    SEC_IMAG_STREAM: "imag_stream",
}


@dataclass(frozen=True)
class ClusterSpec:
    """Default cluster count plus fnmatch-pattern overrides, first match wins."""

    default: int = 256
    overrides: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        if not 1 <= int(self.default) <= 65535:
            raise ConfigError(f"default cluster count {self.default} out of [1, 65535]")
        over = tuple((str(p), int(c)) for p, c in self.overrides)
        for pattern, count in over:
            if not 1 <= count <= 65535:
                raise ConfigError(f"cluster count {count} for {pattern!r} out of [1, 65535]")
        object.__setattr__(self, "default", int(self.default))
        object.__setattr__(self, "overrides", over)

    def resolve(self, layer_name: str) -> int:
        for pattern, count in self.overrides:
            if fnmatch.fnmatchcase(layer_name, pattern):
                return count
        return self.default

    @classmethod
    def parse(cls, spec: str) -> "ClusterSpec":
        """Parse a CLI spec like "100" or "conv*=100,dense*=256" or "64,conv*=100"."""
        default = 256
        overrides = []
        for item in spec.split(","):
            item = item.strip()
            if not item:
                continue
            if "=" in item:
                pattern, _, count = item.partition("=")
                overrides.append((pattern.strip(), int(count)))
            else:
                default = int(item)
        return cls(default, tuple(overrides))


@dataclass(frozen=True)
class PipelineConfig:
    prune: PruneConfig = PruneConfig()
    threshold_overrides: tuple[tuple[str, float], ...] = ()
    clusters: ClusterSpec = ClusterSpec()
    init: InitScheme = InitScheme.linear_negative()
    kmeans_max_iters: int = DEFAULT_MAX_ITERS
    kmeans_rel_tol: float = DEFAULT_REL_TOL
    entropy_mode: str = "split"
    stages: frozenset[str] = frozenset(STAGES)

    def __post_init__(self):
        stages = frozenset(self.stages)
        if not stages <= set(STAGES):
            raise ConfigError(f"unknown stages {sorted(stages - set(STAGES))}")
        if self.entropy_mode not in ENTROPY_CHOICES:
            raise ConfigError(f"entropy_mode must be one of {ENTROPY_CHOICES}")
        # "none" and a disabled huffman stage are the same statement; keep
        # both fields consistent so the config echo is canonical
        mode = self.entropy_mode
        if "huffman" not in stages:
            mode = "none"
        if mode == "none":
            stages = stages - {"huffman"}
        if "huffman" in stages and "quantize" not in stages:
            raise ConfigError("huffman coding requires the quantize stage")
        if self.kmeans_max_iters < 1:
            raise ConfigError("kmeans_max_iters must be >= 1")
        if not 0.0 <= self.kmeans_rel_tol < 1.0:
            raise ConfigError("kmeans_rel_tol must be in [0, 1)")
        object.__setattr__(self, "stages", stages)
        object.__setattr__(self, "entropy_mode", mode)
        object.__setattr__(
            self,
            "threshold_overrides",
            tuple((str(p), float(t)) for p, t in self.threshold_overrides),
        )

    def threshold_for(self, layer_name: str) -> float:
        if "prune" not in self.stages:
            return 0.0
        for pattern, t in self.threshold_overrides:
            if fnmatch.fnmatchcase(layer_name, pattern):
                return t
        return self.prune.threshold


def config_to_dict(cfg: PipelineConfig) -> dict:
    return {
        "version": 1,
        "prune": {"threshold": cfg.prune.threshold, "key": cfg.prune.key},
        "threshold_overrides": [[p, t] for p, t in cfg.threshold_overrides],
        "clusters": {
            "default": cfg.clusters.default,
            "overrides": [[p, c] for p, c in cfg.clusters.overrides],
        },
        "init": {"kind": cfg.init.kind, "seed": cfg.init.seed},
        "kmeans": {"max_iters": cfg.kmeans_max_iters, "rel_tol": cfg.kmeans_rel_tol},
        "entropy_mode": cfg.entropy_mode,
        "stages": sorted(cfg.stages),
    }


def config_from_dict(d: dict) -> PipelineConfig:
    try:
        return PipelineConfig(
            prune=PruneConfig(d["prune"]["threshold"], d["prune"]["key"]),
            threshold_overrides=tuple((p, t) for p, t in d["threshold_overrides"]),
            clusters=ClusterSpec(
                d["clusters"]["default"],
                tuple((p, c) for p, c in d["clusters"]["overrides"]),
            ),
            init=InitScheme(d["init"]["kind"], d["init"]["seed"]),
            kmeans_max_iters=d["kmeans"]["max_iters"],
            kmeans_rel_tol=d["kmeans"]["rel_tol"],
            entropy_mode=d["entropy_mode"],
            stages=frozenset(d["stages"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptStream(f"invalid config echo: {exc}") from exc


@dataclass(eq=False)
class CompressedLayer:
    """One layer of a compressed model; exactly one value representation is set."""

    name: str
    original_shape: tuple[int, ...]
    rows: int
    cols: int
    row_ptr: np.ndarray
    quantized: bool
    entropy_mode: str  # none | split | indices
    col_idx: np.ndarray | None = None
    codebook: Codebook | None = None
    values: np.ndarray | None = None
    packed_indices: bytes | None = None
    streams: huffman.LayerStreams | None = None
    kmeans_report: KMeansReport | None = field(default=None, compare=False)

    @property
    def nnz(self) -> int:
        return int(self.row_ptr[-1])

    @property
    def cluster_count(self) -> int:
        return len(self.codebook) if self.codebook is not None else 0

    @property
    def index_bits(self) -> int:
        return index_bit_width(self.cluster_count) if self.cluster_count else 0


@dataclass(eq=False)
class CompressedModel:
    config: PipelineConfig
    layers: list[CompressedLayer]


# --- pipeline ---------------------------------------------------------------


def _compress_layer(tensor: ComplexTensor, cfg: PipelineConfig) -> CompressedLayer:
    stage = "prune"
    try:
        sparse = prune(tensor, PruneConfig(cfg.threshold_for(tensor.name), cfg.prune.key))
        rec = CompressedLayer(
            name=tensor.name,
            original_shape=tensor.shape,
            rows=sparse.rows,
            cols=sparse.cols,
            row_ptr=sparse.row_ptr,
            quantized=False,
            entropy_mode="none",
            col_idx=sparse.col_idx,
        )
        if "quantize" not in cfg.stages:
            rec.values = sparse.values
            return rec
        stage = "quantize"
        q, report = quantize_layer(
            sparse,
            cfg.clusters.resolve(tensor.name),
            cfg.init,
            max_iters=cfg.kmeans_max_iters,
            rel_tol=cfg.kmeans_rel_tol,
            original_shape=tensor.shape,
        )
        rec.quantized = True
        rec.codebook = q.codebook
        rec.kmeans_report = report
        if q.nnz == 0:
            rec.col_idx = None
            return rec
        if "huffman" in cfg.stages:
            stage = "huffman"
            rec.entropy_mode = cfg.entropy_mode
            rec.streams = huffman.encode_quantized(q, cfg.entropy_mode)
            rec.col_idx = None
        else:
            rec.packed_indices = pack_uints(q.indices, index_bit_width(len(q.codebook)))
        return rec
    except CcnzError as exc:
        raise type(exc)(f"layer {tensor.name!r} [{stage}]: {exc}") from exc
    except Exception as exc:
        raise PipelineError(f"layer {tensor.name!r} [{stage}]: {exc}") from exc


def compress(model: RawModel, cfg: PipelineConfig, workers: int | None = None) -> CompressedModel:
    """Run the enabled stages over every layer.

    Layers are independent; `workers` only bounds the thread pool and never
    changes the result.
    """
    if workers is None:
        workers = os.cpu_count() or 1
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    if workers == 1 or len(model.layers) <= 1:
        records = [_compress_layer(t, cfg) for t in model.layers]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(lambda t: _compress_layer(t, cfg), model.layers))
    return CompressedModel(cfg, records)


def _layer_sparse(rec: CompressedLayer) -> SparseComplexMatrix:
    nnz = rec.nnz
    if nnz == 0:
        return empty_sparse(rec.rows, rec.cols)
    if rec.values is not None:
        return SparseComplexMatrix(rec.rows, rec.cols, rec.row_ptr, rec.col_idx, rec.values)
    if rec.streams is not None:
        return huffman.decode_quantized(
            rec.streams, rec.rows, rec.cols, rec.row_ptr, rec.codebook
        )
    indices = unpack_uints(rec.packed_indices, rec.index_bits, nnz)
    q = QuantizedLayer(
        rec.rows, rec.cols, rec.row_ptr, rec.col_idx, rec.codebook, indices, rec.original_shape
    )
    return dequantize_layer(q)


def decompress(model: CompressedModel) -> RawModel:
    """Reconstruct every layer: zeros at pruned positions, shared values elsewhere."""
    tensors = []
    for rec in model.layers:
        try:
            sparse = _layer_sparse(rec)
            tensors.append(densify(sparse, rec.original_shape, name=rec.name))
        except CcnzError as exc:
            raise type(exc)(f"layer {rec.name!r}: {exc}") from exc
        except ValueError as exc:
            raise CorruptStream(f"layer {rec.name!r}: {exc}") from exc
    return RawModel(tensors)


# --- serialization ----------------------------------------------------------


def _f32_pairs_bytes(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype=COMPLEX_DTYPE).tobytes()


def _dict_bytes(d: np.ndarray) -> bytes:
    if d.size > 0xFFFF:
        raise ValueError(f"component dictionary too large ({d.size})")
    return struct.pack("<H", d.size) + np.ascontiguousarray(d, dtype="<f4").tobytes()


def _parse_dict(buf: bytes) -> np.ndarray:
    if len(buf) < 2:
        raise CorruptStream("dictionary truncated")
    (count,) = struct.unpack_from("<H", buf, 0)
    if len(buf) != 2 + 4 * count:
        raise CorruptStream("dictionary length mismatch")
    return np.frombuffer(buf, dtype="<f4", count=count, offset=2)


def layer_sections(rec: CompressedLayer) -> list[tuple[int, bytes]]:
    """Serialized sections of one layer record, in their fixed file order."""
    secs = [(SEC_ROW_PTR, np.ascontiguousarray(rec.row_ptr, dtype="<u4").tobytes())]
    if rec.nnz:
        if rec.streams is not None:
            secs.append((SEC_COL_IDX_HUFF, huffman.serialize_stream(rec.streams.col_idx_stream)))
        else:
            secs.append((SEC_COL_IDX_RAW, np.ascontiguousarray(rec.col_idx, dtype="<u4").tobytes()))
    if rec.quantized and rec.cluster_count:
        secs.append((SEC_CODEBOOK, _f32_pairs_bytes(rec.codebook.centroids)))
    if rec.nnz == 0:
        return secs
    if not rec.quantized:
        secs.append((SEC_VALUES_RAW, _f32_pairs_bytes(rec.values)))
    elif rec.streams is None:
        secs.append((SEC_INDICES_PACKED, rec.packed_indices))
    elif rec.streams.mode == "indices":
        secs.append((SEC_INDEX_STREAM, huffman.serialize_stream(rec.streams.index_stream)))
    else:
        secs.append((SEC_DICT_REAL, _dict_bytes(rec.streams.real_dict)))
        secs.append((SEC_DICT_IMAG, _dict_bytes(rec.streams.imag_dict)))
        secs.append((SEC_REAL_STREAM, huffman.serialize_stream(rec.streams.real_stream)))
        secs.append((SEC_IMAG_STREAM, huffman.serialize_stream(rec.streams.imag_stream)))
    return secs


def layer_accounting(rec: CompressedLayer) -> dict[str, int]:
    """Per-section serialized byte lengths for one layer."""
    return {SECTION_NAMES[kind]: len(data) for kind, data in layer_sections(rec)}


def _serialize_layer(rec: CompressedLayer) -> bytes:
    name = rec.name.encode("utf-8")
    flags = FLAG_PRUNED
    if rec.quantized:
        flags |= FLAG_QUANTIZED
    if rec.streams is not None:
        flags |= FLAG_HUFFMAN
    out = bytearray()
    out += struct.pack("<H", len(name))
    out += name
    out += struct.pack("<B", len(rec.original_shape))
    out += np.asarray(rec.original_shape, dtype="<u4").tobytes()
    out += struct.pack("<IIBBH", rec.rows, rec.cols, flags, _MODE_CODES[rec.entropy_mode],
                       rec.cluster_count)
    secs = layer_sections(rec)
    out += struct.pack("<B", len(secs))
    for kind, data in secs:
        out += struct.pack("<BQ", kind, len(data))
        out += data
    return bytes(out)


def serialize_container(model: CompressedModel) -> bytes:
    config_blob = json.dumps(
        config_to_dict(model.config), sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    body = bytearray()
    body += struct.pack("<I", len(config_blob))
    body += config_blob
    for rec in model.layers:
        body += _serialize_layer(rec)
    crc = zlib.crc32(body)
    return HEADER.pack(CCNZ_MAGIC, CCNZ_VERSION, 0, len(model.layers), crc) + bytes(body)


def write_container(model: CompressedModel, path) -> None:
    data = serialize_container(model)
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


class _Reader:
    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFile(
                f"needed {n} bytes at offset {self.pos}, container has {len(self.data)}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _parse_layer(r: _Reader) -> CompressedLayer:
    (name_len,) = r.unpack("<H")
    name = r.take(name_len).decode("utf-8")
    (rank,) = r.unpack("<B")
    shape = tuple(int(e) for e in np.frombuffer(r.take(4 * rank), dtype="<u4"))
    rows, cols, flags, mode_code, m = r.unpack("<IIBBH")
    if mode_code not in _MODE_NAMES:
        raise CorruptStream(f"layer {name!r}: unknown entropy mode {mode_code}")
    (n_secs,) = r.unpack("<B")
    sections: dict[int, bytes] = {}
    for _ in range(n_secs):
        kind, length = r.unpack("<BQ")
        if kind in sections:
            raise CorruptStream(f"layer {name!r}: duplicate section {kind}")
        sections[kind] = r.take(length)

    def need(kind: int) -> bytes:
        if kind not in sections:
            raise CorruptStream(f"layer {name!r}: missing section {SECTION_NAMES.get(kind, kind)}")
        return sections[kind]

    try:
        row_ptr_raw = need(SEC_ROW_PTR)
        if len(row_ptr_raw) != 4 * (rows + 1):
            raise CorruptStream(f"layer {name!r}: row_ptr section length mismatch")
        row_ptr = np.frombuffer(row_ptr_raw, dtype="<u4")
        nnz = int(row_ptr[-1])
        rec = CompressedLayer(
            name=name,
            original_shape=shape,
            rows=rows,
            cols=cols,
            row_ptr=row_ptr,
            quantized=bool(flags & FLAG_QUANTIZED),
            entropy_mode=_MODE_NAMES[mode_code],
        )
        if rec.quantized and m:
            cb_raw = need(SEC_CODEBOOK)
            if len(cb_raw) != 8 * m:
                raise CorruptStream(f"layer {name!r}: codebook section length mismatch")
            rec.codebook = Codebook(np.frombuffer(cb_raw, dtype=COMPLEX_DTYPE))
        elif rec.quantized:
            rec.codebook = Codebook(np.zeros(0, dtype=COMPLEX_DTYPE))
        if nnz == 0:
            return rec
        if flags & FLAG_HUFFMAN:
            col_stream, _ = huffman.parse_stream(need(SEC_COL_IDX_HUFF), 0)
            if rec.entropy_mode == "indices":
                index_stream, _ = huffman.parse_stream(need(SEC_INDEX_STREAM), 0)
                rec.streams = huffman.LayerStreams(
                    "indices", col_stream, index_stream=index_stream
                )
            elif rec.entropy_mode == "split":
                rec.streams = huffman.LayerStreams(
                    "split",
                    col_stream,
                    real_dict=_parse_dict(need(SEC_DICT_REAL)),
                    imag_dict=_parse_dict(need(SEC_DICT_IMAG)),
                    real_stream=huffman.parse_stream(need(SEC_REAL_STREAM), 0)[0],
                    imag_stream=huffman.parse_stream(need(SEC_IMAG_STREAM), 0)[0],
                )
            else:
                raise CorruptStream(f"layer {name!r}: huffman flag with entropy mode none")
        else:
            col_raw = need(SEC_COL_IDX_RAW)
            if len(col_raw) != 4 * nnz:
                raise CorruptStream(f"layer {name!r}: col_idx section length mismatch")
            rec.col_idx = np.frombuffer(col_raw, dtype="<u4")
            if rec.quantized:
                packed = need(SEC_INDICES_PACKED)
                if len(packed) != (nnz * rec.index_bits + 7) // 8:
                    raise CorruptStream(f"layer {name!r}: packed index section length mismatch")
                rec.packed_indices = packed
            else:
                val_raw = need(SEC_VALUES_RAW)
                if len(val_raw) != 8 * nnz:
                    raise CorruptStream(f"layer {name!r}: values section length mismatch")
                rec.values = np.frombuffer(val_raw, dtype=COMPLEX_DTYPE)
        return rec
    except (ValueError, struct.error) as exc:
        raise CorruptStream(f"layer {name!r}: {exc}") from exc


def parse_container(data: bytes) -> CompressedModel:
    r = _Reader(data)
    magic, version, _flags, n_layers, crc = HEADER.unpack(r.take(HEADER.size))
    if magic != CCNZ_MAGIC:
        raise MagicMismatch(f"not a CCNZ file (magic {magic!r})")
    if version != CCNZ_VERSION:
        raise VersionUnsupported(
            f"CCNZ version {version} unsupported (expected {CCNZ_VERSION})"
        )
    body = data[HEADER.size :]
    if zlib.crc32(body) != crc:
        raise ChecksumMismatch("payload CRC32 does not match the header")
    (config_len,) = r.unpack("<I")
    try:
        config = config_from_dict(json.loads(r.take(config_len).decode("utf-8")))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptStream(f"config echo is not valid JSON: {exc}") from exc
    layers = [_parse_layer(r) for _ in range(n_layers)]
    if r.pos != len(data):
        raise CorruptStream(f"{len(data) - r.pos} trailing bytes after last layer")
    return CompressedModel(config, layers)


def read_container(path) -> CompressedModel:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return parse_container(data)
