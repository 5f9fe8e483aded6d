"""Per-stage storage accounting and the report behind the CLI.

Two size views are reported for every stage. The payload view counts only
the bytes that represent weight values after the stage (raw components,
surviving components, codebook plus packed indices, codebook plus coded
streams and dictionaries); the full view adds the CSR position structure.
Compression ratios are raw bytes over stage bytes. The actual container
file size is reported separately, so both the payload-only and whole-file
readings of "storage size" can be compared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import huffman
from .bitpack import packed_byte_length, unpack_uints
from .container import (
    CompressedLayer,
    CompressedModel,
    PipelineConfig,
    compress,
    layer_accounting,
    serialize_container,
)
from .model import BYTES_PER_WEIGHT, RawModel
from .quantization import KMeansReport

STAGE_ORDER = ("raw", "pruned", "quantized", "huffman")


def _entropy_bits(symbols: np.ndarray) -> float:
    if symbols.size == 0:
        return 0.0
    counts = np.unique(symbols, return_counts=True)[1].astype(np.float64)
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum())


@dataclass(frozen=True)
class StreamStats:
    name: str
    symbol_count: int
    distinct_symbols: int
    entropy_bits: float
    avg_code_bits: float
    serialized_bytes: int


@dataclass(frozen=True)
class LayerReport:
    name: str
    shape: tuple[int, ...]
    weight_count: int
    nnz: int
    pruning_ratio: float
    cluster_count: int
    index_bits: int
    kmeans: KMeansReport | None
    streams: tuple[StreamStats, ...]


@dataclass(frozen=True)
class StageEntry:
    name: str
    enabled: bool
    payload_bytes: int
    structural_bytes: int

    @property
    def full_bytes(self) -> int:
        return self.payload_bytes + self.structural_bytes


@dataclass(frozen=True)
class StageReport:
    stages: tuple[StageEntry, ...]
    layers: tuple[LayerReport, ...]
    file_bytes: int
    header_bytes: int

    def stage(self, name: str) -> StageEntry:
        for entry in self.stages:
            if entry.name == name:
                return entry
        raise KeyError(name)

    @property
    def raw_bytes(self) -> int:
        return self.stages[0].payload_bytes

    def payload_ratio(self, name: str) -> float:
        return _ratio(self.raw_bytes, self.stage(name).payload_bytes)

    def full_ratio(self, name: str) -> float:
        return _ratio(self.raw_bytes, self.stage(name).full_bytes)

    def reduction_factor(self, name: str) -> float:
        """Payload shrink contributed by this stage alone, vs the stage before it."""
        idx = [e.name for e in self.stages].index(name)
        if idx == 0:
            return 1.0
        return _ratio(self.stages[idx - 1].payload_bytes, self.stages[idx].payload_bytes)

    @property
    def largest_reduction_stage(self) -> str:
        enabled = [e.name for e in self.stages[1:] if e.enabled]
        if not enabled:
            return "raw"
        return max(enabled, key=self.reduction_factor)

    @property
    def sizes_non_increasing(self) -> dict[str, bool]:
        """Monotonicity flags between consecutive stages, on payload bytes."""
        out = {}
        for prev, cur in zip(self.stages, self.stages[1:]):
            out[f"{cur.name}_le_{prev.name}"] = cur.payload_bytes <= prev.payload_bytes
        return out

    def to_text(self) -> str:
        lines = [
            f"{'stage':<10} {'payload':>12} {'full':>12} {'ratio':>8} {'full ratio':>10}",
        ]
        for e in self.stages:
            mark = "" if e.enabled else "  (pass-through)"
            lines.append(
                f"{e.name:<10} {e.payload_bytes:>12} {e.full_bytes:>12} "
                f"{self.payload_ratio(e.name):>8.2f} {self.full_ratio(e.name):>10.2f}{mark}"
            )
        lines.append(f"container file: {self.file_bytes} bytes "
                     f"(ratio {_ratio(self.raw_bytes, self.file_bytes):.2f}), "
                     f"header {self.header_bytes} bytes")
        lines.append(f"largest single-stage reduction: {self.largest_reduction_stage}")
        lines.append("")
        lines.append(f"{'layer':<20} {'shape':<16} {'n':>9} {'nnz':>9} "
                     f"{'pruned%':>8} {'m':>6} {'bits':>5}")
        for lr in self.layers:
            shape = "x".join(str(e) for e in lr.shape)
            lines.append(
                f"{lr.name:<20} {shape:<16} {lr.weight_count:>9} {lr.nnz:>9} "
                f"{100 * lr.pruning_ratio:>8.2f} {lr.cluster_count:>6} {lr.index_bits:>5}"
            )
            for s in lr.streams:
                lines.append(
                    f"    {s.name}: {s.symbol_count} symbols, {s.distinct_symbols} distinct, "
                    f"H={s.entropy_bits:.3f} bits, avg code {s.avg_code_bits:.3f} bits, "
                    f"{s.serialized_bytes} bytes"
                )
        return "\n".join(lines)

    def to_kv_lines(self) -> str:
        lines = []
        for e in self.stages:
            lines.append(f"{e.name}.enabled: {str(e.enabled).lower()}")
            lines.append(f"{e.name}.payload_bytes: {e.payload_bytes}")
            lines.append(f"{e.name}.full_bytes: {e.full_bytes}")
            lines.append(f"{e.name}.payload_ratio: {self.payload_ratio(e.name):.6g}")
            lines.append(f"{e.name}.full_ratio: {self.full_ratio(e.name):.6g}")
            lines.append(f"{e.name}.reduction_factor: {self.reduction_factor(e.name):.6g}")
        lines.append(f"file.bytes: {self.file_bytes}")
        lines.append(f"file.header_bytes: {self.header_bytes}")
        lines.append(f"largest_reduction_stage: {self.largest_reduction_stage}")
        for key, ok in self.sizes_non_increasing.items():
            lines.append(f"monotonic.{key}: {str(ok).lower()}")
        for lr in self.layers:
            p = f"layer.{lr.name}"
            lines.append(f"{p}.shape: {'x'.join(str(e) for e in lr.shape)}")
            lines.append(f"{p}.weights: {lr.weight_count}")
            lines.append(f"{p}.nnz: {lr.nnz}")
            lines.append(f"{p}.pruning_ratio: {lr.pruning_ratio:.6g}")
            lines.append(f"{p}.clusters: {lr.cluster_count}")
            lines.append(f"{p}.index_bits: {lr.index_bits}")
            if lr.kmeans is not None:
                lines.append(f"{p}.kmeans.iterations: {lr.kmeans.iterations}")
                lines.append(f"{p}.kmeans.final_wcss: {lr.kmeans.final_wcss:.6g}")
                lines.append(f"{p}.kmeans.converged: {str(lr.kmeans.converged).lower()}")
            for s in lr.streams:
                lines.append(f"{p}.stream.{s.name}.symbols: {s.symbol_count}")
                lines.append(f"{p}.stream.{s.name}.entropy_bits: {s.entropy_bits:.6g}")
                lines.append(f"{p}.stream.{s.name}.avg_code_bits: {s.avg_code_bits:.6g}")
                lines.append(f"{p}.stream.{s.name}.bytes: {s.serialized_bytes}")
        return "\n".join(lines)


def _ratio(raw: int, size: int) -> float:
    if size > 0:
        return raw / size
    return 1.0 if raw == 0 else math.inf


def _stream_stats(rec: CompressedLayer) -> tuple[StreamStats, ...]:
    out = []
    acct = layer_accounting(rec)
    if rec.streams is not None:
        named = [("col_idx", rec.streams.col_idx_stream, acct["col_idx_stream"])]
        if rec.streams.mode == "indices":
            named.append(("indices", rec.streams.index_stream, acct["index_stream"]))
        else:
            named.append(("real", rec.streams.real_stream, acct["real_stream"]))
            named.append(("imag", rec.streams.imag_stream, acct["imag_stream"]))
        for name, stream, nbytes in named:
            symbols = huffman.decode(stream, rec.nnz)
            out.append(
                StreamStats(
                    name,
                    rec.nnz,
                    len(stream.table.lengths),
                    _entropy_bits(symbols),
                    stream.bit_count / rec.nnz if rec.nnz else 0.0,
                    nbytes,
                )
            )
    elif rec.packed_indices is not None and rec.nnz:
        indices = unpack_uints(rec.packed_indices, rec.index_bits, rec.nnz)
        out.append(
            StreamStats(
                "indices",
                rec.nnz,
                int(np.unique(indices).size),
                _entropy_bits(indices),
                float(rec.index_bits),
                acct["indices_packed"],
            )
        )
    return tuple(out)


def _layer_report(rec: CompressedLayer) -> LayerReport:
    n = math.prod(rec.original_shape)
    return LayerReport(
        name=rec.name,
        shape=rec.original_shape,
        weight_count=n,
        nnz=rec.nnz,
        pruning_ratio=(n - rec.nnz) / n,
        cluster_count=rec.cluster_count,
        index_bits=rec.index_bits,
        kmeans=rec.kmeans_report,
        streams=_stream_stats(rec),
    )


def stage_sizes(comp: CompressedModel) -> tuple[StageEntry, ...]:
    """Cumulative per-stage sizes implied by a compressed model's records."""
    raw_payload = 0
    pruned_payload = 0
    csr_structural = 0
    quant_payload = 0
    huff_payload = 0
    huff_structural = 0
    for rec in comp.layers:
        n = math.prod(rec.original_shape)
        nnz = rec.nnz
        acct = layer_accounting(rec)
        raw_payload += BYTES_PER_WEIGHT * n
        pruned_payload += BYTES_PER_WEIGHT * nnz
        csr_structural += acct["row_ptr"] + 4 * nnz
        if rec.quantized:
            codebook_bytes = 8 * rec.cluster_count
            quant_payload += codebook_bytes + packed_byte_length(nnz, rec.index_bits or 1)
            if rec.streams is not None:
                huff_payload += codebook_bytes
                for key in ("dict_real", "dict_imag", "real_stream", "imag_stream",
                            "index_stream"):
                    huff_payload += acct.get(key, 0)
                huff_structural += acct["row_ptr"] + acct.get("col_idx_stream", 0)
    stages = set(comp.config.stages)
    entries = [StageEntry("raw", True, raw_payload, 0)]
    entries.append(
        StageEntry("pruned", "prune" in stages, pruned_payload, csr_structural)
    )
    if "quantize" in stages:
        entries.append(StageEntry("quantized", True, quant_payload, csr_structural))
    else:
        entries.append(StageEntry("quantized", False, pruned_payload, csr_structural))
    prev = entries[-1]
    if "huffman" in stages:
        entries.append(StageEntry("huffman", True, huff_payload, huff_structural))
    else:
        entries.append(StageEntry("huffman", False, prev.payload_bytes, prev.structural_bytes))
    return tuple(entries)


def report_from_compressed(comp: CompressedModel) -> StageReport:
    from .container import _serialize_layer

    blob = serialize_container(comp)
    header_bytes = len(blob) - sum(len(_serialize_layer(rec)) for rec in comp.layers)
    return StageReport(
        stages=stage_sizes(comp),
        layers=tuple(_layer_report(rec) for rec in comp.layers),
        file_bytes=len(blob),
        header_bytes=header_bytes,
    )


def report(model: RawModel, cfg: PipelineConfig, workers: int | None = None) -> StageReport:
    """Run the pipeline once and account for every enabled stage."""
    return report_from_compressed(compress(model, cfg, workers=workers))
