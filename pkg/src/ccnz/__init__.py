"""Compression toolkit for complex-valued network weights.

Pipeline: modulus-threshold pruning to CSR, two-dimensional k-means weight
sharing, and split real/imaginary Huffman coding, persisted in the CCNZ
container format with per-stage storage accounting.
"""

from .container import (
    ClusterSpec,
    CompressedLayer,
    CompressedModel,
    PipelineConfig,
    compress,
    decompress,
    parse_container,
    read_container,
    serialize_container,
    write_container,
)
from .huffman import (
    EncodedStream,
    HuffmanCodeTable,
    LayerStreams,
    SymbolHistogram,
    build_table,
    decode,
    decode_quantized,
    encode,
    encode_quantized,
)
from .metrics import StageReport, report
from .model import (
    ComplexTensor,
    RawModel,
    load_raw,
    save_raw,
    total_raw_bytes,
)
from .pruning import (
    PruneConfig,
    SparseComplexMatrix,
    densify,
    matrix_dims,
    matrixize,
    prune,
    pruning_ratio,
)
from .quantization import (
    Codebook,
    InitScheme,
    KMeansReport,
    QuantizedLayer,
    dequantize_layer,
    init_centroids,
    kmeans2d,
    lloyd,
    quantize_layer,
)

__version__ = "0.1.0"

__all__ = [
    "ClusterSpec",
    "Codebook",
    "ComplexTensor",
    "CompressedLayer",
    "CompressedModel",
    "EncodedStream",
    "HuffmanCodeTable",
    "InitScheme",
    "KMeansReport",
    "LayerStreams",
    "PipelineConfig",
    "PruneConfig",
    "QuantizedLayer",
    "RawModel",
    "SparseComplexMatrix",
    "StageReport",
    "SymbolHistogram",
    "build_table",
    "compress",
    "decode",
    "decode_quantized",
    "decompress",
    "densify",
    "dequantize_layer",
    "encode",
    "encode_quantized",
    "init_centroids",
    "kmeans2d",
    "lloyd",
    "load_raw",
    "matrix_dims",
    "matrixize",
    "parse_container",
    "prune",
    "pruning_ratio",
    "quantize_layer",
    "read_container",
    "report",
    "save_raw",
    "serialize_container",
    "total_raw_bytes",
    "write_container",
]
