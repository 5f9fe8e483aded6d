"""Checkpoint-to-CWT exporter: pairs real/imag weight arrays into complex layers."""

from .exporter import (
    ExportError,
    ExportSummary,
    NonFiniteValue,
    PairingRule,
    ShapeMismatch,
    UnpairedArray,
    UnsupportedDtype,
    export,
    pair_arrays,
    read_checkpoint,
)
from .writer import write_cwt

__version__ = "0.1.0"

__all__ = [
    "ExportError",
    "ExportSummary",
    "NonFiniteValue",
    "PairingRule",
    "ShapeMismatch",
    "UnpairedArray",
    "UnsupportedDtype",
    "export",
    "pair_arrays",
    "read_checkpoint",
    "write_cwt",
]
