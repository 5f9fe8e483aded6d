"""Pair real/imaginary weight arrays from a checkpoint and emit a CWT file.

Supports the two checkpoint styles deep-learning frameworks commonly
produce: archives of named arrays (.npz) and hierarchical dataset files
(.h5/.hdf5). Complex networks store each kernel as two real arrays; the
pairing rule matches them by name suffix.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .writer import write_cwt


class ExportError(Exception):
    """Base class for exporter failures."""


class UnpairedArray(ExportError):
    """An array has no real/imag partner (strict mode only)."""


class ShapeMismatch(ExportError):
    """Real and imaginary partners disagree on shape."""


class UnsupportedDtype(ExportError):
    """Array dtype cannot be converted to float32 weights (strict mode only)."""


class NonFiniteValue(ExportError):
    """A weight component is NaN or infinite; the CWT format admits neither."""


@dataclass(frozen=True)
class PairingRule:
    """Suffixes that mark the real and imaginary halves of one complex kernel."""

    real_suffix: str = "_real"
    imag_suffix: str = "_imag"

    def __post_init__(self):
        if not self.real_suffix or not self.imag_suffix:
            raise ValueError("suffixes must be non-empty")
        if self.real_suffix == self.imag_suffix:
            raise ValueError("real and imaginary suffixes must differ")


@dataclass
class ExportSummary:
    layers_exported: int = 0
    weights_exported: int = 0
    skipped: list[tuple[str, str]] = field(default_factory=list)
    downcast: list[str] = field(default_factory=list)

    def __str__(self) -> str:
        lines = [
            f"layers exported: {self.layers_exported}",
            f"weights exported: {self.weights_exported}",
        ]
        for name in self.downcast:
            lines.append(f"downcast to float32: {name}")
        for name, reason in self.skipped:
            lines.append(f"skipped: {name} ({reason})")
        return "\n".join(lines)


def read_checkpoint(path) -> dict[str, np.ndarray]:
    """Load all named arrays from an .npz archive or an .h5/.hdf5 file."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".npz":
        with np.load(path) as archive:
            return {name: archive[name] for name in archive.files}
    if suffix in (".h5", ".hdf5"):
        import h5py

        arrays: dict[str, np.ndarray] = {}
        with h5py.File(path, "r") as fh:
            def collect(name, obj):
                if isinstance(obj, h5py.Dataset):
                    arrays[name] = obj[()]

            fh.visititems(collect)
        return arrays
    raise ExportError(f"unrecognized checkpoint format: {path.name!r} "
                      "(expected .npz, .h5 or .hdf5)")


def _as_f32(name: str, arr: np.ndarray, summary: ExportSummary, strict: bool):
    if not np.issubdtype(arr.dtype, np.floating):
        if strict:
            raise UnsupportedDtype(f"array {name!r} has dtype {arr.dtype}, not float")
        return None
    if arr.dtype != np.float32:
        warnings.warn(f"array {name!r}: {arr.dtype} down-converted to float32",
                      stacklevel=3)
        summary.downcast.append(name)
        arr = arr.astype(np.float32)
    bad = np.flatnonzero(~np.isfinite(arr.reshape(-1)))
    if bad.size:
        raise NonFiniteValue(f"array {name!r}: non-finite value at flat index {int(bad[0])}")
    return np.ascontiguousarray(arr, dtype=np.float32)


def pair_arrays(
    arrays: dict[str, np.ndarray],
    rule: PairingRule,
    strict: bool = False,
    summary: ExportSummary | None = None,
) -> list[tuple[str, tuple[int, ...], np.ndarray, np.ndarray]]:
    """Resolve (layer, shape, real, imag) tuples; unmatched arrays are skipped.

    In strict mode any array left without a partner raises UnpairedArray.
    Partners with different shapes are always an error.
    """
    if summary is None:
        summary = ExportSummary()
    pairs = []
    consumed = set()
    for name, real in arrays.items():
        if not name.endswith(rule.real_suffix):
            continue
        base = name[: -len(rule.real_suffix)]
        partner = base + rule.imag_suffix
        if partner not in arrays:
            continue
        imag = arrays[partner]
        if real.shape != imag.shape:
            raise ShapeMismatch(
                f"{name!r} has shape {real.shape} but {partner!r} has {imag.shape}"
            )
        real32 = _as_f32(name, real, summary, strict)
        imag32 = _as_f32(partner, imag, summary, strict)
        if real32 is None or imag32 is None:
            for bad, arr in ((name, real32), (partner, imag32)):
                if arr is None:
                    summary.skipped.append((bad, "unsupported dtype"))
                    warnings.warn(f"array {bad!r}: unsupported dtype, skipped",
                                  stacklevel=2)
            consumed.add(name)
            consumed.add(partner)
            continue
        shape = tuple(int(e) for e in (real.shape or (1,)))
        pairs.append((base, shape, real32, imag32))
        consumed.add(name)
        consumed.add(partner)
    leftovers = [name for name in arrays if name not in consumed]
    if leftovers:
        if strict:
            raise UnpairedArray(
                "unpaired arrays: " + ", ".join(repr(n) for n in leftovers)
            )
        for name in leftovers:
            summary.skipped.append((name, "no partner"))
            warnings.warn(f"array {name!r} has no real/imag partner, skipped",
                          stacklevel=2)
    return pairs


def export(checkpoint_path, rule: PairingRule, output_path, strict: bool = False) -> ExportSummary:
    """Convert a checkpoint into a CWT file; returns what was written and skipped."""
    arrays = read_checkpoint(checkpoint_path)
    summary = ExportSummary()
    pairs = pair_arrays(arrays, rule, strict=strict, summary=summary)
    write_cwt(pairs, output_path)
    summary.layers_exported = len(pairs)
    summary.weights_exported = sum(real.size for _, _, real, _ in pairs)
    return summary
