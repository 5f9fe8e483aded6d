"""Command line for the checkpoint-to-CWT exporter."""

from __future__ import annotations

import argparse
import sys

from .exporter import ExportError, PairingRule, export


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cwt-export",
        description="Pair real/imag weight arrays in a checkpoint and write a CWT file.",
    )
    parser.add_argument("--checkpoint", required=True, help=".npz, .h5 or .hdf5 file")
    parser.add_argument("--real-suffix", default="_real")
    parser.add_argument("--imag-suffix", default="_imag")
    parser.add_argument("--output", required=True, help="CWT file to write")
    parser.add_argument(
        "--strict", action="store_true",
        help="fail on unpaired or non-float arrays instead of skipping them",
    )
    args = parser.parse_args(argv)
    try:
        rule = PairingRule(args.real_suffix, args.imag_suffix)
        summary = export(args.checkpoint, rule, args.output, strict=args.strict)
    except (ExportError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
