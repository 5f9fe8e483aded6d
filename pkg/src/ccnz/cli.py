"""Command-line surface: compress, decompress, stats, inspect, sweep."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import metrics
from .container import (
    ClusterSpec,
    PipelineConfig,
    compress,
    decompress,
    read_container,
    write_container,
)
from .errors import CcnzError
from .model import load_raw, save_raw, total_raw_bytes
from .pruning import PruneConfig, prune
from .quantization import InitScheme

_INIT_NAMES = {
    "forgy": "forgy",
    "density": "density",
    "linear-h": "linear_horizontal",
    "linear-horizontal": "linear_horizontal",
    "linear-v": "linear_vertical",
    "linear-vertical": "linear_vertical",
    "linear-pos": "linear_positive",
    "linear-positive": "linear_positive",
    "linear-neg": "linear_negative",
    "linear-negative": "linear_negative",
}

_PRUNE_KEYS = {"modulus": "modulus", "real": "real_part", "imag": "imag_part"}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ccnz",
        description="Compress complex-valued network weights: prune, share, code.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pc = sub.add_parser("compress", help="compress a CWT weight file into a CCNZ container")
    pc.add_argument("--input", required=True)
    pc.add_argument("--output", required=True)
    pc.add_argument("--threshold", type=float, default=0.0)
    pc.add_argument("--prune-key", choices=sorted(_PRUNE_KEYS), default="modulus")
    pc.add_argument(
        "--clusters",
        default="256",
        help='cluster count spec: "100" or "conv*=100,dense*=256"',
    )
    pc.add_argument("--init", choices=sorted(_INIT_NAMES), default="linear-neg")
    pc.add_argument("--seed", type=int, default=0, help="64-bit seed for forgy/density")
    pc.add_argument("--entropy", choices=["split", "indices", "none"], default="split")
    pc.add_argument("--skip-prune", action="store_true")
    pc.add_argument("--skip-quantize", action="store_true")
    pc.add_argument("--skip-huffman", action="store_true")
    pc.add_argument("--max-iters", type=int, default=300)
    pc.add_argument("--rel-tol", type=float, default=1e-6)
    pc.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    pd = sub.add_parser("decompress", help="reconstruct a CWT weight file from a container")
    pd.add_argument("--input", required=True)
    pd.add_argument("--output", required=True)

    ps = sub.add_parser("stats", help="summarize a CWT file, or diff two of them")
    group = ps.add_mutually_exclusive_group(required=True)
    group.add_argument("--input")
    group.add_argument("--diff", nargs=2, metavar=("A", "B"))

    pi = sub.add_parser("inspect", help="per-layer table of a CCNZ container")
    pi.add_argument("container")

    pw = sub.add_parser("sweep", help="pruning ratio across a range of thresholds")
    pw.add_argument("--input", required=True)
    pw.add_argument(
        "--thresholds",
        default="0.01,0.02,0.03,0.04,0.05",
        help="comma-separated threshold list",
    )
    pw.add_argument("--prune-key", choices=sorted(_PRUNE_KEYS), default="modulus")
    return parser


def _config_from_args(args) -> PipelineConfig:
    stages = set()
    if not args.skip_prune:
        stages.add("prune")
    if not args.skip_quantize:
        stages.add("quantize")
    if not args.skip_huffman and args.entropy != "none" and "quantize" in stages:
        stages.add("huffman")
    kind = _INIT_NAMES[args.init]
    seed = args.seed if kind in ("forgy", "density") else None
    return PipelineConfig(
        prune=PruneConfig(args.threshold, _PRUNE_KEYS[args.prune_key]),
        clusters=ClusterSpec.parse(args.clusters),
        init=InitScheme(kind, seed),
        kmeans_max_iters=args.max_iters,
        kmeans_rel_tol=args.rel_tol,
        entropy_mode=args.entropy if "huffman" in stages else "none",
        stages=frozenset(stages),
    )


def _cmd_compress(args) -> int:
    model = load_raw(args.input)
    cfg = _config_from_args(args)
    comp = compress(model, cfg, workers=args.threads)
    write_container(comp, args.output)
    rep = metrics.report_from_compressed(comp)
    print(rep.to_text())
    print()
    print(rep.to_kv_lines())
    return 0


def _cmd_decompress(args) -> int:
    comp = read_container(args.input)
    model = decompress(comp)
    save_raw(model, args.output)
    print(f"wrote {args.output}: {len(model.layers)} layers, "
          f"{total_raw_bytes(model)} weight bytes")
    return 0


def _cmd_stats(args) -> int:
    if args.diff:
        a = load_raw(args.diff[0])
        b = load_raw(args.diff[1])
        if [t.name for t in a.layers] != [t.name for t in b.layers]:
            raise CcnzError("models have different layer lists")
        overall = 0.0
        for ta, tb in zip(a.layers, b.layers):
            if ta.shape != tb.shape:
                raise CcnzError(f"layer {ta.name!r}: shape {ta.shape} vs {tb.shape}")
            d = float(np.abs(ta.values.astype(np.complex128)
                             - tb.values.astype(np.complex128)).max()) if ta.weight_count else 0.0
            overall = max(overall, d)
            print(f"layer.{ta.name}.max_distance: {d:.9g}")
        print(f"max_distance: {overall:.9g}")
        return 0
    model = load_raw(args.input)
    print(f"layers: {len(model.layers)}")
    print(f"weight_bytes: {total_raw_bytes(model)}")
    for t in model.layers:
        shape = "x".join(str(e) for e in t.shape)
        print(f"layer.{t.name}: shape {shape}, {t.weight_count} weights")
    return 0


def _cmd_inspect(args) -> int:
    comp = read_container(args.container)
    rep = metrics.report_from_compressed(comp)
    print(f"layers: {len(comp.layers)}")
    print(f"stages: {','.join(sorted(comp.config.stages))}")
    print(f"entropy_mode: {comp.config.entropy_mode}")
    print()
    print(rep.to_text())
    return 0


def _cmd_sweep(args) -> int:
    model = load_raw(args.input)
    key = _PRUNE_KEYS[args.prune_key]
    thresholds = [float(t) for t in args.thresholds.split(",") if t.strip()]
    n_total = sum(t.weight_count for t in model.layers)
    if n_total == 0:
        raise CcnzError("model has no weights")
    print(f"{'threshold':>12} {'pruning_ratio':>14}")
    for t in thresholds:
        cfg = PruneConfig(t, key)
        nnz = sum(prune(layer, cfg).nnz for layer in model.layers)
        print(f"{t:>12.6g} {(n_total - nnz) / n_total:>14.6f}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "compress": _cmd_compress,
        "decompress": _cmd_decompress,
        "stats": _cmd_stats,
        "inspect": _cmd_inspect,
        "sweep": _cmd_sweep,
    }
    try:
        return handlers[args.command](args)
    except CcnzError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
