"""Command-line entry points.

Subcommands:

* ``run``: execute the pipeline on an acquisition pair.
* ``bench``: ablation benchmark over generated synthetic scenes.
* ``synth``: generate a speckled scene pair with ground truth.

Option precedence for ``run`` and ``bench``: built-in defaults, then the
``--config`` JSON file, then explicit command-line flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ChangeDetectionError, PipelineStageError
from .pipeline import PipelineConfig, config_overrides, run_pipeline, run_synth_bench
from .raster import Raster, save_raster
from .synth import default_scene, gen_pair, load_scene, with_seed

# (flag, config field, type); flags follow the config one-to-one.
_RUN_OPTIONS = [
    ("--alpha", "alpha", float),
    ("--patch-size", "patch_size", int),
    ("--sample-ratio", "sample_ratio", float),
    ("--depth", "depth", int),
    ("--kernels", "kernels_per_layer", int),
    ("--kernel-size", "kernel_size", int),
    ("--threshold", "threshold", float),
    ("--rounds", "rounds", int),
    ("--regions", "n_regions", int),
    ("--svm-c", "svm_c", float),
    ("--seed", "seed", int),
]


def _add_pipeline_flags(parser: argparse.ArgumentParser) -> None:
    for flag, dest, typ in _RUN_OPTIONS:
        parser.add_argument(flag, dest=dest, type=typ, default=None)
    parser.add_argument(
        "--kernel-mode", dest="kernel_mode", choices=("distinctive", "random"),
        default=None,
    )
    parser.add_argument("--no-clean", dest="clean", action="store_false", default=None)
    parser.add_argument("--no-conv", dest="conv", action="store_false", default=None)
    parser.add_argument(
        "--config", dest="config", default=None,
        help="JSON file whose keys override the built-in defaults",
    )


def _collect_overrides(args: argparse.Namespace) -> dict:
    overrides: dict = {}
    if args.config:
        overrides.update(json.loads(Path(args.config).read_text()))
    for _, dest, _ in _RUN_OPTIONS:
        value = getattr(args, dest)
        if value is not None:
            overrides[dest] = value
    for dest in ("kernel_mode", "clean", "conv"):
        value = getattr(args, dest)
        if value is not None:
            overrides[dest] = value
    return overrides


def _cmd_run(args: argparse.Namespace) -> int:
    overrides = _collect_overrides(args)
    overrides.update(
        {"t1": args.t1, "t2": args.t2, "gt": args.gt, "out_dir": args.out_dir}
    )
    cfg = config_overrides(PipelineConfig(), overrides)
    result = run_pipeline(cfg)
    print(f"change map: {result.change_map_path}")
    print(f"scores:     {result.scores_path}")
    if result.report is not None:
        r = result.report
        print(
            f"pcc={r.pcc:.4f} kc={r.kc:.4f} f1={r.f1:.4f} auc={r.auc:.4f} "
            f"fp={r.counts.fp} fn={r.counts.fn}"
        )
    print(f"total time: {result.timings['total']:.2f}s")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    overrides = _collect_overrides(args)
    scene = load_scene(args.scene) if args.scene else default_scene()
    summary = run_synth_bench(scene, overrides, args.seeds, args.out_dir)
    print(json.dumps(summary["rows"], indent=2, sort_keys=True))
    print(f"summary written to {Path(args.out_dir) / 'summary.json'}")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = load_scene(args.scene) if args.scene else default_scene()
    if args.seed is not None:
        spec = with_seed(spec, args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    i1, i2, gt = gen_pair(spec)
    save_raster(i1, out_dir / "t1.f32", "f32raw")
    save_raster(i2, out_dir / "t2.f32", "f32raw")
    save_raster(
        Raster.from_array(gt.labels.astype(np.float64)), out_dir / "gt.pgm", "pgm8"
    )
    (out_dir / "scene.json").write_text(spec.to_json())
    print(f"scene written to {out_dir} (t1.f32, t2.f32, gt.pgm, scene.json)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sarchange",
        description="Unsupervised SAR change detection with label cleaning "
        "and patch-convolution features",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the pipeline on an image pair")
    p_run.add_argument("--t1", required=True, help="first acquisition (pgm or f32)")
    p_run.add_argument("--t2", required=True, help="second acquisition")
    p_run.add_argument("--gt", default=None, help="optional ground-truth change map")
    p_run.add_argument("--out-dir", default="out")
    _add_pipeline_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_bench = sub.add_parser("bench", help="ablation benchmark on synthetic scenes")
    p_bench.add_argument("--scene", default=None, help="scene JSON (default: built-in)")
    p_bench.add_argument("--seeds", type=int, default=5)
    p_bench.add_argument("--out-dir", default="bench_out")
    _add_pipeline_flags(p_bench)
    p_bench.set_defaults(func=_cmd_bench)

    p_synth = sub.add_parser("synth", help="generate a synthetic scene pair")
    p_synth.add_argument("--scene", default=None, help="scene JSON (default: built-in)")
    p_synth.add_argument("--out-dir", default="scene_out")
    p_synth.add_argument("--seed", type=int, default=None)
    p_synth.set_defaults(func=_cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PipelineStageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ChangeDetectionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
