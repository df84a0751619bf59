"""One-factor parameter sweeps on synthetic scenes.

Reruns the full pipeline while varying a single configuration field and
reports mean/stdev PCC per value, e.g.

    python scripts/sweep_params.py alpha 0.5 0.6 0.7 0.8 0.9 --seeds 3
    python scripts/sweep_params.py patch_size 5 7 9 11 --seeds 3
    python scripts/sweep_params.py sample_ratio 0.04 0.08 0.12 --seeds 3
    python scripts/sweep_params.py depth 1 2 3 4 5 --seeds 3
"""

import argparse
import json
import tempfile
from dataclasses import fields
from pathlib import Path

import numpy as np

from sarchange import default_scene, gen_pair, load_scene
from sarchange.pipeline import PipelineConfig, config_overrides, run_pipeline
from sarchange.raster import Raster, save_raster
from sarchange.seeds import derive_seed
from sarchange.synth import with_seed

INT_FIELDS = {f.name for f in fields(PipelineConfig) if str(f.type).startswith("int")}


def parse_value(field: str, raw: str):
    return int(raw) if field in INT_FIELDS else float(raw)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("field", help="PipelineConfig field to sweep")
    parser.add_argument("values", nargs="+", help="values to try")
    parser.add_argument("--seeds", type=int, default=3)
    parser.add_argument("--scene", default=None, help="scene JSON (default built-in)")
    parser.add_argument("--out", default=None, help="optional JSON output path")
    args = parser.parse_args()

    spec = load_scene(args.scene) if args.scene else default_scene()
    values = [parse_value(args.field, v) for v in args.values]
    table = {}
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        for s in range(args.seeds):
            i1, i2, gt = gen_pair(with_seed(spec, derive_seed(spec.seed, s)))
            save_raster(i1, tmp / "t1.f32", "f32raw")
            save_raster(i2, tmp / "t2.f32", "f32raw")
            save_raster(
                Raster.from_array(gt.labels.astype(np.float64)), tmp / "gt.pgm", "pgm8"
            )
            for value in values:
                cfg = config_overrides(
                    PipelineConfig(
                        t1=tmp / "t1.f32", t2=tmp / "t2.f32", gt=tmp / "gt.pgm",
                        out_dir=tmp / "run", seed=s,
                    ),
                    {args.field: value},
                )
                table.setdefault(value, []).append(run_pipeline(cfg).report.pcc)

    print(f"{args.field:>14}    mean pcc    stdev")
    summary = {}
    for value, pccs in table.items():
        mean, stdev = float(np.mean(pccs)), float(np.std(pccs))
        summary[str(value)] = {"mean_pcc": mean, "stdev": stdev}
        print(f"{value!s:>14}    {mean:.4f}      {stdev:.4f}")
    if args.out:
        Path(args.out).write_text(json.dumps(summary, indent=2))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
