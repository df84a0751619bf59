"""End-to-end orchestration of the change-detection pipeline.

Stages: load the acquisition pair, build the log-ratio difference image,
cluster it into pseudo-labels, draw the training subset, optionally clean
the labels by region-constrained propagation, build features (patch
convolution stack or the pointwise fallback), train the linear
classifier, predict the change map, and score it against ground truth
when one is supplied.

Every stochastic stage derives its seed from the configured root seed
and a fixed stage index, so toggling one ablation flag leaves the other
stages' randomness untouched and paired comparisons stay paired.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import metrics as metrics_mod
from .difference import log_ratio_di
from .errors import ParameterError, PipelineStageError
from .labels import CHANGED, UNCHANGED, LabelField
from .patch_features import (
    FeatureStack,
    StackConfig,
    raw_feature_stack,
    stack_features,
    zscore_channels,
)
from .preclassify import preclassify_di, sample_training
from .propagation import CleanConfig, clean_labels
from .raster import Raster, detect_format, load_raster, save_raster
from .seeds import derive_seed
from .svm import build_samples, predict_map, train_svm
from .synth import SceneSpec, gen_pair, load_scene, with_seed

# Per-stage seed derivation indices (frozen; new stages append).
STAGE_PRECLASSIFY = 1
STAGE_SAMPLE = 2
STAGE_CLEAN = 3
STAGE_FEATURES = 4
STAGE_TRAIN = 5


@dataclass(frozen=True)
class PipelineConfig:
    t1: str | Path = ""
    t2: str | Path = ""
    gt: str | Path | None = None
    out_dir: str | Path = "out"

    alpha: float = 0.7            # anchor weight in label propagation
    patch_size: int = 7           # neighbourhood for preclassification features
    sample_ratio: float = 0.12    # fraction of pixels kept as training labels
    depth: int = 4                # convolution layers in the feature stack
    kernels_per_layer: int = 30
    kernel_size: int = 5
    threshold: float = 0.7        # distinctive-region activation threshold
    kernel_mode: str = "distinctive"
    clean: bool = True            # run label-noise cleaning
    conv: bool = True             # run the convolution stack (else pointwise)
    include_input: bool = True
    rounds: int = 10              # cleaning rounds for the majority vote
    labeled_fraction: float = 0.5
    n_regions: int | None = None  # None: about one region per 64 pixels
    compactness: float = 10.0
    propagate_max_iter: int = 100
    propagate_tol: float = 1e-6
    svm_c: float = 1.0
    svm_epochs: int = 200  # cap on coordinate passes; training stops early
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0.0 < self.sample_ratio <= 1.0:
            raise ParameterError(
                f"sample_ratio must be in (0, 1], got {self.sample_ratio}"
            )
        if self.kernel_mode not in ("distinctive", "random"):
            raise ParameterError(f"unknown kernel mode {self.kernel_mode!r}")
        if self.seed < 0:
            raise ParameterError("seed must be non-negative")


@dataclass
class PipelineResult:
    change_map_path: Path
    scores_path: Path
    metrics_path: Path | None
    timing_path: Path
    report: metrics_mod.MetricReport | None
    timings: dict[str, float]
    change: LabelField
    scores: Raster


class _StageTimer:
    def __init__(self):
        self.timings: dict[str, float] = {}
        self._t0 = time.perf_counter()

    def run(self, stage: str, fn, *args, **kwargs):
        start = time.perf_counter()
        try:
            result = fn(*args, **kwargs)
        except Exception as exc:
            raise PipelineStageError(stage, exc) from exc
        self.timings[stage] = time.perf_counter() - start
        return result

    def total(self) -> float:
        return time.perf_counter() - self._t0


def _load_input(path: str | Path) -> Raster:
    return load_raster(path, detect_format(path))


def _input_channels(i1: Raster, i2: Raster, di: Raster) -> Raster:
    return Raster(np.stack([i1.band(0), i2.band(0), di.band(0)], axis=2))


def _build_features(
    i1: Raster, i2: Raster, di: Raster, cfg: PipelineConfig, seed: int
) -> FeatureStack:
    """Assemble the per-pixel feature vectors.

    The convolution stack sees the acquisition pair plus the difference
    image, each channel pre-averaged over the kernel footprint and then
    z-scored: the averaging lifts the kernels' signal-to-speckle ratio at
    the kernels' own receptive scale, and the channel balancing keeps the
    change evidence from being drowned by background variance.  The
    appended "input" channels are the raw z-scored triple.  Without the
    stack the pointwise channels alone are the features.
    """
    channels = _input_channels(i1, i2, di)
    if not cfg.conv:
        return raw_feature_stack(channels)
    averaged = np.stack(
        [
            ndimage.uniform_filter(channels.data[:, :, j], size=cfg.kernel_size,
                                   mode="reflect")
            for j in range(channels.channels)
        ],
        axis=2,
    )
    stack_cfg = StackConfig(
        depth=cfg.depth,
        kernels_per_layer=cfg.kernels_per_layer,
        kernel_size=cfg.kernel_size,
        threshold=cfg.threshold,
        mode=cfg.kernel_mode,
        include_input=False,
    )
    stack = stack_features(Raster(zscore_channels(averaged)), stack_cfg, seed)
    if not cfg.include_input:
        return stack
    return FeatureStack(
        features=np.concatenate(
            [stack.features, zscore_channels(channels.data)], axis=2
        ),
        layer_channels=stack.layer_channels,
        include_input=True,
    )


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    """Execute the full pipeline and write its artifacts to ``cfg.out_dir``.

    Writes ``change_map.pgm`` (0/255), ``scores.f32`` (+ JSON sidecar) and
    ``timing.json`` always; ``metrics.json`` and ``roc.csv`` only when a
    ground-truth path is configured.  Deterministic: identical
    configurations produce byte-identical change map, scores and metrics.
    """
    cfg.validate()
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    timer = _StageTimer()

    i1 = timer.run("load", _load_input, cfg.t1)
    i2 = timer.run("load_t2", _load_input, cfg.t2)
    timer.timings["load"] += timer.timings.pop("load_t2")
    di = timer.run("difference", log_ratio_di, i1, i2)
    pseudo = timer.run(
        "preclassify", preclassify_di, di, cfg.patch_size,
        derive_seed(cfg.seed, STAGE_PRECLASSIFY),
    )
    training = timer.run(
        "sample", sample_training, pseudo, cfg.sample_ratio,
        derive_seed(cfg.seed, STAGE_SAMPLE),
    )
    if cfg.clean:
        clean_cfg = CleanConfig(
            alpha=cfg.alpha,
            n_regions=cfg.n_regions,
            rounds=cfg.rounds,
            labeled_fraction=cfg.labeled_fraction,
            max_iter=cfg.propagate_max_iter,
            tol=cfg.propagate_tol,
            compactness=cfg.compactness,
        )
        # Segment the contextually smoothed difference image: regions that
        # follow raw speckle texture scramble the propagation domains.
        smoothed_di = Raster.from_array(
            ndimage.uniform_filter(di.band(0), size=cfg.patch_size, mode="reflect")
        )
        training = timer.run(
            "clean", clean_labels, smoothed_di, training, clean_cfg,
            derive_seed(cfg.seed, STAGE_CLEAN),
        )
    features: FeatureStack = timer.run(
        "features", _build_features, i1, i2, di, cfg,
        derive_seed(cfg.seed, STAGE_FEATURES),
    )

    def _train():
        x, y, scaler = build_samples(features, training)
        return train_svm(
            x, y, cfg.svm_c, cfg.svm_epochs,
            derive_seed(cfg.seed, STAGE_TRAIN), scaler,
        )

    model = timer.run("train", _train)
    change, scores = timer.run("predict", predict_map, model, features)

    report = None
    curve = None
    if cfg.gt is not None:
        gt = timer.run("load_gt", _load_input, cfg.gt)
        gt_labels = LabelField(
            labels=np.where(gt.band(0) > 0.5, CHANGED, UNCHANGED).astype(np.int8)
        )

        def _evaluate():
            c = metrics_mod.confusion(change, gt_labels)
            auc_curve, auc = metrics_mod.roc_auc(scores, gt_labels)
            rep = metrics_mod.MetricReport(
                pcc=metrics_mod.pcc(c),
                kc=metrics_mod.kappa(c),
                f1=metrics_mod.f1(c),
                auc=auc,
                counts=c,
            )
            return rep, auc_curve

        report, curve = timer.run("metrics", _evaluate)

    change_path = out_dir / "change_map.pgm"
    scores_path = out_dir / "scores.f32"
    save_raster(
        Raster.from_array(change.labels.astype(np.float64)), change_path, "pgm8"
    )
    save_raster(scores, scores_path, "f32raw")
    metrics_path = None
    if report is not None:
        metrics_path = out_dir / "metrics.json"
        metrics_path.write_text(report.to_json())
        metrics_mod.write_roc_csv(curve, out_dir / "roc.csv")
    timings = dict(timer.timings)
    timings["total"] = timer.total()
    timing_path = out_dir / "timing.json"
    timing_path.write_text(json.dumps(timings, indent=2, sort_keys=True))
    return PipelineResult(
        change_map_path=change_path,
        scores_path=scores_path,
        metrics_path=metrics_path,
        timing_path=timing_path,
        report=report,
        timings=timings,
        change=change,
        scores=scores,
    )


# The four ablation configurations benchmarked against each other:
# 1: no convolution stack, no label cleaning (pointwise baseline)
# 3: random-patch convolution, no cleaning
# 4: no convolution stack, cleaning on
# 6: distinctive-patch convolution, cleaning on (the full method)
ABLATION_ROWS: dict[str, dict] = {
    "1": {"conv": False, "clean": False},
    "3": {"conv": True, "kernel_mode": "random", "clean": False},
    "4": {"conv": False, "clean": True},
    "6": {"conv": True, "kernel_mode": "distinctive", "clean": True},
}


def config_overrides(cfg: PipelineConfig, overrides: dict) -> PipelineConfig:
    names = {f.name for f in fields(PipelineConfig)}
    unknown = set(overrides) - names
    if unknown:
        raise ParameterError(f"unknown config fields: {sorted(unknown)}")
    return replace(cfg, **overrides)


def run_synth_bench(
    scene: str | Path | SceneSpec,
    overrides: dict | None = None,
    n_seeds: int = 5,
    out_dir: str | Path = "bench_out",
) -> dict:
    """Benchmark the ablation grid on generated scenes.

    For each of ``n_seeds`` scene realisations, runs the four ablation
    rows with paired pipeline seeds and reports per-row mean/stdev of
    PCC/KC/F1/AUC plus mean per-stage wall-clock seconds.  The summary is
    returned and written to ``<out_dir>/summary.json``.
    """
    if n_seeds < 1:
        raise ParameterError(f"n_seeds must be >= 1, got {n_seeds}")
    spec = scene if isinstance(scene, SceneSpec) else load_scene(scene)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = PipelineConfig()
    if overrides:
        base = config_overrides(base, overrides)

    per_row: dict[str, dict[str, list[float]]] = {
        row: {"pcc": [], "kc": [], "f1": [], "auc": []} for row in ABLATION_ROWS
    }
    stage_seconds: dict[str, dict[str, list[float]]] = {row: {} for row in ABLATION_ROWS}
    for s in range(n_seeds):
        scene_dir = out_dir / f"scene_{s}"
        scene_dir.mkdir(exist_ok=True)
        spec_s = with_seed(spec, derive_seed(spec.seed, s))
        i1, i2, gt = gen_pair(spec_s)
        t1_path = scene_dir / "t1.f32"
        t2_path = scene_dir / "t2.f32"
        gt_path = scene_dir / "gt.pgm"
        save_raster(i1, t1_path, "f32raw")
        save_raster(i2, t2_path, "f32raw")
        save_raster(Raster.from_array(gt.labels.astype(np.float64)), gt_path, "pgm8")
        for row, flags in ABLATION_ROWS.items():
            cfg = config_overrides(
                base,
                {
                    **flags,
                    "t1": t1_path,
                    "t2": t2_path,
                    "gt": gt_path,
                    "out_dir": scene_dir / f"row_{row}",
                    "seed": base.seed + s,
                },
            )
            result = run_pipeline(cfg)
            assert result.report is not None
            per_row[row]["pcc"].append(result.report.pcc)
            per_row[row]["kc"].append(result.report.kc)
            per_row[row]["f1"].append(result.report.f1)
            per_row[row]["auc"].append(result.report.auc)
            for stage, seconds in result.timings.items():
                stage_seconds[row].setdefault(stage, []).append(seconds)

    summary = {
        "n_seeds": n_seeds,
        "scene": spec.to_dict(),
        "rows": {
            row: {
                **{
                    metric: {
                        "mean": float(np.mean(vals)),
                        "stdev": float(np.std(vals)),
                    }
                    for metric, vals in row_metrics.items()
                },
                "stage_seconds": {
                    stage: float(np.mean(vals))
                    for stage, vals in stage_seconds[row].items()
                },
            }
            for row, row_metrics in per_row.items()
        },
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return summary
