"""Label-noise cleaning by region-constrained random label propagation.

Labels propagate only inside homogeneous regions.  Within a region the
affinity between two pixels is a Gaussian kernel on their intensity
distance, with the kernel width set by the region's own intensity
standard deviation; across regions the affinity is zero, so the system
decomposes into independent per-region blocks.  Column-normalising the
affinities yields a transition matrix, and labels evolve by

    y(t+1) = alpha * T y(t) + (1 - alpha) * y(0)

per class channel until the update stalls.  Cleaning repeats this over
several rounds, each time keeping a random subset of the labeled pixels
as anchors and demoting the rest, then takes a majority vote over the
per-round predictions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstructionError, ParameterError, ShapeError
from .labels import CHANGED, UNCHANGED, UNLABELED, LabelField, hard_from_soft
from .raster import Raster
from .seeds import derive_seed
from .superpixels import RegionMap, segment_superpixels

_STOCHASTIC_TOL = 1e-9


@dataclass
class WeightBlocks:
    """Per-region dense affinity blocks plus the pixel index of each block."""

    shape: tuple[int, int]
    indices: list[np.ndarray]  # flat pixel indices per region
    blocks: list[np.ndarray]   # (n_r, n_r) symmetric, W_ii = 1


@dataclass
class TransitionMatrix:
    """Block-diagonal column-stochastic transition probabilities."""

    shape: tuple[int, int]
    indices: list[np.ndarray]
    blocks: list[np.ndarray]

    def __post_init__(self):
        for block in self.blocks:
            if block.min() < -_STOCHASTIC_TOL or block.max() > 1.0 + _STOCHASTIC_TOL:
                raise ConstructionError("transition entries must lie in [0, 1]")
            col_sums = block.sum(axis=0)
            if np.abs(col_sums - 1.0).max() > _STOCHASTIC_TOL:
                raise ConstructionError("transition columns must sum to 1")


def build_weights(img: Raster, rm: RegionMap) -> WeightBlocks:
    """Gaussian intensity affinities inside each region of ``rm``.

    The kernel width sigma is the region's root-mean-square deviation of
    pixel values (the standard deviation for single-channel input).  A
    region of identical pixels gets the all-ones limit of the kernel.
    """
    if (img.height, img.width) != (rm.height, rm.width):
        raise ShapeError("image and region map dimensions disagree")
    values = img.data.reshape(-1, img.channels)
    indices = rm.pixel_indices()
    blocks: list[np.ndarray] = []
    for idx in indices:
        v = values[idx]
        centred = v - v.mean(axis=0)
        sigma2 = float((centred ** 2).sum(axis=1).mean())
        if sigma2 < 1e-24:
            blocks.append(np.ones((idx.size, idx.size)))
            continue
        d2 = ((v[:, np.newaxis, :] - v[np.newaxis, :, :]) ** 2).sum(axis=2)
        w = np.exp(-d2 / (2.0 * sigma2))
        np.fill_diagonal(w, 1.0)
        blocks.append(w)
    return WeightBlocks(shape=(img.height, img.width), indices=indices, blocks=blocks)


def build_transition(weights: WeightBlocks) -> TransitionMatrix:
    """Column-normalise each affinity block: T_ij = W_ij / sum_k W_kj."""
    blocks = []
    for w in weights.blocks:
        if w.min() < 0:
            raise ConstructionError("affinities must be non-negative")
        col_sums = w.sum(axis=0)
        if (col_sums <= 0).any():
            raise ConstructionError("a transition column has zero total affinity")
        blocks.append(w / col_sums[np.newaxis, :])
    return TransitionMatrix(shape=weights.shape, indices=weights.indices, blocks=blocks)


def propagate(
    t: TransitionMatrix,
    init: LabelField,
    alpha: float,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> LabelField:
    """Iterate the anchored propagation to its fixpoint, per region.

    ``init`` provides the anchor scores: its soft pair if present,
    otherwise the one-hot encoding of its hard labels with unlabeled
    pixels at zero.  Each region stops when the largest per-entry change
    drops below ``tol`` or after ``max_iter`` sweeps.  Hard labels of the
    result are the per-pixel argmax, ties resolved to unchanged.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must be strictly inside (0, 1), got {alpha}")
    if max_iter < 1:
        raise ParameterError(f"max_iter must be >= 1, got {max_iter}")
    if (init.height, init.width) != t.shape:
        raise ShapeError("label field and transition matrix dimensions disagree")
    y0_full = init.soft if init.soft is not None else init.one_hot()
    y0_flat = y0_full.reshape(-1, 2)
    out = np.zeros_like(y0_flat)
    for idx, block in zip(t.indices, t.blocks):
        y0 = y0_flat[idx]
        y = y0.copy()
        for _ in range(max_iter):
            y_next = alpha * (block @ y) + (1.0 - alpha) * y0
            delta = np.abs(y_next - y).max()
            y = y_next
            if delta < tol:
                break
        out[idx] = y
    soft = out.reshape(init.height, init.width, 2)
    return LabelField(labels=hard_from_soft(soft), soft=soft)


@dataclass(frozen=True)
class CleanConfig:
    alpha: float = 0.7
    n_regions: int | None = None  # None: one region per ~64 pixels
    rounds: int = 10
    labeled_fraction: float = 0.5
    max_iter: int = 100
    tol: float = 1e-6
    compactness: float = 10.0


def majority_vote(changed_votes: np.ndarray, rounds: int) -> np.ndarray:
    """Label CHANGED where strictly more than half the votes say so; ties
    fall to UNCHANGED."""
    return np.where(2 * changed_votes > rounds, CHANGED, UNCHANGED).astype(np.int8)


def clean_labels(
    img: Raster, pseudo: LabelField, cfg: CleanConfig, seed: int = 0
) -> LabelField:
    """Clean noisy labels by repeated random keep/demote propagation rounds.

    Each round keeps a random ``labeled_fraction`` of the labeled pixels
    as anchors, demotes the rest to unlabeled, propagates within regions,
    and records the propagated hard label of every originally labeled
    pixel.  The output label is the majority vote across rounds; pixels
    unlabeled in ``pseudo`` stay unlabeled.  A round whose anchor set
    misses a class is redrawn (at most 10 retries).
    """
    flat_labels = pseudo.labels.ravel()
    labeled_idx = np.flatnonzero(flat_labels != UNLABELED)
    n_changed = int(np.count_nonzero(flat_labels[labeled_idx] == CHANGED))
    n_unchanged = labeled_idx.size - n_changed
    if n_changed < 2 or n_unchanged < 2:
        raise ParameterError(
            "label cleaning needs at least 2 labeled pixels per class, got "
            f"{n_changed} changed / {n_unchanged} unchanged"
        )
    if cfg.rounds < 1:
        raise ParameterError(f"rounds must be >= 1, got {cfg.rounds}")
    if not 0.0 < cfg.labeled_fraction <= 1.0:
        raise ParameterError(
            f"labeled_fraction must be in (0, 1], got {cfg.labeled_fraction}"
        )

    n_regions = cfg.n_regions
    if n_regions is None:
        n_regions = max(1, (img.height * img.width) // 64)
    rm = segment_superpixels(img, n_regions, cfg.compactness, derive_seed(seed, 0))
    tm = build_transition(build_weights(img, rm))

    n_keep = max(1, int(np.floor(cfg.labeled_fraction * labeled_idx.size + 0.5)))
    changed_votes = np.zeros(labeled_idx.size, dtype=np.int64)
    for rnd in range(cfg.rounds):
        rng = np.random.default_rng(derive_seed(seed, 1 + rnd))
        keep = None
        for _ in range(11):
            cand = rng.choice(labeled_idx.size, size=n_keep, replace=False)
            kept_labels = flat_labels[labeled_idx[cand]]
            if (kept_labels == CHANGED).any() and (kept_labels == UNCHANGED).any():
                keep = cand
                break
            keep = cand  # after retries, proceed with the last draw
        anchors = np.full(flat_labels.shape, UNLABELED, dtype=np.int8)
        kept_idx = labeled_idx[keep]
        anchors[kept_idx] = flat_labels[kept_idx]
        init = LabelField(labels=anchors.reshape(pseudo.labels.shape))
        result = propagate(tm, init, cfg.alpha, cfg.max_iter, cfg.tol)
        predictions = result.labels.ravel()[labeled_idx]
        changed_votes += predictions == CHANGED

    cleaned = np.full(flat_labels.shape, UNLABELED, dtype=np.int8)
    cleaned[labeled_idx] = majority_vote(changed_votes, cfg.rounds)
    return LabelField(labels=cleaned.reshape(pseudo.labels.shape))
