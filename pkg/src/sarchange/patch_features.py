"""Hierarchical features from patch-sampled convolution kernels.

Instead of learning kernels, each layer samples ``m`` patches straight
from its input and uses them as cross-correlation kernels.  In
"distinctive" mode the patch centres are drawn from pixels whose
min-max-normalised activation exceeds a threshold (salient structure);
in "random" mode they are drawn uniformly, which serves as the baseline.
Layer outputs are reduced to three channels each, z-scored, and stacked,
optionally together with the original input channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ParameterError, ShapeError
from .raster import Raster
from .seeds import derive_seed

DISTINCTIVE_THRESHOLD = 0.7


@dataclass
class KernelSet:
    kernels: np.ndarray   # (m, k, k, c)
    centers: np.ndarray   # (m, 2) row/col source coordinates
    mode: str             # "distinctive" | "random"
    fallback: bool = False  # distinctive pool was smaller than m; used top-m


@dataclass
class FeatureStack:
    features: np.ndarray         # (height, width, vector_len)
    layer_channels: list[int]    # channels contributed by each layer
    include_input: bool

    def __post_init__(self):
        if self.features.ndim != 3:
            raise ShapeError("feature stack must be (height, width, vector_len)")
        if not np.isfinite(self.features).all():
            raise ParameterError("feature stack contains non-finite values")

    @property
    def height(self) -> int:
        return self.features.shape[0]

    @property
    def width(self) -> int:
        return self.features.shape[1]

    @property
    def vector_len(self) -> int:
        return self.features.shape[2]


@dataclass(frozen=True)
class StackConfig:
    depth: int = 4              # number of convolution layers
    kernels_per_layer: int = 30
    kernel_size: int = 5
    threshold: float = DISTINCTIVE_THRESHOLD
    mode: str = "distinctive"
    include_input: bool = True


def normalize_activation(f: Raster) -> Raster:
    """Min-max normalise the activation map to [0, 1].

    Multi-channel input is first reduced to its per-pixel L2 magnitude.
    A constant map normalises to all zeros.
    """
    if f.channels == 1:
        a = f.band(0)
    else:
        a = np.sqrt((f.data ** 2).sum(axis=2))
    lo = a.min()
    hi = a.max()
    if hi - lo < 1e-300:
        return Raster.from_array(np.zeros_like(a))
    return Raster.from_array((a - lo) / (hi - lo))


def _reflect_indices(idx: np.ndarray, size: int) -> np.ndarray:
    # Edge-inclusive symmetric reflection: -1 -> 0, size -> size - 1.
    period = 2 * size
    idx = np.mod(idx, period)
    return np.where(idx < size, idx, period - 1 - idx)


def extract_patch(f: Raster, center: tuple[int, int], k: int) -> np.ndarray:
    """k-by-k window around ``center`` with symmetric reflection at borders.

    Returns an array of shape (k, k, channels).
    """
    if k < 1 or k % 2 == 0:
        raise ParameterError(f"patch size must be odd and positive, got {k}")
    half = k // 2
    rows = _reflect_indices(center[0] + np.arange(-half, half + 1), f.height)
    cols = _reflect_indices(center[1] + np.arange(-half, half + 1), f.width)
    return f.data[np.ix_(rows, cols)]


def select_kernels(
    f: Raster,
    mode: str,
    m: int,
    k: int,
    threshold: float = DISTINCTIVE_THRESHOLD,
    seed: int = 0,
) -> KernelSet:
    """Sample ``m`` patch kernels from ``f``.

    distinctive: centres drawn without replacement from pixels whose
    normalised activation exceeds ``threshold``; if fewer than ``m``
    qualify, the top-``m`` pixels by activation are taken instead and the
    fallback flag is set.  random: centres drawn uniformly over all
    pixels (with replacement).  Every kernel is scaled to unit L2 norm so
    bright patches cannot dominate the activations; the mean is kept, as
    removing it would strip the kernels' response to local averages, the
    main carrier of contextual evidence.  An all-zero patch stays zero.
    """
    if mode not in ("distinctive", "random"):
        raise ParameterError(f"unknown kernel mode {mode!r}")
    if m < 1:
        raise ParameterError(f"kernel count must be >= 1, got {m}")
    n_pixels = f.height * f.width
    if m > n_pixels:
        raise ParameterError(f"cannot draw {m} centres from {n_pixels} pixels")
    if k % 2 == 0 or k < 1:
        raise ParameterError(f"kernel size must be odd, got {k}")
    if k > min(f.height, f.width):
        raise ParameterError(
            f"kernel size {k} exceeds image extent {f.height}x{f.width}"
        )

    rng = np.random.default_rng(seed)
    fallback = False
    if mode == "random":
        flat = rng.integers(0, n_pixels, size=m)
    else:
        activation = normalize_activation(f).band(0).ravel()
        pool = np.flatnonzero(activation > threshold)
        if pool.size >= m:
            flat = rng.choice(pool, size=m, replace=False)
        else:
            fallback = True
            # Highest activations first; ties broken by flat index.
            order = np.lexsort((np.arange(n_pixels), -activation))
            flat = order[:m]
    centers = np.stack([flat // f.width, flat % f.width], axis=1)

    kernels = np.empty((m, k, k, f.channels))
    for i, (r, c) in enumerate(centers):
        patch = extract_patch(f, (int(r), int(c)), k)
        norm = np.sqrt((patch ** 2).sum())
        kernels[i] = patch / norm if norm > 1e-12 else 0.0
    return KernelSet(kernels=kernels, centers=centers, mode=mode, fallback=fallback)


def conv_layer(f: Raster, kernels: KernelSet) -> Raster:
    """Cross-correlate ``f`` with every kernel and clamp negatives to zero.

    Symmetric-reflection padding keeps the spatial dimensions; channel
    counts of image and kernels must agree.  Output has one channel per
    kernel.
    """
    m, k, k2, kc = kernels.kernels.shape
    if k != k2:
        raise ShapeError("kernels must be square")
    if kc != f.channels:
        raise ShapeError(
            f"kernel channels ({kc}) disagree with image channels ({f.channels})"
        )
    half = k // 2
    padded = np.pad(f.data, ((half, half), (half, half), (0, 0)), mode="symmetric")
    windows = sliding_window_view(padded, (k, k), axis=(0, 1))  # (h, w, c, k, k)
    cols = windows.reshape(f.height * f.width, f.channels * k * k)
    kmat = kernels.kernels.transpose(0, 3, 1, 2).reshape(m, kc * k * k)
    out = cols @ kmat.T
    np.maximum(out, 0.0, out=out)
    return Raster(out.reshape(f.height, f.width, m))


def pca_reduce(f: Raster, keep: int) -> Raster:
    """Project pixels onto the top principal directions of their channels.

    Pixels are the samples; channels the variables.  Components come out
    in descending explained-variance order, each sign-fixed so its
    largest-magnitude loading is positive.  Directions whose eigenvalue
    falls below 1e-12 of the total variance are dropped rather than
    padded, so the output may have fewer than ``keep`` channels.
    """
    if keep < 1:
        raise ParameterError(f"keep must be >= 1, got {keep}")
    n = f.height * f.width
    c = f.channels
    if n <= c:
        raise ParameterError(f"need more pixels ({n}) than channels ({c}) for PCA")
    x = f.data.reshape(n, c)
    centred = x - x.mean(axis=0)
    cov = centred.T @ centred / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals, kind="stable")[::-1]
    evals = np.maximum(evals[order], 0.0)
    evecs = evecs[:, order]
    total = evals.sum()
    significant = evals > 1e-12 * total if total > 0 else np.zeros(c, dtype=bool)
    n_keep = min(keep, int(np.count_nonzero(significant)))
    if n_keep == 0:
        raise ParameterError("input has no variance; nothing to retain")
    basis = evecs[:, :n_keep].copy()
    for j in range(n_keep):
        pivot = int(np.argmax(np.abs(basis[:, j])))
        if basis[pivot, j] < 0:
            basis[:, j] = -basis[:, j]
    return Raster((centred @ basis).reshape(f.height, f.width, n_keep))


def zscore_channels(data: np.ndarray) -> np.ndarray:
    """Zero-mean, unit-variance per channel; flat channels become zero."""
    flat = data.reshape(-1, data.shape[2])
    mean = flat.mean(axis=0)
    std = flat.std(axis=0)
    safe = np.where(std > 1e-12, std, 1.0)
    out = (flat - mean) / safe
    out[:, std <= 1e-12] = 0.0
    return out.reshape(data.shape)


def stack_features(input: Raster, cfg: StackConfig, seed: int = 0) -> FeatureStack:
    """Run ``cfg.depth`` patch-convolution layers and stack their features.

    Layer 1 convolves the input directly; every later layer first reduces
    its input to 3 principal channels.  Each layer's output is likewise
    reduced to 3 channels, z-scored, and concatenated; the original input
    channels are appended (z-scored) when ``include_input`` is set.
    Kernel selection at layer d uses the child seed ``(seed, d)``.
    """
    if cfg.depth < 1:
        raise ParameterError(f"depth must be >= 1, got {cfg.depth}")
    reduced: list[Raster] = []
    current = input
    for d in range(1, cfg.depth + 1):
        if d > 1:
            current = reduced[-1]
        kernels = select_kernels(
            current, cfg.mode, cfg.kernels_per_layer, cfg.kernel_size,
            cfg.threshold, derive_seed(seed, d),
        )
        layer_out = conv_layer(current, kernels)
        reduced.append(pca_reduce(layer_out, 3))

    parts = [zscore_channels(r.data) for r in reduced]
    layer_channels = [r.channels for r in reduced]
    if cfg.include_input:
        parts.append(zscore_channels(input.data))
    return FeatureStack(
        features=np.concatenate(parts, axis=2),
        layer_channels=layer_channels,
        include_input=cfg.include_input,
    )


def raw_feature_stack(input: Raster) -> FeatureStack:
    """Pointwise fallback: the z-scored input channels with no convolution."""
    return FeatureStack(
        features=zscore_channels(input.data),
        layer_channels=[],
        include_input=True,
    )
