"""Per-pixel adaptive robust denoising for scalar 2d images.

Every pixel gets the full ring-rule treatment: nested disc windows, window
and ring estimates, sequential testing, and the last accepted window as the
output. Windows are clipped at the borders (never padded, which would break
the noise model); each distinct clipped geometry gets its own cached error
levels. The noise scale enters only as a linear factor on the levels, so one
unit-scale calibration serves all images of a given noise law.

Interior pixels (where no window clips) are handled by 2d rank filters,
which keeps the per-pixel cost constant; the thin border band falls back to
an explicit per-pixel path with the exact same conventions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .calibration import CalibArtifact
from .errors import ValidationError
from .levels import Levels, levels_asymptotic, levels_exact_mean
from .losses import LossKind, _quantile_bracket, locate
from .noise import NoiseKind, abs_diff_median, density, quantile_point
from .parallel import run_chunks
from .selector import CriticalValues
from .windows import WindowFamily, build_family_2d

__all__ = [
    "Image",
    "KhatMap",
    "ScaleEstimate",
    "DenoiseConfig",
    "estimate_noise_scale",
    "denoise_image",
]


@dataclass(frozen=True)
class Image:
    """A scalar image with real intensities, row-major."""

    width: int
    height: int
    intensities: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.intensities, dtype=float)
        object.__setattr__(self, "intensities", arr)
        if self.width < 1 or self.height < 1:
            raise ValidationError("image dimensions must be positive")
        if arr.shape != (self.height, self.width):
            raise ValidationError("intensity array must have shape (height, width)")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("intensities must be finite")

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Image":
        arr = np.asarray(arr, dtype=float)
        return cls(width=arr.shape[1], height=arr.shape[0], intensities=arr)


@dataclass(frozen=True)
class KhatMap:
    """Selected window index per pixel, on the same grid as the input.

    Small values flag edges, large values flag homogeneous regions. Border
    pixels report the original level index of their selected window even
    when clipping collapsed some intermediate levels.
    """

    width: int
    height: int
    k_hat: np.ndarray
    n_levels: int

    def __post_init__(self) -> None:
        kh = np.asarray(self.k_hat, dtype=np.int16)
        object.__setattr__(self, "k_hat", kh)
        if kh.shape != (self.height, self.width):
            raise ValidationError("k_hat array must have shape (height, width)")
        if kh.min() < 0 or kh.max() > self.n_levels:
            raise ValidationError("selected indices outside 0..K")


@dataclass(frozen=True)
class ScaleEstimate:
    sigma: float
    degenerate: bool


def estimate_noise_scale(image: Image, kind: NoiseKind = NoiseKind.laplace()
                         ) -> ScaleEstimate:
    """Robust noise scale from horizontal first differences.

    sigma = median|Y(x+1, y) - Y(x, y)| / c with c the median absolute
    difference of two independent unit-scale draws of the noise law. Edges
    contaminate only the few differences that straddle them, which the
    median ignores. A constant image returns 0 with the degenerate flag set.
    """
    if image.width < 2 or image.height < 2:
        raise ValidationError("scale estimation needs at least a 2x2 image")
    diffs = np.abs(np.diff(image.intensities, axis=1))
    med = float(np.median(diffs))
    if med == 0.0:
        return ScaleEstimate(0.0, True)
    return ScaleEstimate(med / abs_diff_median(kind), False)


@dataclass(frozen=True)
class DenoiseConfig:
    """Denoising parameters, normally taken from a calibration artifact."""

    loss: LossKind
    radii: tuple[float, ...]
    noise: NoiseKind
    crit: CriticalValues
    levels_method: str
    r: float
    alpha: float
    noise_scale: float | str = "auto"
    workers: int | None = None

    def __post_init__(self) -> None:
        if isinstance(self.noise_scale, str):
            if self.noise_scale != "auto":
                raise ValidationError("noise_scale must be a nonnegative real or 'auto'")
        elif not self.noise_scale >= 0:
            raise ValidationError("noise_scale must be nonnegative")
        if self.levels_method not in ("asymptotic", "exact_mean"):
            raise ValidationError(
                "imaging needs closed-form levels (asymptotic or exact_mean); "
                "monte carlo level artifacts cannot be rebuilt for clipped borders")

    @classmethod
    def from_artifact(cls, art: CalibArtifact, noise_scale: float | str = "auto",
                      workers: int | None = None) -> "DenoiseConfig":
        if art.family_kind != "disc2d":
            raise ValidationError("denoising needs a disc2d calibration artifact")
        return cls(loss=art.loss, radii=tuple(art.family_meta["radii"]),
                   noise=art.noise, crit=art.crit, levels_method=art.levels.method,
                   r=art.r, alpha=art.alpha, noise_scale=noise_scale, workers=workers)


def _levels_for_family(family: WindowFamily, config: DenoiseConfig) -> Levels:
    if config.levels_method == "exact_mean":
        return levels_exact_mean(family, config.r)
    if config.loss.kind in ("median", "quantile"):
        alpha = 0.5 if config.loss.kind == "median" else config.loss.alpha
        f0 = density(config.noise, quantile_point(config.noise, alpha))
        return levels_asymptotic(family, config.loss, f0, config.r)
    raise ValidationError(f"no closed-form levels for loss {config.loss.kind!r}")


def _ring_thresholds(levels: Levels, crit: CriticalValues, sigma: float) -> np.ndarray:
    """Selection thresholds scaled to the noise level; lower triangular in (k, j)."""
    K = levels.K
    zf = crit.full(K)
    thr = np.full((K, K), np.nan)
    for k in range(K):
        thr[k, : k + 1] = (zf[: k + 1] * levels.s_ring[k, : k + 1]
                           + zf[k + 1] * levels.s[k + 1])
    return thr * sigma


def _select_with_thresholds(bases: np.ndarray, rings: np.ndarray,
                            thr: np.ndarray) -> np.ndarray:
    """Batch ring-rule stopping loop against precomputed thresholds."""
    K = thr.shape[0]
    k_hat = np.full(bases.shape[0], K, dtype=np.int64)
    undecided = np.ones(bases.shape[0], dtype=bool)
    for k in range(K):
        stat = np.abs(rings[:, k, None] - bases[:, : k + 1])
        reject = (stat > thr[k, : k + 1]).any(axis=1)
        k_hat[undecided & reject] = k
        undecided &= ~reject
        if not undecided.any():
            break
    return k_hat


def _crit_subset(crit: CriticalValues, kept: np.ndarray) -> CriticalValues:
    """Critical values for a clipped family that dropped duplicate levels.

    kept maps local level index to the original one. Each surviving test
    step reuses the original critical value of its level; the last kept
    level takes over the role of the final window with its value pinned to
    1. A running minimum keeps the sequence non-increasing after subsetting.
    """
    if kept.size < 2:
        raise ValidationError("clipped family collapsed to a single window")
    z = crit.full(crit.K)[kept[:-1]]
    z = np.maximum(np.minimum.accumulate(z), 1e-12)
    return CriticalValues(z=z, alpha=crit.alpha, r=crit.r, zeta=None)


def _interior_estimates(img: np.ndarray, family: WindowFamily, loss: LossKind,
                        reach: int) -> tuple[np.ndarray, np.ndarray]:
    """Window and ring estimates at every pixel via 2d rank filters.

    Only pixels at distance >= reach from every border see unclipped
    windows; callers must ignore the rest. Odd-count footprints take the
    middle rank; even counts average the two middle ranks, matching the
    midpoint convention of locate().
    """
    K = family.K
    side = 2 * reach + 1
    h, w = img.shape
    bases = np.empty((K + 1, h, w))
    rings = np.empty((K, h, w))

    def footprint(indices: np.ndarray) -> np.ndarray:
        fp = np.zeros(side * side, dtype=bool)
        fp[indices] = True
        return fp.reshape(side, side)

    def filtered(fp: np.ndarray) -> np.ndarray:
        n = int(fp.sum())
        if loss.kind == "mean":
            return ndimage.correlate(img, fp / n, mode="nearest")
        alpha = 0.5 if loss.kind == "median" else loss.alpha
        i, j = _quantile_bracket(n, alpha)
        low = ndimage.rank_filter(img, i, footprint=fp, mode="nearest")
        if i == j:
            return low
        high = ndimage.rank_filter(img, j, footprint=fp, mode="nearest")
        return 0.5 * (low + high)

    for k in range(K + 1):
        bases[k] = filtered(footprint(family.members(k)))
    for k in range(K):
        rings[k] = filtered(footprint(family.ring(k)))
    return bases, rings


def denoise_image(image: Image, config: DenoiseConfig) -> tuple[Image, KhatMap]:
    """Adaptive denoising; returns the estimate image and the window-size map.

    Pixels are processed independently, so the output does not depend on the
    worker count, and adding a constant to the input adds it to the output
    without touching the selected indices.
    """
    if config.loss.kind == "huber":
        raise ValidationError("huber loss has no closed-form levels for imaging")
    img = image.intensities
    h, w = image.height, image.width

    if isinstance(config.noise_scale, str):
        sigma = estimate_noise_scale(image, config.noise).sigma
    else:
        sigma = float(config.noise_scale)

    radii = np.asarray(config.radii, dtype=float)
    reach = int(np.floor(radii[-1]))
    side = 2 * reach + 1
    interior_family = build_family_2d(side, side, (reach, reach), radii)
    if interior_family.dropped_levels:
        raise ValidationError(
            "radii produce duplicate interior windows; calibrate on deduplicated radii")
    K = interior_family.K
    if K != config.crit.K:
        raise ValidationError("calibration artifact does not match the radii")

    out = np.empty((h, w))
    k_hat = np.empty((h, w), dtype=np.int16)

    # interior pixels: every window fits without clipping
    xi0, xi1 = reach, w - reach  # half-open pixel ranges
    yi0, yi1 = reach, h - reach
    if xi1 > xi0 and yi1 > yi0:
        levels = _levels_for_family(interior_family, config)
        thr = _ring_thresholds(levels, config.crit, sigma)
        bases, rings = _interior_estimates(img, interior_family, config.loss, reach)
        sel_bases = bases[:, yi0:yi1, xi0:xi1].reshape(K + 1, -1).T.copy()
        sel_rings = rings[:, yi0:yi1, xi0:xi1].reshape(K, -1).T.copy()
        kh = _select_with_thresholds(sel_bases, sel_rings, thr)
        theta = np.take_along_axis(sel_bases, kh[:, None], axis=1)[:, 0]
        out[yi0:yi1, xi0:xi1] = theta.reshape(yi1 - yi0, xi1 - xi0)
        k_hat[yi0:yi1, xi0:xi1] = kh.reshape(yi1 - yi0, xi1 - xi0)

    # border band: explicit per-pixel windows, cached per clip shape
    border = [(x, y) for y in range(h) for x in range(w)
              if not (xi0 <= x < xi1 and yi0 <= y < yi1)]
    cache: dict[tuple[int, int, int, int], tuple] = {}

    def geometry(x: int, y: int) -> tuple:
        key = (min(x, reach), min(w - 1 - x, reach),
               min(y, reach), min(h - 1 - y, reach))
        if key not in cache:
            left, right, top, bottom = key
            fam = build_family_2d(left + right + 1, top + bottom + 1,
                                  (left, top), radii)
            kept = np.asarray(
                [lvl for lvl in range(len(radii)) if lvl not in fam.dropped_levels],
                dtype=int)
            crit = (config.crit if kept.size == len(radii)
                    else _crit_subset(config.crit, kept))
            lv = _levels_for_family(fam, config)
            thr = _ring_thresholds(lv, crit, sigma)
            patch_w = left + right + 1
            mem_off = [(fam.members(k) // patch_w - top, fam.members(k) % patch_w - left)
                       for k in range(fam.K + 1)]
            ring_off = [(fam.ring(k) // patch_w - top, fam.ring(k) % patch_w - left)
                        for k in range(fam.K)]
            cache[key] = (fam.K, kept, thr, mem_off, ring_off)
        return cache[key]

    loss = config.loss

    def do_border(lo: int, hi: int) -> None:
        for idx in range(lo, hi):
            x, y = border[idx]
            Kg, kept, thr, mem_off, ring_off = geometry(x, y)
            base = np.empty(Kg + 1)
            for k, (dy, dx) in enumerate(mem_off):
                base[k] = locate(img[y + dy, x + dx], loss).value
            sel = Kg
            for k in range(Kg):
                dy, dx = ring_off[k]
                ring_val = locate(img[y + dy, x + dx], loss).value
                if np.any(np.abs(ring_val - base[: k + 1]) > thr[k, : k + 1]):
                    sel = k
                    break
            out[y, x] = base[sel]
            k_hat[y, x] = kept[sel]

    if border:
        # geometries touched by several chunks are built once up front so the
        # cache is read-only during the parallel phase
        for x, y in border:
            geometry(x, y)
        run_chunks(do_border, len(border), config.workers, chunk=256)

    return (Image(width=w, height=h, intensities=out),
            KhatMap(width=w, height=h, k_hat=k_hat, n_levels=K))
