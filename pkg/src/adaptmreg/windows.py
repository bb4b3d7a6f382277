"""Nested neighbourhood families around a point: 1d intervals and 2d discs.

A family is stored as a single nearest-first ordering of design indices plus
the cumulative window sizes, so every window is a prefix of the ordering and
every ring (the increment between consecutive windows) is a contiguous slice.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

__all__ = [
    "WindowFamily",
    "RingDecomposition",
    "benchmark_counts",
    "equidistant_design",
    "build_family_1d",
    "build_family_2d",
    "default_disc_radii",
    "ring_indices",
    "ring_decomposition",
]

# declared geometric-growth targets for the benchmark count sequence
BENCH_GROWTH = (1.15, 1.35)
# 2d lattice discs grow less regularly; targets are correspondingly looser
DISC_GROWTH = (1.1, 1.7)

DEFAULT_DISC_BASE = 1.5
# squared ratio ~ 1.4 so ring pixel counts grow roughly geometrically
DEFAULT_DISC_GROWTH = 1.4 ** 0.5
DEFAULT_DISC_LEVELS = 10


@dataclass(frozen=True)
class WindowFamily:
    """Nested index windows U_0 c U_1 c ... c U_K around a centre.

    order holds design indices sorted by distance to the centre (ties broken
    towards the smaller index), counts holds the strictly increasing window
    sizes. growth_lo/growth_hi are the declared geometric targets for
    consecutive size ratios; levels where discreteness breaks them are
    recorded in growth_violations. 2d construction may drop radii whose
    clipped pixel count duplicates the previous level; the dropped level
    positions are kept in dropped_levels.
    """

    center: tuple[float, ...] | float
    order: np.ndarray
    counts: np.ndarray
    growth_lo: float = BENCH_GROWTH[0]
    growth_hi: float = BENCH_GROWTH[1]
    growth_violations: tuple[int, ...] = ()
    dropped_levels: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=int)
        order = np.asarray(self.order, dtype=int)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "order", order)
        if counts.ndim != 1 or counts.size == 0 or counts[0] < 1:
            raise ValidationError("counts must be a nonempty positive sequence")
        if np.any(np.diff(counts) <= 0):
            raise ValidationError("counts must be strictly increasing")
        if order.size < counts[-1]:
            raise ValidationError("ordering shorter than the largest window")
        if np.unique(order[: counts[-1]]).size != counts[-1]:
            raise ValidationError("window ordering contains duplicate indices")
        if not (self.growth_lo > 1.0 and self.growth_hi >= self.growth_lo):
            raise ValidationError("growth targets need 1 < growth_lo <= growth_hi")

    @property
    def K(self) -> int:
        return int(self.counts.size - 1)

    @property
    def sizes(self) -> np.ndarray:
        return self.counts.copy()

    def members(self, k: int) -> np.ndarray:
        """Sorted design indices of window k."""
        if not 0 <= k <= self.K:
            raise ValidationError(f"window index {k} outside 0..{self.K}")
        return np.sort(self.order[: self.counts[k]])

    def ring(self, k: int) -> np.ndarray:
        """Indices added when window k grows to window k+1."""
        if not 0 <= k < self.K:
            raise ValidationError(f"ring index {k} outside 0..{self.K - 1}")
        return self.order[self.counts[k]: self.counts[k + 1]].copy()


@dataclass(frozen=True)
class RingDecomposition:
    """Base window plus the disjoint rings that rebuild every larger window."""

    base: np.ndarray
    rings: tuple[np.ndarray, ...] = field(default=())


def benchmark_counts(n_levels: int = 17, variant: str = "standard") -> np.ndarray:
    """Window sizes for the 1d benchmark family, evaluated in exact integers.

    standard: floor(5^(k+1) / 4^k), k = 0..n_levels-1, i.e. 5, 6, 7, ..., 177
    for 17 levels. alt: floor(4 * (5/4)^k), the same law started at 4.
    """
    if n_levels < 1:
        raise ValidationError("n_levels must be positive")
    if variant == "standard":
        vals = [(5 ** (k + 1)) // (4 ** k) for k in range(n_levels)]
    elif variant == "alt":
        vals = [(4 * 5 ** k) // (4 ** k) for k in range(n_levels)]
    else:
        raise ValidationError(f"unknown counts variant {variant!r}")
    return np.asarray(vals, dtype=int)


def equidistant_design(n: int, lo: float = -1.0, hi: float = 1.0) -> np.ndarray:
    """n equidistant design points including both endpoints."""
    if n < 2:
        raise ValidationError("design needs at least two points")
    return np.linspace(lo, hi, n)


def _growth_violations(counts: np.ndarray, lo: float, hi: float) -> tuple[int, ...]:
    ratios = counts[1:] / counts[:-1]
    bad = np.flatnonzero((ratios < lo - 1e-12) | (ratios > hi + 1e-12))
    return tuple(int(k) for k in bad)


def build_family_1d(design_xs, center: float, counts,
                    growth: tuple[float, float] = BENCH_GROWTH) -> WindowFamily:
    """Windows of the given sizes over the design points nearest to center.

    Distance ties are broken towards the smaller index, so the construction
    is deterministic on equidistant grids. Nesting holds by construction.
    """
    xs = np.asarray(design_xs, dtype=float)
    if xs.ndim != 1 or xs.size == 0 or not np.all(np.isfinite(xs)):
        raise ValidationError("design must be a nonempty finite 1-d sequence")
    if np.any(np.diff(xs) < 0):
        raise ValidationError("design must be sorted")
    counts = np.asarray(counts, dtype=int)
    if counts.size and counts[-1] > xs.size:
        raise ValidationError(
            f"largest window ({int(counts[-1])}) exceeds the design size ({xs.size})")
    order = np.argsort(np.abs(xs - center), kind="stable")[: counts[-1]]
    return WindowFamily(
        center=float(center),
        order=order,
        counts=counts,
        growth_lo=growth[0],
        growth_hi=growth[1],
        growth_violations=_growth_violations(counts, *growth),
    )


def default_disc_radii(n_levels: int = DEFAULT_DISC_LEVELS,
                       base: float = DEFAULT_DISC_BASE,
                       growth: float = DEFAULT_DISC_GROWTH) -> np.ndarray:
    """Geometrically growing disc radii for the 2d family."""
    if n_levels < 1 or base <= 0 or growth <= 1:
        raise ValidationError("need n_levels >= 1, base > 0, growth > 1")
    return base * growth ** np.arange(n_levels)


def build_family_2d(width: int, height: int, center: tuple[int, int], radii,
                    growth: tuple[float, float] = DISC_GROWTH) -> WindowFamily:
    """Discs of the given radii around a pixel, clipped at the image borders.

    Pixels are ordered by (squared distance, flat row-major index). Radii
    whose clipped pixel count repeats the previous level are dropped and
    recorded, which repairs monotonicity near borders.
    """
    cx, cy = int(center[0]), int(center[1])
    if not (0 <= cx < width and 0 <= cy < height):
        raise ValidationError("center must lie inside the image")
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0 or np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ValidationError("radii must be positive and strictly increasing")

    reach = int(np.floor(radii[-1]))
    x0, x1 = max(0, cx - reach), min(width - 1, cx + reach)
    y0, y1 = max(0, cy - reach), min(height - 1, cy + reach)
    gx, gy = np.meshgrid(np.arange(x0, x1 + 1), np.arange(y0, y1 + 1))
    gx, gy = gx.ravel(), gy.ravel()
    dist2 = (gx - cx) ** 2 + (gy - cy) ** 2
    flat = gy * width + gx
    keep = dist2 <= radii[-1] ** 2 + 1e-9
    dist2, flat = dist2[keep], flat[keep]
    perm = np.lexsort((flat, dist2))
    dist2, order = dist2[perm], flat[perm]

    raw_counts = np.searchsorted(dist2, radii ** 2 + 1e-9, side="right")
    counts, dropped = [], []
    for lvl, c in enumerate(raw_counts):
        if counts and c <= counts[-1]:
            dropped.append(lvl)
        else:
            counts.append(int(c))
    counts = np.asarray(counts, dtype=int)
    return WindowFamily(
        center=(cx, cy),
        order=order,
        counts=counts,
        growth_lo=growth[0],
        growth_hi=growth[1],
        growth_violations=_growth_violations(counts, *growth),
        dropped_levels=tuple(dropped),
    )


def ring_indices(family: WindowFamily, k: int) -> np.ndarray:
    """Indices in window k+1 but not in window k."""
    return family.ring(k)


def ring_decomposition(family: WindowFamily) -> RingDecomposition:
    return RingDecomposition(
        base=family.members(0),
        rings=tuple(family.ring(k) for k in range(family.K)),
    )
