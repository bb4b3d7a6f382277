"""Stochastic error levels of the window and ring estimators under pure noise.

s[j] is the r-th-moment scale of the window-j estimate when the signal is
identically zero; s_ring[k, j] is the scale of the difference between the
ring-k estimate and the window-j estimate (defined for j <= k). Three
methods: exact formulas for unit-variance sample means, normal-limit
asymptotics for medians and quantiles, and plain Monte Carlo for anything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ValidationError
from .losses import LossKind, locate_rows
from .noise import NoiseKind, RngStream, quantile_point, sample_noise
from .parallel import run_chunks
from .windows import WindowFamily

__all__ = [
    "Levels",
    "PairLevels",
    "normal_abs_moment",
    "levels_exact_mean",
    "levels_asymptotic",
    "levels_mc",
    "pair_levels_exact_mean",
    "pair_levels_asymptotic",
    "pair_levels_mc",
    "simulate_window_estimates",
]

MC_WARN_RUNS = 10000


@dataclass(frozen=True)
class Levels:
    """Error levels for one window family.

    s has one entry per window (K+1 values); s_ring is lower triangular with
    entry [k, j] for j <= k <= K-1 and NaN above the diagonal. Levels scale
    linearly in the noise scale, see scaled().
    """

    r: float
    s: np.ndarray
    s_ring: np.ndarray
    method: str
    runs: int | None = None
    seed: int | None = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        s = np.asarray(self.s, dtype=float)
        s_ring = np.asarray(self.s_ring, dtype=float)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "s_ring", s_ring)
        if self.r < 1:
            raise ValidationError("moment order r must be >= 1")
        if s.ndim != 1 or s.size < 1 or np.any(s <= 0):
            raise ValidationError("s must be strictly positive")
        K = s.size - 1
        if s_ring.shape != (K, K):
            raise ValidationError(f"s_ring must have shape ({K}, {K})")
        if np.any(np.diff(s) > 0):
            if self.method == "monte_carlo":
                object.__setattr__(
                    self, "warnings",
                    self.warnings + ("monte carlo levels are not monotone in the window index",))
            else:
                raise ValidationError("levels must be non-increasing in the window index")

    @property
    def K(self) -> int:
        return int(self.s.size - 1)

    def scaled(self, factor: float) -> "Levels":
        """Levels for noise scale multiplied by factor (locations are equivariant)."""
        if factor < 0:
            raise ValidationError("scale factor must be nonnegative")
        return Levels(self.r, self.s * factor, self.s_ring * factor, self.method,
                      self.runs, self.seed, self.warnings)


@dataclass(frozen=True)
class PairLevels:
    """Error levels of differences between two window estimates.

    s_pair[m, l] is the scale of estimate_m - estimate_l under pure noise,
    defined for l < m; NaN elsewhere.
    """

    r: float
    s_pair: np.ndarray
    method: str
    runs: int | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        sp = np.asarray(self.s_pair, dtype=float)
        object.__setattr__(self, "s_pair", sp)
        if sp.ndim != 2 or sp.shape[0] != sp.shape[1] or sp.shape[0] < 2:
            raise ValidationError("s_pair must be square with at least two windows")
        tril = np.tril_indices(sp.shape[0], k=-1)
        if np.any(~np.isfinite(sp[tril])) or np.any(sp[tril] <= 0):
            raise ValidationError("pair levels below the diagonal must be positive")

    @property
    def K(self) -> int:
        return int(self.s_pair.shape[0] - 1)


def normal_abs_moment(r: float) -> float:
    """E|Z|^r for a standard normal Z."""
    if r < 0:
        raise ValidationError("moment order must be nonnegative")
    return float(2.0 ** (r / 2.0) * special.gamma((r + 1.0) / 2.0) / math.sqrt(math.pi))


def _ring_sizes(family: WindowFamily) -> np.ndarray:
    return np.diff(family.counts)


def levels_exact_mean(family: WindowFamily, r: float = 2.0) -> Levels:
    """Exact levels for sample means of unit-variance noise, r = 2 only.

    Windows and their rings are disjoint, so the variances of the difference
    add: s[j] = N_j^(-1/2) and s_ring[k, j] = (1/M_k + 1/N_j)^(1/2) with M_k
    the ring size.
    """
    if r != 2.0:
        raise ValidationError("exact mean levels are only available for r = 2")
    n = family.counts.astype(float)
    m = _ring_sizes(family).astype(float)
    K = family.K
    s = 1.0 / np.sqrt(n)
    s_ring = np.full((K, K), np.nan)
    for k in range(K):
        s_ring[k, : k + 1] = np.sqrt(1.0 / m[k] + 1.0 / n[: k + 1])
    return Levels(r=2.0, s=s, s_ring=s_ring, method="exact_mean")


def levels_asymptotic(family: WindowFamily, loss: LossKind, f0: float,
                      r: float = 2.0) -> Levels:
    """Normal-limit levels for median or quantile estimates.

    The sample alpha-quantile over N points is asymptotically normal with
    variance alpha * (1 - alpha) / (f0^2 N), f0 the density at the target
    quantile. The r-th moment scale multiplies the standard deviation by
    c_r = (E|Z|^r)^(1/r); differences combine by independence.
    """
    if loss.kind not in ("median", "quantile"):
        raise ValidationError("asymptotic levels apply to median and quantile losses")
    if not f0 > 0:
        raise ValidationError("density at the target quantile must be positive")
    alpha = 0.5 if loss.kind == "median" else loss.alpha
    c_r = normal_abs_moment(r) ** (1.0 / r)
    sd0 = math.sqrt(alpha * (1.0 - alpha)) / f0
    n = family.counts.astype(float)
    m = _ring_sizes(family).astype(float)
    K = family.K
    s = c_r * sd0 / np.sqrt(n)
    s_ring = np.full((K, K), np.nan)
    for k in range(K):
        s_ring[k, : k + 1] = c_r * sd0 * np.sqrt(1.0 / m[k] + 1.0 / n[: k + 1])
    return Levels(r=float(r), s=s, s_ring=s_ring, method="asymptotic")


def simulate_window_estimates(family: WindowFamily, loss: LossKind, kind: NoiseKind,
                              runs: int, seed: int, workers: int | None = None
                              ) -> tuple[np.ndarray, np.ndarray]:
    """Pure-noise window and ring estimates, one row per replicate.

    Replicate i draws its noise from substream i of seed, so the output is
    reproducible and independent of worker scheduling. Pure noise is
    exchangeable, hence draws are laid out directly in nearest-first window
    order. For a quantile loss the draws are shifted so that the target
    quantile of the noise sits at zero, matching the location model.
    """
    if runs < 1:
        raise ValidationError("runs must be positive")
    K = family.K
    n_max = int(family.counts[-1])
    shift = 0.0
    if loss.kind == "quantile":
        shift = quantile_point(kind, loss.alpha) * kind.scale
    bases = np.empty((runs, K + 1))
    rings = np.empty((runs, K))
    counts = family.counts

    def task(lo: int, hi: int) -> None:
        block = np.empty((hi - lo, n_max))
        for i in range(lo, hi):
            block[i - lo] = sample_noise(kind, n_max, RngStream(seed, i))
        if shift:
            block -= shift
        for k in range(K + 1):
            bases[lo:hi, k] = locate_rows(block[:, : counts[k]], loss)
        for k in range(K):
            rings[lo:hi, k] = locate_rows(block[:, counts[k]: counts[k + 1]], loss)

    run_chunks(task, runs, workers)
    return bases, rings


def _mc_runs_check(runs: int) -> tuple[str, ...]:
    if runs < 1000:
        raise ValidationError("monte carlo levels need at least 1000 runs")
    if runs < MC_WARN_RUNS:
        return (f"only {runs} monte carlo runs; estimates may be rough",)
    return ()


def levels_mc(family: WindowFamily, loss: LossKind, kind: NoiseKind, runs: int,
              r: float = 2.0, seed: int = 0, workers: int | None = None) -> Levels:
    """Monte Carlo levels: empirical r-th moments over pure-noise replicates."""
    warnings = _mc_runs_check(runs)
    bases, rings = simulate_window_estimates(family, loss, kind, runs, seed, workers)
    K = family.K
    s = np.mean(np.abs(bases) ** r, axis=0) ** (1.0 / r)
    s_ring = np.full((K, K), np.nan)
    for k in range(K):
        diffs = np.abs(rings[:, k, None] - bases[:, : k + 1])
        s_ring[k, : k + 1] = np.mean(diffs ** r, axis=0) ** (1.0 / r)
    return Levels(r=float(r), s=s, s_ring=s_ring, method="monte_carlo",
                  runs=runs, seed=seed, warnings=warnings)


def pair_levels_exact_mean(family: WindowFamily, r: float = 2.0) -> PairLevels:
    """Exact difference levels for nested sample means: sqrt(1/N_l - 1/N_m)."""
    if r != 2.0:
        raise ValidationError("exact mean pair levels are only available for r = 2")
    n = family.counts.astype(float)
    K = family.K
    sp = np.full((K + 1, K + 1), np.nan)
    for m in range(1, K + 1):
        sp[m, :m] = np.sqrt(1.0 / n[:m] - 1.0 / n[m])
    return PairLevels(r=2.0, s_pair=sp, method="exact_mean")


def pair_levels_asymptotic(family: WindowFamily, loss: LossKind, f0: float,
                           r: float = 2.0) -> PairLevels:
    """Normal-limit difference levels for nested median or quantile estimates.

    In the linearized limit the estimate over the larger window behaves like
    the average of indicator terms over its points, so the covariance of the
    nested pair equals the larger window's variance and the difference has
    variance alpha * (1 - alpha) / f0^2 * (1/N_l - 1/N_m), exactly the shape
    of the sample-mean case.
    """
    if loss.kind not in ("median", "quantile"):
        raise ValidationError("asymptotic pair levels apply to median and quantile losses")
    if not f0 > 0:
        raise ValidationError("density at the target quantile must be positive")
    alpha = 0.5 if loss.kind == "median" else loss.alpha
    c_r = normal_abs_moment(r) ** (1.0 / r)
    sd0 = math.sqrt(alpha * (1.0 - alpha)) / f0
    n = family.counts.astype(float)
    K = family.K
    sp = np.full((K + 1, K + 1), np.nan)
    for m in range(1, K + 1):
        sp[m, :m] = c_r * sd0 * np.sqrt(1.0 / n[:m] - 1.0 / n[m])
    return PairLevels(r=float(r), s_pair=sp, method="asymptotic")


def pair_levels_mc(family: WindowFamily, loss: LossKind, kind: NoiseKind, runs: int,
                   r: float = 2.0, seed: int = 0, workers: int | None = None) -> PairLevels:
    """Monte Carlo difference levels between nested window estimates.

    Nested estimates are dependent, so no independence shortcut applies; the
    moments are taken over joint pure-noise replicates.
    """
    _mc_runs_check(runs)
    bases, _ = simulate_window_estimates(family, loss, kind, runs, seed, workers)
    K = family.K
    sp = np.full((K + 1, K + 1), np.nan)
    for m in range(1, K + 1):
        diffs = np.abs(bases[:, m, None] - bases[:, :m])
        sp[m, :m] = np.mean(diffs ** r, axis=0) ** (1.0 / r)
    return PairLevels(r=float(r), s_pair=sp, method="monte_carlo", runs=runs, seed=seed)
