"""Simulation studies: the 1d benchmark and the statistical validation suites.

The benchmark estimates a signal at x = 0 from n equidistant noisy
observations on [-1, 1] and reports, per method, the Monte Carlo median of
the absolute error. Methods: local means or local medians combined with
either the classical selection rule or the ring rule, plus the fixed oracle
window. Calibration artifacts are produced once (for Laplace noise) and
reused unchanged for the other noise laws, which is exactly the robustness
point the benchmark is after.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .calibration import CalibArtifact
from .errors import ValidationError
from .levels import normal_abs_moment
from .losses import LossKind, locate_rows
from .noise import NoiseKind, RngStream, cdf, density, density_at_zero, sample_noise
from .parallel import run_chunks
from .selector import select_lepski_batch, select_ring_batch
from .windows import build_family_1d, equidistant_design

__all__ = [
    "METHODS",
    "signal_step",
    "signal_smooth",
    "ExperimentSpec",
    "BenchRow",
    "BenchmarkReport",
    "run_benchmark",
    "TwoSampleReport",
    "two_sample_study",
    "MomentRow",
    "MomentReport",
    "median_moment_study",
    "TailRow",
    "TailReport",
    "tail_study",
]

# fixed reporting order of the benchmark methods
METHODS = ("mean_lepski", "mean_ring", "median_lepski", "median_ring", "median_oracle")

ORACLE_HALFWIDTH = {1: 0.2, 2: 0.39}


def signal_step(x: np.ndarray) -> np.ndarray:
    """Change-point example: 0 on |x| <= 0.2 and 2 outside."""
    return np.where(np.abs(x) <= 0.2, 0.0, 2.0)


def signal_smooth(x: np.ndarray) -> np.ndarray:
    """Smooth example 2 x (x + 1), a caricature of a C2 function near 0."""
    return 2.0 * x * (x + 1.0)


SIGNALS: dict[int, Callable[[np.ndarray], np.ndarray]] = {1: signal_step, 2: signal_smooth}


@dataclass(frozen=True)
class ExperimentSpec:
    """One benchmark run: which example, noise, size and methods."""

    example: int
    noise: NoiseKind
    n: int = 200
    runs: int = 1000
    methods: tuple[str, ...] = METHODS
    seed: int = 0
    signal: Callable[[np.ndarray], np.ndarray] | None = None
    oracle_halfwidth: float | None = None
    workers: int | None = None

    def __post_init__(self) -> None:
        if not self.methods:
            raise ValidationError("methods must be nonempty")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValidationError(f"unknown methods {unknown}")
        if self.signal is None and self.example not in SIGNALS:
            raise ValidationError("example must be 1 or 2, or pass a custom signal")
        if self.runs < 1:
            raise ValidationError("runs must be positive")

    def signal_fn(self) -> Callable[[np.ndarray], np.ndarray]:
        return self.signal if self.signal is not None else SIGNALS[self.example]

    def oracle_hw(self) -> float:
        if self.oracle_halfwidth is not None:
            return self.oracle_halfwidth
        if self.signal is not None or self.example not in ORACLE_HALFWIDTH:
            raise ValidationError("custom signals need an explicit oracle_halfwidth")
        return ORACLE_HALFWIDTH[self.example]


@dataclass(frozen=True)
class BenchRow:
    example: str
    noise: str
    method: str
    mc_median_abs_error: float
    runs: int
    seed: int


@dataclass(frozen=True)
class BenchmarkReport:
    rows: tuple[BenchRow, ...]

    CSV_HEADER = "example,noise,method,mc_median_abs_error,runs,seed"

    def value(self, method: str) -> float:
        for row in self.rows:
            if row.method == method:
                return row.mc_median_abs_error
        raise KeyError(method)

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for r in self.rows:
            lines.append(f"{r.example},{r.noise},{r.method},"
                         f"{r.mc_median_abs_error!r},{r.runs},{r.seed}")
        return "\n".join(lines) + "\n"


def _check_artifacts(spec: ExperimentSpec, calib: Mapping[str, CalibArtifact]
                     ) -> np.ndarray:
    needed = [m for m in spec.methods if m != "median_oracle"]
    missing = [m for m in needed if m not in calib]
    if missing:
        raise ValidationError(f"missing calibration artifacts for {missing}")
    counts = None
    for m in needed:
        art = calib[m]
        want_loss = "mean" if m.startswith("mean") else "median"
        want_rule = "lepski" if m.endswith("lepski") else "ring"
        if art.loss.kind != want_loss or art.rule != want_rule:
            raise ValidationError(f"artifact for {m} was calibrated as "
                                  f"{art.loss.kind}/{art.rule}")
        if art.rule == "lepski" and art.pair is None:
            raise ValidationError(f"artifact for {m} lacks pair levels")
        if art.family_kind != "line1d" or int(art.family_meta["n"]) != spec.n:
            raise ValidationError(f"artifact for {m} does not match an n={spec.n} design")
        if counts is None:
            counts = art.counts
        elif not np.array_equal(counts, art.counts):
            raise ValidationError("calibration artifacts use different window families")
    if counts is None:
        # oracle-only run; any valid family works, use the benchmark default
        from .windows import benchmark_counts
        counts = benchmark_counts()
    if counts[-1] > spec.n:
        raise ValidationError("window family larger than the design")
    return counts


def run_benchmark(spec: ExperimentSpec, calib: Mapping[str, CalibArtifact]
                  ) -> BenchmarkReport:
    """Monte Carlo median absolute error at x = 0 for each requested method."""
    counts = _check_artifacts(spec, calib)
    xs = equidistant_design(spec.n)
    family = build_family_1d(xs, 0.0, counts)
    g = spec.signal_fn()(xs)
    theta = float(spec.signal_fn()(np.zeros(1))[0])
    oracle_idx = np.flatnonzero(np.abs(xs) <= spec.oracle_hw() + 1e-12)
    order = family.order
    K = family.K

    need_mean = any(m.startswith("mean") for m in spec.methods)
    need_median = any(m.startswith("median") and m != "median_oracle"
                      for m in spec.methods)
    errors = {m: np.empty(spec.runs) for m in spec.methods}

    def task(lo: int, hi: int) -> None:
        m = hi - lo
        y = np.empty((m, spec.n))
        for i in range(lo, hi):
            y[i - lo] = g + sample_noise(spec.noise, spec.n, RngStream(spec.seed, i))
        yw = y[:, order]
        for loss_name, want in (("mean", need_mean), ("median", need_median)):
            if not want:
                continue
            loss = LossKind(loss_name)
            bases = np.empty((m, K + 1))
            rings = np.empty((m, K))
            for k in range(K + 1):
                bases[:, k] = locate_rows(yw[:, : counts[k]], loss)
            for k in range(K):
                rings[:, k] = locate_rows(yw[:, counts[k]: counts[k + 1]], loss)
            for method in spec.methods:
                if not method.startswith(loss_name) or method == "median_oracle":
                    continue
                art = calib[method]
                if method.endswith("lepski"):
                    k_hat = select_lepski_batch(bases, art.pair, art.crit)
                else:
                    k_hat = select_ring_batch(bases, rings, art.levels, art.crit)
                theta_hat = np.take_along_axis(bases, k_hat[:, None], axis=1)[:, 0]
                errors[method][lo:hi] = np.abs(theta_hat - theta)
        if "median_oracle" in spec.methods:
            est = locate_rows(y[:, oracle_idx], LossKind.median())
            errors["median_oracle"][lo:hi] = np.abs(est - theta)

    run_chunks(task, spec.runs, spec.workers)
    example_label = str(spec.example) if spec.signal is None else "custom"
    rows = tuple(
        BenchRow(example_label, spec.noise.label, m,
                 float(np.median(errors[m])), spec.runs, spec.seed)
        for m in METHODS if m in spec.methods)
    return BenchmarkReport(rows=rows)


# ----------------------------------------------------------------------------
# two-sample location test variances
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoSampleReport:
    """Monte Carlo and formula variances of the two test statistics.

    var_w is for the difference of the two within-sample medians (centered
    at the shift); var_l for twice the pooled-minus-first-sample median
    difference, centered the same way. The formula values are the limiting
    variances 1 / (2 f(0)^2) and the pooled-statistic expression in terms of
    the cdf and density at half the shift.
    """

    kind: str
    delta: float
    n: int
    runs: int
    seed: int
    var_w_mc: float
    var_l_mc: float
    var_w_formula: float
    var_l_formula: float

    CSV_HEADER = ("kind,delta,n,runs,seed,var_w_mc,var_l_mc,"
                  "var_w_formula,var_l_formula")

    def to_csv(self) -> str:
        return (self.CSV_HEADER + "\n" +
                f"{self.kind},{self.delta!r},{self.n},{self.runs},{self.seed},"
                f"{self.var_w_mc!r},{self.var_l_mc!r},"
                f"{self.var_w_formula!r},{self.var_l_formula!r}\n")


def pooled_variance_formula(kind: NoiseKind, delta: float) -> float:
    """Limit variance of the pooled two-sample median statistic at shift delta."""
    f0 = density_at_zero(kind)
    fd = density(kind, delta / 2.0)
    Fd = cdf(kind, delta / 2.0)
    return (2.0 * Fd * (1.0 - Fd) / fd ** 2 + 1.0 / f0 ** 2
            - 2.0 * (1.0 - Fd) / (f0 * fd))


def two_sample_study(kind: NoiseKind, delta: float, n: int, runs: int,
                     seed: int, workers: int | None = None) -> TwoSampleReport:
    """Compare the two-sample median test statistics under a location shift.

    Sample one is pure noise, sample two is noise plus delta. The study
    records sqrt(n)-scaled variances of both statistics over the replicates
    together with their limiting formula values.
    """
    if delta < 0:
        raise ValidationError("delta must be nonnegative")
    if kind.scale != 1.0:
        raise ValidationError("the study assumes unit-scale (standardized) noise")
    if n < 2 or runs < 2:
        raise ValidationError("need n >= 2 and runs >= 2")
    med = LossKind.median()
    stat_w = np.empty(runs)
    stat_l = np.empty(runs)

    def task(lo: int, hi: int) -> None:
        m = hi - lo
        block = np.empty((m, 2 * n))
        for i in range(lo, hi):
            block[i - lo] = sample_noise(kind, 2 * n, RngStream(seed, i))
        block[:, n:] += delta
        med1 = locate_rows(block[:, :n], med)
        med2 = locate_rows(block[:, n:], med)
        med_all = locate_rows(block, med)
        root_n = math.sqrt(n)
        stat_w[lo:hi] = root_n * (med2 - med1 - delta)
        stat_l[lo:hi] = root_n * (2.0 * (med_all - med1) - delta)

    run_chunks(task, runs, workers)
    f0 = density_at_zero(kind)
    return TwoSampleReport(
        kind=kind.label, delta=delta, n=n, runs=runs, seed=seed,
        var_w_mc=float(stat_w.var(ddof=1)),
        var_l_mc=float(stat_l.var(ddof=1)),
        var_w_formula=1.0 / (2.0 * f0 ** 2),
        var_l_formula=pooled_variance_formula(kind, delta))


# ----------------------------------------------------------------------------
# sample median moments and tails
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentRow:
    n_points: int
    raw_moment: float
    normalized_moment: float


@dataclass(frozen=True)
class MomentReport:
    kind: str
    r: float
    runs: int
    seed: int
    rows: tuple[MomentRow, ...]

    CSV_HEADER = "kind,r,n_points,runs,seed,raw_moment,normalized_moment"

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for row in self.rows:
            lines.append(f"{self.kind},{self.r!r},{row.n_points},{self.runs},"
                         f"{self.seed},{row.raw_moment!r},{row.normalized_moment!r}")
        return "\n".join(lines) + "\n"


def _median_samples(kind: NoiseKind, n: int, runs: int, seed: int,
                    workers: int | None) -> np.ndarray:
    med = LossKind.median()
    out = np.empty(runs)

    def task(lo: int, hi: int) -> None:
        block = np.empty((hi - lo, n))
        for i in range(lo, hi):
            block[i - lo] = sample_noise(kind, n, RngStream(seed, i))
        out[lo:hi] = locate_rows(block, med)

    run_chunks(task, runs, workers)
    return out


def median_moment_study(kind: NoiseKind, Ns: Sequence[int], r: float, runs: int,
                        seed: int, workers: int | None = None) -> MomentReport:
    """Normalized r-th moments of the sample median over pure noise.

    For each odd N the raw moment E|med|^r is scaled by (2 f(0) sqrt(N))^r
    and divided by E|Z|^r, so the normal limit puts the ratio at 1; the ratio
    staying flat in N checks the N^(-r/2) moment scaling.
    """
    if any(n % 2 == 0 or n < 1 for n in Ns):
        raise ValidationError("sample sizes must be odd and positive")
    if runs < 2:
        raise ValidationError("need at least 2 runs")
    f0 = density_at_zero(kind)
    ez = normal_abs_moment(r)
    rows = []
    for n in Ns:
        med = _median_samples(kind, int(n), runs, seed, workers)
        raw = float(np.mean(np.abs(med) ** r))
        normalized = raw * (2.0 * f0 * math.sqrt(n)) ** r / ez
        rows.append(MomentRow(int(n), raw, normalized))
    return MomentReport(kind=kind.label, r=float(r), runs=runs, seed=seed,
                        rows=tuple(rows))


@dataclass(frozen=True)
class TailRow:
    tau: float
    exceedance: float
    bound: float


@dataclass(frozen=True)
class TailReport:
    kind: str
    n_points: int
    runs: int
    seed: int
    rows: tuple[TailRow, ...]

    CSV_HEADER = "kind,n_points,tau,runs,seed,exceedance,bound"

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for row in self.rows:
            lines.append(f"{self.kind},{self.n_points},{row.tau!r},{self.runs},"
                         f"{self.seed},{row.exceedance!r},{row.bound!r}")
        return "\n".join(lines) + "\n"


def tail_study(kind: NoiseKind, n: int, taus: Sequence[float], runs: int,
               seed: int, workers: int | None = None) -> TailReport:
    """Exceedance of the scaled sample median versus the 2 exp(-tau^2 / 8) cap."""
    if n % 2 == 0 or n < 1:
        raise ValidationError("sample size must be odd and positive")
    taus = [float(t) for t in taus]
    if any(t < 0 or t > math.sqrt(n) / 2.0 for t in taus):
        raise ValidationError("need 0 <= tau <= sqrt(N) / 2")
    med = _median_samples(kind, n, runs, seed, workers)
    scaled = 2.0 * math.sqrt(n) * density_at_zero(kind) * np.abs(med)
    rows = tuple(
        TailRow(t, float(np.mean(scaled > t)), float(2.0 * math.exp(-t * t / 8.0)))
        for t in taus)
    return TailReport(kind=kind.label, n_points=n, runs=runs, seed=seed, rows=rows)
