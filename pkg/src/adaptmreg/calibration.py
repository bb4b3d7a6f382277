"""Monte Carlo calibration of the critical values under pure noise.

The error budget requires, with the signal identically zero,

    sum_j E[ |base_j|^r * 1{step j rejects} ] <= alpha * s_K^r,

evaluated on a fixed replicate set (common random numbers), which makes the
left side monotone in the thresholds, so bisection is well posed.

The two search modes bound slightly different event families:

* "zeta" fits the one-parameter family
  z_k^2 = zeta * (2 r log(s_k/s_K) + log(1/alpha) + log K) and bisects the
  smallest zeta meeting the budget, with step j rejecting under the
  thresholds the selection rule actually applies, including the additive
  closing term z_{j+1} * s[j+1] of the ring rule. Calibrating the budget of
  the procedure that actually runs is what lets the ring rule match the
  classical rule for sample means; against bare thresholds the fitted zeta
  roughly doubles and the selector visibly oversmooths.

* "sequential" fixes z_0, z_1, ... in turn, each step spending at most
  alpha/K of the budget, counted at the first rejecting window index. Here
  the rejection events use the bare thresholds z_l * level only: the
  additive term would pull not-yet-determined later values into earlier
  searches. Bare events contain the selection-form events, so a sequential
  calibration is the more conservative of the two.

Validation on fresh replicates (verify_calibration) always measures the
selection-form budget, the guarantee that matters for the running rule.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import CalibrationError, ValidationError
from .levels import Levels, PairLevels, simulate_window_estimates
from .losses import LossKind
from .noise import NoiseKind
from .selector import CriticalValues
from .windows import WindowFamily, build_family_1d, build_family_2d, equidistant_design

__all__ = [
    "CalibConfig",
    "CalibResult",
    "calibrate",
    "calibrate_zeta",
    "calibrate_sequential",
    "verify_calibration",
    "CalibArtifact",
    "save_artifact",
    "load_artifact",
]

ZETA_MIN = 1e-6
ZETA_MAX = 100.0
Z_MAX = 100.0
SEARCH_TOL = 1e-3
RUNS_WARN = 10000


@dataclass(frozen=True)
class CalibConfig:
    """Inputs of one calibration run.

    rule selects the statistic being calibrated: "ring" for the ring rule,
    "lepski" for the classical window-difference rule (the same budget
    principle applies to both).
    """

    family: WindowFamily
    loss: LossKind
    noise: NoiseKind
    r: float = 2.0
    alpha: float = 1.0
    runs: int = 10000
    seed: int = 0
    mode: str = "zeta"
    rule: str = "ring"
    workers: int | None = None

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValidationError("alpha must be positive")
        if self.r < 1:
            raise ValidationError("moment order r must be >= 1")
        if self.runs < 1000:
            raise ValidationError("calibration needs at least 1000 runs")
        if self.mode not in ("zeta", "sequential"):
            raise ValidationError(f"unknown calibration mode {self.mode!r}")
        if self.rule not in ("ring", "lepski"):
            raise ValidationError(f"unknown selection rule {self.rule!r}")
        if self.family.K < 1:
            raise ValidationError("calibration needs at least one growth step")


@dataclass(frozen=True)
class CalibResult:
    """Calibrated thresholds plus how the budget was spent.

    per_k_error_share[k] is the part of the achieved left-hand side whose
    first rejecting window index is k; the shares sum to achieved_lhs.
    """

    crit: CriticalValues
    per_k_error_share: np.ndarray
    achieved_lhs: float
    budget: float
    runs: int
    seed: int
    mode: str
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.achieved_lhs > self.budget * (1.0 + 1e-9):
            raise ValidationError("calibration result exceeds its own budget")


class _SelectionStats:
    """Fixed replicate set reused across threshold candidates.

    weights[i, j] = |base_j|^r for replicate i. raw[i, j, l] is the step-j
    statistic against window l (l <= j; -inf above the diagonal). scale[j, l]
    is the error level multiplying z_l; additive[j] the level multiplying the
    step's closing value z_{j+1} (zero for the classical rule, which has no
    additive term). Passing bare=True drops the additive term from the
    rejection events.
    """

    def __init__(self, config: CalibConfig, levels: Levels,
                 pair: PairLevels | None, seed: int) -> None:
        family, loss = config.family, config.loss
        K = family.K
        if levels.K != K:
            raise ValidationError("levels do not match the family")
        if config.rule == "lepski":
            if pair is None:
                raise ValidationError("the classical rule needs pair levels")
            if pair.K != K:
                raise ValidationError("pair levels do not match the family")
        bases, rings = simulate_window_estimates(
            family, loss, config.noise, config.runs, seed, config.workers)
        self.K = K
        self.runs = config.runs
        self.weights = np.abs(bases[:, :K]) ** config.r
        self.raw = np.full((config.runs, K, K), -np.inf)
        self.scale = np.full((K, K), np.nan)
        for j in range(K):
            if config.rule == "ring":
                self.raw[:, j, : j + 1] = np.abs(rings[:, j, None] - bases[:, : j + 1])
                self.scale[j, : j + 1] = levels.s_ring[j, : j + 1]
            else:
                self.raw[:, j, : j + 1] = np.abs(bases[:, j + 1, None] - bases[:, : j + 1])
                self.scale[j, : j + 1] = pair.s_pair[j + 1, : j + 1]
        if config.rule == "ring":
            self.additive = levels.s[1:].copy()  # additive[j] = s[j+1]
        else:
            self.additive = np.zeros(K)

    def _thresholds(self, z: np.ndarray, j: int, bare: bool) -> np.ndarray:
        thr = z[: j + 1] * self.scale[j, : j + 1]
        if bare:
            return thr
        zf = np.append(z, 1.0)
        return thr + zf[j + 1] * self.additive[j]

    def objective(self, z: np.ndarray, bare: bool = False) -> float:
        """Budget left-hand side for thresholds built from z on this replicate set."""
        total = np.zeros(self.runs)
        for j in range(self.K):
            thr = self._thresholds(z, j, bare)
            rejected = (self.raw[:, j, : j + 1] > thr).any(axis=1)
            total += self.weights[:, j] * rejected
        return float(total.mean())

    def shares(self, z: np.ndarray, bare: bool = False) -> np.ndarray:
        """Budget split by the first rejecting window index; sums to objective(z)."""
        out = np.zeros(self.K)
        for j in range(self.K):
            rej = self.raw[:, j, : j + 1] > self._thresholds(z, j, bare)
            any_rej = rej.any(axis=1)
            first = rej.argmax(axis=1)
            np.add.at(out, first[any_rej], self.weights[any_rej, j])
        return out / self.runs


def _zeta_to_z(zeta: float, levels: Levels, alpha: float, r: float) -> np.ndarray:
    """Parametric thresholds; K in the log term is the number of growth steps."""
    K = levels.K
    arg = 2.0 * r * np.log(levels.s[:K] / levels.s[K]) + np.log(1.0 / alpha) + np.log(K)
    arg = np.maximum(arg, 1e-12)
    return np.sqrt(zeta * arg)


def _budget(config: CalibConfig, levels: Levels) -> float:
    return config.alpha * float(levels.s[-1]) ** config.r


def _runs_warnings(config: CalibConfig) -> tuple[str, ...]:
    if config.runs < RUNS_WARN:
        return (f"only {config.runs} calibration runs; thresholds may be rough",)
    return ()


def calibrate_zeta(config: CalibConfig, levels: Levels,
                   pair: PairLevels | None = None) -> CalibResult:
    """Smallest zeta on the bisection grid whose thresholds meet the budget."""
    stats = _SelectionStats(config, levels, pair, config.seed)
    budget = _budget(config, levels)

    def lhs(zeta: float) -> float:
        return stats.objective(_zeta_to_z(zeta, levels, config.alpha, config.r))

    if lhs(ZETA_MIN) <= budget:
        zeta = ZETA_MIN  # budget already slack at the grid minimum
    else:
        lo, hi = ZETA_MIN, 1.0
        while lhs(hi) > budget:
            lo = hi
            hi *= 2.0
            if hi > ZETA_MAX:
                raise CalibrationError(
                    f"budget {budget!r} unattainable with zeta <= {ZETA_MAX}: "
                    f"lhs at the cap is {lhs(ZETA_MAX)!r}")
        while hi - lo > SEARCH_TOL:
            mid = 0.5 * (lo + hi)
            if lhs(mid) <= budget:
                hi = mid
            else:
                lo = mid
        zeta = hi  # keep the endpoint known to satisfy the budget
    z = _zeta_to_z(zeta, levels, config.alpha, config.r)
    crit = CriticalValues(z=z, alpha=config.alpha, r=config.r, zeta=zeta)
    warnings = _runs_warnings(config)
    try:
        crit.check_risk_hypothesis(levels)
    except ValidationError:
        # degenerate budgets (huge alpha) can push z below the fixed final
        # value; the selection rule refuses such values, see select_ring
        warnings = warnings + ("z_k * s_k is not non-increasing; "
                               "the ring rule will reject these values",)
    shares = stats.shares(z)
    return CalibResult(crit=crit, per_k_error_share=shares,
                       achieved_lhs=float(shares.sum()), budget=budget,
                       runs=config.runs, seed=config.seed, mode="zeta",
                       warnings=warnings)


def calibrate_sequential(config: CalibConfig, levels: Levels,
                         pair: PairLevels | None = None) -> CalibResult:
    """Fix z_0, z_1, ... in turn, each spending at most alpha/K of the budget.

    The step-k error only counts replicates whose tests against windows
    before k all accepted, so the shares partition the global condition.
    Events use the bare thresholds z_l * level: the k-th search must not
    depend on later values, and the selection rule's extra closing term only
    shrinks events, so the resulting thresholds stay on the safe side.
    """
    stats = _SelectionStats(config, levels, pair, config.seed)
    K = stats.K
    budget = _budget(config, levels)
    per_step = budget / K
    z = np.empty(K)
    # acc[i, j]: step j accepted against every window before the current k
    acc = np.ones((config.runs, K), dtype=bool)
    for k in range(K):
        raw_k = stats.raw[:, k:, k]
        scale_k = stats.scale[k:, k]
        live = acc[:, k:]
        w_k = stats.weights[:, k:]

        def share(zk: float) -> float:
            hit = live & (raw_k > zk * scale_k)
            return float((w_k * hit).sum(axis=1).mean())

        if share(ZETA_MIN) <= per_step:
            z[k] = ZETA_MIN
        else:
            lo, hi = ZETA_MIN, 1.0
            while share(hi) > per_step:
                lo = hi
                hi *= 2.0
                if hi > Z_MAX:
                    raise CalibrationError(
                        f"per-step budget {per_step!r} unattainable at "
                        f"step {k} with z <= {Z_MAX}")
            while hi - lo > SEARCH_TOL:
                mid = 0.5 * (lo + hi)
                if share(mid) <= per_step:
                    hi = mid
                else:
                    lo = mid
            z[k] = hi
        acc[:, k:] &= stats.raw[:, k:, k] <= z[k] * stats.scale[k:, k]
    crit = CriticalValues(z=z, alpha=config.alpha, r=config.r, zeta=None)
    shares = stats.shares(z, bare=True)
    return CalibResult(crit=crit, per_k_error_share=shares,
                       achieved_lhs=float(shares.sum()), budget=budget,
                       runs=config.runs, seed=config.seed, mode="sequential",
                       warnings=_runs_warnings(config))


def calibrate(config: CalibConfig, levels: Levels,
              pair: PairLevels | None = None) -> CalibResult:
    if config.mode == "zeta":
        return calibrate_zeta(config, levels, pair)
    return calibrate_sequential(config, levels, pair)


def verify_calibration(config: CalibConfig, crit: CriticalValues, levels: Levels,
                       pair: PairLevels | None = None, *, seed: int,
                       runs: int | None = None) -> float:
    """Out-of-sample budget ratio achieved_lhs / budget on fresh replicates.

    The seed must differ from the calibration seed, otherwise the check would
    just reread the replicates the thresholds were fitted to.
    """
    if seed == config.seed:
        raise ValidationError("verification needs a seed different from calibration")
    cfg = config if runs is None else CalibConfig(
        family=config.family, loss=config.loss, noise=config.noise, r=config.r,
        alpha=config.alpha, runs=runs, seed=config.seed, mode=config.mode,
        rule=config.rule, workers=config.workers)
    stats = _SelectionStats(cfg, levels, pair, seed)
    return stats.objective(crit.full(levels.K)[:-1]) / _budget(cfg, levels)


# ----------------------------------------------------------------------------
# calibration artifacts: a small key/value text format, byte-stable per seed
# ----------------------------------------------------------------------------

FORMAT_TAG = "amreg-calib-v1"


@dataclass(frozen=True)
class CalibArtifact:
    """Everything downstream consumers need to reuse a calibration."""

    rule: str
    mode: str
    loss: LossKind
    noise: NoiseKind
    r: float
    alpha: float
    runs: int
    seed: int
    zeta: float | None
    crit: CriticalValues
    levels: Levels
    pair: PairLevels | None
    achieved_lhs: float
    budget: float
    per_k_error_share: np.ndarray
    family_kind: str
    family_meta: dict = field(default_factory=dict)
    config_hash: str = ""

    @property
    def counts(self) -> np.ndarray:
        return np.asarray(self.family_meta["counts"], dtype=int)

    def build_family(self) -> WindowFamily:
        """Reconstruct the window family the artifact was calibrated for."""
        if self.family_kind == "line1d":
            xs = equidistant_design(int(self.family_meta["n"]))
            return build_family_1d(xs, float(self.family_meta["center"]), self.counts)
        radii = np.asarray(self.family_meta["radii"], dtype=float)
        reach = int(np.floor(radii[-1]))
        side = 2 * reach + 1
        return build_family_2d(side, side, (reach, reach), radii)


def _fmt(x) -> str:
    return repr(float(x))


def _fmt_arr(a) -> str:
    return " ".join(_fmt(v) for v in np.asarray(a, dtype=float))


def _opt(x) -> str:
    return "-" if x is None else _fmt(x)


def _artifact_lines(art: CalibArtifact) -> list[str]:
    lines = [
        f"format: {FORMAT_TAG}",
        f"rule: {art.rule}",
        f"mode: {art.mode}",
        f"loss: {art.loss.kind}",
        f"loss_param: {_opt(art.loss.alpha if art.loss.kind == 'quantile' else art.loss.kink)}",
        f"noise: {art.noise.kind}",
        f"noise_dof: {'-' if art.noise.dof is None else art.noise.dof}",
        f"noise_scale: {_fmt(art.noise.scale)}",
        f"r: {_fmt(art.r)}",
        f"alpha: {_fmt(art.alpha)}",
        f"runs: {art.runs}",
        f"seed: {art.seed}",
        f"zeta: {_opt(art.zeta)}",
        f"achieved_lhs: {_fmt(art.achieved_lhs)}",
        f"budget: {_fmt(art.budget)}",
        f"per_k_error_share: {_fmt_arr(art.per_k_error_share)}",
        f"levels_method: {art.levels.method}",
        f"levels_runs: {'-' if art.levels.runs is None else art.levels.runs}",
        f"levels_seed: {'-' if art.levels.seed is None else art.levels.seed}",
        f"family_kind: {art.family_kind}",
    ]
    if art.family_kind == "line1d":
        lines.append(f"family_n: {int(art.family_meta['n'])}")
        lines.append(f"family_center: {_fmt(art.family_meta['center'])}")
        lines.append("family_radii: -")
    else:
        lines.append("family_n: -")
        lines.append("family_center: -")
        lines.append(f"family_radii: {_fmt_arr(art.family_meta['radii'])}")
    K = art.levels.K
    lines.append(f"K: {K}")
    lines.append(f"counts: {' '.join(str(int(c)) for c in art.counts)}")
    lines.append(f"z: {_fmt_arr(art.crit.z)}")
    lines.append(f"s: {_fmt_arr(art.levels.s)}")
    for k in range(K):
        lines.append(f"s_ring[{k}]: {_fmt_arr(art.levels.s_ring[k, :k + 1])}")
    if art.pair is not None:
        lines.append(f"pair_method: {art.pair.method}")
        lines.append(f"pair_runs: {'-' if art.pair.runs is None else art.pair.runs}")
        lines.append(f"pair_seed: {'-' if art.pair.seed is None else art.pair.seed}")
        for m in range(1, K + 1):
            lines.append(f"pair[{m}]: {_fmt_arr(art.pair.s_pair[m, :m])}")
    return lines


def save_artifact(path, art: CalibArtifact) -> None:
    lines = _artifact_lines(art)
    digest = hashlib.sha256("\n".join(lines).encode()).hexdigest()
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"config_hash: {digest}\n")
        fh.write("\n".join(lines) + "\n")


def load_artifact(path) -> CalibArtifact:
    fields: dict[str, str] = {}
    with open(path, "r", encoding="ascii") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition(":")
            fields[key.strip()] = val.strip()
    if fields.get("format") != FORMAT_TAG:
        raise ValidationError(f"not a calibration artifact: {path}")

    def opt_float(key: str) -> float | None:
        return None if fields[key] == "-" else float(fields[key])

    def opt_int(key: str) -> int | None:
        return None if fields[key] == "-" else int(fields[key])

    loss_kind = fields["loss"]
    param = opt_float("loss_param")
    if loss_kind == "quantile":
        loss = LossKind.quantile(param)
    elif loss_kind == "huber":
        loss = LossKind.huber(param)
    else:
        loss = LossKind(loss_kind)
    noise = NoiseKind(fields["noise"], dof=opt_int("noise_dof"),
                      scale=float(fields["noise_scale"]))
    K = int(fields["K"])
    r = float(fields["r"])
    s = np.array([float(v) for v in fields["s"].split()])
    s_ring = np.full((K, K), np.nan)
    for k in range(K):
        row = [float(v) for v in fields[f"s_ring[{k}]"].split()]
        s_ring[k, : k + 1] = row
    levels = Levels(r=r, s=s, s_ring=s_ring, method=fields["levels_method"],
                    runs=opt_int("levels_runs"), seed=opt_int("levels_seed"))
    pair = None
    if "pair[1]" in fields:
        sp = np.full((K + 1, K + 1), np.nan)
        for m in range(1, K + 1):
            sp[m, :m] = [float(v) for v in fields[f"pair[{m}]"].split()]
        pair = PairLevels(r=r, s_pair=sp, method=fields["pair_method"],
                          runs=opt_int("pair_runs"), seed=opt_int("pair_seed"))
    zeta = opt_float("zeta")
    crit = CriticalValues(z=np.array([float(v) for v in fields["z"].split()]),
                          alpha=float(fields["alpha"]), r=r, zeta=zeta)
    counts = [int(v) for v in fields["counts"].split()]
    meta: dict = {"counts": counts}
    if fields["family_kind"] == "line1d":
        meta["n"] = int(fields["family_n"])
        meta["center"] = float(fields["family_center"])
    else:
        meta["radii"] = [float(v) for v in fields["family_radii"].split()]
    return CalibArtifact(
        rule=fields["rule"], mode=fields["mode"], loss=loss, noise=noise,
        r=r, alpha=float(fields["alpha"]), runs=int(fields["runs"]),
        seed=int(fields["seed"]), zeta=zeta, crit=crit, levels=levels, pair=pair,
        achieved_lhs=float(fields["achieved_lhs"]), budget=float(fields["budget"]),
        per_k_error_share=np.array([float(v) for v in fields["per_k_error_share"].split()]),
        family_kind=fields["family_kind"], family_meta=meta,
        config_hash=fields.get("config_hash", ""))
