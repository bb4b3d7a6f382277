"""Command-line interface.

Subcommands: calibrate (writes a calibration artifact), verify (fresh-seed
budget check), bench (benchmark table rows as CSV), prop1 / moments / tails
(study CSVs), denoise (image plus window-size map), simulate (sample dump).

Every stochastic command requires --seed; identical argv plus seed produce
byte-identical outputs. Exit codes: 0 success, 1 validation error, 2 runtime
failure; failures print one machine-parsable line on stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .calibration import (CalibArtifact, CalibConfig, calibrate, load_artifact,
                          save_artifact, verify_calibration)
from .errors import CalibrationError, ValidationError
from .experiments import (METHODS, ExperimentSpec, median_moment_study, run_benchmark,
                          tail_study, two_sample_study)
from .imaging import DenoiseConfig, Image, denoise_image, estimate_noise_scale
from .levels import (levels_asymptotic, levels_exact_mean, levels_mc,
                     pair_levels_asymptotic, pair_levels_exact_mean, pair_levels_mc)
from .losses import LossKind
from .noise import RngStream, density, parse_noise, quantile_point, sample_noise
from .pgmio import read_grid, read_pgm, write_grid, write_pgm
from .selector import base_estimates, select_lepski, select_ring
from .windows import (benchmark_counts, build_family_1d, build_family_2d,
                      default_disc_radii, equidistant_design)

__all__ = ["run_cli", "main"]


def parse_loss(text: str) -> LossKind:
    t = text.strip().lower()
    if t == "mean":
        return LossKind.mean()
    if t == "median":
        return LossKind.median()
    if t.startswith("quantile:"):
        return LossKind.quantile(float(t.split(":", 1)[1]))
    if t.startswith("huber:"):
        return LossKind.huber(float(t.split(":", 1)[1]))
    raise ValidationError(f"unknown loss {text!r} "
                          "(mean, median, quantile:A, huber:K)")


class _Parser(argparse.ArgumentParser):
    # argparse calls error() and exits; route through ValidationError instead
    def error(self, message):  # noqa: D102
        raise ValidationError(message)


def _read_config_file(path: str) -> dict[str, str]:
    """key = value lines; blank lines and # comments ignored."""
    out: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ValidationError(f"bad config line {line!r} (expected key = value)")
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def _build_parser() -> _Parser:
    parser = _Parser(prog="adaptmreg",
                     description="pointwise-adaptive robust regression tools")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, seed_required=True):
        p.add_argument("--config", help="key = value defaults file; flags override")
        p.add_argument("--seed", type=int, required=seed_required,
                       help="master seed (required: runs must be reproducible)")
        p.add_argument("--workers", type=int, default=None,
                       help="parallel workers (default: ADAPTMREG_WORKERS or cpu count)")

    p = sub.add_parser("calibrate", help="calibrate critical values by monte carlo")
    add_common(p)
    p.add_argument("--family", choices=["bench1d", "disc2d"], default="bench1d")
    p.add_argument("--n", type=int, default=200, help="1d design size")
    p.add_argument("--counts", choices=["standard", "alt"], default="standard")
    p.add_argument("--count-levels", type=int, default=17)
    p.add_argument("--radius0", type=float, default=None, help="2d base radius")
    p.add_argument("--radius-growth", type=float, default=None)
    p.add_argument("--radius-levels", type=int, default=None)
    p.add_argument("--loss", default="median")
    p.add_argument("--noise", default="laplace")
    p.add_argument("--rule", choices=["ring", "lepski"], default="ring")
    p.add_argument("--mode", choices=["zeta", "sequential"], default="zeta")
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--runs", type=int, default=10000)
    p.add_argument("--levels", choices=["auto", "exact", "asymptotic", "mc"],
                   default="auto")
    p.add_argument("--levels-runs", type=int, default=None)
    p.add_argument("--pair", choices=["auto", "exact", "asymptotic", "mc"],
                   default="auto", help="pair level method (lepski rule)")
    p.add_argument("--pair-runs", type=int, default=None,
                   help="monte carlo runs for pair levels (--pair mc)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("verify", help="fresh-seed calibration budget check")
    add_common(p)
    p.add_argument("--calib", required=True)
    p.add_argument("--runs", type=int, default=None)

    p = sub.add_parser("bench", help="benchmark table rows")
    add_common(p)
    p.add_argument("--example", type=int, choices=[1, 2], required=True)
    p.add_argument("--noise", default="laplace")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--calib", required=True,
                   help="directory with <method>.cal files, or method=path[,...]")
    p.add_argument("--trace", default=None,
                   help="dump the selection trace of replicate 0 per method")
    p.add_argument("--out", required=True)

    p = sub.add_parser("prop1", help="two-sample location test variance study")
    add_common(p)
    p.add_argument("--noise", default="laplace")
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--runs", type=int, default=20000)
    p.add_argument("--out", required=True)

    p = sub.add_parser("moments", help="sample median moment scaling study")
    add_common(p)
    p.add_argument("--noise", default="laplace")
    p.add_argument("--n-points", default="101,401,1601",
                   help="comma list of odd sample sizes")
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--runs", type=int, default=100000)
    p.add_argument("--out", required=True)

    p = sub.add_parser("tails", help="sample median tail bound study")
    add_common(p)
    p.add_argument("--noise", default="laplace")
    p.add_argument("--n-points", type=int, default=1001)
    p.add_argument("--taus", default="0,1,2,3")
    p.add_argument("--runs", type=int, default=100000)
    p.add_argument("--out", required=True)

    p = sub.add_parser("denoise", help="adaptive image denoising")
    add_common(p, seed_required=False)
    p.add_argument("--in", dest="infile", required=True, help="PGM or AMRGRID1 input")
    p.add_argument("--calib", required=True, help="disc2d calibration artifact")
    p.add_argument("--sigma", default="auto", help="noise scale or 'auto'")
    p.add_argument("--out", required=True)
    p.add_argument("--khat", default=None, help="window-size map output (PGM)")

    p = sub.add_parser("simulate", help="dump one noisy benchmark realization")
    add_common(p)
    p.add_argument("--example", type=int, choices=[1, 2], required=True)
    p.add_argument("--noise", default="laplace")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--out", required=True)
    return parser


def _family_for_calibrate(args):
    if args.family == "bench1d":
        counts = benchmark_counts(args.count_levels, args.counts)
        xs = equidistant_design(args.n)
        family = build_family_1d(xs, 0.0, counts)
        meta = {"counts": [int(c) for c in counts], "n": args.n, "center": 0.0}
        return family, "line1d", meta
    radii = default_disc_radii(
        n_levels=args.radius_levels or 10,
        base=args.radius0 or 1.5,
        growth=args.radius_growth or 1.4 ** 0.5)
    reach = int(np.floor(radii[-1]))
    side = 2 * reach + 1
    fam = build_family_2d(side, side, (reach, reach), radii)
    kept_radii = [float(radii[lvl]) for lvl in range(len(radii))
                  if lvl not in fam.dropped_levels]
    fam = build_family_2d(side, side, (reach, reach), kept_radii)
    meta = {"counts": [int(c) for c in fam.counts], "radii": kept_radii}
    return fam, "disc2d", meta


def _levels_for_calibrate(args, family, loss, noise):
    choice = args.levels
    if choice == "auto":
        choice = {"mean": "exact", "median": "asymptotic",
                  "quantile": "asymptotic"}.get(loss.kind, "mc")
    if choice == "exact":
        return levels_exact_mean(family, args.r)
    if choice == "asymptotic":
        alpha = 0.5 if loss.kind == "median" else loss.alpha
        if loss.kind == "mean" or loss.kind == "huber":
            raise ValidationError("asymptotic levels need a median or quantile loss")
        f0 = density(noise, quantile_point(noise, alpha))
        return levels_asymptotic(family, loss, f0, args.r)
    runs = args.levels_runs or args.runs
    return levels_mc(family, loss, noise, runs, args.r,
                     seed=args.seed + 1, workers=args.workers)


def _cmd_calibrate(args) -> int:
    loss = parse_loss(args.loss)
    noise = parse_noise(args.noise)
    family, kind_tag, meta = _family_for_calibrate(args)
    levels = _levels_for_calibrate(args, family, loss, noise)
    pair = None
    if args.rule == "lepski":
        choice = args.pair
        if choice == "auto":
            choice = {"mean": "exact", "median": "asymptotic",
                      "quantile": "asymptotic"}.get(loss.kind, "mc")
        if choice == "exact":
            pair = pair_levels_exact_mean(family, args.r)
        elif choice == "asymptotic":
            alpha = 0.5 if loss.kind == "median" else loss.alpha
            f0 = density(noise, quantile_point(noise, alpha))
            pair = pair_levels_asymptotic(family, loss, f0, args.r)
        else:
            pair = pair_levels_mc(family, loss, noise, args.pair_runs or args.runs,
                                  args.r, seed=args.seed + 2, workers=args.workers)
    config = CalibConfig(family=family, loss=loss, noise=noise, r=args.r,
                         alpha=args.alpha, runs=args.runs, seed=args.seed,
                         mode=args.mode, rule=args.rule, workers=args.workers)
    result = calibrate(config, levels, pair)
    art = CalibArtifact(
        rule=args.rule, mode=args.mode, loss=loss, noise=noise, r=args.r,
        alpha=args.alpha, runs=args.runs, seed=args.seed, zeta=result.crit.zeta,
        crit=result.crit, levels=levels, pair=pair,
        achieved_lhs=result.achieved_lhs, budget=result.budget,
        per_k_error_share=result.per_k_error_share,
        family_kind=kind_tag, family_meta=meta)
    save_artifact(args.out, art)
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"calibrated {args.rule}/{args.mode} loss={loss.label} "
          f"achieved={result.achieved_lhs!r} budget={result.budget!r} -> {args.out}")
    return 0


def _cmd_verify(args) -> int:
    art = load_artifact(args.calib)
    config = CalibConfig(family=art.build_family(), loss=art.loss, noise=art.noise,
                         r=art.r, alpha=art.alpha, runs=art.runs, seed=art.seed,
                         mode=art.mode, rule=art.rule, workers=args.workers)
    ratio = verify_calibration(config, art.crit, art.levels, art.pair,
                               seed=args.seed, runs=args.runs)
    print(f"ratio: {ratio!r}")
    return 0


def _load_bench_artifacts(spec_methods, arg: str) -> dict[str, CalibArtifact]:
    out: dict[str, CalibArtifact] = {}
    path = Path(arg)
    if path.is_dir():
        for m in spec_methods:
            if m == "median_oracle":
                continue
            f = path / f"{m}.cal"
            if not f.exists():
                raise ValidationError(f"missing calibration artifact {f}")
            out[m] = load_artifact(f)
        return out
    for part in arg.split(","):
        name, sep, p = part.partition("=")
        if not sep:
            raise ValidationError(
                "--calib must be a directory or method=path[,method=path...]")
        out[name.strip()] = load_artifact(p.strip())
    return out


def _cmd_bench(args) -> int:
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    spec = ExperimentSpec(example=args.example, noise=parse_noise(args.noise),
                          n=args.n, runs=args.runs, methods=methods,
                          seed=args.seed, workers=args.workers)
    artifacts = _load_bench_artifacts(methods, args.calib)
    report = run_benchmark(spec, artifacts)
    Path(args.out).write_text(report.to_csv())
    if args.trace:
        _write_bench_trace(args, spec, artifacts)
    print(f"bench example={args.example} noise={spec.noise.label} -> {args.out}")
    return 0


def _write_bench_trace(args, spec: ExperimentSpec, artifacts) -> None:
    """Selection trace of replicate 0 for each method, for debugging."""
    xs = equidistant_design(spec.n)
    g = spec.signal_fn()(xs)
    y = g + sample_noise(spec.noise, spec.n, RngStream(spec.seed, 0))
    parts = []
    for method, art in sorted(artifacts.items()):
        family = build_family_1d(xs, 0.0, art.counts)
        loss = LossKind(art.loss.kind, alpha=art.loss.alpha, kink=art.loss.kink)
        base, rings = base_estimates(y, family, loss)
        if art.rule == "lepski":
            trace = select_lepski(base, art.pair, art.crit)
        else:
            trace = select_ring(base, rings, art.levels, art.crit)
        parts.append(f"# method {method} k_hat {trace.k_hat}\n" + trace.format_rows())
    Path(args.trace).write_text("".join(parts))


def _cmd_prop1(args) -> int:
    report = two_sample_study(parse_noise(args.noise), args.delta, args.n,
                              args.runs, args.seed, args.workers)
    Path(args.out).write_text(report.to_csv())
    print(f"prop1 -> {args.out}")
    return 0


def _cmd_moments(args) -> int:
    ns = [int(v) for v in args.n_points.split(",") if v.strip()]
    report = median_moment_study(parse_noise(args.noise), ns, args.r,
                                 args.runs, args.seed, args.workers)
    Path(args.out).write_text(report.to_csv())
    print(f"moments -> {args.out}")
    return 0


def _cmd_tails(args) -> int:
    taus = [float(v) for v in args.taus.split(",") if v.strip()]
    report = tail_study(parse_noise(args.noise), args.n_points, taus,
                        args.runs, args.seed, args.workers)
    Path(args.out).write_text(report.to_csv())
    print(f"tails -> {args.out}")
    return 0


def _read_image(path: str) -> tuple[Image, int | None]:
    if path.endswith(".pgm"):
        arr, maxval = read_pgm(path)
        return Image.from_array(arr), maxval
    return Image.from_array(read_grid(path)), None


def _write_image(path: str, image: Image, maxval: int | None) -> None:
    if path.endswith(".pgm"):
        write_pgm(path, image.intensities, maxval if maxval else 255)
    else:
        write_grid(path, image.intensities)


def _cmd_denoise(args) -> int:
    art = load_artifact(args.calib)
    sigma = "auto" if args.sigma == "auto" else float(args.sigma)
    config = DenoiseConfig.from_artifact(art, noise_scale=sigma, workers=args.workers)
    image, maxval = _read_image(args.infile)
    denoised, khat = denoise_image(image, config)
    _write_image(args.out, denoised, maxval)
    if args.khat:
        write_pgm(args.khat, khat.k_hat, max(khat.n_levels, 1))
    used = (estimate_noise_scale(image, config.noise).sigma
            if sigma == "auto" else sigma)
    print(f"denoise {image.width}x{image.height} sigma={used!r} -> {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    from .experiments import SIGNALS
    noise = parse_noise(args.noise)
    xs = equidistant_design(args.n)
    g = SIGNALS[args.example](xs)
    y = g + sample_noise(noise, args.n, RngStream(args.seed, 0))
    lines = ["i,x,g,y"]
    for i in range(args.n):
        lines.append(f"{i},{float(xs[i])!r},{float(g[i])!r},{float(y[i])!r}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"simulate -> {args.out}")
    return 0


_COMMANDS = {
    "calibrate": _cmd_calibrate,
    "verify": _cmd_verify,
    "bench": _cmd_bench,
    "prop1": _cmd_prop1,
    "moments": _cmd_moments,
    "tails": _cmd_tails,
    "denoise": _cmd_denoise,
    "simulate": _cmd_simulate,
}


def _apply_config(argv: list[str]) -> list[str]:
    """Append config-file settings as flags; explicit flags keep priority.

    Unknown keys surface as unrecognized arguments during the parse.
    """
    if "--config" not in argv:
        return list(argv)
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise ValidationError("--config needs a path")
    extra: list[str] = []
    for key, val in _read_config_file(argv[idx + 1]).items():
        if key == "config":
            raise ValidationError("config files cannot nest")
        flag = "--" + key.replace("_", "-")
        if flag not in argv:
            extra.extend([flag, val])
    return list(argv) + extra


def run_cli(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(_apply_config(list(argv)))
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: validation: {exc}", file=sys.stderr)
        return 1
    except CalibrationError as exc:
        print(f"error: calibration: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports and exits
        print(f"error: runtime: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))
