"""Command-line driver: simulate | estimate | posterior | experiment | check.

Exit codes: 0 success, 2 usage/validation, 3 input parse, 4 resource guard.
Flags override config-file keys (--config, flat `key = value` lines, keys are
flag names with dashes as underscores), which override built-in defaults.
Given identical flags and seed, every output file is byte-identical across
runs: floats are printed with shortest round-trip repr and runtimes go to
stdout only.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .basis import BasisSystem, CoefficientVector, Window
from .errors import (
    InputParseError,
    LevyGibbsError,
    ParameterError,
    ResourceGuardError,
)
from .estimator import empirical_coefficients, l2_error_on_D
from .experiment import (
    DEFAULT_VG_PARAMS,
    RegimeSpec,
    delta_condition,
    run_regime,
    write_band_csv,
    write_errors_csv,
    write_k_posterior_csv,
    write_report_json,
)
from .posterior import (
    GibbsConfig,
    MarginalK,
    credible_band,
    marginal_k,
    posterior_mean_function,
    sample_posterior,
    validate_config,
)
from .processes import (
    CompoundPoissonParams,
    JumpDistribution,
    SamplingScheme,
    VarianceGammaParams,
    read_increments,
    simulate_compound_poisson,
    simulate_vg,
    true_density_vg,
    write_increments,
)
from .util import snap_ceil


def _fmt(v: float) -> str:
    return repr(float(v))


def _parse_window(text: str) -> Window:
    try:
        lo, hi = (float(tok) for tok in text.split(","))
    except ValueError as exc:
        raise ParameterError(f"expected a window as 'lo,hi', got {text!r}") from exc
    return Window(lo, hi)


def _parse_truth(text: str):
    kind, _, rest = text.partition(":")
    if kind != "vg":
        raise ParameterError(f"unknown truth family {text!r}; expected 'vg:mu,sigma,nu'")
    try:
        mu, sigma, nu = (float(tok) for tok in rest.split(","))
    except ValueError as exc:
        raise ParameterError(f"expected 'vg:mu,sigma,nu', got {text!r}") from exc
    return VarianceGammaParams(mu, sigma, nu)


def _require(args: argparse.Namespace, *names: str) -> None:
    for name in names:
        if getattr(args, name) is None:
            raise ParameterError(f"missing required option --{name.replace('_', '-')}")


def _scheme_from_args(args: argparse.Namespace) -> SamplingScheme:
    if args.j is not None:
        if args.delta is not None or args.n is not None:
            raise ParameterError("pass either --j or --delta/--n, not both")
        return RegimeSpec.from_j(args.j).scheme()
    _require(args, "delta", "n")
    return SamplingScheme(args.delta, args.n)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    _require(args, "out")
    scheme = _scheme_from_args(args)
    if args.process == "vg":
        params = VarianceGammaParams(args.mu, args.sigma, args.nu)
        series = simulate_vg(params, scheme, args.seed, materialize=False)
    elif args.process == "cpois":
        _require(args, "lam", "jump")
        params = CompoundPoissonParams(args.lam, JumpDistribution.parse(args.jump))
        series = simulate_compound_poisson(params, scheme, args.seed, materialize=False)
    else:
        raise ParameterError(f"unknown process {args.process!r}; expected vg or cpois")
    write_increments(args.out, series, header=not args.no_header)
    print(
        f"simulate: wrote n={scheme.n} increments "
        f"(delta={_fmt(scheme.delta)}, t_n={_fmt(scheme.t_n)}, seed={args.seed}) to {args.out}"
    )
    return 0


def _basis_from_args(args: argparse.Namespace, t_n: float) -> BasisSystem:
    window = args.window if args.window is not None else Window(0.005, 0.015)
    if args.family == "trig":
        K = args.K if args.K is not None else snap_ceil(t_n)
        return BasisSystem.trigonometric(window, K)
    if args.family == "legendre":
        _require(args, "J", "L")
        return BasisSystem.piecewise_legendre(window, args.J, args.L)
    raise ParameterError(f"unknown family {args.family!r}; expected trig or legendre")


def cmd_estimate(args: argparse.Namespace) -> int:
    _require(args, "increments", "out")
    series = read_increments(args.increments, delta=args.delta)
    basis = _basis_from_args(args, series.scheme.t_n)
    theta_hat = empirical_coefficients(series, basis)
    with open(args.out, "w", encoding="ascii") as fh:
        json.dump(theta_hat.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"estimate: K={basis.K} t_n={_fmt(series.scheme.t_n)} "
        f"in-window estimator written to {args.out}"
    )
    if args.truth is not None:
        psi = true_density_vg(_parse_truth(args.truth), decaying=args.truth_convention == "decaying")
        err = l2_error_on_D(theta_hat, psi, args.D, grid_points=args.grid_points)
        print(f"estimate: l2_error_on_D={_fmt(err)} (truth {args.truth}, {args.truth_convention})")
    return 0


def _load_coefficients(path) -> CoefficientVector:
    try:
        with open(path, "r", encoding="ascii") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputParseError(f"{path}: line {exc.lineno}: invalid JSON: {exc.msg}") from exc
    return CoefficientVector.from_dict(payload)


def cmd_posterior(args: argparse.Namespace) -> int:
    _require(args, "coeffs", "out_dir")
    theta_hat = _load_coefficients(args.coeffs)
    t_n = args.t_n if args.t_n is not None else theta_hat.t_n
    if t_n is None:
        raise ParameterError("coefficient file carries no t_n; pass --t-n")
    D = args.D if args.D is not None else Window(0.006, 0.014)
    config = GibbsConfig(
        omega=args.omega,
        sigma0=args.sigma0,
        beta=args.beta,
        k_max=args.k_max if args.k_max is not None else min(theta_hat.basis.K, snap_ceil(t_n)),
        D=D,
        D_prime=theta_hat.basis.window,
    )
    draws = sample_posterior(
        theta_hat,
        t_n,
        config,
        args.draws,
        args.seed,
        fixed_k=args.fixed_K,
        grid_points=args.grid_points,
    )
    band = credible_band(draws, args.level, metric=args.metric)
    mean_vals = posterior_mean_function(draws)

    out = _OutDir(args.out_dir)
    with open(out.path("draws.jsonl"), "w", encoding="ascii") as fh:
        for i, (K, theta) in enumerate(draws.draws):
            fh.write(json.dumps({"draw_index": i, "K": K, "theta": [float(v) for v in theta]}))
            fh.write("\n")
    _write_k_csv(out.path("k_posterior.csv"), args.label_j, theta_hat, t_n, config, args.fixed_K)
    psi_true = np.full_like(draws.grid, np.nan)
    if args.truth is not None:
        psi = true_density_vg(_parse_truth(args.truth), decaying=args.truth_convention == "decaying")
        psi_true = np.asarray(psi(draws.grid), dtype=float)
    lo = band.lo if band.lo is not None else np.full_like(draws.grid, np.nan)
    hi = band.hi if band.hi is not None else np.full_like(draws.grid, np.nan)
    _write_band(out.path("band.csv"), draws.grid, psi_true, mean_vals, lo, hi)
    print(
        f"posterior: {len(draws)} draws (k_max={config.k_max}, seed={args.seed}) -> {args.out_dir}; "
        f"band radius ({args.metric}, level={_fmt(args.level)}) = {_fmt(band.radius)}"
    )
    return 0


def _write_k_csv(path, j, theta_hat, t_n, config, fixed_k) -> None:
    marg = (
        MarginalK.point_mass(fixed_k, config.k_max_for(t_n))
        if fixed_k is not None
        else marginal_k(theta_hat, t_n, config)
    )
    with open(path, "w", encoding="ascii") as fh:
        fh.write("j,K,prob\n")
        for k, p in enumerate(marg.probs, start=1):
            fh.write(f"{j},{k},{_fmt(p)}\n")


def _write_band(path, grid, psi_true, psi_mean, lo, hi) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("x,psi_true,psi_mean,lo,hi\n")
        for row in zip(grid, psi_true, psi_mean, lo, hi):
            fh.write(",".join(_fmt(v) for v in row))
            fh.write("\n")


class _OutDir:
    def __init__(self, root) -> None:
        os.makedirs(root, exist_ok=True)
        self.root = root

    def path(self, name: str) -> str:
        return os.path.join(self.root, name)


def cmd_experiment(args: argparse.Namespace) -> int:
    _require(args, "out_dir")
    if not args.j_list:
        raise ParameterError("pass at least one regime index via --j")
    config = GibbsConfig(
        omega=args.omega,
        sigma0=args.sigma0,
        beta=args.beta,
        k_max=args.k_max,
        D=args.D if args.D is not None else Window(0.006, 0.014),
        D_prime=args.D_prime if args.D_prime is not None else Window(0.005, 0.015),
    )
    out = _OutDir(args.out_dir)
    reports = []
    for j in args.j_list:
        spec = RegimeSpec.from_j(j)
        report = run_regime(
            spec,
            vg_params=VarianceGammaParams(args.mu, args.sigma, args.nu),
            config=config,
            num_draws=args.draws,
            seed=args.seed,
            band_level=args.level,
            grid_points=args.grid_points,
        )
        reports.append(report)
        print(
            f"experiment: j={j} t_n={_fmt(report.t_n)} k_mode={report.k_mode} "
            f"err_projection={_fmt(report.err_projection)} err_postmean={_fmt(report.err_postmean)} "
            f"band_radius={_fmt(report.band_radius)} runtime_s={report.runtime_s:.2f}"
        )
    write_report_json(reports, out.path("report.json"))
    write_errors_csv(reports, out.path("errors.csv"), alpha_assumed=args.alpha)
    write_k_posterior_csv(reports, out.path("k_posterior.csv"))
    if len(reports) == 1:
        write_band_csv(reports[0], out.path("band.csv"))
    else:
        for report in reports:
            write_band_csv(report, out.path(f"band_j{report.j}.csv"))
    print(f"experiment: wrote report.json, errors.csv, k_posterior.csv, band csv -> {args.out_dir}")
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    scheme = _scheme_from_args(args)
    basis = _basis_from_args(args, scheme.t_n)
    diag = delta_condition(basis.features(), scheme, case=args.case, bound=args.bound)
    config = GibbsConfig(
        omega=args.omega,
        sigma0=args.sigma0,
        beta=args.beta,
        D=args.D if args.D is not None else Window(0.006, 0.014),
        D_prime=args.D_prime if args.D_prime is not None else Window(0.005, 0.015),
    )
    psi = true_density_vg(VarianceGammaParams(args.mu, args.sigma, args.nu), decaying=True)
    grid = np.linspace(config.D.a, config.D.b, args.grid_points)
    beta_diag = validate_config(config, float(np.max(psi(grid))), tau=args.tau)

    print(f"check: spacing case={diag.case} bound={_fmt(diag.bound)} (K={basis.K}, {basis.family})")
    for name, value in diag.values.items():
        flag = "pass" if diag.passed[name] else "FAIL"
        print(f"check:   {name} = {_fmt(value)} [{flag}]")
    print(
        f"check: beta={_fmt(beta_diag.beta)} vs omega*C^2={_fmt(beta_diag.basic_threshold)} "
        f"[{'pass' if beta_diag.basic_ok else 'FAIL'}]"
    )
    print(
        f"check: beta vs tau/(tau-1)*omega*C^2={_fmt(beta_diag.tau_threshold)} "
        f"(tau={_fmt(beta_diag.tau)}) [{'pass' if beta_diag.tau_ok else 'FAIL'}]"
    )
    return 0


# ---------------------------------------------------------------------------
# Parser assembly and config-file precedence
# ---------------------------------------------------------------------------


def _add_scheme_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--j", type=int, default=None, help="regime index (sets delta and n)")
    p.add_argument("--delta", type=float, default=None, help="sampling spacing")
    p.add_argument("--n", type=int, default=None, help="number of increments")


def _add_vg_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mu", type=float, default=DEFAULT_VG_PARAMS.mu)
    p.add_argument("--sigma", type=float, default=DEFAULT_VG_PARAMS.sigma)
    p.add_argument("--nu", type=float, default=DEFAULT_VG_PARAMS.nu)


def _add_hyper_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--omega", type=float, default=1e-5, help="learning rate")
    p.add_argument("--sigma0", type=float, default=1e3, help="prior coefficient sd")
    p.add_argument("--beta", type=float, default=0.5, help="K-prior penalty strength")
    p.add_argument("--k-max", dest="k_max", type=int, default=None, help="prior truncation (default ceil(t_n))")


def _add_basis_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", choices=["trig", "legendre"], default="trig")
    p.add_argument("--K", type=int, default=None, help="basis size (trig; default ceil(t_n))")
    p.add_argument("--J", type=int, default=None, help="degrees per piece (legendre)")
    p.add_argument("--L", type=int, default=None, help="number of pieces (legendre)")
    p.add_argument("--window", type=_parse_window, default=None, help="basis window 'a,b' (default 0.005,0.015)")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="levy-gibbs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    registry: dict[str, argparse.ArgumentParser] = {}

    p = sub.add_parser("simulate", help="simulate increments and write them to a file")
    registry["simulate"] = p
    p.add_argument("--config", default=None)
    p.add_argument("--process", choices=["vg", "cpois"], default="vg")
    _add_vg_flags(p)
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="jump rate (cpois)")
    p.add_argument("--jump", default=None, help="jump distribution, e.g. point:1 or normal:0,1")
    _add_scheme_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--no-header", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate basis coefficients from an increments file")
    registry["estimate"] = p
    p.add_argument("--config", default=None)
    p.add_argument("--increments", default=None)
    p.add_argument("--delta", type=float, default=None, help="spacing when the file has no header")
    _add_basis_flags(p)
    p.add_argument("--out", default=None)
    p.add_argument("--truth", default=None, help="true density 'vg:mu,sigma,nu' for an error summary")
    p.add_argument("--truth-convention", choices=["decaying", "printed"], default="decaying")
    p.add_argument("--D", dest="D", type=_parse_window, default=Window(0.006, 0.014))
    p.add_argument("--grid-points", dest="grid_points", type=int, default=512)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("posterior", help="sample the Gibbs posterior from saved coefficients")
    registry["posterior"] = p
    p.add_argument("--config", default=None)
    p.add_argument("--coeffs", default=None)
    p.add_argument("--t-n", dest="t_n", type=float, default=None)
    _add_hyper_flags(p)
    p.add_argument("--fixed-K", dest="fixed_K", type=int, default=None, help="bypass the K prior")
    p.add_argument("--draws", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--level", type=float, default=0.9)
    p.add_argument("--metric", choices=["sup", "l2"], default="sup")
    p.add_argument("--D", dest="D", type=_parse_window, default=None)
    p.add_argument("--grid-points", dest="grid_points", type=int, default=512)
    p.add_argument("--truth", default=None, help="true density 'vg:mu,sigma,nu' for band.csv")
    p.add_argument("--truth-convention", choices=["decaying", "printed"], default="decaying")
    p.add_argument("--label-j", dest="label_j", type=int, default=0, help="j column for k_posterior.csv")
    p.add_argument("--out-dir", dest="out_dir", default=None)
    p.set_defaults(func=cmd_posterior)

    p = sub.add_parser("experiment", help="run seeded regimes end to end and write report files")
    registry["experiment"] = p
    p.add_argument("--config", default=None)
    p.add_argument("--j", dest="j_list", type=int, action="append", default=None, help="regime index (repeatable)")
    _add_vg_flags(p)
    _add_hyper_flags(p)
    p.add_argument("--draws", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--level", type=float, default=0.9)
    p.add_argument("--alpha", type=float, default=2.0, help="assumed smoothness for eps_n")
    p.add_argument("--D", dest="D", type=_parse_window, default=None)
    p.add_argument("--D-prime", dest="D_prime", type=_parse_window, default=None)
    p.add_argument("--grid-points", dest="grid_points", type=int, default=512)
    p.add_argument("--out-dir", dest="out_dir", default=None)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("check", help="sampling-spacing and learning-rate diagnostics (read-only)")
    registry["check"] = p
    p.add_argument("--config", default=None)
    _add_scheme_flags(p)
    _add_basis_flags(p)
    p.add_argument("--case", choices=["fixed-K", "prior-on-K"], default="prior-on-K")
    p.add_argument("--bound", type=float, default=1.0)
    _add_vg_flags(p)
    _add_hyper_flags(p)
    p.add_argument("--tau", type=float, default=3.0)
    p.add_argument("--D", dest="D", type=_parse_window, default=None)
    p.add_argument("--D-prime", dest="D_prime", type=_parse_window, default=None)
    p.add_argument("--grid-points", dest="grid_points", type=int, default=512)
    p.set_defaults(func=cmd_check)

    return parser, registry


def _load_config_file(path) -> dict:
    values = {}
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            key, sep, value = text.partition("=")
            if not sep:
                raise InputParseError(f"{path}: line {lineno}: expected 'key = value', got {text!r}")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _apply_config_defaults(subparser: argparse.ArgumentParser, raw: dict, path) -> None:
    dests = {}
    for action in subparser._actions:
        if action.dest in raw:
            value = raw[action.dest]
            if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                low = value.lower()
                if low not in _TRUE | _FALSE:
                    raise InputParseError(f"{path}: key {action.dest}: expected a boolean, got {value!r}")
                dests[action.dest] = low in _TRUE
            elif action.type is not None:
                try:
                    dests[action.dest] = action.type(value)
                except (TypeError, ValueError) as exc:
                    raise InputParseError(f"{path}: key {action.dest}: bad value {value!r}") from exc
            else:
                dests[action.dest] = value
    unknown = set(raw) - {a.dest for a in subparser._actions}
    if unknown:
        raise InputParseError(f"{path}: unknown config key(s): {', '.join(sorted(unknown))}")
    subparser.set_defaults(**dests)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, registry = build_parser()
    try:
        # Config precedence: inject file values as subparser defaults before the
        # real parse, so explicit flags naturally win.
        if argv and not argv[0].startswith("-") and argv[0] in registry:
            for i, tok in enumerate(argv):
                if tok == "--config" and i + 1 < len(argv):
                    _apply_config_defaults(registry[argv[0]], _load_config_file(argv[i + 1]), argv[i + 1])
                elif tok.startswith("--config="):
                    path = tok.split("=", 1)[1]
                    _apply_config_defaults(registry[argv[0]], _load_config_file(path), path)
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except InputParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ResourceGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except LevyGibbsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
