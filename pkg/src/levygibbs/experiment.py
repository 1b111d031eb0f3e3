"""Seeded end-to-end study: simulate, estimate, sample the posterior, report.

A regime is indexed by j: spacing delta = 1e-3 * 2^{-3j} and sample size
n = ceil(0.05 * delta^{-5/3}), so the horizon t_n = n * delta grows as j
does while the spacing shrinks fast enough for the small-time increment
approximation to hold.  The default process/hyperparameters reproduce the
variance gamma study: (mu, sigma, nu) = (0, 3.7e-1.5, 2e-3),
(omega, sigma0, beta) = (1e-5, 1e3, 0.5), windows D = [0.006, 0.014] inside
D' = [0.005, 0.015], trig basis of size k_max = ceil(t_n).

All randomness flows from one master seed through named child seeds, so a
regime run is a pure function of (j, seed, hyperparameters).  Large regimes
are streamed block-by-block and never materialize the increment array.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .basis import BasisFeatures, BasisSystem, CoefficientVector
from .errors import ParameterError
from .estimator import empirical_coefficients, l2_error_on_D
from .posterior import (
    GibbsConfig,
    PosteriorDraws,
    credible_band,
    marginal_k,
    posterior_mean_function,
    sample_posterior,
)
from .processes import SamplingScheme, VarianceGammaParams, simulate_vg, true_density_vg
from .util import derive_seed, snap_ceil

# Default study process parameters.
DEFAULT_VG_PARAMS = VarianceGammaParams(mu=0.0, sigma=3.7 * 10**-1.5, nu=2e-3)

BASE_DELTA = 1e-3
DELTA_EXPONENT = 5.0 / 3.0
SAMPLE_FACTOR = 0.05


@dataclass(frozen=True)
class RegimeSpec:
    """Sampling regime j: delta = 1e-3 * 2^{-3j}, n = ceil(0.05 * delta^{-5/3})."""

    j: int
    delta: float
    n: int
    t_n: float

    @classmethod
    def from_j(cls, j: int) -> "RegimeSpec":
        if not (isinstance(j, (int, np.integer)) and j >= 1):
            raise ParameterError(f"regime index j must be a positive integer, got {j!r}")
        delta = BASE_DELTA * 2.0 ** (-3 * j)
        n = snap_ceil(SAMPLE_FACTOR * delta**-DELTA_EXPONENT)
        return cls(int(j), delta, n, n * delta)

    def __post_init__(self) -> None:
        target = SAMPLE_FACTOR * self.delta**-DELTA_EXPONENT
        # n is the ceiling of the target: within [target, target + 1), up to float noise.
        if not (target - 1e-6 * max(1.0, target) <= self.n < target + 1.0):
            raise ParameterError(f"n={self.n} is not ceil(0.05 * delta^(-5/3)) = ceil({target!r})")
        if abs(self.t_n - self.n * self.delta) > math.ulp(self.n * self.delta):
            raise ParameterError(f"t_n={self.t_n!r} disagrees with n*delta")

    def scheme(self) -> SamplingScheme:
        return SamplingScheme(self.delta, self.n, self.t_n)


@dataclass(frozen=True)
class DeltaDiagnostics:
    """Sampling-spacing check: each named quantity must be O(1), i.e. <= bound."""

    case: str
    bound: float
    values: dict
    passed: dict
    all_ok: bool


def delta_condition(
    features: BasisFeatures,
    scheme: SamplingScheme,
    case: str = "prior-on-K",
    bound: float = 1.0,
) -> DeltaDiagnostics:
    """Evaluate the spacing conditions max{F1^2 n delta^3, F2 delta} = O(1).

    case "fixed-K" additionally reports the bare n delta^3 (the condition the
    feature form reduces to when K is constant); case "prior-on-K" reports
    n delta^{5/3}, the sufficient condition for the trig sieve with the prior
    on K.
    """
    if case not in ("fixed-K", "prior-on-K"):
        raise ParameterError(f"case must be 'fixed-K' or 'prior-on-K', got {case!r}")
    if not (math.isfinite(bound) and bound > 0.0):
        raise ParameterError(f"bound must be positive, got {bound!r}")
    n, d = scheme.n, scheme.delta
    values = {
        "F1^2*n*delta^3": features.F1**2 * n * d**3,
        "F2*delta": features.F2 * d,
    }
    if case == "fixed-K":
        values["n*delta^3"] = n * d**3
    else:
        values["n*delta^(5/3)"] = n * d**DELTA_EXPONENT
    passed = {name: v <= bound for name, v in values.items()}
    return DeltaDiagnostics(case, bound, values, passed, all(passed.values()))


@dataclass
class ExperimentReport:
    """Everything a single seeded regime run produced.

    Errors are L2(D) distances to the decaying-tail true density: the
    projection estimator truncated at the posterior mode of K, and the
    posterior mean function.  Grid arrays back the band CSV.
    """

    j: int
    delta: float
    n: int
    t_n: float
    seed: int
    num_draws: int
    k_probs: np.ndarray
    k_mode: int
    projection_K: int
    err_projection: float
    err_postmean: float
    band_level: float
    band_radius: float
    runtime_s: float
    config: dict
    theta_hat: CoefficientVector = field(repr=False)
    grid: np.ndarray = field(repr=False)
    psi_true: np.ndarray = field(repr=False)
    psi_mean: np.ndarray = field(repr=False)
    band_lo: np.ndarray = field(repr=False)
    band_hi: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        for name in ("err_projection", "err_postmean", "band_radius"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise ParameterError(f"{name} must be nonnegative and finite, got {v!r}")


def _config_echo(config: GibbsConfig, k_max: int, num_draws: int) -> dict:
    return {
        "omega": config.omega,
        "sigma0": config.sigma0,
        "beta": config.beta,
        "k_max": k_max,
        "D": [config.D.a, config.D.b],
        "D_prime": [config.D_prime.a, config.D_prime.b],
        "num_draws": num_draws,
    }


def run_regime(
    spec: RegimeSpec,
    vg_params: VarianceGammaParams = DEFAULT_VG_PARAMS,
    config: GibbsConfig | None = None,
    num_draws: int = 1000,
    seed: int = 0,
    band_level: float = 0.9,
    grid_points: int = 512,
    max_workers: int | None = None,
) -> ExperimentReport:
    """Run one seeded regime end to end; increments are streamed, never stored.

    Child seeds are derive_seed(seed, "simulate") and derive_seed(seed,
    "draws"), so each stage can be reproduced standalone from the master seed.
    """
    start = time.perf_counter()
    if config is None:
        config = GibbsConfig()
    scheme = spec.scheme()
    k_max = config.k_max_for(scheme.t_n)
    basis = BasisSystem.trigonometric(config.D_prime, k_max)

    series = simulate_vg(vg_params, scheme, derive_seed(seed, "simulate"), materialize=False)
    theta_hat = empirical_coefficients(series, basis, max_workers=max_workers)

    marginal = marginal_k(theta_hat, scheme.t_n, config)
    draws = sample_posterior(
        theta_hat,
        scheme.t_n,
        config,
        num_draws,
        derive_seed(seed, "draws"),
        marginal=marginal,
        grid_points=grid_points,
    )

    psi_star = true_density_vg(vg_params, decaying=True)
    psi_true = np.asarray(psi_star(draws.grid), dtype=float)
    psi_mean = posterior_mean_function(draws)
    err_postmean = float(np.sqrt(np.trapezoid((psi_mean - psi_true) ** 2, draws.grid)))

    k_mode = marginal.mode()
    truncated = theta_hat.values.copy()
    truncated[k_mode:] = 0.0
    err_projection = l2_error_on_D(
        CoefficientVector(basis, truncated, role="projected"), psi_star, config.D, grid_points
    )

    band = credible_band(draws, band_level, metric="sup")
    runtime = time.perf_counter() - start
    return ExperimentReport(
        j=spec.j,
        delta=spec.delta,
        n=spec.n,
        t_n=scheme.t_n,
        seed=seed,
        num_draws=num_draws,
        k_probs=marginal.probs,
        k_mode=k_mode,
        projection_K=k_mode,
        err_projection=err_projection,
        err_postmean=err_postmean,
        band_level=band_level,
        band_radius=band.radius,
        runtime_s=runtime,
        config=_config_echo(config, k_max, num_draws),
        theta_hat=theta_hat,
        grid=draws.grid,
        psi_true=psi_true,
        psi_mean=psi_mean,
        band_lo=band.lo,
        band_hi=band.hi,
    )


def oracle_dimension(t_n: float, alpha_assumed: float) -> int:
    """K_n = ceil(t_n^{1/(2*alpha+1)}), the rate-optimal dimension under smoothness alpha."""
    if not (math.isfinite(alpha_assumed) and alpha_assumed > 0.0):
        raise ParameterError(f"alpha_assumed must be positive, got {alpha_assumed!r}")
    return snap_ceil(t_n ** (1.0 / (2.0 * alpha_assumed + 1.0)))


def contraction_rate(t_n: float, alpha_assumed: float) -> float:
    """eps_n = sqrt(log t_n) * t_n^{-alpha/(2*alpha+1)} (meaningful for t_n > 1)."""
    if t_n <= 1.0:
        raise ParameterError(f"contraction rate needs t_n > 1, got {t_n!r}")
    return math.sqrt(math.log(t_n)) * t_n ** (-alpha_assumed / (2.0 * alpha_assumed + 1.0))


@dataclass(frozen=True)
class NoOverfitRow:
    j: int
    t_n: float
    K_n: int
    threshold: float
    mass_above: float


def no_overfit_diagnostic(
    reports: list[ExperimentReport],
    tau: float = 2.0,
    alpha_assumed: float = 2.0,
) -> list[NoOverfitRow]:
    """Posterior mass on {K > tau * K_n} per regime; should shrink as j grows."""
    if not tau > 1.0:
        raise ParameterError(f"tau must exceed 1, got {tau!r}")
    rows = []
    for rep in reports:
        k_n = oracle_dimension(rep.t_n, alpha_assumed)
        threshold = tau * k_n
        ks = np.arange(1, len(rep.k_probs) + 1)
        mass = float(rep.k_probs[ks > threshold].sum())
        rows.append(NoOverfitRow(rep.j, rep.t_n, k_n, threshold, mass))
    return rows


@dataclass(frozen=True)
class RateRow:
    j: int
    t_n: float
    err_postmean: float
    eps_n: float
    ratio: float


def rate_table(reports: list[ExperimentReport], alpha_assumed: float = 2.0) -> list[RateRow]:
    """Posterior-mean error against the theoretical contraction rate eps_n."""
    if len(reports) < 2:
        raise ParameterError("rate_table needs at least two regimes to compare")
    rows = []
    for rep in reports:
        eps = contraction_rate(rep.t_n, alpha_assumed)
        rows.append(RateRow(rep.j, rep.t_n, rep.err_postmean, eps, rep.err_postmean / eps))
    return rows


# ---------------------------------------------------------------------------
# Deterministic report files.  Floats are written with shortest round-trip
# repr and runtimes are kept out, so identical (flags, seed) runs produce
# byte-identical files.
# ---------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def write_errors_csv(reports: list[ExperimentReport], path, alpha_assumed: float = 2.0) -> None:
    """One row per regime: j, t_n, err_projection, err_postmean, eps_n, ratio."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["j", "t_n", "err_projection", "err_postmean", "eps_n", "ratio"])
        for rep in reports:
            eps = contraction_rate(rep.t_n, alpha_assumed)
            writer.writerow(
                [
                    rep.j,
                    _fmt(rep.t_n),
                    _fmt(rep.err_projection),
                    _fmt(rep.err_postmean),
                    _fmt(eps),
                    _fmt(rep.err_postmean / eps),
                ]
            )


def write_k_posterior_csv(reports: list[ExperimentReport], path) -> None:
    """One row per (regime, K): j, K, prob."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["j", "K", "prob"])
        for rep in reports:
            for k, p in enumerate(rep.k_probs, start=1):
                writer.writerow([rep.j, k, _fmt(p)])


def write_band_csv(report: ExperimentReport, path) -> None:
    """Grid rows for one regime: x, psi_true, psi_mean, lo, hi."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "psi_true", "psi_mean", "lo", "hi"])
        for x, pt, pm, lo, hi in zip(
            report.grid, report.psi_true, report.psi_mean, report.band_lo, report.band_hi
        ):
            writer.writerow([_fmt(x), _fmt(pt), _fmt(pm), _fmt(lo), _fmt(hi)])


def report_to_dict(report: ExperimentReport) -> dict:
    """JSON-ready summary of one regime (runtime deliberately excluded)."""
    return {
        "j": report.j,
        "delta": report.delta,
        "n": report.n,
        "t_n": report.t_n,
        "seed": report.seed,
        "num_draws": report.num_draws,
        "k_mode": report.k_mode,
        "projection_K": report.projection_K,
        "k_probs": [float(p) for p in report.k_probs],
        "err_projection": report.err_projection,
        "err_postmean": report.err_postmean,
        "band_level": report.band_level,
        "band_radius": report.band_radius,
        "config": report.config,
        "basis": report.theta_hat.basis.descriptor(),
        "theta_hat": [float(v) for v in report.theta_hat.values],
    }


def write_report_json(reports: list[ExperimentReport], path) -> None:
    payload = {"schema": "levygibbs-report-v1", "regimes": [report_to_dict(r) for r in reports]}
    with open(path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
