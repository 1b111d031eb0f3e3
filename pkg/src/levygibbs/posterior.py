"""Gibbs posterior over basis coefficients and over the sieve dimension K.

The quasi-likelihood exp(-omega * t_n * R_{n,K}(theta)) paired with the
independent N(0, sigma0^2) prior on each coefficient is conjugate:

    theta_k | K, data  ~  N( theta_hat_k / (1 + (2 omega t_n)^{-1} sigma0^{-2}),
                             1 / (2 omega t_n + sigma0^{-2}) ),   k <= K.

Integrating the coefficients out gives the marginal posterior over K against
the sieve prior proportional to exp(-beta K log K) on K = 1..k_max:

    log pi_n(K)  =  sum_{k<=K} omega t_n theta_hat_k^2 / (1 + (2 omega t_n)^{-1} sigma0^{-2})
                    - (K/2) log(2 omega t_n sigma0^2 + 1)  -  beta K log K  + const.

All pmf work happens in log space with max subtraction, so k_max in the
hundreds neither overflows nor loses normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .basis import BasisSystem, CoefficientVector, Window, synthesize
from .errors import DimensionError, EmptyDrawsError, ParameterError, WindowError
from .util import snap_ceil

# Draw indices are generated in fixed spans so that a parallel sampler can
# hand blocks to workers and still concatenate a seed-reproducible stream.
DRAW_BLOCK = 256


@dataclass(frozen=True)
class GibbsConfig:
    """Gibbs-posterior hyperparameters and the estimation windows.

    D is the reporting window (errors, bands); D_prime strictly contains it
    and carries the basis.  k_max=None defers the prior truncation to
    ceil(t_n) at the point of use.
    """

    omega: float = 1e-5
    sigma0: float = 1e3
    beta: float = 0.5
    k_max: int | None = None
    D: Window = field(default_factory=lambda: Window(0.006, 0.014))
    D_prime: Window = field(default_factory=lambda: Window(0.005, 0.015))

    def __post_init__(self) -> None:
        for name in ("omega", "sigma0"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ParameterError(f"{name} must be positive and finite, got {v!r}")
        # beta = 0 (a uniform prior over 1..k_max) stays constructible so the
        # admissibility diagnostics can report on it; the pmf is still proper.
        if not (math.isfinite(self.beta) and self.beta >= 0.0):
            raise ParameterError(f"beta must be nonnegative and finite, got {self.beta!r}")
        if self.k_max is not None and not (isinstance(self.k_max, (int, np.integer)) and self.k_max >= 1):
            raise ParameterError(f"k_max must be a positive integer or None, got {self.k_max!r}")
        if not self.D_prime.contains(self.D):
            raise WindowError(
                f"D=[{self.D.a}, {self.D.b}] must be contained in "
                f"D_prime=[{self.D_prime.a}, {self.D_prime.b}]"
            )

    def k_max_for(self, t_n: float) -> int:
        return self.k_max if self.k_max is not None else snap_ceil(t_n)


@dataclass(frozen=True)
class ConditionalPosterior:
    """Gaussian posterior of the first K coefficients: independent, common variance."""

    K: int
    means: np.ndarray
    variance: float


@dataclass(frozen=True)
class MarginalK:
    """Marginal posterior over the sieve dimension K = 1..k_max."""

    log_weights: np.ndarray
    probs: np.ndarray

    @property
    def k_max(self) -> int:
        return len(self.probs)

    def mode(self) -> int:
        return int(np.argmax(self.probs)) + 1

    @classmethod
    def point_mass(cls, k0: int, k_max: int) -> "MarginalK":
        if not 1 <= k0 <= k_max:
            raise ParameterError(f"point mass K={k0} outside 1..{k_max}")
        lw = np.full(k_max, -np.inf)
        lw[k0 - 1] = 0.0
        probs = np.zeros(k_max)
        probs[k0 - 1] = 1.0
        return cls(lw, probs)


def _shrink_and_variance(t_n: float, config: GibbsConfig) -> tuple[float, float]:
    if not (math.isfinite(t_n) and t_n > 0.0):
        raise ParameterError(f"horizon must be positive and finite, got t_n={t_n!r}")
    two_wt = 2.0 * config.omega * t_n
    shrink = 1.0 / (1.0 + 1.0 / (two_wt * config.sigma0**2))
    variance = 1.0 / (two_wt + config.sigma0**-2)
    return shrink, variance


def conditional_posterior(theta_hat, t_n: float, config: GibbsConfig) -> ConditionalPosterior:
    """Closed-form coefficient posterior at fixed dimension K = len(theta_hat)."""
    vec = theta_hat.values if isinstance(theta_hat, CoefficientVector) else np.asarray(theta_hat, dtype=float)
    if vec.ndim != 1 or len(vec) == 0:
        raise DimensionError(f"theta_hat must be a nonempty 1-d vector, got shape {vec.shape}")
    shrink, variance = _shrink_and_variance(t_n, config)
    return ConditionalPosterior(len(vec), shrink * vec, variance)


def marginal_k(theta_hat_full, t_n: float, config: GibbsConfig) -> MarginalK:
    """Marginal posterior pmf of K from the first k_max empirical coefficients."""
    vec = (
        theta_hat_full.values
        if isinstance(theta_hat_full, CoefficientVector)
        else np.asarray(theta_hat_full, dtype=float)
    )
    k_max = config.k_max_for(t_n)
    if vec.ndim != 1 or len(vec) < k_max:
        raise DimensionError(
            f"need at least k_max={k_max} coefficients, got shape {vec.shape}"
        )
    shrink, _ = _shrink_and_variance(t_n, config)
    wt = config.omega * t_n
    ks = np.arange(1, k_max + 1)
    data_term = np.cumsum(wt * shrink * vec[:k_max] ** 2)
    dim_penalty = 0.5 * ks * math.log(2.0 * wt * config.sigma0**2 + 1.0)
    prior_penalty = config.beta * ks * np.log(ks)
    log_w = data_term - dim_penalty - prior_penalty
    probs = np.exp(log_w - logsumexp(log_w))
    probs /= probs.sum()
    return MarginalK(log_w, probs)


@dataclass
class PosteriorDraws:
    """Monte Carlo draws from the hierarchical posterior with grid evaluations on D.

    draws[i] is (K_i, theta_i); grid_values[i] is the synthesized density of
    draw i on `grid` (a uniform grid over the reporting window D).
    """

    basis: BasisSystem
    grid: np.ndarray
    grid_values: np.ndarray
    draws: list
    seed: int

    def __len__(self) -> int:
        return len(self.draws)


def sample_posterior(
    theta_hat_full,
    t_n: float,
    config: GibbsConfig,
    num_draws: int,
    seed: int,
    basis: BasisSystem | None = None,
    fixed_k: int | None = None,
    marginal: MarginalK | None = None,
    grid_points: int = 512,
) -> PosteriorDraws:
    """Draw (K, theta) from the hierarchical Gibbs posterior.

    K is drawn from the marginal pmf (or a point mass when fixed_k is given;
    an explicit `marginal` overrides both), then theta | K from the conjugate
    Gaussian.  Draws are generated in fixed blocks of DRAW_BLOCK with
    per-block substreams of `seed`, so the stream is reproducible and
    partition independent.
    """
    if num_draws < 1:
        raise ParameterError(f"num_draws must be >= 1, got {num_draws}")
    vec = (
        theta_hat_full.values
        if isinstance(theta_hat_full, CoefficientVector)
        else np.asarray(theta_hat_full, dtype=float)
    )
    if basis is None and isinstance(theta_hat_full, CoefficientVector):
        basis = theta_hat_full.basis
    if basis is None:
        raise ParameterError("a basis is required (pass one or use a CoefficientVector)")
    k_max = config.k_max_for(t_n)
    if len(vec) < k_max:
        raise DimensionError(f"need at least k_max={k_max} coefficients, got {len(vec)}")
    if marginal is None:
        marginal = MarginalK.point_mass(fixed_k, k_max) if fixed_k is not None else marginal_k(vec, t_n, config)
    elif fixed_k is not None:
        raise ParameterError("pass either fixed_k or an explicit marginal, not both")
    if marginal.k_max != k_max:
        raise DimensionError(f"marginal covers K=1..{marginal.k_max}, expected k_max={k_max}")

    shrink, variance = _shrink_and_variance(t_n, config)
    means = shrink * vec[:k_max]
    sd = math.sqrt(variance)
    cum = np.cumsum(marginal.probs)
    cum[-1] = 1.0

    if grid_points < 2:
        raise ParameterError(f"grid_points must be >= 2, got {grid_points}")
    grid = np.linspace(config.D.a, config.D.b, grid_points)
    rows = basis.evaluate_all(grid)  # (k_max-truncated synthesis reuses leading rows)
    if rows.shape[0] < k_max:
        raise DimensionError(f"basis has K={basis.K} < k_max={k_max}")

    draws: list[tuple[int, np.ndarray]] = []
    grid_values = np.empty((num_draws, grid_points))
    for start in range(0, num_draws, DRAW_BLOCK):
        m = min(DRAW_BLOCK, num_draws - start)
        block = start // DRAW_BLOCK
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(block,))))
        u = rng.random(m)
        ks = np.searchsorted(cum, u, side="right") + 1
        for i, K in enumerate(ks):
            theta = means[:K] + sd * rng.standard_normal(K)
            draws.append((int(K), theta))
            grid_values[start + i] = theta @ rows[:K]
    return PosteriorDraws(basis, grid, grid_values, draws, seed)


def posterior_mean_function(draws: PosteriorDraws) -> np.ndarray:
    """Pointwise Monte Carlo mean of the drawn densities on draws.grid."""
    if len(draws) == 0:
        raise EmptyDrawsError("no posterior draws to average")
    return draws.grid_values.mean(axis=0)


@dataclass(frozen=True)
class BandResult:
    """Credible band: radius is the level-quantile of draw distances to the mean.

    For the sup metric, lo/hi give the uniform envelope mean -+ radius on the
    grid; the L2 metric defines a ball rather than an envelope, so lo/hi are
    None.
    """

    level: float
    metric: str
    radius: float
    grid: np.ndarray
    center: np.ndarray
    lo: np.ndarray | None
    hi: np.ndarray | None


def _draw_distances(draws: PosteriorDraws, center: np.ndarray, metric: str) -> np.ndarray:
    diffs = draws.grid_values - center
    if metric == "sup":
        return np.max(np.abs(diffs), axis=1)
    if metric == "l2":
        return np.sqrt(np.trapezoid(diffs**2, draws.grid, axis=1))
    raise ParameterError(f"metric must be 'sup' or 'l2', got {metric!r}")


def credible_band(draws: PosteriorDraws, level: float, metric: str = "sup") -> BandResult:
    """Band around the posterior mean containing `level` of the drawn densities."""
    if len(draws) == 0:
        raise EmptyDrawsError("no posterior draws to band")
    if not 0.0 < level < 1.0:
        raise ParameterError(f"level must lie in (0, 1), got {level!r}")
    center = posterior_mean_function(draws)
    dist = _draw_distances(draws, center, metric)
    radius = float(np.quantile(dist, level, method="higher"))
    if metric == "sup":
        return BandResult(level, metric, radius, draws.grid, center, center - radius, center + radius)
    return BandResult(level, metric, radius, draws.grid, center, None, None)


def concentration_probability(draws: PosteriorDraws, psi_star, radius: float) -> float:
    """Posterior probability that the L2(D) distance to psi_star exceeds radius."""
    if len(draws) == 0:
        raise EmptyDrawsError("no posterior draws")
    if not radius >= 0.0:
        raise ParameterError(f"radius must be >= 0, got {radius!r}")
    ref = np.asarray(psi_star(draws.grid), dtype=float)
    dist = np.sqrt(np.trapezoid((draws.grid_values - ref) ** 2, draws.grid, axis=1))
    return float(np.mean(dist > radius))


@dataclass(frozen=True)
class ConfigDiagnostics:
    """Learning-rate admissibility report; informative only, never aborts."""

    beta: float
    omega: float
    c_squared: float
    basic_threshold: float
    basic_ok: bool
    tau: float
    tau_threshold: float
    tau_ok: bool


def validate_config(config: GibbsConfig, psi_sup_estimate: float, tau: float = 3.0) -> ConfigDiagnostics:
    """Check beta against the learning-rate thresholds implied by sup_D psi.

    With C^2 = 2 * psi_sup_estimate the basic requirement is
    beta > omega * C^2; the strengthened form for a margin parameter tau > 1
    is beta > tau/(tau-1) * omega * C^2.
    """
    if not (math.isfinite(psi_sup_estimate) and psi_sup_estimate > 0.0):
        raise ParameterError(f"psi_sup_estimate must be positive, got {psi_sup_estimate!r}")
    if not tau > 1.0:
        raise ParameterError(f"tau must exceed 1, got {tau!r}")
    c2 = 2.0 * psi_sup_estimate
    basic = config.omega * c2
    strong = tau / (tau - 1.0) * basic
    return ConfigDiagnostics(
        beta=config.beta,
        omega=config.omega,
        c_squared=c2,
        basic_threshold=basic,
        basic_ok=config.beta > basic,
        tau=tau,
        tau_threshold=strong,
        tau_ok=config.beta > strong,
    )
