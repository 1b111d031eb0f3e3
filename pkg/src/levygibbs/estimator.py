"""Projection estimator of the Levy density and its empirical/population risks.

The coefficient estimator is theta_hat_k = t_n^{-1} sum_i f_k(Y_i): increments
outside the basis window contribute exactly 0, so the sums run over in-window
increments only.  Block partial sums are combined with compensated (Kahan)
addition in fixed block order, which makes the result bit-identical whether
the series is materialized, streamed, or folded by parallel workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisSystem, CoefficientVector, Window, synthesize
from .errors import DimensionError, ParameterError, WindowError
from .processes import IncrementSeries


@dataclass(frozen=True)
class RiskValue:
    """A quadratic-risk value together with the dimension K and horizon t_n it refers to."""

    value: float
    K: int
    t_n: float | None = None


def empirical_coefficients(
    series: IncrementSeries,
    basis: BasisSystem,
    max_workers: int | None = None,
) -> CoefficientVector:
    """Estimate basis coefficients of the Levy density from increment data."""
    t_n = series.scheme.t_n
    if t_n <= 0.0:
        raise ParameterError(f"horizon must be positive, got t_n={t_n!r}")
    a, b = basis.window.a, basis.window.b

    def partial(chunk: np.ndarray) -> np.ndarray:
        y = chunk[(chunk >= a) & (chunk <= b)]
        if y.size == 0:
            return np.zeros(basis.K)
        return basis.evaluate_all(y).sum(axis=1)

    total = np.zeros(basis.K)
    carry = np.zeros(basis.K)
    for part in series.map_blocks(partial, max_workers=max_workers):
        y = part - carry
        t = total + y
        carry = (t - total) - y
        total = t
    return CoefficientVector(basis, total / t_n, role="empirical", t_n=t_n)


def _as_values(theta, K: int | None = None) -> np.ndarray:
    vec = theta.values if isinstance(theta, CoefficientVector) else np.asarray(theta, dtype=float)
    if vec.ndim != 1:
        raise DimensionError(f"coefficient vector must be 1-d, got shape {vec.shape}")
    if K is not None and len(vec) != K:
        raise DimensionError(f"coefficient length {len(vec)} does not match {K}")
    return vec


def empirical_risk(theta, theta_hat) -> RiskValue:
    """R_{n,K}(theta) = -2 <theta, theta_hat> + ||theta||^2, minimized at theta_hat."""
    t = _as_values(theta)
    that = _as_values(theta_hat, len(t))
    value = -2.0 * float(t @ that) + float(t @ t)
    t_n = theta_hat.t_n if isinstance(theta_hat, CoefficientVector) else None
    return RiskValue(value, len(t), t_n)


def population_risk(theta, theta_perp) -> RiskValue:
    """Population counterpart -2 <theta, theta_perp> + ||theta||^2 with projected truth theta_perp."""
    return empirical_risk(theta, theta_perp)


def l2_error_on_D(theta, reference, D: Window, grid_points: int = 512) -> float:
    """L2(D) distance between the synthesized estimate and a reference density.

    `theta` is a CoefficientVector; `reference` is either a callable (true
    density) or another CoefficientVector.  The distance is a trapezoid-rule
    integral on a uniform grid of `grid_points` points over D.
    """
    if not isinstance(theta, CoefficientVector):
        raise ParameterError("theta must be a CoefficientVector (basis required for synthesis)")
    if not theta.basis.window.contains(D):
        raise WindowError(
            f"D=[{D.a}, {D.b}] is not contained in the basis window "
            f"[{theta.basis.window.a}, {theta.basis.window.b}]"
        )
    if grid_points < 2:
        raise ParameterError(f"grid_points must be >= 2, got {grid_points}")
    grid = np.linspace(D.a, D.b, grid_points)
    est = synthesize(theta.basis, theta, grid)
    if isinstance(reference, CoefficientVector):
        ref = synthesize(reference.basis, reference, grid)
    else:
        ref = np.asarray(reference(grid), dtype=float)
    return float(np.sqrt(np.trapezoid((est - ref) ** 2, grid)))
