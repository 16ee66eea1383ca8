"""Invariante Dichte der Mean-Field-Dynamik.

rho(x) = exp(-U(x) / sigma) / Z  mit  U = V(.; alpha) + (W(.; kappa) * rho).

Die Faltung hängt nur von endlich vielen Momenten ab; für quadratisches W
ist das der Mittelwert m (Selbstkonsistenz m = int x rho_m), sonst der
Momentvektor mu_1..mu_d mit d = Grad(W').
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import trapezoid

from meanfield import config
from meanfield.errors import ConvergenceError, DensityError
from meanfield.potentials import (
    ConfiningPotential,
    InteractionPotential,
    ThetaVector,
    interaction_drift_polynomial,
    interaction_energy_polynomial,
)

logger = logging.getLogger(__name__)

LEVEL_CUT = 40.0
BOUNDARY_RATIO = 1e-12
MIN_MOMENTS = 4

MomentArg = Union[float, Sequence[float]]


@dataclass(frozen=True)
class StationaryDensity:
    """Normierte Dichte auf einem gleichmäßigen Gitter."""

    grid: np.ndarray
    values: np.ndarray
    normalizer: float
    mean_param: float
    theta: ThetaVector
    sigma: float
    moments: np.ndarray
    symmetric: bool = False

    @property
    def nodes(self) -> int:
        return self.grid.size

    def quantile(self, q: float) -> float:
        """Quantil über die kumulierte Trapezsumme."""
        increments = 0.5 * (self.values[1:] + self.values[:-1]) * np.diff(self.grid)
        cdf = np.concatenate(([0.0], np.cumsum(increments)))
        return float(np.interp(q * cdf[-1], cdf, self.grid))


def _moment_vector(potW: InteractionPotential, m: MomentArg) -> np.ndarray:
    """[1, mu_1, ..., mu_d] aus einem Skalar m oder einem Momentvektor."""
    d = potW.drift_degree
    values = np.atleast_1d(np.asarray(m, dtype=float))
    if values.size == 1 and d > 1:
        raise ValueError(
            f"W vom Grad {d + 1} braucht die Momente mu_1..mu_{d}, erhalten nur m"
        )
    if values.size < d:
        raise ValueError(f"Zu wenige Momente: benötigt {d}, erhalten {values.size}")
    return np.concatenate(([1.0], values[:d]))


def density_exponent(
    potV: ConfiningPotential, potW: InteractionPotential, theta: ThetaVector, moments
) -> Polynomial:
    """U(x) = V(x; alpha) + (W * rho)(x), additive Konstante weggelassen."""
    return potV.polynomial(theta.alpha) + interaction_energy_polynomial(
        potW, theta.kappa, moments
    )


def _real_roots(poly: Polynomial) -> np.ndarray:
    roots = poly.roots()
    real = roots[np.abs(roots.imag) <= 1e-8 * (1.0 + np.abs(roots.real))].real
    return np.sort(real)


def _is_even(poly: Polynomial) -> bool:
    return not np.any(poly.coef[1::2])


def _auto_domain(exponent: Polynomial, sigma: float, scales: float) -> Tuple[float, float]:
    """Gebiet um alle lokalen Minima plus Niveaumenge U <= U_min + 40 sigma."""
    coef = exponent.coef
    degree = exponent.degree()
    if degree < 2 or degree % 2 or coef[degree] <= 0:
        raise DensityError(
            "Exponent wächst nicht in beide Richtungen gegen +unendlich, "
            "Dichte nicht normierbar"
        )
    d1 = exponent.deriv()
    d2 = d1.deriv()
    critical = _real_roots(d1)
    minima = [c for c in critical if d2(c) > 0] or list(critical)
    u_min = min(exponent(c) for c in minima)

    lo, hi = np.inf, -np.inf
    for c in minima:
        curvature = d2(c)
        # flaches Minimum (z.B. x⁴): Skala aus der Niveaumenge
        s = np.sqrt(sigma / curvature) if curvature > 1e-12 else 0.0
        lo, hi = min(lo, c - scales * s), max(hi, c + scales * s)
    level = _real_roots(exponent - (u_min + LEVEL_CUT * sigma))
    if level.size:
        lo, hi = min(lo, level[0]), max(hi, level[-1])
    if not np.isfinite(lo) or not hi > lo:
        raise DensityError("Integrationsgebiet konnte nicht bestimmt werden")
    if _is_even(exponent):
        hi = max(abs(lo), abs(hi))
        lo = -hi
    return float(lo), float(hi)


def _boundary_ok(values: np.ndarray) -> bool:
    peak = values.max()
    return values[0] < BOUNDARY_RATIO * peak and values[-1] < BOUNDARY_RATIO * peak


def _evaluate(exponent: Polynomial, sigma: float, lo: float, hi: float, nodes: int, symmetric: bool):
    grid = np.linspace(lo, hi, nodes)
    u = exponent(grid)
    u_min = u.min()
    unnormalized = np.exp(-(u - u_min) / sigma)
    if symmetric:
        unnormalized = 0.5 * (unnormalized + unnormalized[::-1])
    integral = trapezoid(unnormalized, grid)
    with np.errstate(over="ignore"):
        normalizer = np.exp(-u_min / sigma) * integral
    if not np.isfinite(normalizer) or normalizer < 1e-300:
        raise DensityError(
            f"Normierungskonstante Z = {normalizer} nicht darstellbar "
            f"(sigma = {sigma} zu klein oder Potential zu steil)"
        )
    return grid, unnormalized / integral, float(normalizer)


def build_density_given_moment(
    potV: ConfiningPotential,
    potW: InteractionPotential,
    theta: ThetaVector,
    sigma: float,
    m: MomentArg,
    nodes: int = config.GRID_NODES,
    bounds: Optional[Tuple[float, float]] = None,
) -> StationaryDensity:
    """Normierte Gibbs-Dichte bei vorgegebenem Moment m (bzw. Momentvektor).

    Args:
        potV: Einschlusspotential
        potW: Wechselwirkungspotential
        theta: Parameter (alpha, kappa)
        sigma: Diffusionskoeffizient
        m: Mittelwert (quadratisches W) oder Momente mu_1..mu_d
        nodes: Anzahl der Gitterpunkte
        bounds: Festes Gebiet [x_lo, x_hi]; sonst automatisch

    Returns:
        StationaryDensity

    Raises:
        DensityError: Wenn Z nicht endlich ist oder das Gebiet zu klein ist
    """
    if not sigma > 0:
        raise ValueError(f"sigma muss positiv sein, erhalten {sigma}")
    moments_in = _moment_vector(potW, m)
    exponent = density_exponent(potV, potW, theta, moments_in)
    symmetric = _is_even(exponent)

    if bounds is not None:
        lo, hi = float(bounds[0]), float(bounds[1])
        grid, values, normalizer = _evaluate(exponent, sigma, lo, hi, nodes, symmetric and lo == -hi)
        if not _boundary_ok(values):
            raise DensityError(
                f"Gebiet [{lo}, {hi}] zu klein: Randwerte über {BOUNDARY_RATIO} * max"
            )
    else:
        lo, hi = _auto_domain(exponent, sigma, config.DOMAIN_SCALES)
        grid, values, normalizer = _evaluate(exponent, sigma, lo, hi, nodes, symmetric)
        widened = 0
        while not _boundary_ok(values):
            if widened == 5:
                raise DensityError("Randmasse auch nach Verbreiterung zu groß")
            half = 0.75 * (hi - lo)
            center = 0.5 * (hi + lo)
            lo, hi = center - half, center + half
            grid, values, normalizer = _evaluate(exponent, sigma, lo, hi, nodes, symmetric)
            widened += 1
        if widened:
            logger.warning(f"Integrationsgebiet {widened}x verbreitert auf [{lo:.3f}, {hi:.3f}]")

    symmetric = symmetric and np.isclose(grid[0], -grid[-1], rtol=0, atol=1e-14 * abs(grid[-1]))
    n_moments = max(MIN_MOMENTS, potW.drift_degree)
    moments = np.array(
        [_quadrature_moment(grid, values, k, symmetric) for k in range(n_moments + 1)]
    )
    return StationaryDensity(
        grid=grid,
        values=values,
        normalizer=normalizer,
        mean_param=float(moments_in[1]),
        theta=theta,
        sigma=float(sigma),
        moments=moments,
        symmetric=bool(symmetric),
    )


def _quadrature_moment(grid, values, k: int, symmetric: bool) -> float:
    if k == 0:
        return float(trapezoid(values, grid))
    if symmetric and k % 2:
        return 0.0
    return float(trapezoid(grid**k * values, grid))


def density_moment(rho: StationaryDensity, k: int) -> float:
    """int x^k rho(x) dx per Trapezregel."""
    if k < 0:
        raise ValueError(f"k muss nichtnegativ sein, erhalten {k}")
    return _quadrature_moment(rho.grid, rho.values, k, rho.symmetric)


def solve_self_consistency(
    potV: ConfiningPotential,
    potW: InteractionPotential,
    theta: ThetaVector,
    sigma: float,
    m0: MomentArg = 0.0,
    nodes: int = config.GRID_NODES,
    damping: float = config.DAMPING,
    tol: float = config.FIXED_POINT_TOL,
    max_iter: int = config.FIXED_POINT_MAX_ITER,
    bounds: Optional[Tuple[float, float]] = None,
) -> Tuple[Union[float, np.ndarray], StationaryDensity]:
    """Gedämpfte Fixpunktiteration m <- (1 - w) m + w int x rho_m.

    Für quadratisches W läuft die Iteration auf dem Skalar m, sonst auf dem
    Momentvektor mu_1..mu_d. Bei mehreren Fixpunkten wird keiner bevorzugt:
    erreicht wird das Becken von m0.

    Returns:
        Tupel (m*, rho(m*)); m* ist ein Skalar oder ein Vektor

    Raises:
        ConvergenceError: Nach max_iter Iterationen ohne Konvergenz
    """
    if not 0 < damping <= 1:
        raise ValueError(f"Dämpfung muss in (0, 1] liegen, erhalten {damping}")
    d = potW.drift_degree
    if d == 1:
        current = np.array([float(np.atleast_1d(m0)[0])])
    else:
        start = np.atleast_1d(np.asarray(m0, dtype=float))
        if start.size >= d:
            current = start[:d].copy()
        else:
            # Startmomente aus der Dichte ohne Wechselwirkung, mu_1 = m0
            free_theta = ThetaVector(theta.alpha, tuple(0.0 for _ in theta.kappa), sigma)
            base = build_density_given_moment(potV, potW, free_theta, sigma, np.zeros(d), nodes, bounds)
            current = base.moments[1 : d + 1].copy()
            current[0] = float(start[0])

    history: List[float] = []
    for iteration in range(1, max_iter + 1):
        rho = build_density_given_moment(potV, potW, theta, sigma, current, nodes, bounds)
        target = rho.moments[1 : d + 1]
        step = damping * (target - current)
        current = current + step
        change = float(np.max(np.abs(step)))
        history.append(change)
        if change < tol:
            rho = build_density_given_moment(potV, potW, theta, sigma, current, nodes, bounds)
            logger.debug(f"Selbstkonsistenz nach {iteration} Iterationen: m = {current[0]:.6g}")
            result = float(current[0]) if d == 1 else current
            return result, rho

    logger.error(f"Selbstkonsistenz nicht konvergiert, letztes Residuum {history[-1]:.3e}")
    raise ConvergenceError(
        f"Fixpunktiteration nach {max_iter} Iterationen nicht konvergiert "
        f"(letzte Änderung {history[-1]:.3e})",
        history,
    )


def estimate_moment_from_data(obs, k: int) -> float:
    """(1 / (M + 1)) sum_m X_m^k."""
    return float(np.mean(obs.samples**k))


def estimate_moments_from_data(obs, degree: int) -> np.ndarray:
    """Empirische Momente mu_1..mu_degree der Beobachtungen."""
    return np.array([estimate_moment_from_data(obs, k) for k in range(1, degree + 1)])


def stationary_fp_residual(
    rho: StationaryDensity,
    potV: ConfiningPotential,
    potW: InteractionPotential,
    theta: ThetaVector,
    sigma: float,
) -> float:
    """max |V' rho + (W' * rho) rho + sigma rho'| / max rho auf inneren Knoten."""
    x = rho.grid
    drift = potV.polynomial(theta.alpha).deriv() + interaction_drift_polynomial(
        potW, theta.kappa, rho.moments
    )
    derivative = (rho.values[2:] - rho.values[:-2]) / (x[2:] - x[:-2])
    inner = rho.values[1:-1]
    flux = drift(x[1:-1]) * inner + sigma * derivative
    return float(np.max(np.abs(flux)) / rho.values.max())
