"""Simulator: Euler-Maruyama für das N-Teilchen-System und die linearisierte
Mean-Field-SDE, Unterabtastung zu Beobachtungsreihen.

Jedes Teilchen n bekommt einen eigenen Zufallsstrom, abgeleitet aus
(seed, n) über SeedSequence.spawn_key und den zählerbasierten Philox-Generator.
Damit sind N und das Rauschen eines Teilchens entkoppelt.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Iterator, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from meanfield.errors import SimulationDivergedError
from meanfield.models import SimConfig, is_multiple
from meanfield.potentials import (
    ConfiningPotential,
    InteractionPotential,
    ThetaVector,
    mean_field_drift_polynomial,
)

logger = logging.getLogger(__name__)

NOISE_BLOCK = 1000


@dataclass(frozen=True)
class EnsemblePath:
    """Gespeicherte Pfade aller Teilchen, Zeilen = Zeiten, Spalten = Teilchen."""

    values: np.ndarray
    h: float
    sigma: float
    seed: int
    record_stride: int = 1

    @property
    def record_step(self) -> float:
        return self.h * self.record_stride

    @property
    def n_particles(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ObservationSeries:
    """Beobachtungen {X_m}_{m=0..M} eines Teilchens im Abstand delta."""

    samples: np.ndarray
    delta: float
    particle_index: int = 0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float).ravel()
        if samples.size < 2:
            raise ValueError("Mindestens zwei Beobachtungen (M >= 1) nötig")
        if not self.delta > 0:
            raise ValueError(f"delta muss positiv sein, erhalten {self.delta}")
        object.__setattr__(self, "samples", samples)

    @property
    def M(self) -> int:
        return self.samples.size - 1

    def truncated(self, M: int) -> "ObservationSeries":
        """Die ersten M + 1 Beobachtungen."""
        if M < 1 or M > self.M:
            raise ValueError(f"M = {M} außerhalb von 1..{self.M}")
        return ObservationSeries(self.samples[: M + 1], self.delta, self.particle_index)


def particle_generator(seed: int, index: int) -> np.random.Generator:
    """Unabhängiger Zufallsstrom für Teilchen `index`."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))
    )


def _noise_blocks(seed: int, n_particles: int, n_steps: int) -> Iterator[np.ndarray]:
    """Standardnormale Inkremente in Blöcken (Schritte x Teilchen)."""
    generators = [particle_generator(seed, n) for n in range(n_particles)]
    done = 0
    while done < n_steps:
        length = min(NOISE_BLOCK, n_steps - done)
        block = np.empty((length, n_particles))
        for n, gen in enumerate(generators):
            block[:, n] = gen.standard_normal(length)
        done += length
        yield block


def _empirical_moments(x: np.ndarray, degree: int) -> np.ndarray:
    return np.array([1.0] + [np.mean(x**k) for k in range(1, degree + 1)])


def ensemble_drift(potV, potW, theta) -> Callable[[np.ndarray], np.ndarray]:
    """x -> -(V'(x_n) + 1/N sum_i W'(x_n - x_i)) über empirische Momente."""
    confining = potV.polynomial(theta.alpha).deriv()
    if potW.kind == "quadratic":
        kappa = potW.basis_coefficients[0] * 2.0 * theta.kappa[0]

        def drift(x):
            return -confining(x) - kappa * (x - np.mean(x))

        return drift

    def drift(x):
        moments = _empirical_moments(x, potW.drift_degree)
        return -mean_field_drift_polynomial(potV, potW, theta, moments)(x)

    return drift


def _check_finite(x: np.ndarray, step: int) -> None:
    if not np.all(np.isfinite(x)):
        logger.error(f"Simulation divergiert in Schritt {step}")
        raise SimulationDivergedError(step)


def simulate_ensemble(
    cfg: SimConfig,
    potV: ConfiningPotential,
    potW: InteractionPotential,
    theta: ThetaVector,
) -> EnsemblePath:
    """Explizites Euler-Maruyama-Verfahren für das N-Teilchen-System.

    Args:
        cfg: Simulationskonfiguration (N, T, h, sigma, seed, ...)
        potV: Einschlusspotential
        potW: Wechselwirkungspotential
        theta: Parameter (alpha, kappa); sigma kommt aus cfg

    Returns:
        EnsemblePath mit (n_steps / record_stride + 1) gespeicherten Zeilen

    Raises:
        SimulationDivergedError: Bei nicht-endlichen Werten
    """
    total_steps = cfg.burn_in_steps + cfg.n_steps
    drift = ensemble_drift(potV, potW, theta)
    scale = np.sqrt(2.0 * cfg.sigma * cfg.h)
    x = np.full(cfg.N, cfg.initial_value, dtype=float)

    rows = cfg.n_steps // cfg.record_stride + 1
    values = np.empty((rows, cfg.N))
    if cfg.burn_in_steps == 0:
        values[0] = x

    step = 0
    for block in _noise_blocks(cfg.seed, cfg.N, total_steps):
        for xi in block:
            x = x + drift(x) * cfg.h + scale * xi
            step += 1
            if step % 100 == 0 or step == total_steps:
                _check_finite(x, step)
            recorded = step - cfg.burn_in_steps
            if recorded >= 0 and recorded % cfg.record_stride == 0:
                values[recorded // cfg.record_stride] = x

    _check_finite(values, step)
    logger.info(
        f"Ensemble simuliert: N={cfg.N}, T={cfg.T}, h={cfg.h}, seed={cfg.seed}"
    )
    return EnsemblePath(values, cfg.h, cfg.sigma, cfg.seed, cfg.record_stride)


def sample_from_density(rho, n: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF-Ziehung aus einer gitterbasierten Dichte."""
    cdf = cumulative_trapezoid(rho.values, rho.grid, initial=0.0)
    cdf /= cdf[-1]
    # strikt wachsende Stützstellen für die Interpolation
    keep = np.concatenate(([True], np.diff(cdf) > 0))
    return np.interp(rng.uniform(size=n), cdf[keep], rho.grid[keep])


def simulate_stationary_linearized(
    cfg: SimConfig,
    potV: ConfiningPotential,
    potW: InteractionPotential,
    theta: ThetaVector,
    rho,
    n_pairs: int,
    delta: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """Paare (X_0, X_delta) der linearisierten Mean-Field-SDE mit X_0 ~ rho.

    Args:
        cfg: liefert h, sigma und seed
        potV: Einschlusspotential
        potW: Wechselwirkungspotential
        theta: Parameter (alpha, kappa)
        rho: StationaryDensity, aus der X_0 gezogen wird
        n_pairs: Anzahl unabhängiger Paare
        delta: Zeitabstand

    Returns:
        Tupel (x0, x_delta) von Arrays der Länge n_pairs
    """
    if delta < 0:
        raise ValueError(f"delta muss nichtnegativ sein, erhalten {delta}")
    rng = particle_generator(cfg.seed, 0)
    x0 = sample_from_density(rho, n_pairs, rng)
    if delta == 0:
        return x0, x0.copy()

    n_steps = max(1, int(np.ceil(delta / cfg.h - 1e-9)))
    h = delta / n_steps
    scale = np.sqrt(2.0 * cfg.sigma * h)
    drift = mean_field_drift_polynomial(potV, potW, theta, rho.moments)
    x = x0.copy()
    for step in range(1, n_steps + 1):
        x = x - drift(x) * h + scale * rng.standard_normal(n_pairs)
        if step % 100 == 0 or step == n_steps:
            _check_finite(x, step)
    return x0, x


def subsample(path: EnsemblePath, delta: float, particle_index: int) -> ObservationSeries:
    """Beobachtungsreihe eines Teilchens mit Abstand delta.

    Raises:
        ValueError: Wenn delta kein ganzzahliges Vielfaches des Speicherschritts ist
    """
    if not is_multiple(delta, path.record_step):
        raise ValueError(
            f"delta = {delta} ist kein ganzzahliges Vielfaches von {path.record_step}"
        )
    if not 0 <= particle_index < path.n_particles:
        raise ValueError(f"Teilchen {particle_index} existiert nicht")
    stride = int(round(delta / path.record_step))
    return ObservationSeries(path.values[::stride, particle_index], delta, particle_index)


def coupled_chaos_error(
    cfg: SimConfig,
    potV: ConfiningPotential,
    potW: InteractionPotential,
    theta: ThetaVector,
    rho,
    n_realizations: int = 1,
) -> float:
    """Gekoppelter L²-Fehler zwischen Teilchen und Mean-Field-Kopie.

    Beide Systeme laufen mit denselben Gauß-Inkrementen; geschätzt wird
    sup_t E[|X_t^(n) - X_t|²]^(1/2), gemittelt über Teilchen und Realisierungen.
    """
    scale = np.sqrt(2.0 * cfg.sigma * cfg.h)
    drift = ensemble_drift(potV, potW, theta)
    drift_mf = mean_field_drift_polynomial(potV, potW, theta, rho.moments)
    sq_error = np.zeros(cfg.n_steps + 1)

    for r in range(n_realizations):
        x = np.full(cfg.N, cfg.initial_value, dtype=float)
        y = x.copy()
        step = 0
        for block in _noise_blocks(cfg.seed + r, cfg.N, cfg.n_steps):
            for xi in block:
                x = x + drift(x) * cfg.h + scale * xi
                y = y - drift_mf(y) * cfg.h + scale * xi
                step += 1
                sq_error[step] += np.mean((x - y) ** 2)
        _check_finite(x, step)

    error = float(np.sqrt(np.max(sq_error / n_realizations)))
    logger.info(f"Kopplungsfehler N={cfg.N}: {error:.4e}")
    return error


def ensemble_moment_trace(path: EnsemblePath, k: int) -> np.ndarray:
    """Empirisches k-tes Moment des Ensembles zu jeder gespeicherten Zeit."""
    return np.mean(path.values**k, axis=1)
