"""Diskretisierter Maximum-Likelihood-Schätzer für den OU-Fall und
Vergleich mit dem Eigenfunktions-Schätzer über verschiedene delta."""

import logging
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from meanfield.estimator import context_from_config, estimate_over_particles, closed_form_ou
from meanfield.models import CompareRow, ExperimentConfig, MleReport, SimConfig
from meanfield.potentials import ThetaVector
from meanfield.simulator import ObservationSeries, simulate_ensemble, subsample

logger = logging.getLogger(__name__)

COMPARE_COLUMNS = ["delta", "eigen_mean", "eigen_std", "mle_mean", "mle_std", "n_failures", "order_violations"]


def mle_ou(obs: ObservationSeries) -> MleReport:
    """kappa = -1 - sum X_m (X_(m+1) - X_m) / (delta sum X_m²).

    Raises:
        ValueError: Wenn alle Beobachtungen null sind
    """
    x, y = obs.samples[:-1], obs.samples[1:]
    denominator = float(np.sum(x * x))
    if denominator <= 0:
        raise ValueError("Alle Beobachtungen sind null, MLE nicht definiert")
    kappa = -1.0 - float(np.sum(x * (y - x))) / (obs.delta * denominator)
    return MleReport(kappa_hat=kappa, delta=obs.delta)


def order_relation_holds(obs: ObservationSeries) -> bool:
    """Prüft kappa_eigen >= kappa_MLE, folgt aus log(q) <= q - 1.

    Nur auf Datensätzen, auf denen der Eigen-Schätzer definiert ist.
    """
    eigen = closed_form_ou(obs)
    mle = mle_ou(obs).kappa_hat
    return eigen >= mle - 1e-12 * max(1.0, abs(mle))


def _spread(values: List[float]) -> float:
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


def compare_over_delta(
    cfg: ExperimentConfig,
    theta0: ThetaVector,
    deltas: Sequence[float],
    particles: Optional[Sequence[int]] = None,
) -> pd.DataFrame:
    """Beide Schätzer auf denselben unterabgetasteten Daten pro delta.

    Simuliert wird einmal bis T = M * max(delta); für kleinere delta werden
    nur die ersten M Übergänge verwendet.

    Args:
        cfg: Experiment-Konfiguration (N, M, h, seed, Schätzer)
        theta0: Wahrer Parameter der Simulation
        deltas: Beobachtungsabstände, Vielfache von h
        particles: Ausgewertete Teilchen (Standard: alle)

    Returns:
        DataFrame mit einer Zeile pro delta
    """
    if not deltas:
        raise ValueError("Keine delta-Werte angegeben")
    potV, potW = cfg.build_potentials()
    sim = SimConfig(
        N=cfg.N,
        T=cfg.M * max(deltas),
        h=cfg.h,
        sigma=theta0.sigma,
        seed=cfg.seed,
        burn_in=cfg.burn_in,
    )
    ensemble = simulate_ensemble(sim, potV, potW, theta0)
    indices = list(range(cfg.N)) if particles is None else list(particles)

    rows: List[CompareRow] = []
    for delta in deltas:
        row: CompareRow = {"delta": float(delta), "n_failures": 0}
        try:
            ctx = context_from_config(cfg, delta=delta)
            report = estimate_over_particles(
                ctx, ensemble, delta, theta0, particles=indices,
                method=cfg.estimator, threads=cfg.threads, M=cfg.M,
            )
            eigen = [v[0] for v, ok in zip(report.per_particle, report.particle_converged) if ok]
            mle = []
            violations = 0
            for n in indices:
                obs = subsample(ensemble, delta, n).truncated(cfg.M)
                try:
                    mle.append(mle_ou(obs).kappa_hat)
                except ValueError as e:
                    logger.warning(f"MLE für Teilchen {n} bei delta={delta} fehlgeschlagen: {e}")
                    row["n_failures"] += 1
                    continue
                try:
                    violations += int(not order_relation_holds(obs))
                except ValueError:
                    # Eigen-Schätzer hier nicht definiert
                    pass
            row.update(
                eigen_mean=float(np.mean(eigen)),
                eigen_std=_spread(eigen),
                mle_mean=float(np.mean(mle)),
                mle_std=_spread(mle),
                order_violations=violations,
            )
            row["n_failures"] += report.n_failed
        except (ValueError, ArithmeticError, RuntimeError) as e:
            logger.error(f"Vergleich bei delta={delta} fehlgeschlagen: {e}")
            row.update(eigen_mean=np.nan, eigen_std=np.nan, mle_mean=np.nan, mle_std=np.nan, order_violations=0)
            row["n_failures"] = len(indices)
        rows.append(row)
        logger.info(
            f"delta={delta}: eigen={row['eigen_mean']:.4f}, mle={row['mle_mean']:.4f}"
        )

    return pd.DataFrame(rows, columns=COMPARE_COLUMNS)
