"""CSV-Dumps von Pfaden, Dichten und Eigenpaaren zum Plotten."""

import logging
import os

import numpy as np
import pandas as pd

from meanfield.invariant import StationaryDensity
from meanfield.simulator import EnsemblePath
from meanfield.spectral import EigenSystem

logger = logging.getLogger(__name__)


def _write(frame: pd.DataFrame, path: str, header: dict) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        for key, value in header.items():
            f.write(f"# {key}: {value}\n")
        frame.to_csv(f, index=False)
    logger.info(f"Geschrieben: {path}")
    return path


def export_path(path: EnsemblePath, filename: str) -> str:
    """Eine Zeile pro gespeicherter Zeit, eine Spalte pro Teilchen.

    Args:
        path: Simulierte Pfade
        filename: Ziel-CSV

    Returns:
        Pfad zur erstellten Datei
    """
    times = np.arange(path.values.shape[0]) * path.record_step
    frame = pd.DataFrame(path.values, columns=[f"x{n}" for n in range(path.n_particles)])
    frame.insert(0, "t", times)
    return _write(frame, filename, {"h": path.h, "sigma": path.sigma, "seed": path.seed})


def export_density(rho: StationaryDensity, filename: str) -> str:
    """Zweispaltig (x, rho)."""
    frame = pd.DataFrame({"x": rho.grid, "rho": rho.values})
    header = {"sigma": rho.sigma, "normalizer": rho.normalizer, "mean_param": rho.mean_param}
    return _write(frame, filename, header)


def export_eigenpairs(sys: EigenSystem, filename: str) -> str:
    """Pro j: lambda_j und die Monomkoeffizienten von phi_j (aufsteigend)."""
    rows = []
    for j in range(1, sys.J + 1):
        row = {"j": j, "lambda": float(sys.lambdas[j - 1])}
        for k, c in enumerate(sys.monomial_coefficients(j)):
            row[f"c{k}"] = float(c)
        rows.append(row)
    header = {"sigma": sys.sigma, "K": sys.basis.degree, "normalization": sys.normalization}
    return _write(pd.DataFrame(rows), filename, header)
