"""Result-Store: Speichert Ergebnistabellen als CSV und Zusammenfassungen als JSON."""

import json
import logging
import os
import platform
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
import pydantic
import scipy

from meanfield import config
from meanfield.harness import ResultTable
from meanfield.models import ExperimentConfig

logger = logging.getLogger(__name__)


def config_header(cfg: ExperimentConfig) -> List[str]:
    """`# key: value`-Zeilen mit der vollständigen Konfiguration."""
    data = cfg.model_dump(mode="json")
    return [f"# {key}: {json.dumps(value, ensure_ascii=False)}" for key, value in data.items()]


def write_table(frame: pd.DataFrame, path: str, cfg: ExperimentConfig) -> str:
    """CSV mit Konfigurations-Kopf; ohne Zeitstempel, damit identische Läufe
    identische Dateien ergeben."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("\n".join(config_header(cfg)) + "\n")
        frame.to_csv(f, index=False)
    logger.info(f"Tabelle geschrieben: {path}")
    return path


def read_table(path: str) -> pd.DataFrame:
    """Liest eine Ergebnistabelle (Kommentarzeilen werden übersprungen)."""
    if not os.path.exists(path):
        raise ValueError(f"Tabelle '{path}' nicht gefunden")
    return pd.read_csv(path, comment="#")


def read_config_header(path: str) -> Dict:
    """Konfiguration aus dem Kopf einer Ergebnistabelle."""
    data = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.startswith("# "):
                break
            key, _, value = line[2:].rstrip("\n").partition(": ")
            data[key] = json.loads(value)
    return data


def versions() -> Dict[str, str]:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "pydantic": pydantic.VERSION,
    }


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        return float(value) if np.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def save_result(
    result: ResultTable,
    out_dir: Optional[str] = None,
    wall_time: Optional[float] = None,
) -> Dict[str, str]:
    """Schreibt Haupttabelle, Zusatztabellen und JSON-Zusammenfassung.

    Args:
        result: Ergebnis eines Runners
        out_dir: Zielverzeichnis (Standard: output_dir der Konfiguration bzw. RESULTS_DIR)
        wall_time: Laufzeit in Sekunden (nur im JSON)

    Returns:
        Dict Art -> Dateipfad
    """
    cfg = result.config
    out_dir = out_dir or cfg.output_dir or config.RESULTS_DIR
    name = cfg.name or cfg.experiment
    paths = {"table": write_table(result.frame, os.path.join(out_dir, f"{name}.csv"), cfg)}
    for key, frame in result.extra.items():
        paths[key] = write_table(frame, os.path.join(out_dir, f"{name}_{key}.csv"), cfg)

    summary = {
        "experiment": cfg.experiment,
        "name": name,
        "seed": cfg.seed,
        "failures": result.failures,
        "ok": result.ok,
        "summary": result.summary,
        "checks": result.checks,
        "wall_time_seconds": wall_time,
        "versions": versions(),
        "config": cfg.model_dump(mode="json"),
    }
    summary_path = os.path.join(out_dir, f"{name}_summary.json")
    with open(summary_path, "w", encoding="utf-8") as f:
        json.dump(_jsonable(summary), f, indent=2, ensure_ascii=False)
    paths["summary"] = summary_path
    logger.info(f"Zusammenfassung geschrieben: {summary_path}")
    return paths


def load_summary(path: str) -> Dict:
    """Lädt eine JSON-Zusammenfassung."""
    if not os.path.exists(path):
        raise ValueError(f"Zusammenfassung '{path}' nicht gefunden")
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
