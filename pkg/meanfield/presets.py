"""Presets: Lädt Experiment-Konfigurationen aus YAML und schreibt sie zurück."""

import logging
import os
from typing import Dict, List

import yaml
from pydantic import ValidationError

from meanfield import config
from meanfield.models import ExperimentConfig

logger = logging.getLogger(__name__)

PRESET_SUFFIXES = (".yaml", ".yml")


def parse_config(content: str) -> ExperimentConfig:
    """Parst eine YAML-Konfiguration.

    Args:
        content: YAML-Text

    Returns:
        Validierte ExperimentConfig

    Raises:
        ValueError: Bei YAML- oder Validierungsfehlern
    """
    try:
        data = yaml.safe_load(content) or {}
    except yaml.YAMLError as e:
        logger.error(f"YAML Parse Fehler: {e}")
        raise ValueError(f"Konfiguration ist kein gültiges YAML: {e}") from e
    if not isinstance(data, dict):
        raise ValueError("Konfiguration muss ein YAML-Mapping sein")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ValueError(f"Ungültige Konfiguration: {e}") from e


def list_presets(directory: str = config.PRESETS_DIR) -> List[Dict]:
    """Alle Presets im Verzeichnis mit Name, Experiment und Beschreibung."""
    if not os.path.isdir(directory):
        return []
    presets = []
    for filename in sorted(os.listdir(directory)):
        stem, suffix = os.path.splitext(filename)
        if suffix not in PRESET_SUFFIXES:
            continue
        path = os.path.join(directory, filename)
        try:
            cfg = load_config(path)
        except ValueError as e:
            logger.warning(f"Preset {filename} übersprungen: {e}")
            continue
        presets.append(
            {
                "name": stem,
                "experiment": cfg.experiment,
                "description": cfg.description,
                "path": path,
            }
        )
    return presets


def load_config(path: str) -> ExperimentConfig:
    """Lädt eine Konfigurationsdatei; der Dateiname ist der Standardname."""
    with open(path, "r", encoding="utf-8") as f:
        cfg = parse_config(f.read())
    if not cfg.name:
        cfg = cfg.model_copy(update={"name": os.path.splitext(os.path.basename(path))[0]})
    return cfg


def resolve(name_or_path: str, directory: str = config.PRESETS_DIR) -> ExperimentConfig:
    """Preset-Name oder Dateipfad zu einer Konfiguration.

    Raises:
        ValueError: Wenn weder Datei noch Preset existiert
    """
    if os.path.isfile(name_or_path):
        return load_config(name_or_path)
    for suffix in PRESET_SUFFIXES:
        path = os.path.join(directory, f"{name_or_path}{suffix}")
        if os.path.isfile(path):
            return load_config(path)
    raise ValueError(f"Preset '{name_or_path}' nicht gefunden")


def dump_config(cfg: ExperimentConfig) -> str:
    """Konfiguration als YAML (Schlüssel in Feldreihenfolge)."""
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False, allow_unicode=True)
