"""Tests für die Kommandozeile."""

import os
from unittest.mock import patch

import pytest

from main import build_parser, main

SMALL = """
name: small
experiment: sensitivity_MN
estimator: closed_form
delta: 0.1
h: 0.1
M: 50
N: 5
M_grid: [50, 100]
N_grid: [3, 5]
L: 2
seed: 4
"""


@pytest.fixture(autouse=True)
def log_file(tmp_path):
    """Logdatei ins temporäre Verzeichnis umleiten."""
    with patch("meanfield.config.LOG_FILE", str(tmp_path / "logs" / "meanfield.log")):
        yield


@pytest.fixture
def small_yaml(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(SMALL, encoding="utf-8")
    return str(path)


class TestParser:
    """Tests für build_parser."""

    def test_run_options(self):
        """Test: Überschreibungen werden geparst."""
        args = build_parser().parse_args(["run", "ou_clt", "--seed", "9", "--threads", "2"])
        assert args.target == "ou_clt"
        assert args.seed == 9
        assert args.threads == 2
        assert args.out is None

    def test_command_required(self):
        """Test: Ohne Befehl bricht argparse ab."""
        with pytest.raises(SystemExit):
            build_parser().parse_args([])


class TestMain:
    """Tests für main."""

    def test_list(self, capsys):
        """Test: list zeigt die mitgelieferten Presets."""
        assert main(["list"]) == 0
        out = capsys.readouterr().out
        assert "ou_sensitivity_mn" in out
        assert "chaos_check" in out

    def test_list_empty(self, tmp_path, capsys):
        """Test: Leeres Preset-Verzeichnis ergibt Exit-Code 1."""
        with patch("main.list_presets", return_value=[]):
            assert main(["list"]) == 1
        assert "Keine Presets" in capsys.readouterr().out

    def test_unknown_preset(self):
        """Test: Unbekanntes Preset ergibt Exit-Code 2."""
        assert main(["run", "does_not_exist"]) == 2
        assert main(["dump", "does_not_exist"]) == 2

    def test_run(self, small_yaml, tmp_path, capsys):
        """Test: Kleiner Lauf schreibt Tabellen und Zusammenfassung."""
        out_dir = tmp_path / "out"
        assert main(["run", small_yaml, "--out", str(out_dir)]) == 0
        files = set(os.listdir(out_dir))
        assert {"small.csv", "small_aggregate.csv", "small_summary.json"} <= files
        assert "Ergebnisse:" in capsys.readouterr().out
        assert os.path.exists(tmp_path / "logs" / "meanfield.log")

    def test_run_invalid_override(self, small_yaml, tmp_path):
        """Test: Ungültige Überschreibung ergibt Exit-Code 2."""
        assert main(["run", small_yaml, "--out", str(tmp_path), "--threads", "0"]) == 2

    def test_run_failure(self, small_yaml, tmp_path):
        """Test: Abgebrochenes Experiment ergibt Exit-Code 1."""
        with patch("meanfield.run_experiment", side_effect=RuntimeError("kaputt")):
            assert main(["run", small_yaml, "--out", str(tmp_path)]) == 1

    def test_dump(self, small_yaml, tmp_path, capsys):
        """Test: dump schreibt Dichte, Eigenpaare und Pfade."""
        out_dir = tmp_path / "dump"
        assert main(["dump", small_yaml, "--out", str(out_dir), "--path-T", "1.0"]) == 0
        assert set(os.listdir(out_dir)) == {
            "small_density.csv", "small_eigenpairs.csv", "small_path.csv",
        }
        assert len(capsys.readouterr().out.strip().splitlines()) == 3
