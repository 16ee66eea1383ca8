"""Tests für den diskretisierten MLE und den Vergleich über delta."""

import numpy as np
import pandas as pd
import pytest

from meanfield.baselines import COMPARE_COLUMNS, compare_over_delta, mle_ou, order_relation_holds
from meanfield.estimator import closed_form_ou
from meanfield.models import ExperimentConfig, SimConfig
from meanfield.potentials import ConfiningPotential, InteractionPotential, ThetaVector
from meanfield.simulator import ObservationSeries, simulate_ensemble, subsample

OU = ThetaVector((1.0,), (0.5,), 1.0)


@pytest.fixture
def compare_config():
    """Kleine Konfiguration für den MLE-Vergleich."""
    return ExperimentConfig(
        experiment="mle_compare",
        estimator="closed_form",
        N=5,
        M=100,
        h=0.01,
        delta=0.01,
        delta_grid=[0.01, 0.02, 0.04],
        seed=3,
    )


class TestMle:
    """Tests für mle_ou."""

    def test_constant(self):
        """Test: Konstante Reihe ergibt kappa = -1."""
        assert mle_ou(ObservationSeries([0.4] * 5, 1.0)).kappa_hat == pytest.approx(-1.0)

    def test_halving(self):
        """Test: {1, 0.5, 0.25} ergibt -0.5."""
        assert mle_ou(ObservationSeries([1.0, 0.5, 0.25], 1.0)).kappa_hat == pytest.approx(-0.5)

    def test_all_zero(self):
        """Test: Nur Nullen werfen ValueError."""
        with pytest.raises(ValueError, match="null"):
            mle_ou(ObservationSeries([0.0, 0.0], 1.0))

    def test_order_relation(self):
        """Test: Eigen-Schätzer >= MLE auf jedem Datensatz, auf dem er definiert ist."""
        rng = np.random.default_rng(17)
        checked = 0
        for _ in range(200):
            samples = np.cumsum(rng.normal(size=rng.integers(3, 50))) * rng.uniform(0.1, 3.0)
            obs = ObservationSeries(samples, float(rng.choice([0.01, 0.1, 1.0])))
            try:
                closed_form_ou(obs)
            except ValueError:
                continue
            assert order_relation_holds(obs)
            checked += 1
        assert checked > 100

    def test_agreement_for_small_delta(self):
        """Test: Bei delta = 0.01 liegen MLE und Eigen-Schätzer nah beieinander."""
        cfg = SimConfig(N=2, T=1000.0, h=0.01, sigma=1.0, seed=8)
        path = simulate_ensemble(cfg, ConfiningPotential.quadratic(), InteractionPotential.quadratic(), OU)
        obs = subsample(path, 0.01, 0)
        assert abs(closed_form_ou(obs) - mle_ou(obs).kappa_hat) < 0.02


class TestCompareOverDelta:
    """Tests für compare_over_delta."""

    def test_table_shape(self, compare_config):
        """Test: Eine Zeile pro delta mit festen Spalten."""
        table = compare_over_delta(compare_config, OU, compare_config.delta_grid)
        assert list(table.columns) == COMPARE_COLUMNS
        assert table["delta"].tolist() == [0.01, 0.02, 0.04]
        assert (table["order_violations"] == 0).all()
        assert (table["eigen_mean"] >= table["mle_mean"]).all()

    def test_deterministic(self, compare_config):
        """Test: Gleicher Startwert ergibt identische Tabellen."""
        a = compare_over_delta(compare_config, OU, compare_config.delta_grid, particles=[0, 2])
        b = compare_over_delta(compare_config, OU, compare_config.delta_grid, particles=[0, 2])
        pd.testing.assert_frame_equal(a, b)

    def test_empty_deltas(self, compare_config):
        """Test: Leere delta-Liste wirft ValueError."""
        with pytest.raises(ValueError, match="Keine delta"):
            compare_over_delta(compare_config, OU, [])
