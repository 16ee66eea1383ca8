"""Tests für stationäre Dichte und Selbstkonsistenz."""

from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import trapezoid

from meanfield.errors import ConvergenceError, DensityError
from meanfield.invariant import (
    build_density_given_moment,
    density_moment,
    estimate_moment_from_data,
    solve_self_consistency,
    stationary_fp_residual,
)
from meanfield.potentials import ConfiningPotential, InteractionPotential, ThetaVector
from meanfield.simulator import ObservationSeries

V = ConfiningPotential.quadratic()
W = InteractionPotential.quadratic()
OU = ThetaVector((1.0,), (0.5,), 1.0)
BISTABLE_V = ConfiningPotential.bistable()


@pytest.fixture
def ou_rho():
    return build_density_given_moment(V, W, OU, 1.0, 0.0)


class TestBuildDensity:
    """Tests für die Gibbs-Dichte bei festem Moment."""

    def test_ou_second_moment(self, ou_rho):
        """Test: OU mit kappa = 0.5 hat Varianz 2/3."""
        assert density_moment(ou_rho, 2) == pytest.approx(2.0 / 3.0, abs=1e-8)

    def test_normalized(self, ou_rho):
        """Test: Dichte ist nichtnegativ, normiert und am Rand vernachlässigbar."""
        assert np.all(ou_rho.values >= 0)
        assert trapezoid(ou_rho.values, ou_rho.grid) == pytest.approx(1.0, abs=1e-10)
        assert density_moment(ou_rho, 0) == pytest.approx(1.0, abs=1e-10)
        peak = ou_rho.values.max()
        assert ou_rho.values[0] < 1e-12 * peak
        assert ou_rho.values[-1] < 1e-12 * peak

    def test_normalizer(self, ou_rho):
        """Test: Z = sqrt(pi / 0.75) für U = 0.75 x²."""
        assert ou_rho.normalizer == pytest.approx(np.sqrt(np.pi / 0.75), rel=1e-10)

    def test_symmetric_density(self, ou_rho):
        """Test: Gerades U ergibt symmetrisches Gitter und verschwindende ungerade Momente."""
        assert ou_rho.symmetric
        assert ou_rho.grid[0] == pytest.approx(-ou_rho.grid[-1])
        assert density_moment(ou_rho, 1) == 0.0
        assert ou_rho.moments[3] == 0.0

    def test_no_interaction_ignores_m(self):
        """Test: Für kappa = 0 hängt rho nicht von m ab."""
        theta = ThetaVector((1.0,), (0.0,))
        a = build_density_given_moment(V, W, theta, 1.0, 0.0)
        b = build_density_given_moment(V, W, theta, 1.0, 3.0)
        np.testing.assert_allclose(a.values, b.values)

    def test_shifted_mean(self):
        """Test: Für OU ist der Mittelwert von rho_m gleich kappa m / (1 + kappa)."""
        rho = build_density_given_moment(V, W, OU, 1.0, 0.9)
        assert density_moment(rho, 1) == pytest.approx(0.3, abs=1e-9)

    def test_bistable_symmetric_mean(self):
        """Test: Bistabil mit m = 0 hat Mittelwert null."""
        theta = ThetaVector((1.0, 2.0), (0.5,), 0.75)
        rho = build_density_given_moment(BISTABLE_V, W, theta, 0.75, 0.0)
        assert abs(density_moment(rho, 1)) < 1e-10

    def test_tiny_sigma_raises(self):
        """Test: Nicht darstellbares Z wirft DensityError."""
        theta = ThetaVector((1.0, 2.0), (0.0,), 1e-3)
        with np.errstate(over="ignore"):
            with pytest.raises(DensityError, match="Normierungskonstante"):
                build_density_given_moment(BISTABLE_V, W, theta, 1e-3, 0.0)

    def test_narrow_bounds_raise(self):
        """Test: Zu kleines festes Gebiet wirft DensityError."""
        with pytest.raises(DensityError, match="zu klein"):
            build_density_given_moment(V, W, OU, 1.0, 0.0, bounds=(-1.0, 1.0))

    def test_not_confining_raises(self):
        """Test: Nach unten unbeschränktes U ist nicht normierbar."""
        theta = ThetaVector((-1.0,), (0.0,))
        with pytest.raises(DensityError, match="nicht normierbar"):
            build_density_given_moment(V, W, theta, 1.0, 0.0)

    def test_general_interaction_needs_moments(self):
        """Test: Quartisches W braucht den ganzen Momentvektor."""
        potW = InteractionPotential((2, 4), (0.5, 0.25))
        theta = ThetaVector((1.0,), (0.5, 0.1))
        with pytest.raises(ValueError, match="mu_1..mu_3"):
            build_density_given_moment(V, potW, theta, 1.0, 0.0)
        rho = build_density_given_moment(V, potW, theta, 1.0, [0.0, 0.5, 0.0])
        assert rho.moments.size == 5

    def test_negative_moment_index(self, ou_rho):
        """Test: Negatives k wirft ValueError."""
        with pytest.raises(ValueError):
            density_moment(ou_rho, -1)


class TestSelfConsistency:
    """Tests für die Fixpunktiteration."""

    @pytest.mark.parametrize("m0", [-1.0, 0.5, 2.0])
    def test_ou_unique_fixed_point(self, m0):
        """Test: OU konvergiert von jedem Start gegen m = 0."""
        m, rho = solve_self_consistency(V, W, OU, 1.0, m0)
        assert abs(m) < 1e-9
        assert abs(m - density_moment(rho, 1)) < 1e-9

    def test_symmetric_start(self):
        """Test: m0 = 0 bleibt exakt null."""
        m, _ = solve_self_consistency(V, W, OU, 1.0, 0.0)
        assert m == 0.0

    @pytest.mark.parametrize("m0", [-1.0, 0.0, 1.0])
    def test_bistable_above_transition(self, m0):
        """Test: Bistabil mit sigma = 0.75 hat nur den symmetrischen Fixpunkt."""
        theta = ThetaVector((1.0, 2.0), (0.5,), 0.75)
        m, _ = solve_self_consistency(BISTABLE_V, W, theta, 0.75, m0, max_iter=2000)
        assert abs(m) < 1e-7

    def test_bistable_below_transition(self):
        """Test: Bistabil mit sigma = 0.5 hat zwei symmetrische Fixpunkte."""
        theta = ThetaVector((1.0, 2.0), (0.5,), 0.5)
        m_plus, _ = solve_self_consistency(BISTABLE_V, W, theta, 0.5, 1.0, max_iter=2000)
        m_minus, _ = solve_self_consistency(BISTABLE_V, W, theta, 0.5, -1.0, max_iter=2000)
        assert m_plus > 0.1
        assert m_plus + m_minus == pytest.approx(0.0, abs=1e-8)

    def test_no_convergence(self):
        """Test: Zu wenige Iterationen werfen ConvergenceError mit Verlauf."""
        with pytest.raises(ConvergenceError) as excinfo:
            solve_self_consistency(V, W, OU, 1.0, 2.0, max_iter=3)
        assert len(excinfo.value.history) == 3

    def test_invalid_damping(self):
        """Test: Dämpfung außerhalb (0, 1] wird abgelehnt."""
        with pytest.raises(ValueError, match="Dämpfung"):
            solve_self_consistency(V, W, OU, 1.0, 0.0, damping=0.0)

    def test_general_interaction(self):
        """Test: Quartisches W iteriert auf dem Momentvektor."""
        potW = InteractionPotential((2, 4), (0.5, 0.25))
        theta = ThetaVector((1.0,), (0.5, 0.1))
        moments, rho = solve_self_consistency(V, potW, theta, 1.0, 0.0)
        assert moments.shape == (3,)
        assert moments[0] == pytest.approx(0.0, abs=1e-9)
        assert moments[1] == pytest.approx(density_moment(rho, 2), abs=1e-8)


class TestDataMoments:
    """Tests für empirische Momente."""

    def test_constant_series(self):
        """Test: Konstante Reihe hat Mittelwert c."""
        obs = ObservationSeries([0.7] * 5, 1.0)
        assert estimate_moment_from_data(obs, 1) == pytest.approx(0.7)

    def test_alternating_series(self):
        """Test: Reihe +-1 hat Mittelwert null."""
        obs = ObservationSeries([1.0, -1.0, 1.0, -1.0], 1.0)
        assert estimate_moment_from_data(obs, 1) == 0.0


class TestResidual:
    """Tests für das Fokker-Planck-Residuum."""

    def test_ou_residual_small(self):
        """Test: Residuum unter 1e-4 auf [-8, 8]."""
        rho = build_density_given_moment(V, W, OU, 1.0, 0.0, nodes=2001, bounds=(-8.0, 8.0))
        assert stationary_fp_residual(rho, V, W, OU, 1.0) < 1e-4

    def test_second_order(self):
        """Test: Halbe Gitterweite viertelt das Residuum."""
        coarse = build_density_given_moment(V, W, OU, 1.0, 0.0, nodes=2001, bounds=(-8.0, 8.0))
        fine = build_density_given_moment(V, W, OU, 1.0, 0.0, nodes=4001, bounds=(-8.0, 8.0))
        ratio = stationary_fp_residual(coarse, V, W, OU, 1.0) / stationary_fp_residual(fine, V, W, OU, 1.0)
        assert 3.5 < ratio < 4.5

    def test_perturbed_density(self, ou_rho):
        """Test: Gestörte Dichte hat deutlich größeres Residuum."""
        values = ou_rho.values * (1.0 + 0.1 * np.sin(ou_rho.grid))
        values /= trapezoid(values, ou_rho.grid)
        perturbed = replace(ou_rho, values=values)
        base = stationary_fp_residual(ou_rho, V, W, OU, 1.0)
        assert stationary_fp_residual(perturbed, V, W, OU, 1.0) > 10 * base
