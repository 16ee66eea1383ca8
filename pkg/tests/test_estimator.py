"""Tests für Schätzfunktion, Nullstellensuche und asymptotische Kovarianz."""

import os
from unittest.mock import patch

import numpy as np
import pytest

from meanfield.errors import SingularJacobianError
from meanfield.estimator import (
    SIGMA_FLOOR,
    EstimatingContext,
    G_eval,
    PsiSpec,
    _box,
    asymptotic_covariance,
    closed_form_ou,
    estimate_over_particles,
    estimate_particle,
    estimate_sigma_quadratic_variation,
    fd_jacobian,
    g_term,
    h_average,
    h_term,
    l_term,
    ou_asymptotic_variance,
    ou_stationary_covariance,
    solve,
)
from meanfield.models import SimConfig
from meanfield.potentials import ConfiningPotential, InteractionPotential, ThetaVector
from meanfield.simulator import (
    EnsemblePath,
    ObservationSeries,
    simulate_ensemble,
    simulate_stationary_linearized,
    subsample,
)

V = ConfiningPotential.quadratic()
W = InteractionPotential.quadratic()
OU = ThetaVector((1.0,), (0.5,), 1.0)
DECAY = np.exp(-1.5)

slow = pytest.mark.skipif(not os.environ.get("MEANFIELD_SLOW"), reason="MEANFIELD_SLOW nicht gesetzt")


def make_context(psi=None, normalization="monic", delta=1.0, potV=V, **kwargs) -> EstimatingContext:
    """OU-Kontext mit J = 1, psi = x und kleiner Basis."""
    return EstimatingContext(
        psi=psi or PsiSpec.from_lists([[[1]]], 1),
        J=1,
        delta=delta,
        potV=potV,
        potW=W,
        K=10,
        normalization=normalization,
        **kwargs,
    )


def ou_series(seed: int, T: float = 200.0, delta: float = 1.0) -> ObservationSeries:
    """Beobachtungen von Teilchen 0 eines kleinen OU-Ensembles."""
    cfg = SimConfig(N=2, T=T, h=0.01, sigma=1.0, seed=seed)
    return subsample(simulate_ensemble(cfg, V, W, OU), delta, 0)


@pytest.fixture(scope="module")
def obs():
    return ou_series(seed=1)


class TestPsi:
    """Tests für die Testfunktionen psi."""

    def test_single_entry_replicated(self):
        """Test: Ein Eintrag gilt für alle j."""
        psi = PsiSpec.from_lists([[[1], [2]]], 3)
        assert psi.J == 3
        assert psi.p == 2
        np.testing.assert_allclose(psi.evaluate(3, [2.0]), [[2.0, 4.0]])

    def test_zero(self):
        """Test: Leere Komponente ist die Nullfunktion."""
        psi = PsiSpec.zero(2, 1)
        assert np.all(psi.evaluate(1, [1.0, 2.0]) == 0.0)

    def test_unequal_components_rejected(self):
        """Test: Alle psi_j brauchen gleich viele Komponenten."""
        with pytest.raises(ValueError, match="gleich viele"):
            PsiSpec((((1,),), ((1,), (2,))))


class TestEstimatingFunction:
    """Tests für g und G."""

    def test_g_term_ou(self):
        """Test: g(1, 1) = 1 - exp(-1.5) für kappa = 0.5, delta = 1."""
        ctx = make_context()
        value = g_term(ctx, ctx.rebuild(OU), 1.0, 1.0)
        assert value[0] == pytest.approx(1 - DECAY, abs=1e-8)

    def test_g_term_zero_delta(self):
        """Test: delta = 0 und x = y ergibt g = 0."""
        ctx = make_context(delta=0.0)
        assert g_term(ctx, ctx.rebuild(OU), 0.8, 0.8)[0] == pytest.approx(0.0, abs=1e-14)

    def test_zero_psi(self):
        """Test: psi = 0 ergibt den Nullvektor."""
        ctx = make_context(psi=PsiSpec.zero(1, 1))
        assert g_term(ctx, ctx.rebuild(OU), 1.0, 2.0).tolist() == [0.0]

    def test_constant_series(self):
        """Test: Konstante Reihe c ergibt G = c² (1 - exp(-1.5))."""
        ctx = make_context()
        obs = ObservationSeries([0.7] * 5, 1.0)
        assert G_eval(ctx, obs, OU)[0] == pytest.approx(0.49 * (1 - DECAY), abs=1e-8)

    def test_zero_on_exact_decay(self):
        """Test: Beobachtungen auf der Kurve y = exp(-1.5) x ergeben G = 0."""
        ctx = make_context()
        obs = ObservationSeries(2.0 * DECAY ** np.arange(6), 1.0)
        assert abs(G_eval(ctx, obs, OU)[0]) < 1e-9

    def test_delta_mismatch(self, obs):
        """Test: Falsches delta der Beobachtungen wirft ValueError."""
        ctx = make_context(delta=0.5)
        with pytest.raises(ValueError, match="passt nicht"):
            G_eval(ctx, obs, OU)

    def test_jacobian_matches_h(self, obs):
        """Test: Finite Differenzen von G stimmen mit dem Mittel von h überein."""
        ctx = make_context()
        np.testing.assert_allclose(fd_jacobian(ctx, obs, OU), h_average(ctx, OU, obs), rtol=1e-3)

    def test_zero_mean_under_stationarity(self):
        """Test: Bei theta_0 hat g unter stationären Paaren Erwartung null."""
        ctx = make_context()
        sys = ctx.rebuild(OU)
        cfg = SimConfig(N=1, T=0.005, h=0.005, sigma=1.0, seed=6)
        x0, x1 = simulate_stationary_linearized(cfg, V, W, OU, sys.rho_ref, 50_000, 1.0)
        rows = x0 * (sys.eval(1, x1) - DECAY * sys.eval(1, x0))
        assert abs(rows.mean()) < 3 * rows.std(ddof=1) / np.sqrt(rows.size)


class TestClosedForm:
    """Tests für die geschlossene OU-Formel."""

    def test_constant(self):
        """Test: Konstante Reihe ergibt kappa = -1."""
        assert closed_form_ou(ObservationSeries([0.3] * 4, 1.0)) == pytest.approx(-1.0)

    def test_halving(self):
        """Test: {1, 0.5, 0.25} ergibt -1 + log 2."""
        value = closed_form_ou(ObservationSeries([1.0, 0.5, 0.25], 1.0))
        assert value == pytest.approx(-0.30685, abs=1e-5)

    def test_negative_ratio(self):
        """Test: Vorzeichenwechsel macht den Schätzer undefiniert."""
        with pytest.raises(ValueError, match="nicht positiv"):
            closed_form_ou(ObservationSeries([1.0, -1.0], 1.0))

    def test_all_zero(self):
        """Test: Nur Nullen werfen ValueError."""
        with pytest.raises(ValueError, match="null"):
            closed_form_ou(ObservationSeries([0.0, 0.0, 0.0], 1.0))

    def test_quadratic_variation(self):
        """Test: Quadratische Variation schätzt sigma."""
        obs = ou_series(seed=3, T=100.0, delta=0.01)
        assert estimate_sigma_quadratic_variation(obs) == pytest.approx(1.0, rel=0.05)

    def test_reference_formulas(self):
        """Test: OU-Kovarianz und asymptotische Varianz."""
        assert ou_stationary_covariance(0.5, 0.0) == pytest.approx(2.0 / 3.0)
        assert ou_asymptotic_variance(0.5, 1.0) == pytest.approx(np.exp(3.0) - 1.0)


class TestSolve:
    """Tests für die Nullstellensuche."""

    @pytest.mark.parametrize("normalization", ["l2", "monic"])
    def test_matches_closed_form(self, obs, normalization):
        """Test: Newton trifft die geschlossene Formel, unabhängig von der Normierung."""
        ctx = make_context(normalization=normalization)
        report = solve(ctx, obs, OU, tol=1e-10)
        assert report.converged
        assert report.theta_hat[0] == pytest.approx(closed_form_ou(obs), abs=1e-8)

    def test_start_at_root(self):
        """Test: Start in der Nullstelle braucht höchstens zwei Schritte."""
        ctx = make_context()
        obs = ObservationSeries(2.0 * DECAY ** np.arange(8), 1.0)
        report = solve(ctx, obs, OU)
        assert report.converged
        assert report.iterations <= 2
        assert report.theta_hat[0] == pytest.approx(0.5, abs=1e-8)

    def test_no_iterations_reports_failure(self, obs):
        """Test: Ohne Newton-Schritte bleibt das Ergebnis unkonvergiert."""
        report = solve(make_context(), obs, OU, max_iter=0)
        assert not report.converged
        assert report.theta_hat == [0.5]

    def test_start_outside_box(self, obs):
        """Test: Startwert außerhalb der Box wirft ValueError."""
        ctx = make_context(bounds=[(1.0, 2.0)])
        with pytest.raises(ValueError, match="außerhalb"):
            solve(ctx, obs, OU)

    def test_singular_jacobian(self, obs):
        """Test: alpha und kappa gemeinsam im OU-Fall sind nicht identifizierbar."""
        ctx = make_context(psi=PsiSpec.from_lists([[[1], [3]]], 1), free=("alpha", "kappa"))
        theta = ThetaVector((0.5,), (0.5,), 1.0)
        with pytest.raises(SingularJacobianError, match="det"):
            solve(ctx, obs, theta)

    def test_bisection_fallback(self, obs):
        """Test: Bei singulärer Jacobi-Matrix und p = 1 greift die Bisektion."""
        ctx = make_context(bounds=[(-0.5, 3.0)])
        with patch("meanfield.estimator.fd_jacobian", return_value=np.zeros((1, 1))):
            report = solve(ctx, obs, OU)
        assert report.method == "bisection"
        assert report.converged
        assert report.theta_hat[0] == pytest.approx(closed_form_ou(obs), abs=1e-8)

    def test_bisection_miss_not_converged(self, obs):
        """Test: Verfehlt die Bisektion die Toleranz, bleibt das Ergebnis unkonvergiert."""
        ctx = make_context(bounds=[(-0.5, 3.0)])
        with patch("meanfield.estimator.fd_jacobian", return_value=np.zeros((1, 1))), patch(
            "meanfield.estimator._bisection", return_value=closed_form_ou(obs) + 0.05
        ):
            report = solve(ctx, obs, OU)
        assert report.method == "bisection"
        assert not report.converged
        assert report.g_norm_at_solution > 1e-6

    def test_box_sigma_first(self):
        """Test: Untergrenze für sigma auch vor kappa."""
        ctx = make_context(psi=PsiSpec.from_lists([[[1], [2]]], 1), free=("sigma", "kappa"))
        lower, upper = _box(ctx, OU)
        assert lower.tolist() == [SIGMA_FLOOR, -np.inf]
        assert upper.tolist() == [np.inf, np.inf]

    def test_box_sigma_after_vector_alpha(self):
        """Test: Zweikomponentiges alpha verschiebt den sigma-Index auf 2."""
        potV = ConfiningPotential.bistable()
        ctx = make_context(
            psi=PsiSpec.from_lists([[[1], [3], [2]]], 1), free=("alpha", "sigma"), potV=potV,
            bounds=[(0.1, 5.0), (0.1, 6.0), (-1.0, 2.0)],
        )
        lower, upper = _box(ctx, ThetaVector((1.0, 2.0), (0.5,), 1.0))
        assert lower.tolist() == [0.1, 0.1, SIGMA_FLOOR]
        assert upper.tolist() == [5.0, 6.0, 2.0]

        assert report.theta_hat[0] == pytest.approx(closed_form_ou(obs), abs=1e-8)

    @slow
    def test_closed_form_on_many_datasets(self):
        """Test: Auf 100 Datensätzen Abstand zur geschlossenen Formel unter 1e-8."""
        ctx = make_context(normalization="l2")
        for seed in range(100):
            data = ou_series(seed=100 + seed, T=100.0)
            report = solve(ctx, data, OU, tol=1e-10)
            assert report.theta_hat[0] == pytest.approx(closed_form_ou(data), abs=1e-8)


class TestDerivativeTerms:
    """Tests für h und l."""

    def test_h_term_ou(self):
        """Test: h(1, 1) = exp(-1.5) mit phi_1 = x."""
        ctx = make_context()
        assert h_term(ctx, OU, 1.0, 1.0)[0, 0] == pytest.approx(DECAY, abs=1e-5)

    def test_l_term_ou(self):
        """Test: l(1, 1) = 1 - exp(-3) mit phi_1 = x."""
        ctx = make_context()
        assert l_term(ctx, OU, 1, 1, 1.0, 1.0)[0, 0] == pytest.approx(1 - np.exp(-3.0), abs=1e-8)

    def test_zero_psi(self):
        """Test: psi = 0 ergibt Nullmatrizen."""
        ctx = make_context(psi=PsiSpec.zero(1, 1))
        assert np.all(h_term(ctx, OU, 1.0, 2.0) == 0.0)
        assert np.all(l_term(ctx, OU, 1, 1, 1.0, 2.0) == 0.0)

    def test_covariance_singular_for_zero_psi(self):
        """Test: psi = 0 macht H singulär."""
        ctx = make_context(psi=PsiSpec.zero(1, 1))
        with pytest.raises(SingularJacobianError):
            asymptotic_covariance(ctx, OU, 1000)

    def test_ou_covariance(self):
        """Test: Sandwich-Formel trifft exp(3) - 1 bis auf 5%."""
        ctx = make_context()
        gamma = asymptotic_covariance(ctx, OU, 200_000, h=0.005, seed=12)
        assert gamma.shape == (1, 1)
        assert gamma[0, 0] == pytest.approx(np.exp(3.0) - 1.0, rel=0.05)


class TestOverParticles:
    """Tests für die Mittelung über Teilchen."""

    def test_identical_particles(self, obs):
        """Test: Identische Reihen ergeben den Einzelschätzer."""
        ensemble = EnsemblePath(np.tile(obs.samples[:, None], (1, 3)), h=1.0, sigma=1.0, seed=0)
        ctx = make_context()
        report = estimate_over_particles(ctx, ensemble, 1.0, OU)
        single = estimate_particle(ctx, obs, OU)
        assert report.theta_hat[0] == pytest.approx(single.theta_hat[0], abs=1e-12)
        assert report.n_failed == 0
        assert len(report.per_particle) == 3

    def test_single_particle(self, obs):
        """Test: N = 1 ergibt den Einzelschätzer."""
        ensemble = EnsemblePath(obs.samples[:, None], h=1.0, sigma=1.0, seed=0)
        report = estimate_over_particles(make_context(), ensemble, 1.0, OU, method="closed_form")
        assert report.theta_hat[0] == pytest.approx(closed_form_ou(obs))

    def test_threads_preserve_order(self):
        """Test: Thread-Pool liefert dieselben Einzelwerte in derselben Reihenfolge."""
        cfg = SimConfig(N=4, T=100.0, h=0.01, sigma=1.0, seed=5)
        ensemble = simulate_ensemble(cfg, V, W, OU)
        ctx = make_context()
        serial = estimate_over_particles(ctx, ensemble, 1.0, OU, method="closed_form")
        parallel = estimate_over_particles(ctx, ensemble, 1.0, OU, method="closed_form", threads=3)
        assert serial.per_particle == parallel.per_particle

    def test_all_failures(self):
        """Test: Scheitern alle Teilchen, wird RuntimeError geworfen."""
        ensemble = EnsemblePath(np.zeros((5, 2)), h=1.0, sigma=1.0, seed=0)
        with pytest.raises(RuntimeError, match="alle 2 Teilchen"):
            estimate_over_particles(make_context(), ensemble, 1.0, OU, method="closed_form")

    def test_partial_failure_counted(self, obs):
        """Test: Einzelne Fehlschläge werden gezählt, nicht geworfen."""
        values = np.column_stack([obs.samples, np.zeros_like(obs.samples)])
        ensemble = EnsemblePath(values, h=1.0, sigma=1.0, seed=0)
        report = estimate_over_particles(make_context(), ensemble, 1.0, OU, method="closed_form")
        assert report.n_failed == 1
        assert report.particle_converged == [True, False]

    def test_closed_form_only_for_ou(self, obs):
        """Test: closed_form nur für kappa mit quadratischem W."""
        ctx = make_context(free=("alpha",))
        with pytest.raises(ValueError, match="closed_form"):
            estimate_particle(ctx, obs, OU, method="closed_form")

    def test_gamma_at_mean(self):
        """Test: Mit n_pairs trägt der Bericht Gamma_0 am Teilchenmittel."""
        cfg = SimConfig(N=3, T=100.0, h=0.01, sigma=1.0, seed=8)
        ensemble = simulate_ensemble(cfg, V, W, OU)
        ctx = make_context()
        report = estimate_over_particles(ctx, ensemble, 1.0, OU, method="closed_form", n_pairs=20_000)
        expected = asymptotic_covariance(
            ctx, OU.with_vector(ctx.free, report.theta_hat), 20_000, h=0.01, seed=8
        )
        np.testing.assert_allclose(report.gamma, expected)
        assert report.gamma[0][0] > 0

    def test_gamma_off_by_default(self, obs):
        """Test: Ohne n_pairs bleibt gamma leer."""
        ensemble = EnsemblePath(obs.samples[:, None], h=1.0, sigma=1.0, seed=0)
        report = estimate_over_particles(make_context(), ensemble, 1.0, OU, method="closed_form")
        assert report.gamma is None
