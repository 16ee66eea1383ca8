"""Meanfield-Paket: Parameterschätzung für wechselwirkende Teilchensysteme
über Eigenfunktionen des linearisierten Mean-Field-Generators.

Dieses Modul bündelt die Funktionen:
- potentials: Einschluss- und Wechselwirkungspotentiale
- simulator: Euler-Maruyama und Unterabtastung
- invariant: Stationäre Dichte und Selbstkonsistenz
- spectral: Galerkin-Eigenproblem
- estimator: Martingal-Schätzfunktion und Nullstellensuche
- baselines: Diskretisierter MLE (OU-Fall)
- harness: Experimente
"""

import logging

# Logging-Konfiguration
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)

# Importiere alle Module
from meanfield import potentials
from meanfield import simulator
from meanfield import invariant
from meanfield import spectral
from meanfield import estimator
from meanfield import baselines
from meanfield import harness
from meanfield import presets
from meanfield import result_store

# Potentiale
ConfiningPotential = potentials.ConfiningPotential
InteractionPotential = potentials.InteractionPotential
ThetaVector = potentials.ThetaVector

# Simulation
simulate_ensemble = simulator.simulate_ensemble
simulate_stationary_linearized = simulator.simulate_stationary_linearized
subsample = simulator.subsample
coupled_chaos_error = simulator.coupled_chaos_error

# Dichte und Spektrum
build_density_given_moment = invariant.build_density_given_moment
solve_self_consistency = invariant.solve_self_consistency
build_basis = spectral.build_basis
solve_eigensystem = spectral.solve_eigensystem
build_eigensystem = spectral.build_eigensystem

# Schätzer
EstimatingContext = estimator.EstimatingContext
PsiSpec = estimator.PsiSpec
solve = estimator.solve
closed_form_ou = estimator.closed_form_ou
estimate_over_particles = estimator.estimate_over_particles
mle_ou = baselines.mle_ou

# Experimente
run_experiment = harness.run_experiment
load_preset = presets.resolve
save_result = result_store.save_result
