"""Pydantic Models und Typen für Simulation, Schätzer und Experimente."""

import math
from typing import List, Literal, Optional, Tuple

import numpy as np
from typing_extensions import TypedDict
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from meanfield import config
from meanfield.potentials import (
    FREE_GROUPS,
    ConfiningPotential,
    InteractionPotential,
    ThetaVector,
)

EXPERIMENTS = (
    "sensitivity_MN",
    "sensitivity_J",
    "rate_fit",
    "mle_compare",
    "joint_sigma",
    "clt",
    "bistable",
    "nonsymmetric",
    "chaos_check",
)


def is_multiple(value: float, step: float, rel: float = 1e-9) -> bool:
    """Prüft, ob value ein positives ganzzahliges Vielfaches von step ist."""
    ratio = value / step
    return round(ratio) >= 1 and abs(ratio - round(ratio)) <= rel * max(1.0, ratio)


class SimConfig(BaseModel):
    """Schema für eine Euler-Maruyama-Simulation."""

    model_config = ConfigDict(frozen=True)

    N: int = Field(..., ge=1, description="Anzahl der Teilchen")
    T: float = Field(..., gt=0, description="Endzeit")
    h: float = Field(default=config.TIME_STEP, gt=0, description="Zeitschritt")
    sigma: float = Field(..., ge=0, description="Diffusionskoeffizient (0 = deterministisch)")
    seed: int = Field(default=0, description="Startwert des Zufallsgenerators")
    initial_value: float = Field(default=0.0, description="Punktmasse der Startverteilung")
    burn_in: float = Field(default=0.0, ge=0, description="Verworfene Anfangsdauer")
    record_stride: int = Field(default=1, ge=1, description="Jeder wievielte Schritt gespeichert wird")

    @model_validator(mode="after")
    def _check_steps(self):
        if not is_multiple(self.T, self.h):
            raise ValueError(f"T/h = {self.T / self.h} ist keine positive ganze Zahl")
        if self.burn_in > 0 and not is_multiple(self.burn_in, self.h):
            raise ValueError("burn_in muss ein Vielfaches von h sein")
        if self.n_steps % self.record_stride:
            raise ValueError("record_stride muss die Schrittzahl teilen")
        return self

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.h))

    @property
    def burn_in_steps(self) -> int:
        return int(round(self.burn_in / self.h)) if self.burn_in > 0 else 0


class TermsConfig(BaseModel):
    """Polynomterme eines Potentials: Exponenten, Skalen, Parameter."""

    exponents: List[int]
    coefficients: List[float] = Field(default_factory=list)
    params: List[float]

    @model_validator(mode="after")
    def _check_lengths(self):
        if len(self.params) != len(self.exponents):
            raise ValueError("params passt nicht zu exponents")
        if self.coefficients and len(self.coefficients) != len(self.exponents):
            raise ValueError("coefficients passt nicht zu exponents")
        return self


class PotentialsConfig(BaseModel):
    """Einschluss- und Wechselwirkungspotential eines Experiments."""

    confining: TermsConfig = Field(
        default_factory=lambda: TermsConfig(exponents=[2], coefficients=[0.5], params=[1.0])
    )
    interaction: TermsConfig = Field(
        default_factory=lambda: TermsConfig(exponents=[2], coefficients=[0.5], params=[0.5])
    )

    def build(self) -> Tuple[ConfiningPotential, InteractionPotential]:
        potV = ConfiningPotential(
            tuple(self.confining.exponents), tuple(self.confining.coefficients)
        )
        potW = InteractionPotential(
            tuple(self.interaction.exponents), tuple(self.interaction.coefficients)
        )
        return potV, potW


class ExperimentConfig(BaseModel):
    """Schema einer Experiment-Konfiguration (YAML-Preset)."""

    experiment: Literal[EXPERIMENTS]  # type: ignore[valid-type]
    name: str = ""
    description: str = ""
    potentials: PotentialsConfig = Field(default_factory=PotentialsConfig)
    sigma: float = Field(default=1.0, gt=0)
    free: List[str] = Field(default_factory=lambda: ["kappa"])
    estimator: Literal["eigen", "closed_form"] = "eigen"
    J: int = Field(default=1, ge=1)
    K: int = Field(default=config.GALERKIN_DEGREE, ge=2)
    grid_nodes: int = Field(default=config.GRID_NODES, ge=101)
    psi: List[List[List[int]]] = Field(default_factory=lambda: [[[1]]])
    normalization: Literal["l2", "monic"] = "l2"
    moment_source: Literal["self_consistency", "data"] = "self_consistency"
    m0: float = 0.0
    delta: float = Field(default=1.0, gt=0)
    h: float = Field(default=config.TIME_STEP, gt=0)
    M: int = Field(default=1000, ge=1)
    N: int = Field(default=250, ge=1)
    M_grid: List[int] = Field(default_factory=list)
    N_grid: List[int] = Field(default_factory=list)
    delta_grid: List[float] = Field(default_factory=list)
    J_grid: List[int] = Field(default_factory=list)
    L: int = Field(default=5, ge=1)
    seed: int = 0
    burn_in: float = Field(default=0.0, ge=0)
    n_observed: Optional[int] = Field(default=None, ge=1)
    theta_init: Optional[List[float]] = None
    bounds: Optional[List[Tuple[float, float]]] = None
    tol: float = Field(default=config.NEWTON_TOL, gt=0)
    max_iter: int = Field(default=config.NEWTON_MAX_ITER, ge=1)
    n_pairs: int = Field(default=0, ge=0)
    chaos_T: float = Field(default=5.0, gt=0)
    output_dir: Optional[str] = None
    threads: int = Field(default=1, ge=1)

    @field_validator("free")
    @classmethod
    def _check_free(cls, value):
        unknown = [v for v in value if v not in FREE_GROUPS]
        if unknown or not value:
            raise ValueError(f"free enthält unbekannte Gruppen: {unknown}")
        return [g for g in FREE_GROUPS if g in value]

    @field_validator("M_grid", "N_grid", "J_grid", "delta_grid")
    @classmethod
    def _check_positive(cls, value):
        if any(v <= 0 for v in value):
            raise ValueError("Gitterwerte müssen positiv sein")
        return value

    @model_validator(mode="after")
    def _check_deltas(self):
        for d in [self.delta, *self.delta_grid]:
            if not is_multiple(d, self.h):
                raise ValueError(f"Delta = {d} ist kein Vielfaches von h = {self.h}")
        if len(self.psi) < max([self.J, *self.J_grid]):
            # ein psi gilt dann für alle j
            if len(self.psi) != 1:
                raise ValueError("psi braucht einen Eintrag pro j oder genau einen")
        return self

    def build_potentials(self) -> Tuple[ConfiningPotential, InteractionPotential]:
        return self.potentials.build()

    def theta0(self) -> ThetaVector:
        return ThetaVector(
            alpha=tuple(self.potentials.confining.params),
            kappa=tuple(self.potentials.interaction.params),
            sigma=self.sigma,
        )


class EstimateReport(BaseModel):
    """Ergebnis einer Schätzung (einzelnes Teilchen oder Teilchenmittel)."""

    theta_hat: List[float]
    free: List[str]
    g_norm_at_solution: float
    iterations: int
    converged: bool
    method: str = "newton"
    gamma: Optional[List[List[float]]] = None
    per_particle: Optional[List[List[float]]] = None
    particle_converged: Optional[List[bool]] = None
    n_failed: int = 0

    @field_validator("gamma")
    @classmethod
    def _symmetric(cls, value):
        if value is not None:
            arr = np.asarray(value, dtype=float)
            if not np.allclose(arr, arr.T, rtol=1e-10, atol=1e-12):
                raise ValueError("gamma muss symmetrisch sein")
        return value


class MleReport(BaseModel):
    """Diskretisierter Maximum-Likelihood-Schätzer (OU-Fall)."""

    kappa_hat: float
    delta: float

    @field_validator("kappa_hat")
    @classmethod
    def _finite(cls, value):
        if not math.isfinite(value):
            raise ValueError("kappa_hat ist nicht endlich")
        return value


class CompareRow(TypedDict, total=False):
    """Zeile der MLE-Vergleichstabelle."""

    delta: float
    eigen_mean: float
    eigen_std: float
    mle_mean: float
    mle_std: float
    n_failures: int
    order_violations: int


class CheckResult(TypedDict, total=False):
    """Ergebnis einer Akzeptanzprüfung."""

    name: str
    passed: bool
    value: float
    target: str
