"""Potentiale: parameterlineare Polynomfamilien für V und W.

V(x; alpha) = sum_i alpha_i * c_i * x**e_i  (Einschlusspotential)
W(x; kappa) = sum_i kappa_i * c_i * x**e_i  (gerades Wechselwirkungspotential)

Die Faltung (W' * rho)(x) wird über den Binomialsatz aus den Momenten
mu_k = int y**k rho(y) dy berechnet und ist damit exakt.
"""

import logging
from dataclasses import dataclass, replace
from math import comb
from typing import Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial

logger = logging.getLogger(__name__)

FREE_GROUPS = ("alpha", "kappa", "sigma")


def _terms_polynomial(
    exponents: Sequence[int], coefficients: Sequence[float], params: Sequence[float]
) -> Polynomial:
    params = np.asarray(params, dtype=float)
    if params.shape != (len(exponents),):
        raise ValueError(
            f"Erwartet {len(exponents)} Parameter, erhalten {params.size}"
        )
    coef = np.zeros(max(exponents) + 1)
    for e, c, a in zip(exponents, coefficients, params):
        coef[e] += a * c
    return Polynomial(coef)


@dataclass(frozen=True)
class ConfiningPotential:
    """Einschlusspotential V(x; alpha) = sum_i alpha_i c_i x**e_i."""

    basis_exponents: Tuple[int, ...]
    basis_coefficients: Tuple[float, ...] = ()

    def __post_init__(self):
        exps = tuple(int(e) for e in self.basis_exponents)
        if not exps:
            raise ValueError("basis_exponents darf nicht leer sein")
        if any(e < 0 for e in exps):
            raise ValueError("basis_exponents müssen nichtnegativ sein")
        if len(set(exps)) != len(exps):
            raise ValueError("basis_exponents müssen paarweise verschieden sein")
        coefs = tuple(float(c) for c in self.basis_coefficients) or (1.0,) * len(exps)
        if len(coefs) != len(exps):
            raise ValueError("basis_coefficients passt nicht zu basis_exponents")
        object.__setattr__(self, "basis_exponents", exps)
        object.__setattr__(self, "basis_coefficients", coefs)

    @classmethod
    def quadratic(cls) -> "ConfiningPotential":
        """V = x²/2 (Ornstein-Uhlenbeck), mit alpha = (1,)."""
        return cls((2,), (0.5,))

    @classmethod
    def bistable(cls) -> "ConfiningPotential":
        """V = alpha . (x⁴/4, -x²/2)."""
        return cls((4, 2), (0.25, -0.5))

    @classmethod
    def nonsymmetric(cls) -> "ConfiningPotential":
        """V = alpha . (x⁴/4, x²/2, x)."""
        return cls((4, 2, 1), (0.25, 0.5, 1.0))

    @property
    def n_params(self) -> int:
        return len(self.basis_exponents)

    def polynomial(self, alpha: Sequence[float]) -> Polynomial:
        return _terms_polynomial(self.basis_exponents, self.basis_coefficients, alpha)

    def value(self, x, alpha):
        return self.polynomial(alpha)(np.asarray(x, dtype=float))

    def derivative(self, x, alpha):
        return self.polynomial(alpha).deriv()(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class InteractionPotential:
    """Gerades Wechselwirkungspotential W(x; kappa) = sum_i kappa_i c_i x**e_i."""

    basis_exponents: Tuple[int, ...] = (2,)
    basis_coefficients: Tuple[float, ...] = (0.5,)

    def __post_init__(self):
        exps = tuple(int(e) for e in self.basis_exponents)
        if not exps:
            raise ValueError("basis_exponents darf nicht leer sein")
        if any(e < 2 or e % 2 for e in exps):
            raise ValueError(f"W muss gerade sein, Exponenten {exps} unzulässig")
        if any(b <= a for a, b in zip(exps, exps[1:])):
            raise ValueError("basis_exponents müssen streng aufsteigend sein")
        coefs = tuple(float(c) for c in self.basis_coefficients) or (1.0,) * len(exps)
        if len(coefs) != len(exps):
            raise ValueError("basis_coefficients passt nicht zu basis_exponents")
        object.__setattr__(self, "basis_exponents", exps)
        object.__setattr__(self, "basis_coefficients", coefs)

    @classmethod
    def quadratic(cls) -> "InteractionPotential":
        """Curie-Weiss: W = kappa/2 x²."""
        return cls((2,), (0.5,))

    @property
    def kind(self) -> str:
        if self.basis_exponents == (2,):
            return "quadratic"
        return "even-polynomial"

    @property
    def n_params(self) -> int:
        return len(self.basis_exponents)

    @property
    def drift_degree(self) -> int:
        """Grad von W' und damit Anzahl der benötigten Momente."""
        return max(self.basis_exponents) - 1

    def polynomial(self, kappa: Sequence[float]) -> Polynomial:
        return _terms_polynomial(self.basis_exponents, self.basis_coefficients, kappa)

    def value(self, x, kappa):
        return self.polynomial(kappa)(np.asarray(x, dtype=float))

    def derivative(self, x, kappa):
        return self.polynomial(kappa).deriv()(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class ThetaVector:
    """Parametervektor theta = (alpha, kappa) plus Diffusionskoeffizient sigma.

    Welche Gruppen geschätzt werden, legt ein `free`-Tupel aus FREE_GROUPS fest.
    """

    alpha: Tuple[float, ...]
    kappa: Tuple[float, ...]
    sigma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in np.atleast_1d(self.alpha)))
        object.__setattr__(self, "kappa", tuple(float(k) for k in np.atleast_1d(self.kappa)))
        object.__setattr__(self, "sigma", float(self.sigma))
        if not self.sigma > 0:
            raise ValueError(f"sigma muss positiv sein, erhalten {self.sigma}")

    def group(self, name: str) -> Tuple[float, ...]:
        if name not in FREE_GROUPS:
            raise ValueError(f"Unbekannte Parametergruppe '{name}'")
        value = getattr(self, name)
        return value if isinstance(value, tuple) else (value,)

    def size(self, free: Sequence[str]) -> int:
        return sum(len(self.group(name)) for name in free)

    def to_vector(self, free: Sequence[str]) -> np.ndarray:
        return np.array([v for name in free for v in self.group(name)], dtype=float)

    def with_vector(self, free: Sequence[str], vector) -> "ThetaVector":
        vector = np.asarray(vector, dtype=float).ravel()
        if vector.size != self.size(free):
            raise ValueError(
                f"Vektorlänge {vector.size} passt nicht zu {tuple(free)}"
            )
        updates = {}
        offset = 0
        for name in free:
            n = len(self.group(name))
            chunk = tuple(vector[offset : offset + n])
            updates[name] = chunk[0] if name == "sigma" else chunk
            offset += n
        return replace(self, **updates)


def _convolve_with_moments(poly: Polynomial, moments, drop_constant: bool) -> Polynomial:
    """int poly(x - y) rho(y) dy als Polynom in x (Binomialentwicklung)."""
    degree = poly.degree()
    needed = degree if drop_constant else degree + 1
    moments = np.asarray(moments, dtype=float)
    if moments.size < needed:
        raise ValueError(
            f"Zu wenige Momente: benötigt {needed} (mu_0..mu_{needed - 1}), "
            f"erhalten {moments.size}"
        )
    coef = np.zeros(degree + 1)
    for e, a in enumerate(poly.coef):
        if a == 0.0:
            continue
        top = e if drop_constant and e > 0 else e + 1
        for k in range(top):
            coef[e - k] += a * comb(e, k) * (-1) ** k * moments[k]
    return Polynomial(coef)


def interaction_drift_polynomial(potW: InteractionPotential, kappa, moments) -> Polynomial:
    """(W' * rho) als Polynom in x."""
    return _convolve_with_moments(potW.polynomial(kappa).deriv(), moments, False)


def interaction_energy_polynomial(potW: InteractionPotential, kappa, moments) -> Polynomial:
    """(W * rho) bis auf eine additive Konstante als Polynom in x."""
    return _convolve_with_moments(potW.polynomial(kappa), moments, True)


def eval_confining_drift(pot: ConfiningPotential, x, alpha):
    """V'(x; alpha), gliedweise abgeleitet."""
    return pot.derivative(x, alpha)


def convolved_interaction_drift(W: InteractionPotential, moments, x, kappa=None):
    """(W'(.; kappa) * rho)(x) aus den Rohmomenten von rho.

    Args:
        W: Wechselwirkungspotential
        moments: Momente mu_0 = 1, mu_1, ..., mindestens bis Grad(W')
        x: Auswertungsstelle(n)
        kappa: Parameter von W (Standard: alle 1)

    Returns:
        Wert(e) der Faltung an x

    Raises:
        ValueError: Wenn zu wenige Momente übergeben werden
    """
    if kappa is None:
        kappa = np.ones(W.n_params)
    return interaction_drift_polynomial(W, kappa, moments)(np.asarray(x, dtype=float))


def total_drift(potV: ConfiningPotential, potW: InteractionPotential, moments, x, theta: ThetaVector):
    """-V'(x; alpha) - (W' * rho)(x) mit rho durch seine Momente gegeben."""
    drift = potV.polynomial(theta.alpha).deriv() + interaction_drift_polynomial(
        potW, theta.kappa, moments
    )
    return -drift(np.asarray(x, dtype=float))


def mean_field_drift_polynomial(
    potV: ConfiningPotential, potW: InteractionPotential, theta: ThetaVector, moments
) -> Polynomial:
    """V' + (W' * rho) als Polynom; die Drift ist das Negative davon."""
    return potV.polynomial(theta.alpha).deriv() + interaction_drift_polynomial(
        potW, theta.kappa, moments
    )


def warn_if_unidentifiable(potV: ConfiningPotential, potW: InteractionPotential, free) -> bool:
    """Warnt, wenn alpha und kappa nur als Summe identifizierbar sind."""
    free = tuple(free)
    if (
        "alpha" in free
        and "kappa" in free
        and potV.basis_exponents == (2,)
        and potW.kind == "quadratic"
    ):
        logger.warning(
            "V = alpha/2 x² mit quadratischem W: nur die Summe alpha + kappa ist identifizierbar"
        )
        return True
    return False
