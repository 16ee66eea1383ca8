"""Galerkin-Lösung des gewichteten Sturm-Liouville-Problems

    -sigma (rho phi')' / rho + (V' + W' * rho) phi' = lambda phi

in einer rho-orthonormalen Polynombasis. Die Massenmatrix ist dann die
Einheitsmatrix, es bleibt das symmetrische Eigenproblem der
Steifigkeitsmatrix S_ij = sigma <p_i', p_j'>_rho.
"""

import logging
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from meanfield import config
from meanfield.errors import AssemblyError, BasisError
from meanfield.invariant import (
    StationaryDensity,
    build_density_given_moment,
    solve_self_consistency,
)
from meanfield.potentials import ConfiningPotential, InteractionPotential, ThetaVector

logger = logging.getLogger(__name__)

GRAM_LIMIT = 1e-6
TAIL_QUANTILE = 1.0 - 1e-4
NORMALIZATIONS = ("l2", "monic")


def trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    weights = np.empty_like(grid)
    dx = np.diff(grid)
    weights[0] = 0.5 * dx[0]
    weights[-1] = 0.5 * dx[-1]
    weights[1:-1] = 0.5 * (dx[:-1] + dx[1:])
    return weights


@dataclass(frozen=True)
class GalerkinBasis:
    """Orthonormalpolynome p_0..p_K bzgl. <f, g> = int f g rho.

    p_k entsteht aus x p_(k-1) durch zweifache Orthogonalisierung gegen alle
    p_j (j < k): p_k = (x p_(k-1) - sum_j r_kj p_j) / n_k. Dieselbe Rekursion
    wertet die Basis an beliebigen Stellen aus.
    """

    degree: int
    grid: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray
    coefficients: np.ndarray
    recurrence: np.ndarray
    norms: np.ndarray
    gram_error: float

    def evaluate(self, x) -> np.ndarray:
        """Matrix (len(x), K + 1) der Basiswerte."""
        return self._evaluate(x)[0]

    def evaluate_derivative(self, x) -> np.ndarray:
        return self._evaluate(x)[1]

    def _evaluate(self, x) -> Tuple[np.ndarray, np.ndarray]:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        P = np.empty((x.size, self.degree + 1))
        D = np.empty_like(P)
        P[:, 0] = 1.0 / self.norms[0]
        D[:, 0] = 0.0
        for k in range(1, self.degree + 1):
            r = self.recurrence[k, :k]
            P[:, k] = (x * P[:, k - 1] - P[:, :k] @ r) / self.norms[k]
            D[:, k] = (P[:, k - 1] + x * D[:, k - 1] - D[:, :k] @ r) / self.norms[k]
        return P, D

    def gram(self) -> np.ndarray:
        return self.values.T @ (self.weights[:, None] * self.values)


def build_basis(rho: StationaryDensity, K: int) -> GalerkinBasis:
    """Orthonormalbasis p_0..p_K im rho-gewichteten L².

    Args:
        rho: Stationäre Dichte (liefert Gitter und Gewicht)
        K: Polynomgrad der Basis

    Returns:
        GalerkinBasis

    Raises:
        BasisError: Wenn die Gram-Matrix um mehr als 1e-6 von I abweicht
    """
    if K < 2:
        raise ValueError(f"K muss mindestens 2 sein, erhalten {K}")
    x = rho.grid
    w = trapezoid_weights(x) * rho.values
    n = x.size

    P = np.zeros((n, K + 1))
    D = np.zeros((n, K + 1))
    C = np.zeros((K + 1, K + 1))
    R = np.zeros((K + 1, K + 1))
    norms = np.zeros(K + 1)

    norms[0] = np.sqrt(np.sum(w))
    P[:, 0] = 1.0 / norms[0]
    C[0, 0] = 1.0 / norms[0]

    for k in range(1, K + 1):
        v = x * P[:, k - 1]
        r = np.zeros(k)
        for _ in range(2):
            coef = P[:, :k].T @ (w * v)
            v = v - P[:, :k] @ coef
            r += coef
        norm = np.sqrt(np.sum(w * v * v))
        if not norm > 0:
            raise BasisError(
                f"Basis bricht bei Grad {k} zusammen; kleineres K oder feineres Gitter wählen"
            )
        norms[k] = norm
        R[k, :k] = r
        P[:, k] = v / norm
        D[:, k] = (P[:, k - 1] + x * D[:, k - 1] - D[:, :k] @ r) / norm
        shifted = np.concatenate(([0.0], C[:-1, k - 1]))
        C[:, k] = (shifted - C[:, :k] @ r) / norm

    gram = P.T @ (w[:, None] * P)
    error = float(np.max(np.abs(gram - np.eye(K + 1))))
    if error > GRAM_LIMIT:
        raise BasisError(
            f"Orthogonalität verloren (Abweichung {error:.2e} > {GRAM_LIMIT}); "
            "kleineres K oder feineres Gitter wählen"
        )
    return GalerkinBasis(K, x, w, P, D, C, R, norms, error)


def _off_norm(A: np.ndarray) -> float:
    """Frobenius-Norm ohne Diagonale, direkt summiert."""
    return float(np.sqrt(np.sum((A - np.diag(np.diag(A))) ** 2)))


def jacobi_eigh(matrix: np.ndarray, tol: float = config.JACOBI_TOL, max_sweeps: int = 100):
    """Zyklisches Jacobi-Verfahren für symmetrische Matrizen.

    Abbruch, wenn die Nebendiagonal-Norm unter tol * ||A|| fällt. Elemente
    unterhalb von 1e-3 dieser Schranke (pro Eintrag) werden ohne Rotation
    auf null gesetzt.

    Returns:
        Tupel (Eigenwerte, Eigenvektoren als Spalten), unsortiert

    Raises:
        AssemblyError: Wenn nach max_sweeps keine Konvergenz erreicht ist
    """
    A = np.array(matrix, dtype=float)
    size = A.shape[0]
    V = np.eye(size)
    threshold = tol * max(1.0, float(np.linalg.norm(A)))
    negligible = 1e-3 * threshold / max(1, size)

    for _ in range(max_sweeps):
        if _off_norm(A) < threshold:
            return np.diag(A).copy(), V
        for p in range(size - 1):
            for q in range(p + 1, size):
                apq = A[p, q]
                if abs(apq) <= negligible:
                    A[p, q] = A[q, p] = 0.0
                    continue
                diff = A[q, q] - A[p, p]
                if abs(diff) > 1e10 * abs(apq):
                    # theta² würde überlaufen; t ~ 1 / (2 theta)
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                row_p, row_q = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                col_p, col_q = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                A[p, q] = A[q, p] = 0.0
                vec_p, vec_q = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vec_p - s * vec_q
                V[:, q] = s * vec_p + c * vec_q

    if _off_norm(A) < threshold:
        return np.diag(A).copy(), V
    raise AssemblyError(f"Jacobi-Verfahren nach {max_sweeps} Sweeps nicht konvergiert")


@dataclass(frozen=True)
class EigenSystem:
    """Die ersten J nichttrivialen Eigenpaare (lambda_j, phi_j).

    `coefficients[:, j - 1]` sind die Koeffizienten von phi_j in der Basis.
    """

    lambdas: np.ndarray
    coefficients: np.ndarray
    basis: GalerkinBasis
    rho_ref: StationaryDensity
    normalization: str = "l2"

    @property
    def J(self) -> int:
        return self.lambdas.size

    @property
    def sigma(self) -> float:
        return self.rho_ref.sigma

    def _check_index(self, j: int) -> None:
        if not 1 <= j <= self.J:
            raise ValueError(f"Eigenfunktion {j} außerhalb von 1..{self.J}")

    def eval(self, j: int, x):
        self._check_index(j)
        values = self.basis.evaluate(x) @ self.coefficients[:, j - 1]
        return values if np.ndim(x) else float(values[0])

    def eval_all(self, x) -> np.ndarray:
        """Matrix (len(x), J) mit phi_1..phi_J."""
        return self.basis.evaluate(x) @ self.coefficients

    def eval_derivative(self, j: int, x):
        self._check_index(j)
        values = self.basis.evaluate_derivative(x) @ self.coefficients[:, j - 1]
        return values if np.ndim(x) else float(values[0])

    def nodal(self, j: int) -> np.ndarray:
        self._check_index(j)
        return self.basis.values @ self.coefficients[:, j - 1]

    def monomial_coefficients(self, j: int) -> np.ndarray:
        """phi_j in der Monombasis, aufsteigend nach Grad."""
        self._check_index(j)
        return self.basis.coefficients @ self.coefficients[:, j - 1]

    def rayleigh_quotient(self, j: int) -> float:
        derivative = self.basis.derivatives @ self.coefficients[:, j - 1]
        return float(self.sigma * np.sum(self.basis.weights * derivative**2))

    def gram(self) -> np.ndarray:
        nodal = self.basis.values @ self.coefficients
        return nodal.T @ (self.basis.weights[:, None] * nodal)

    def rescaled(self, factors: Sequence[float]) -> "EigenSystem":
        """Eigenfunktionen mit positiven Faktoren skaliert."""
        factors = np.asarray(factors, dtype=float)
        if factors.shape != (self.J,) or np.any(factors <= 0):
            raise ValueError("Es wird ein positiver Faktor pro Eigenfunktion erwartet")
        return replace(self, coefficients=self.coefficients * factors, normalization="custom")


def assemble_stiffness(basis: GalerkinBasis, sigma: float) -> np.ndarray:
    D = basis.derivatives
    S = sigma * D.T @ (basis.weights[:, None] * D)
    return 0.5 * (S + S.T)


def solve_eigensystem(
    basis: GalerkinBasis,
    rho: StationaryDensity,
    sigma: float,
    J: int,
    normalization: str = "l2",
) -> EigenSystem:
    """Eigenpaare 1..J der linearisierten Generators.

    Args:
        basis: rho-orthonormale Basis
        rho: Referenzdichte
        sigma: Diffusionskoeffizient
        J: Anzahl der gewünschten Eigenpaare (ohne lambda_0 = 0)
        normalization: "l2" (||phi_j||_rho = 1) oder "monic" (x^j-Koeffizient 1)

    Returns:
        EigenSystem mit aufsteigenden lambda_1 < ... < lambda_J

    Raises:
        ValueError: Wenn J > K - 1
        AssemblyError: Bei negativen Eigenwerten unter -1e-10
    """
    if J < 1 or J > basis.degree - 1:
        raise ValueError(f"J = {J} unzulässig, erlaubt ist 1..{basis.degree - 1} (K = {basis.degree})")
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"Unbekannte Normierung '{normalization}'")

    S = assemble_stiffness(basis, sigma)
    eigenvalues, eigenvectors = jacobi_eigh(S)
    order = np.argsort(eigenvalues)
    eigenvalues = eigenvalues[order]
    eigenvectors = eigenvectors[:, order]

    if eigenvalues[0] < -1e-10 * max(1.0, abs(eigenvalues[-1])):
        raise AssemblyError(
            f"Negativer Eigenwert {eigenvalues[0]:.3e}: Steifigkeitsmatrix nicht semidefinit"
        )
    lambdas = eigenvalues[1 : J + 1].copy()
    coefficients = eigenvectors[:, 1 : J + 1].copy()

    tail = rho.quantile(TAIL_QUANTILE)
    tail_values = basis.evaluate([tail])[0] @ coefficients
    for j in range(J):
        if normalization == "monic":
            leading = (basis.coefficients @ coefficients[:, j])[j + 1]
            if abs(leading) < 1e-12:
                raise BasisError(f"phi_{j + 1} hat keinen x^{j + 1}-Anteil, monic nicht möglich")
            coefficients[:, j] /= leading
        elif tail_values[j] < 0:
            coefficients[:, j] *= -1.0

    logger.debug(f"Eigenwerte: {np.array2string(lambdas, precision=6)}")
    return EigenSystem(lambdas, coefficients, basis, rho, normalization)


def eval_eigenfunction(sys: EigenSystem, j: int, x):
    """phi_j(x); außerhalb des Gitters als Polynom fortgesetzt."""
    return sys.eval(j, x)


def build_density(
    potV: ConfiningPotential,
    potW: InteractionPotential,
    theta: ThetaVector,
    moments=None,
    m0: float = 0.0,
    nodes: int = config.GRID_NODES,
    bounds: Optional[Tuple[float, float]] = None,
) -> StationaryDensity:
    """Dichte bei eingefrorenen Momenten oder per Selbstkonsistenz."""
    if moments is not None:
        return build_density_given_moment(potV, potW, theta, theta.sigma, moments, nodes, bounds)
    _, rho = solve_self_consistency(potV, potW, theta, theta.sigma, m0, nodes=nodes, bounds=bounds)
    return rho


def build_eigensystem(
    potV: ConfiningPotential,
    potW: InteractionPotential,
    theta: ThetaVector,
    J: int,
    K: int = config.GALERKIN_DEGREE,
    moments=None,
    m0: float = 0.0,
    nodes: int = config.GRID_NODES,
    normalization: str = "l2",
    bounds: Optional[Tuple[float, float]] = None,
) -> EigenSystem:
    """Dichte, Basis und Eigenpaare bei theta in einem Schritt."""
    rho = build_density(potV, potW, theta, moments, m0, nodes, bounds)
    basis = build_basis(rho, K)
    return solve_eigensystem(basis, rho, theta.sigma, J, normalization)


def eigensystem_with_perturbed_theta(
    potV: ConfiningPotential,
    potW: InteractionPotential,
    theta: ThetaVector,
    direction,
    step: float,
    free: Sequence[str],
    builder: Optional[Callable[[ThetaVector], EigenSystem]] = None,
    **kwargs,
) -> Tuple[EigenSystem, EigenSystem]:
    """Eigensysteme bei theta + step * direction und theta - step * direction.

    Args:
        direction: Richtung in den Koordinaten der freien Gruppen
        step: Schrittweite > 0
        free: Freie Parametergruppen
        builder: Ersetzt build_eigensystem (z.B. mit Cache); kwargs gehen sonst dorthin

    Returns:
        Tupel (plus, minus)
    """
    if not step > 0:
        raise ValueError(f"Schrittweite muss positiv sein, erhalten {step}")
    direction = np.asarray(direction, dtype=float)
    base = theta.to_vector(free)
    if builder is None:
        def builder(t):
            return build_eigensystem(potV, potW, t, **kwargs)
    plus = builder(theta.with_vector(free, base + step * direction))
    minus = builder(theta.with_vector(free, base - step * direction))
    return plus, minus
