"""Martingal-Schätzfunktion G aus Eigenpaaren, Nullstellensuche und
asymptotische Kovarianz.

    g_j(x, y; theta) = psi_j(x) (phi_j(y) - exp(-lambda_j delta) phi_j(x))
    G(theta) = 1/M sum_m sum_j g_j(X_m, X_(m+1); theta)
"""

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import bisect

from meanfield import config
from meanfield.errors import (
    AssemblyError,
    BasisError,
    ConvergenceError,
    DensityError,
    SingularJacobianError,
)
from meanfield.invariant import estimate_moments_from_data
from meanfield.models import EstimateReport, ExperimentConfig, SimConfig
from meanfield.potentials import (
    ConfiningPotential,
    InteractionPotential,
    ThetaVector,
    warn_if_unidentifiable,
)
from meanfield.simulator import (
    EnsemblePath,
    ObservationSeries,
    simulate_stationary_linearized,
    subsample,
)
from meanfield.spectral import EigenSystem, build_eigensystem

logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12
MAX_HALVINGS = 20
FD_RELATIVE_STEP = 1e-4
SIGMA_FLOOR = 1e-6

# Fehler, bei denen ein Kandidat-theta verworfen wird
REBUILD_ERRORS = (DensityError, ConvergenceError, BasisError, AssemblyError, FloatingPointError)


@dataclass(frozen=True)
class PsiSpec:
    """psi_j(x) als p Polynomkomponenten pro j.

    Jede Komponente ist eine Liste von Monom-Exponenten (Summe der x**e);
    eine leere Liste steht für die Nullfunktion.
    """

    components: Tuple[Tuple[Tuple[int, ...], ...], ...]

    def __post_init__(self):
        comps = tuple(tuple(tuple(int(e) for e in c) for c in psi_j) for psi_j in self.components)
        if not comps:
            raise ValueError("psi braucht mindestens einen Eintrag")
        sizes = {len(psi_j) for psi_j in comps}
        if len(sizes) != 1 or 0 in sizes:
            raise ValueError("Jedes psi_j muss gleich viele (p > 0) Komponenten haben")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_lists(cls, psi: Sequence[Sequence[Sequence[int]]], J: int) -> "PsiSpec":
        """Aus der Konfiguration; ein einzelner Eintrag gilt für alle j."""
        psi = list(psi)
        if len(psi) == 1 and J > 1:
            psi = psi * J
        if len(psi) < J:
            raise ValueError(f"psi hat {len(psi)} Einträge, benötigt {J}")
        return cls(tuple(tuple(tuple(c) for c in psi_j) for psi_j in psi[:J]))

    @classmethod
    def zero(cls, p: int, J: int) -> "PsiSpec":
        return cls(tuple(tuple(() for _ in range(p)) for _ in range(J)))

    @property
    def p(self) -> int:
        return len(self.components[0])

    @property
    def J(self) -> int:
        return len(self.components)

    def evaluate(self, j: int, x) -> np.ndarray:
        """Matrix (len(x), p) mit den Komponenten von psi_j."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros((x.size, self.p))
        for i, exponents in enumerate(self.components[j - 1]):
            for e in exponents:
                out[:, i] += x**e
        return out


@dataclass
class EstimatingContext:
    """Zutaten von G: psi, J, delta und der Neuaufbau theta -> EigenSystem.

    Bei moment_source == "data" werden die Momente einmal aus den
    Beobachtungen geschätzt und während der Nullstellensuche festgehalten.
    """

    psi: PsiSpec
    J: int
    delta: float
    potV: ConfiningPotential
    potW: InteractionPotential
    free: Tuple[str, ...] = ("kappa",)
    K: int = config.GALERKIN_DEGREE
    nodes: int = config.GRID_NODES
    normalization: str = "l2"
    moment_source: str = "self_consistency"
    moments: Optional[np.ndarray] = None
    m0: float = 0.0
    bounds: Optional[List[Tuple[float, float]]] = None
    tol: float = config.NEWTON_TOL
    max_iter: int = config.NEWTON_MAX_ITER
    _cache: Dict[tuple, EigenSystem] = field(default_factory=dict, init=False, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.free = tuple(self.free)
        if self.psi.J < self.J:
            raise ValueError(f"psi hat {self.psi.J} Einträge, J = {self.J}")
        if self.moment_source not in ("self_consistency", "data"):
            raise ValueError(f"Unbekannte Momentquelle '{self.moment_source}'")
        if self.delta < 0:
            raise ValueError(f"delta muss nichtnegativ sein, erhalten {self.delta}")
        warn_if_unidentifiable(self.potV, self.potW, self.free)

    @property
    def p(self) -> int:
        return self.psi.p

    def for_observations(self, obs: ObservationSeries) -> "EstimatingContext":
        """Kontext mit aus den Daten eingefrorenen Momenten (falls gewünscht)."""
        if self.moment_source != "data":
            return self
        moments = estimate_moments_from_data(obs, self.potW.drift_degree)
        return replace(self, moments=moments)

    def rebuild(self, theta: ThetaVector) -> EigenSystem:
        """Eigensystem bei theta, deterministisch und zwischengespeichert."""
        key = (theta.alpha, theta.kappa, theta.sigma)
        with self._lock:
            cached = self._cache.get(key)
        if cached is not None:
            return cached
        system = build_eigensystem(
            self.potV,
            self.potW,
            theta,
            J=self.J,
            K=self.K,
            moments=self.moments,
            m0=self.m0,
            nodes=self.nodes,
            normalization=self.normalization,
        )
        with self._lock:
            self._cache[key] = system
        return system


def context_from_config(
    cfg: ExperimentConfig, J: Optional[int] = None, delta: Optional[float] = None
) -> EstimatingContext:
    """Schätzkontext aus einer Experiment-Konfiguration."""
    J = J or cfg.J
    potV, potW = cfg.build_potentials()
    return EstimatingContext(
        psi=PsiSpec.from_lists(cfg.psi, J),
        J=J,
        delta=delta or cfg.delta,
        potV=potV,
        potW=potW,
        free=tuple(cfg.free),
        K=cfg.K,
        nodes=cfg.grid_nodes,
        normalization=cfg.normalization,
        moment_source=cfg.moment_source,
        m0=cfg.m0,
        bounds=[tuple(b) for b in cfg.bounds] if cfg.bounds else None,
        tol=cfg.tol,
        max_iter=cfg.max_iter,
    )


def _g_rows(ctx: EstimatingContext, sys: EigenSystem, x, y) -> np.ndarray:
    """Summe über j von g_j für alle Paare, Matrix (n, p)."""
    phi_x = sys.eval_all(x)
    phi_y = sys.eval_all(y)
    out = np.zeros((phi_x.shape[0], ctx.p))
    for j in range(1, ctx.J + 1):
        decay = np.exp(-sys.lambdas[j - 1] * ctx.delta)
        out += ctx.psi.evaluate(j, x) * (phi_y[:, j - 1] - decay * phi_x[:, j - 1])[:, None]
    return out


def g_term(ctx: EstimatingContext, sys: EigenSystem, x: float, y: float, theta: ThetaVector = None) -> np.ndarray:
    """sum_j psi_j(x) (phi_j(y) - exp(-lambda_j delta) phi_j(x)) als p-Vektor.

    `sys` muss bei theta aufgebaut sein; theta selbst wird nicht mehr gebraucht,
    da psi nicht von theta abhängt.
    """
    return _g_rows(ctx, sys, [x], [y])[0]


def _check_delta(ctx: EstimatingContext, obs: ObservationSeries) -> None:
    if not np.isclose(ctx.delta, obs.delta, rtol=1e-12, atol=0.0):
        raise ValueError(f"delta der Beobachtungen ({obs.delta}) passt nicht zu {ctx.delta}")


def G_from_system(ctx: EstimatingContext, sys: EigenSystem, obs: ObservationSeries) -> np.ndarray:
    samples = obs.samples
    return _g_rows(ctx, sys, samples[:-1], samples[1:]).mean(axis=0)


def G_eval(ctx: EstimatingContext, obs: ObservationSeries, theta: ThetaVector) -> np.ndarray:
    """Schätzfunktion G(theta) = 1/M sum_m sum_j g_j(X_m, X_(m+1)).

    Raises:
        DensityError, ConvergenceError, BasisError, AssemblyError: aus dem Neuaufbau
    """
    _check_delta(ctx, obs)
    return G_from_system(ctx, ctx.rebuild(theta), obs)


def fd_steps(vector: np.ndarray) -> np.ndarray:
    return FD_RELATIVE_STEP * (1.0 + np.abs(vector))


def fd_jacobian(ctx: EstimatingContext, obs: ObservationSeries, theta: ThetaVector) -> np.ndarray:
    """Zentrale Differenzen von G, Eigensystem pro Störung neu gelöst."""
    base = theta.to_vector(ctx.free)
    steps = fd_steps(base)
    jac = np.empty((ctx.p, base.size))
    for i, step in enumerate(steps):
        direction = np.zeros(base.size)
        direction[i] = 1.0
        plus = theta.with_vector(ctx.free, base + step * direction)
        minus = theta.with_vector(ctx.free, base - step * direction)
        jac[:, i] = (G_eval(ctx, obs, plus) - G_eval(ctx, obs, minus)) / (2.0 * step)
    return jac


def _box(ctx: EstimatingContext, theta: ThetaVector) -> Tuple[np.ndarray, np.ndarray]:
    """Untere und obere Schranken pro Koordinate; sigma nie unter SIGMA_FLOOR."""
    size = theta.size(ctx.free)
    lower = np.full(size, -np.inf)
    upper = np.full(size, np.inf)
    if ctx.bounds is not None:
        if len(ctx.bounds) != size:
            raise ValueError(f"bounds braucht {size} Intervalle, erhalten {len(ctx.bounds)}")
        for i, (lo, hi) in enumerate(ctx.bounds):
            lower[i], upper[i] = lo, hi
    if "sigma" in ctx.free:
        i = theta.size(ctx.free[: ctx.free.index("sigma")])
        lower[i] = max(lower[i], SIGMA_FLOOR)
    return lower, upper


def _bisection(ctx, obs, theta, lower, upper, scan_points: int = 41) -> Optional[float]:
    """Vorzeichensuche über die Box, danach Bisektion (nur p = 1)."""
    if not (np.isfinite(lower[0]) and np.isfinite(upper[0])):
        return None

    def f(v):
        return float(G_eval(ctx, obs, theta.with_vector(ctx.free, [v]))[0])

    grid = np.linspace(lower[0], upper[0], scan_points)
    values = []
    for v in grid:
        try:
            values.append(f(v))
        except REBUILD_ERRORS:
            values.append(np.nan)
    values = np.array(values)
    start = theta.to_vector(ctx.free)[0]
    brackets = [
        (grid[i], grid[i + 1])
        for i in range(scan_points - 1)
        if np.isfinite(values[i]) and np.isfinite(values[i + 1]) and values[i] * values[i + 1] <= 0
    ]
    if not brackets:
        return None
    a, b = min(brackets, key=lambda ab: abs(0.5 * (ab[0] + ab[1]) - start))
    return float(bisect(f, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200))


def solve(
    ctx: EstimatingContext,
    obs: ObservationSeries,
    theta_init: ThetaVector,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> EstimateReport:
    """Gedämpftes Newton-Verfahren für G(theta) = 0.

    Args:
        ctx: Schätzkontext
        obs: Beobachtungsreihe eines Teilchens
        theta_init: Startwert (nicht freie Gruppen bleiben fest)
        tol: relative Toleranz, Abbruch bei ||G|| < tol (1 + ||G(theta_init)||)
        max_iter: maximale Anzahl Newton-Schritte

    Returns:
        EstimateReport; converged=False mit bestem Iterat bei Nichtkonvergenz

    Raises:
        SingularJacobianError: Wenn die Jacobi-Matrix numerisch singulär ist
    """
    tol = ctx.tol if tol is None else tol
    max_iter = ctx.max_iter if max_iter is None else max_iter
    if ctx.moments is None and ctx.moment_source == "data":
        ctx = ctx.for_observations(obs)
    _check_delta(ctx, obs)

    vec = theta_init.to_vector(ctx.free)
    lower, upper = _box(ctx, theta_init)
    if np.any(vec < lower) or np.any(vec > upper):
        raise ValueError(f"Startwert {vec} liegt außerhalb der zulässigen Box")

    g = G_eval(ctx, obs, theta_init)
    target = tol * (1.0 + np.linalg.norm(g))
    norm = np.linalg.norm(g)
    method = "newton"
    iterations = 0

    while norm >= target and iterations < max_iter:
        theta = theta_init.with_vector(ctx.free, vec)
        jac = fd_jacobian(ctx, obs, theta)
        condition = np.linalg.cond(jac)
        if not np.isfinite(condition) or condition > CONDITION_LIMIT:
            if ctx.p == 1 and vec.size == 1:
                method = "bisection"
                break
            raise SingularJacobianError(condition)
        step = -np.linalg.solve(jac, g)
        iterations += 1

        accepted = False
        scale = 1.0
        for _ in range(MAX_HALVINGS + 1):
            candidate = np.clip(vec + scale * step, lower, upper)
            try:
                g_new = G_eval(ctx, obs, theta_init.with_vector(ctx.free, candidate))
            except REBUILD_ERRORS:
                scale *= 0.5
                continue
            if np.linalg.norm(g_new) < norm:
                vec, g, norm = candidate, g_new, np.linalg.norm(g_new)
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            logger.debug(f"Newton stagniert nach {iterations} Schritten, ||G|| = {norm:.3e}")
            if vec.size == 1:
                method = "bisection"
            break

    if method == "bisection" and norm >= target:
        root = _bisection(ctx, obs, theta_init.with_vector(ctx.free, vec), lower, upper)
        if root is not None:
            vec = np.array([root])
            g = G_eval(ctx, obs, theta_init.with_vector(ctx.free, vec))
            norm = np.linalg.norm(g)
        elif iterations == 0:
            raise SingularJacobianError(np.inf)

    converged = bool(norm < target)
    if not converged:
        logger.warning(
            f"Teilchen {obs.particle_index}: keine Konvergenz, ||G|| = {norm:.3e} nach {iterations} Schritten"
        )
    return EstimateReport(
        theta_hat=vec.tolist(),
        free=list(ctx.free),
        g_norm_at_solution=float(norm),
        iterations=iterations,
        converged=converged,
        method=method,
    )


def closed_form_ou(obs: ObservationSeries, delta: Optional[float] = None) -> float:
    """kappa = -1 - log(sum X_m X_(m+1) / sum X_m²) / delta.

    Raises:
        ValueError: Wenn sum X_m² = 0 oder das Verhältnis nicht positiv ist
    """
    delta = obs.delta if delta is None else delta
    x, y = obs.samples[:-1], obs.samples[1:]
    denominator = float(np.sum(x * x))
    if denominator <= 0:
        raise ValueError("Alle Beobachtungen sind null, Schätzer nicht definiert")
    ratio = float(np.sum(x * y)) / denominator
    if ratio <= 0:
        raise ValueError(
            f"Verhältnis {ratio:.4g} nicht positiv: Schätzer für diesen Datensatz nicht definiert"
        )
    return -1.0 - np.log(ratio) / delta


def estimate_sigma_quadratic_variation(obs: ObservationSeries) -> float:
    """sigma aus der quadratischen Variation: sum (X_(m+1) - X_m)² / (2 M delta)."""
    increments = np.diff(obs.samples)
    return float(np.sum(increments**2) / (2.0 * obs.M * obs.delta))


def ou_stationary_covariance(kappa: float, delta: float, sigma: float = 1.0) -> float:
    """Cov(X_0, X_delta) = sigma exp(-(1 + kappa) delta) / (1 + kappa)."""
    return sigma * np.exp(-(1.0 + kappa) * delta) / (1.0 + kappa)


def ou_asymptotic_variance(kappa: float, delta: float) -> float:
    """(exp(2 (1 + kappa) delta) - 1) / delta² für J = 1, psi_1 = x."""
    return float(np.expm1(2.0 * (1.0 + kappa) * delta) / delta**2)


def _derivative_systems(ctx: EstimatingContext, theta: ThetaVector):
    base = theta.to_vector(ctx.free)
    out = []
    for i, step in enumerate(fd_steps(base)):
        direction = np.zeros(base.size)
        direction[i] = 1.0
        plus = ctx.rebuild(theta.with_vector(ctx.free, base + step * direction))
        minus = ctx.rebuild(theta.with_vector(ctx.free, base - step * direction))
        out.append((plus, minus, step))
    return out


def _h_rows(ctx: EstimatingContext, theta: ThetaVector, x, y, j_only: Optional[int] = None, derivs=None) -> np.ndarray:
    """h_j = psi_j(x) (phi_j'(y) - e^(-lambda_j delta) (phi_j'(x) - delta lambda_j' phi_j(x)))^T.

    Strich = Ableitung nach den freien Parametern; Tensor (n, p, p).
    """
    sys = ctx.rebuild(theta)
    derivs = derivs if derivs is not None else _derivative_systems(ctx, theta)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    phi_x = sys.eval_all(x)
    q = len(derivs)
    out = np.zeros((x.size, ctx.p, q))
    js = [j_only] if j_only is not None else range(1, ctx.J + 1)
    for j in js:
        lam = sys.lambdas[j - 1]
        decay = np.exp(-lam * ctx.delta)
        inner = np.empty((x.size, q))
        for i, (plus, minus, step) in enumerate(derivs):
            d_lambda = (plus.lambdas[j - 1] - minus.lambdas[j - 1]) / (2.0 * step)
            d_phi_x = (plus.eval(j, x) - minus.eval(j, x)) / (2.0 * step)
            d_phi_y = (plus.eval(j, y) - minus.eval(j, y)) / (2.0 * step)
            inner[:, i] = d_phi_y - decay * (d_phi_x - ctx.delta * d_lambda * phi_x[:, j - 1])
        out += ctx.psi.evaluate(j, x)[:, :, None] * inner[:, None, :]
    return out


def h_term(ctx: EstimatingContext, theta: ThetaVector, x: float, y: float, j: Optional[int] = None) -> np.ndarray:
    """Jacobi-Matrix von g_j (bzw. der Summe über j) nach theta, p x p."""
    return _h_rows(ctx, theta, [x], [y], j_only=j)[0]


def h_average(ctx: EstimatingContext, theta: ThetaVector, obs: ObservationSeries) -> np.ndarray:
    """1/M sum_m sum_j h_j(X_m, X_(m+1)), die analytische Jacobi-Matrix von G."""
    return _h_rows(ctx, theta, obs.samples[:-1], obs.samples[1:]).mean(axis=0)


def _l_rows(ctx: EstimatingContext, sys: EigenSystem, j: int, k: int, x, y) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    psi_j = ctx.psi.evaluate(j, x)
    psi_k = ctx.psi.evaluate(k, x)
    decay = np.exp(-(sys.lambdas[j - 1] + sys.lambdas[k - 1]) * ctx.delta)
    factor = sys.eval(j, y) * sys.eval(k, y) - decay * sys.eval(j, x) * sys.eval(k, x)
    return psi_j[:, :, None] * psi_k[:, None, :] * factor[:, None, None]


def l_term(ctx: EstimatingContext, theta: ThetaVector, j: int, k: int, x: float, y: float) -> np.ndarray:
    """(psi_j(x) (x) psi_k(x)) (phi_j(y) phi_k(y) - e^(-(lambda_j + lambda_k) delta) phi_j(x) phi_k(x))."""
    return _l_rows(ctx, ctx.rebuild(theta), j, k, [x], [y])[0]


def asymptotic_covariance(
    ctx: EstimatingContext,
    theta_hat: ThetaVector,
    n_pairs: int,
    h: float = config.TIME_STEP,
    seed: int = 0,
) -> np.ndarray:
    """Sandwich-Kovarianz Gamma_0 = H^-1 L H^-T mit Monte-Carlo-Erwartungen.

    Args:
        ctx: Schätzkontext
        theta_hat: Parameter, an dem ausgewertet wird
        n_pairs: Anzahl stationärer Paare (X_0, X_delta)
        h: Zeitschritt der linearisierten SDE
        seed: Startwert für die Paare

    Raises:
        SingularJacobianError: Wenn sum_j E[h_j] numerisch singulär ist
    """
    sys = ctx.rebuild(theta_hat)
    cfg = SimConfig(N=1, T=h, h=h, sigma=theta_hat.sigma, seed=seed)
    x0, x1 = simulate_stationary_linearized(
        cfg, ctx.potV, ctx.potW, theta_hat, sys.rho_ref, n_pairs, ctx.delta
    )
    H = _h_rows(ctx, theta_hat, x0, x1).mean(axis=0)
    L = np.zeros((ctx.p, ctx.p))
    for j in range(1, ctx.J + 1):
        for k in range(1, ctx.J + 1):
            L += _l_rows(ctx, sys, j, k, x0, x1).mean(axis=0)

    condition = np.linalg.cond(H) if np.any(H) else np.inf
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        raise SingularJacobianError(condition)
    H_inv = np.linalg.inv(H)
    gamma = H_inv @ L @ H_inv.T
    return 0.5 * (gamma + gamma.T)


def estimate_particle(
    ctx: EstimatingContext,
    obs: ObservationSeries,
    theta_init: ThetaVector,
    method: str = "eigen",
) -> EstimateReport:
    """Ein Teilchen, per Nullstellensuche oder geschlossener OU-Formel."""
    if method == "closed_form":
        if tuple(ctx.free) != ("kappa",) or ctx.potW.kind != "quadratic":
            raise ValueError("closed_form gilt nur für kappa im OU-Fall")
        kappa = closed_form_ou(obs)
        return EstimateReport(
            theta_hat=[kappa],
            free=["kappa"],
            g_norm_at_solution=0.0,
            iterations=0,
            converged=True,
            method="closed_form",
        )
    if method != "eigen":
        raise ValueError(f"Unbekannter Schätzer '{method}'")
    return solve(ctx.for_observations(obs), obs, theta_init)


def estimate_over_particles(
    ctx: EstimatingContext,
    ensemble: EnsemblePath,
    delta: float,
    theta_init: ThetaVector,
    particles: Optional[Sequence[int]] = None,
    method: str = "eigen",
    threads: int = 1,
    M: Optional[int] = None,
    n_pairs: int = 0,
) -> EstimateReport:
    """Schätzung für jedes Teilchen und Mittelwert über die konvergierten.

    Args:
        ctx: Schätzkontext
        ensemble: Simulierte Pfade
        delta: Beobachtungsabstand
        theta_init: Startwert
        particles: Teilchenindizes (Standard: alle)
        method: "eigen" oder "closed_form"
        threads: Größe des Thread-Pools
        M: Nur die ersten M Übergänge verwenden
        n_pairs: Bei n_pairs > 0 wird Gamma_0 am Mittelwert geschätzt

    Returns:
        EstimateReport mit Mittelwert, Einzelwerten und Fehlerzahl

    Raises:
        RuntimeError: Wenn kein Teilchen erfolgreich geschätzt wurde
    """
    indices = list(range(ensemble.n_particles)) if particles is None else list(particles)
    if not indices:
        raise ValueError("Keine Teilchen ausgewählt")

    def run(n: int):
        obs = subsample(ensemble, delta, n)
        if M is not None:
            obs = obs.truncated(M)
        try:
            return estimate_particle(ctx, obs, theta_init, method)
        except (ValueError, ArithmeticError, RuntimeError) as e:
            logger.warning(f"Teilchen {n}: Schätzung fehlgeschlagen ({e})")
            return None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(run, indices))
    else:
        reports = [run(n) for n in indices]

    size = theta_init.size(ctx.free)
    per_particle = [r.theta_hat if r is not None else [float("nan")] * size for r in reports]
    ok = [r is not None and r.converged for r in reports]
    good = np.array([v for v, flag in zip(per_particle, ok) if flag])
    if good.size == 0:
        raise RuntimeError(f"Schätzung für alle {len(indices)} Teilchen fehlgeschlagen")

    mean = good.mean(axis=0)
    n_failed = len(indices) - int(np.sum(ok))
    logger.info(
        f"Schätzung über {len(indices)} Teilchen: theta = {np.round(mean, 6).tolist()}, "
        f"{n_failed} fehlgeschlagen"
    )
    norms = [r.g_norm_at_solution for r, flag in zip(reports, ok) if flag]
    gamma = None
    if n_pairs > 0:
        theta_hat = theta_init.with_vector(ctx.free, mean)
        gamma = asymptotic_covariance(ctx, theta_hat, n_pairs, h=ensemble.h, seed=ensemble.seed).tolist()
    return EstimateReport(
        theta_hat=mean.tolist(),
        free=list(ctx.free),
        g_norm_at_solution=float(max(norms)),
        iterations=int(max(r.iterations for r, flag in zip(reports, ok) if flag)),
        converged=True,
        method=method,
        gamma=gamma,
        per_particle=per_particle,
        particle_converged=ok,
        n_failed=n_failed,
    )
