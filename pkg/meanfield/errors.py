"""Fehlerklassen für Simulation, Dichte, Spektralproblem und Schätzer."""

from typing import List, Optional


class SimulationDivergedError(ArithmeticError):
    """Euler-Maruyama hat einen nicht-endlichen Wert erzeugt."""

    def __init__(self, step: int, message: Optional[str] = None):
        self.step = step
        super().__init__(
            message or f"Simulation divergiert in Schritt {step} (nicht-endlicher Wert)"
        )


class DensityError(ValueError):
    """Stationäre Dichte nicht normierbar oder Gebiet zu klein."""


class ConvergenceError(RuntimeError):
    """Fixpunktiteration ohne Konvergenz; `history` enthält die Residuen."""

    def __init__(self, message: str, history: List[float]):
        self.history = list(history)
        super().__init__(message)


class BasisError(ValueError):
    """Orthogonalität der Galerkin-Basis verloren."""


class AssemblyError(ValueError):
    """Steifigkeitsmatrix liefert negative Eigenwerte."""


class SingularJacobianError(ValueError):
    """Jacobi-Matrix der Schätzfunktion (numerisch) singulär."""

    def __init__(self, condition: float):
        self.condition = condition
        super().__init__(
            f"Jacobi-Matrix singulär (Kondition {condition:.3e} > 1e12); "
            "die Bedingung det(sum_j E[h_j]) != 0 ist verletzt"
        )
