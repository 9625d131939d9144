"""
Exception hierarchy for peierls-lab.

Validation failures also derive from ValueError; failed numeric checks
also derive from AssertionError.
"""

from typing import Any, Dict, List, Optional


class PeierlsLabError(Exception):
    """Base class for every error raised by the lab."""


class LatticeError(PeierlsLabError, ValueError):
    """Bad lattice geometry, anchor or scan precondition."""


class BudgetExceededError(PeierlsLabError, ValueError):
    """An exhaustive computation would exceed its configured budget."""

    def __init__(self, what: str, requested: int, budget: int, hint: str = ""):
        self.what = what
        self.requested = requested
        self.budget = budget
        message = f"{what}: requested {requested} exceeds budget {budget}"
        if hint:
            message += f" ({hint})"
        super().__init__(message)


class ClassificationError(PeierlsLabError, AssertionError):
    """A configuration could not be classified consistently."""


class DistributionError(PeierlsLabError, ValueError):
    """Coupling distribution outside its declared support."""


class StructureError(PeierlsLabError, ValueError):
    """Bottleneck structure parameters are unusable."""


class BoundViolationError(PeierlsLabError, AssertionError):
    """A proven inequality failed while its hypotheses were verified."""

    def __init__(self, name: str, measured: float, bound: float, context: Optional[Dict[str, Any]] = None):
        self.name = name
        self.measured = measured
        self.bound = bound
        self.context = context or {}
        super().__init__(f"{name}: measured {measured!r} > bound {bound!r} {self.context}")


class ConvergenceError(PeierlsLabError, RuntimeError):
    """Eigensolver finished with residuals above tolerance."""

    def __init__(self, message: str, residuals: Optional[List[float]] = None):
        self.residuals = list(residuals or [])
        super().__init__(f"{message}; residuals={self.residuals}")


class EvolutionError(PeierlsLabError, RuntimeError):
    """Time evolution could not reach the requested accuracy."""


class ConfigValidationError(PeierlsLabError, ValueError):
    """Experiment config failed schema validation."""

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("invalid config: " + "; ".join(self.errors))


class UnknownExperimentError(PeierlsLabError, KeyError):
    """Experiment name is not in the registry."""

    def __init__(self, name: str, known: List[str]):
        self.name = name
        self.known = list(known)
        super().__init__(f"unknown experiment {name!r}; choose one of: {', '.join(self.known)}")


class EmptySubspaceError(PeierlsLabError, ValueError):
    """A projector constraint selects no basis states."""
