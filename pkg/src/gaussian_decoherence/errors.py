"""Exception types shared across the package."""

from __future__ import annotations


class ModelError(ValueError):
    """Invalid system specification (dimensions, symmetry, finiteness)."""


class ModelFileError(ModelError):
    """Model file could not be parsed or violates the schema."""

    def __init__(self, message: str, *, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        super().__init__(message)


class FlowRangeError(OverflowError):
    """exp(tA) is not representable in double precision."""


class ConvergenceError(RuntimeError):
    """The Lyapunov integrator did not reach the requested tolerance."""

    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(message)


class IntegrityError(RuntimeError):
    """A computed channel violates complete positivity beyond tolerance."""

    def __init__(self, message: str, min_eig: float):
        self.min_eig = min_eig
        super().__init__(message)


class DegenerateDiffusionError(ValueError):
    """D_t is singular, so the real-space propagator does not exist."""

    def __init__(self, message: str, directions):
        self.directions = directions
        super().__init__(message)


class UnsupportedStructureError(ValueError):
    """The model lacks the structure an analysis requires (e.g. not a chain)."""
