"""Exception types raised by cdual. Each carries the CLI exit code it maps to."""

from __future__ import annotations

from typing import Any

from cdual.constants import (
    EXIT_ASSERTION_FAILED,
    EXIT_INPUT_ERROR,
    EXIT_RESOURCE_LIMIT,
    EXIT_SOLVER_FAILURE,
)


class CDualError(Exception):
    """Base class for all cdual errors."""

    exit_code: int = EXIT_SOLVER_FAILURE

    def to_dict(self) -> dict[str, Any]:
        return {"error": type(self).__name__, "message": str(self)}


class InvalidInput(CDualError, ValueError):
    """Malformed instance, violated precondition or out-of-range index."""

    exit_code = EXIT_INPUT_ERROR


class ResourceLimit(CDualError):
    """An enumeration or solver size cap was exceeded."""

    exit_code = EXIT_RESOURCE_LIMIT


class NonConvergence(CDualError):
    """An iterative procedure hit its iteration limit."""

    exit_code = EXIT_SOLVER_FAILURE

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations

    def to_dict(self) -> dict[str, Any]:
        data = super().to_dict()
        data.update({"residual": self.residual, "iterations": self.iterations})
        return data


class SolverError(CDualError):
    """The linear programming backend failed."""

    exit_code = EXIT_SOLVER_FAILURE


class CertificateMismatch(CDualError):
    """A computed certificate disagrees with its optimality conditions."""

    exit_code = EXIT_ASSERTION_FAILED

    def __init__(self, message: str, witness: Any = None, residual: float = 0.0):
        super().__init__(message)
        self.witness = witness
        self.residual = residual

    def to_dict(self) -> dict[str, Any]:
        data = super().to_dict()
        data.update({"witness": self.witness, "residual": self.residual})
        return data


class EmptyResult(CDualError):
    """A set-valued query is empty by convention (e.g. subdifferential at +inf)."""

    exit_code = EXIT_ASSERTION_FAILED
