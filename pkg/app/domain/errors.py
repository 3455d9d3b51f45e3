"""Structured error types shared by the engines, the CLI and the HTTP layer."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


class WorkbenchError(Exception):
    """Base class for every error the workbench reports to callers.

    ``code`` is a stable machine-readable identifier, ``exit_code`` follows the
    CLI contract (2 parse, 3 validation, 1 verification/structural).
    """

    code = "workbench_error"
    exit_code = 1

    def __init__(self, message: str, details: Any = None) -> None:
        super().__init__(message)
        self.message = message
        self.details = details

    def to_detail(self) -> dict[str, Any]:
        detail: dict[str, Any] = {"code": self.code, "message": self.message}
        if self.details is not None:
            detail["details"] = self.details
        return detail


class ConfigParseError(WorkbenchError):
    code = "parse_error"
    exit_code = 2

    def __init__(self, line: int, message: str) -> None:
        super().__init__(f"line {line}: {message}", {"line": line})
        self.line = line


@dataclass(frozen=True)
class Violation:
    """One failed setup invariant, located by index triple or lambda order."""

    code: str
    message: str
    location: tuple[int, ...] = field(default_factory=tuple)

    def as_dict(self) -> dict[str, Any]:
        return {"code": self.code, "message": self.message, "location": list(self.location)}


class SetupValidationError(WorkbenchError):
    code = "validation_error"
    exit_code = 3

    def __init__(self, violations: list[Violation]) -> None:
        summary = "; ".join(v.message for v in violations)
        super().__init__(f"invalid setup: {summary}", [v.as_dict() for v in violations])
        self.violations = violations

    def codes(self) -> set[str]:
        return {v.code for v in self.violations}


class DimensionMismatchError(WorkbenchError):
    code = "dimension_mismatch"
    exit_code = 3


class BudgetError(WorkbenchError):
    code = "budget_error"
    exit_code = 3


class FormDegreeError(WorkbenchError):
    code = "form_degree"
    exit_code = 3


class UnvalidatedSetupError(WorkbenchError):
    code = "unvalidated_setup"
    exit_code = 3


class UnsupportedCoefficientError(WorkbenchError):
    code = "unsupported_coefficient"
    exit_code = 3


class StructuralError(WorkbenchError):
    code = "structural_error"
    exit_code = 1


class NumericalGuardError(WorkbenchError):
    code = "numerical_guard"
    exit_code = 1


__all__ = [
    "BudgetError",
    "ConfigParseError",
    "DimensionMismatchError",
    "FormDegreeError",
    "NumericalGuardError",
    "SetupValidationError",
    "StructuralError",
    "UnsupportedCoefficientError",
    "UnvalidatedSetupError",
    "Violation",
    "WorkbenchError",
]
