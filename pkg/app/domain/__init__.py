"""Domain enumerations, conventions and error types."""

from .conventions import CONVENTIONS, Command, DEFAULT_COMMAND, OrderingMode, OutputFormat, Verdict
from .errors import (
    BudgetError,
    ConfigParseError,
    DimensionMismatchError,
    FormDegreeError,
    NumericalGuardError,
    SetupValidationError,
    StructuralError,
    UnsupportedCoefficientError,
    UnvalidatedSetupError,
    Violation,
    WorkbenchError,
)

__all__ = [
    "BudgetError",
    "CONVENTIONS",
    "Command",
    "ConfigParseError",
    "DEFAULT_COMMAND",
    "DimensionMismatchError",
    "FormDegreeError",
    "NumericalGuardError",
    "OrderingMode",
    "OutputFormat",
    "SetupValidationError",
    "StructuralError",
    "UnsupportedCoefficientError",
    "UnvalidatedSetupError",
    "Verdict",
    "Violation",
    "WorkbenchError",
]
