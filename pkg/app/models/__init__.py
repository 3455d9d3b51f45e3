"""Pydantic models for workbench reports and run requests."""

from .reports import (
    CoefficientTable,
    CoefficientTerm,
    ConditionModel,
    EquivalenceReport,
    LoopAction,
    MaslovReport,
    RunReport,
    SpectrumLevel,
    VerdictModel,
)
from .setup import RunRequest

__all__ = [
    "CoefficientTable",
    "CoefficientTerm",
    "ConditionModel",
    "EquivalenceReport",
    "LoopAction",
    "MaslovReport",
    "RunReport",
    "RunRequest",
    "SpectrumLevel",
    "VerdictModel",
]
