"""Run report models shared by the CLI and the HTTP layer.

Exact values are carried as strings ("3/2", "1/2+1/3i", "pi*r^2"); only the
Maslov intermediates are floats.
"""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field

from app.domain import Command, Verdict


class ConditionModel(BaseModel):
    """One adaptedness condition on the construction data."""

    name: str = Field(..., description="Condition label (i to iv)")
    passed: bool = Field(..., description="Whether the condition holds exactly")
    witness: Optional[str] = Field(default=None, description="First offending component when it fails")


class VerdictModel(BaseModel):
    """Outcome of one verification check."""

    name: str = Field(..., description="Check identifier")
    verdict: Verdict = Field(..., description="pass, fail or skipped")
    detail: Optional[str] = Field(default=None, description="Short description of what was checked")
    witness: Optional[str] = Field(default=None, description="Counterexample for a failed check")


class CoefficientTerm(BaseModel):
    """c(x) d^left f d^right g as one entry of a bidifferential operator."""

    left: list[int] = Field(..., description="Multi-index of derivatives on the first argument")
    right: list[int] = Field(..., description="Multi-index of derivatives on the second argument")
    coefficient: str = Field(..., description="Polynomial coefficient as an exact literal")


class CoefficientTable(BaseModel):
    """The lambda^order coefficient of the star product."""

    order: int = Field(..., description="Power of lambda")
    natural: bool = Field(..., description="Differentiation order is at most the lambda power")
    max_orders: list[int] = Field(..., description="Highest derivative order seen in each argument")
    terms: list[CoefficientTerm] = Field(default_factory=list, description="Sorted operator entries")


class SpectrumLevel(BaseModel):
    n: int = Field(..., description="Quantum number")
    energy: str = Field(..., description="Exact energy solving the quantization condition")


class LoopAction(BaseModel):
    loop: str = Field(..., description="Loop label from the config")
    action: str = Field(..., description="Exact closed integral of the Liouville form")


class MaslovReport(BaseModel):
    """Maslov index from the frame winding and from the gauge trace, when given."""

    winding: Optional[int] = Field(default=None, description="Winding of det(X + iY)^2")
    winding_raw: Optional[float] = Field(default=None, description="Unrounded winding number")
    winding_residual: Optional[float] = Field(default=None, description="Distance to the nearest integer")
    winding_samples: Optional[int] = Field(default=None, description="Sample points after refinement")
    gauge: Optional[int] = Field(default=None, description="-2 (i/2pi) closed integral tr(g^-1 dg)")
    gauge_residual: Optional[float] = Field(default=None, description="Distance to the nearest integer")


class EquivalenceReport(BaseModel):
    """Result of one inductive equivalence step between two configs."""

    order: int = Field(..., description="First lambda power at which the products differ")
    status: str = Field(..., description="Equivalence status at this order")
    alpha: dict[str, str] = Field(default_factory=dict, description="Primitive 1-form, 1-based axis -> coefficient")
    class_form: dict[str, str] = Field(default_factory=dict, description="Antisymmetrized class 2-form")
    obstruction: dict[str, str] = Field(default_factory=dict, description="Pullback of the class form to L")
    generator: list[CoefficientTerm] = Field(default_factory=list, description="Vector field alpha.X")
    certified: bool = Field(..., description="Transported product matches up to a Hochschild coboundary")
    alpha_vanishes_on_L: bool = Field(..., description="Pullback of alpha to L is zero")
    relative_h1_vanishes: bool = Field(..., description="Declared vanishing of the relative first cohomology")


class RunReport(BaseModel):
    """Machine-readable outcome of one workbench run."""

    command: Command = Field(..., description="Command that produced the report")
    exit_code: int = Field(..., description="0 when every requested verdict passes")
    source: Optional[str] = Field(default=None, description="Config path or label")
    setup: Optional[dict[str, Any]] = Field(default=None, description="Normalized setup echo")
    adaptedness: list[ConditionModel] = Field(default_factory=list, description="Adaptedness conditions i to iv")
    star_coefficients: list[CoefficientTable] = Field(default_factory=list, description="Star product tables per lambda order")
    verdicts: list[VerdictModel] = Field(default_factory=list, description="Verification verdicts in fixed order")
    spectrum: list[SpectrumLevel] = Field(default_factory=list, description="Bohr-Sommerfeld levels in the window")
    actions: list[LoopAction] = Field(default_factory=list, description="Loop actions of the Liouville form")
    maslov: Optional[MaslovReport] = Field(default=None, description="Maslov index computations")
    equivalence: Optional[EquivalenceReport] = Field(default=None, description="Equivalence step between two configs")
    timing: Optional[dict[str, float]] = Field(default=None, description="Seconds per phase, only when requested")
    conventions: dict[str, str] = Field(default_factory=dict, description="Fixed signs and normalizations")

    @property
    def passed(self) -> bool:
        return all(v.verdict != Verdict.FAIL for v in self.verdicts)
