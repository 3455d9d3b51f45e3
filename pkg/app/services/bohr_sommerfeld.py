"""Bohr-Sommerfeld conditions: loop actions, Maslov indices and spectrum solving.

Action integrals and the spectrum are exact (sympy); the two Maslov paths
are the only floating-point code and round to integers behind a residual
guard.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence, Union

import numpy as np
import sympy as sp
from scipy import integrate

from app.config import settings
from app.domain.errors import (
    NumericalGuardError,
    SetupValidationError,
    UnsupportedCoefficientError,
    Violation,
)
from app.services.scalar_forms import ScalarForm

logger = logging.getLogger("fedosov.bohr_sommerfeld")

T = sp.Symbol("t")
E = sp.Symbol("E")

FramePath = Union[sp.Matrix, Callable[[float], np.ndarray]]
OneForm = Union[ScalarForm, Mapping[int, sp.Expr]]

_SUPPORTED_FUNCTIONS = (sp.sin, sp.cos)
_MAX_SAMPLES = 1 << 16


@dataclass(frozen=True)
class Segment:
    """Path t -> (x1(t), .., x2n(t)) for t in [0, 1]."""

    coordinates: tuple[sp.Expr, ...]

    @classmethod
    def line(cls, start: Sequence[sp.Expr], end: Sequence[sp.Expr]) -> "Segment":
        return cls(tuple(sp.sympify(a) + (sp.sympify(b) - sp.sympify(a)) * T for a, b in zip(start, end)))

    @classmethod
    def circle(
        cls,
        dimension: int,
        axes: tuple[int, int],
        radius: sp.Expr = sp.Integer(1),
        center: Sequence[sp.Expr] | None = None,
        turns: int = 1,
    ) -> "Segment":
        """Counter-clockwise circle in the (axes[0], axes[1]) plane starting on the first axis."""

        center = tuple(sp.sympify(c) for c in (center or (0,) * dimension))
        coords = list(center)
        angle = 2 * sp.pi * turns * T
        coords[axes[0]] = center[axes[0]] + radius * sp.cos(angle)
        coords[axes[1]] = center[axes[1]] + radius * sp.sin(angle)
        return cls(tuple(coords))

    @property
    def dimension(self) -> int:
        return len(self.coordinates)

    def point(self, t: sp.Expr) -> tuple[sp.Expr, ...]:
        return tuple(sp.simplify(c.subs(T, t)) for c in self.coordinates)

    def start(self) -> tuple[sp.Expr, ...]:
        return self.point(sp.Integer(0))

    def end(self) -> tuple[sp.Expr, ...]:
        return self.point(sp.Integer(1))

    def reversed(self) -> "Segment":
        return Segment(tuple(c.subs(T, 1 - T) for c in self.coordinates))


def _same_point(a: Sequence[sp.Expr], b: Sequence[sp.Expr]) -> bool:
    return all(sp.simplify(x - y) == 0 for x, y in zip(a, b))


@dataclass(frozen=True)
class LoopPath:
    name: str
    segments: tuple[Segment, ...]

    @classmethod
    def from_coordinates(cls, name: str, segments: Sequence[Sequence[sp.Expr]]) -> "LoopPath":
        return cls(name, tuple(Segment(tuple(sp.sympify(c) for c in seg)) for seg in segments))

    @property
    def dimension(self) -> int:
        return self.segments[0].dimension

    def closure_gaps(self) -> list[int]:
        """Indices i where segment i does not end at the start of segment i+1 (cyclically)."""

        gaps = []
        count = len(self.segments)
        for i, segment in enumerate(self.segments):
            if not _same_point(segment.end(), self.segments[(i + 1) % count].start()):
                gaps.append(i)
        return gaps

    def is_closed(self) -> bool:
        return bool(self.segments) and not self.closure_gaps()

    def require_closed(self) -> None:
        if not self.segments:
            raise SetupValidationError([Violation("loop_closure", f"loop {self.name!r} has no segments")])
        gaps = self.closure_gaps()
        if gaps:
            raise SetupValidationError(
                [Violation("loop_closure", f"loop {self.name!r} is not closed after segment {i + 1}", (i + 1,)) for i in gaps]
            )

    def concatenate(self, other: "LoopPath", name: str | None = None) -> "LoopPath":
        """Traverse self, then other; both loops must share their base point."""

        if self.dimension != other.dimension:
            raise SetupValidationError([Violation("loop_closure", "loops live on charts of different dimension")])
        if not _same_point(self.segments[0].start(), other.segments[0].start()):
            raise SetupValidationError([Violation("loop_closure", "loops do not share a base point")])
        return LoopPath(name or f"{self.name}*{other.name}", self.segments + other.segments)

    def reverse(self) -> "LoopPath":
        return LoopPath(f"{self.name}^-1", tuple(s.reversed() for s in reversed(self.segments)))


def _one_form_components(theta: OneForm, dimension: int) -> dict[int, sp.Expr]:
    if isinstance(theta, ScalarForm):
        if theta.degree != 1:
            raise UnsupportedCoefficientError("line integrals take 1-forms")
        symbols = [sp.Symbol(f"x{k}") for k in range(1, dimension + 1)]
        return {index[0]: value.evaluate_sympy(symbols) for index, value in theta.components.items()}
    return {int(i): sp.sympify(v) for i, v in theta.items()}


def _check_supported(expr: sp.Expr) -> None:
    for function in expr.atoms(sp.Function):
        if not isinstance(function, _SUPPORTED_FUNCTIONS):
            raise UnsupportedCoefficientError(f"unsupported coefficient function {function.func.__name__}")
    for power in expr.atoms(sp.Pow):
        if not power.base.has(T):
            continue
        if power.exp.is_negative or not power.exp.is_integer:
            raise UnsupportedCoefficientError(f"unsupported coefficient term {power}")


def liouville_integral(loop: LoopPath, theta: OneForm) -> sp.Expr:
    """Exact closed integral of a 1-form with polynomial/trigonometric coefficients; pi stays symbolic."""

    loop.require_closed()
    dimension = loop.dimension
    components = _one_form_components(theta, dimension)
    symbols = [sp.Symbol(f"x{k}") for k in range(1, dimension + 1)]
    total = sp.Integer(0)
    for segment in loop.segments:
        substitution = dict(zip(symbols, segment.coordinates))
        integrand = sp.Integer(0)
        for axis, coefficient in components.items():
            pulled = sp.simplify(sp.sympify(coefficient).subs(substitution))
            integrand += pulled * sp.diff(segment.coordinates[axis], T)
        integrand = sp.expand(integrand)
        _check_supported(integrand)
        value = sp.integrate(integrand, (T, 0, 1))
        if value.has(sp.Integral):
            raise UnsupportedCoefficientError(f"no closed form for the integral of {integrand}")
        total += value
    result = sp.simplify(total)
    logger.debug("Liouville integral over %s = %s", loop.name, result)
    return result


@dataclass(frozen=True)
class MaslovResult:
    index: int
    raw: float
    residual: float
    samples: int


def _numeric_path(path: FramePath) -> Callable[[float], np.ndarray]:
    if isinstance(path, sp.MatrixBase):
        compiled = sp.lambdify(T, path, "numpy")
        return lambda t: np.asarray(compiled(t), dtype=complex)
    return lambda t: np.asarray(path(t), dtype=complex)


def _det_squared(frame: np.ndarray) -> complex:
    rows, cols = frame.shape
    if rows != 2 * cols:
        raise NumericalGuardError(f"Lagrangian frame must be 2n x n, got {rows} x {cols}")
    unitary = frame[:cols] + 1j * frame[cols:]
    value = np.linalg.det(unitary)
    if abs(value) < 1e-12:
        raise NumericalGuardError("singular frame along the path")
    return complex(value / abs(value)) ** 2


def _wrapped(delta: np.ndarray) -> np.ndarray:
    return (delta + np.pi) % (2 * np.pi) - np.pi


def maslov_winding(
    frame: FramePath,
    t_range: tuple[float, float] = (0.0, 2 * np.pi),
    tolerance: float | None = None,
    max_step: float = np.pi / 4,
    initial_samples: int = 64,
) -> MaslovResult:
    """Winding number of det(X + iY)^2 along a closed path of Lagrangian frames [X; Y].

    The sample grid is refined until consecutive phase jumps stay below ``max_step``.
    """

    tolerance = settings.winding_tolerance if tolerance is None else tolerance
    evaluate = _numeric_path(frame)
    grid = np.linspace(t_range[0], t_range[1], initial_samples + 1)
    while True:
        values = np.array([_det_squared(evaluate(t)) for t in grid])
        jumps = _wrapped(np.diff(np.angle(values)))
        coarse = np.abs(jumps) > max_step
        if not coarse.any():
            break
        if grid.size > _MAX_SAMPLES:
            raise NumericalGuardError("winding refinement did not converge", {"samples": int(grid.size)})
        midpoints = (grid[:-1][coarse] + grid[1:][coarse]) / 2
        grid = np.sort(np.concatenate([grid, midpoints]))
    phase = np.unwrap(np.angle(values))
    raw = float((phase[-1] - phase[0]) / (2 * np.pi))
    index = int(round(raw))
    residual = abs(raw - index)
    if residual > tolerance:
        raise NumericalGuardError(
            f"winding {raw:.4f} is not within {tolerance} of an integer; is the path closed?",
            {"raw": raw, "residual": residual},
        )
    logger.debug("Maslov winding %d (raw %.6f, %d samples)", index, raw, grid.size)
    return MaslovResult(index, raw, residual, int(grid.size))


@dataclass(frozen=True)
class GaugeMaslovResult:
    index: int
    trace_integral: complex
    residual: float


def maslov_from_gauge(
    gauge: FramePath,
    t_range: tuple[float, float] = (0.0, 2 * np.pi),
    tolerance: float | None = None,
) -> GaugeMaslovResult:
    """mu = -2 (i/2pi) closed integral tr(g^-1 dg) for a closed path of invertible matrices."""

    tolerance = settings.winding_tolerance if tolerance is None else tolerance
    if isinstance(gauge, sp.MatrixBase):
        value = _numeric_path(gauge)
        derivative = _numeric_path(sp.diff(gauge, T))
    else:
        value = _numeric_path(gauge)
        step = 1e-6

        def derivative(t: float) -> np.ndarray:
            return (value(t + step) - value(t - step)) / (2 * step)

    def trace(t: float) -> complex:
        g = np.atleast_2d(value(t))
        if np.linalg.cond(g) > 1e12:
            raise NumericalGuardError("singular gauge matrix along the path", {"t": float(t)})
        return complex(np.trace(np.linalg.solve(g, np.atleast_2d(derivative(t)))))

    real, _ = integrate.quad(lambda t: trace(t).real, *t_range, limit=200)
    imag, _ = integrate.quad(lambda t: trace(t).imag, *t_range, limit=200)
    integral = complex(real, imag)
    raw = 1j * integral / (2 * np.pi)
    mu = -2 * raw
    index = int(round(mu.real))
    residual = abs(mu - index)
    if residual > tolerance:
        raise NumericalGuardError(
            f"gauge Maslov value {mu:.4f} is not within {tolerance} of an integer",
            {"residual": residual},
        )
    return GaugeMaslovResult(index, integral, float(residual))


@dataclass(frozen=True)
class BSProblem:
    """One-parameter family: A(E)/(2 pi lambda) - c_mu mu + kappa = n."""

    action: sp.Expr
    maslov: int
    lam: Fraction
    window: tuple[Fraction, Fraction]
    kappa: sp.Expr = sp.Integer(0)
    maslov_weight: Fraction = field(default_factory=lambda: settings.maslov_weight)

    def condition(self) -> sp.Expr:
        lam = sp.Rational(self.lam.numerator, self.lam.denominator)
        weight = sp.Rational(self.maslov_weight.numerator, self.maslov_weight.denominator)
        return sp.sympify(self.action) / (2 * sp.pi * lam) - weight * self.maslov + sp.sympify(self.kappa)


@dataclass(frozen=True)
class ConditionValue:
    energy: sp.Expr
    value: sp.Expr
    integral: bool


def evaluate_condition(problem: BSProblem, energy: sp.Expr | Fraction | int) -> ConditionValue:
    if isinstance(energy, Fraction):
        energy = sp.Rational(energy.numerator, energy.denominator)
    value = sp.simplify(problem.condition().subs(E, sp.sympify(energy)))
    return ConditionValue(sp.sympify(energy), value, bool(value.is_integer))


@dataclass(frozen=True)
class SpectrumPoint:
    n: int
    energy: sp.Expr


def _require_monotone(problem: BSProblem) -> None:
    """Reject actions whose derivative changes sign inside the window.

    Zeros of A' on the boundary, or interior zeros without a sign change
    (E^3 at 0), keep A strictly monotone and are accepted.
    """

    lo, hi = (sp.Rational(w.numerator, w.denominator) for w in problem.window)
    derivative = sp.simplify(sp.diff(sp.sympify(problem.action), E))
    if derivative.is_zero:
        raise SetupValidationError([Violation("monotonicity", "action does not depend on E")])
    critical = sp.solveset(derivative, E, sp.Interval.open(lo, hi))
    if not isinstance(critical, sp.FiniteSet):
        if critical == sp.EmptySet:
            return
        raise SetupValidationError(
            [Violation("monotonicity", f"action is not strictly monotone on [{lo}, {hi}]: critical set {critical}")]
        )
    cuts = [lo, *sorted(critical, key=float), hi]
    signs = {sp.sign(derivative.subs(E, (a + b) / 2)) for a, b in zip(cuts, cuts[1:])}
    if len(signs) != 1 or sp.Integer(0) in signs:
        raise SetupValidationError(
            [Violation("monotonicity", f"action is not strictly monotone on [{lo}, {hi}]: A' changes sign at {critical}")]
        )


def bs_spectrum(problem: BSProblem) -> list[SpectrumPoint]:
    """Exact solutions of the condition for every integer n reached inside the window."""

    _require_monotone(problem)
    lo, hi = (sp.Rational(w.numerator, w.denominator) for w in problem.window)
    condition = problem.condition()
    ends = [sp.simplify(condition.subs(E, lo)), sp.simplify(condition.subs(E, hi))]
    first, last = int(sp.ceiling(min(ends, key=float))), int(sp.floor(max(ends, key=float)))
    points: list[SpectrumPoint] = []
    for n in range(first, last + 1):
        roots = [r for r in sp.solve(sp.Eq(condition, n), E) if r.is_real and lo <= r <= hi]
        for root in sorted(roots, key=float):
            points.append(SpectrumPoint(n, root))
    logger.info("BS spectrum: %d level(s) in [%s, %s]", len(points), lo, hi)
    return points


__all__ = [
    "BSProblem",
    "ConditionValue",
    "GaugeMaslovResult",
    "LoopPath",
    "MaslovResult",
    "Segment",
    "SpectrumPoint",
    "bs_spectrum",
    "evaluate_condition",
    "liouville_integral",
    "maslov_from_gauge",
    "maslov_winding",
]
