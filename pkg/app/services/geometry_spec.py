"""Validation and normalization of Fedosov construction data and the Lagrangian marker."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from itertools import combinations
from typing import Any, Mapping, Sequence

import sympy as sp

from app.config import settings
from app.domain.conventions import OrderingMode
from app.domain.errors import SetupValidationError, Violation
from app.services.exact_algebra import (
    ZERO,
    ChartPoly,
    ScalarLike,
    as_scalar,
    format_poly,
    format_scalar,
    gauss,
    is_zero,
    scalar_from_sympy,
    scalar_to_sympy,
)
from app.services.scalar_forms import ScalarForm
from app.services.weyl_calculus import (
    Matrix,
    OrderingSpec,
    WeylElement,
    WeylKey,
    standard_ordered_mu,
)

logger = logging.getLogger("fedosov.geometry_spec")

ChristoffelIndex = tuple[int, int, int]


def darboux_matrix(dimension: int) -> Matrix:
    """omega_{ij} = [[0, I], [-I, 0]] on x = (q^1..q^n, p_1..p_n)."""

    n = dimension // 2
    rows = []
    for i in range(dimension):
        row = []
        for j in range(dimension):
            if j == i + n and i < n:
                row.append(gauss(1))
            elif i == j + n and j < n:
                row.append(gauss(-1))
            else:
                row.append(ZERO)
        rows.append(tuple(row))
    return tuple(rows)


@dataclass
class RawSetup:
    """Unvalidated construction data; all indices are 0-based."""

    dimension: int
    omega: Sequence[Sequence[ScalarLike]] | None = None
    christoffels: Mapping[ChristoffelIndex, ChartPoly] = field(default_factory=dict)
    omega_series: Mapping[int, ScalarForm] = field(default_factory=dict)
    ordering: str = OrderingMode.WEYL.value
    mu: Sequence[Sequence[ScalarLike]] | None = None
    s_terms: Mapping[WeylKey, ChartPoly] = field(default_factory=dict)
    lagrangian: Sequence[int] | None = None
    lambda_order: int | None = None
    budget: int | None = None
    relative_h1_vanishes: bool = True


@dataclass(frozen=True)
class QuantizationSetup:
    """Validated Fedosov data on one chart."""

    n: int
    omega: Matrix
    poisson: Matrix
    christoffels: tuple[tuple[ChristoffelIndex, ChartPoly], ...]
    omega_series: tuple[tuple[int, ScalarForm], ...]
    ordering: OrderingSpec
    ordering_name: str
    s: WeylElement
    lagrangian: tuple[int, ...]
    lambda_order: int
    budget: int
    s_min_degree: int | None
    relative_h1_vanishes: bool = True
    is_validated: bool = True

    @property
    def dimension(self) -> int:
        return 2 * self.n

    @property
    def tangential_axes(self) -> tuple[int, ...]:
        return tuple(a for a in range(self.dimension) if a not in self.lagrangian)

    @cached_property
    def _christoffel_map(self) -> dict[ChristoffelIndex, ChartPoly]:
        return dict(self.christoffels)

    def christoffel(self, l: int, j: int, k: int) -> ChartPoly:
        return self._christoffel_map.get((l, j, k), ChartPoly.zero(self.dimension))

    @cached_property
    def _actions(self) -> dict[int, tuple[tuple[int, int, ChartPoly], ...]]:
        out: dict[int, list[tuple[int, int, ChartPoly]]] = {m: [] for m in range(self.dimension)}
        for (l, m, j), value in self.christoffels:
            out[m].append((l, j, value))
        return {m: tuple(v) for m, v in out.items()}

    def christoffel_action(self, m: int) -> tuple[tuple[int, int, ChartPoly], ...]:
        """(k, j, Gamma^k_{mj}) for the nonzero symbols with lower index m."""

        return self._actions[m]

    @property
    def is_flat_connection(self) -> bool:
        return not self.christoffels

    def omega_form(self, power: int) -> ScalarForm:
        return dict(self.omega_series).get(power, ScalarForm.zero(self.dimension, 2))

    def symplectic_form(self) -> ScalarForm:
        return ScalarForm.from_matrix(self.omega)

    def as_raw(self) -> RawSetup:
        return RawSetup(
            dimension=self.dimension,
            omega=self.omega,
            christoffels=dict(self.christoffels),
            omega_series=dict(self.omega_series),
            ordering=self.ordering_name,
            mu=self.ordering.mu if self.ordering_name == "mu" else None,
            s_terms=self.s.terms,
            lagrangian=self.lagrangian,
            lambda_order=self.lambda_order,
            budget=self.budget,
            relative_h1_vanishes=self.relative_h1_vanishes,
        )

    def with_truncation(self, lambda_order: int | None = None, budget: int | None = None) -> "QuantizationSetup":
        raw = self.as_raw()
        if lambda_order is not None:
            raw.lambda_order = lambda_order
            raw.budget = budget if budget is not None else settings.default_budget(lambda_order)
        elif budget is not None:
            raw.budget = budget
        return validate_setup(raw)

    def with_omega_series(self, omega_series: Mapping[int, ScalarForm]) -> "QuantizationSetup":
        raw = self.as_raw()
        raw.omega_series = dict(omega_series)
        return validate_setup(raw)

    def differs_only_in_omega(self, other: "QuantizationSetup") -> bool:
        return replace(self, omega_series=()) == replace(other, omega_series=())

    def echo(self) -> dict[str, Any]:
        return {
            "dimension": self.dimension,
            "omega": [[format_scalar(v) for v in row] for row in self.omega],
            "christoffels": {
                f"{l + 1},{j + 1},{k + 1}": format_poly(v) for (l, j, k), v in self.christoffels
            },
            "Omega": {
                str(power): {
                    f"{i + 1},{j + 1}": format_poly(v) for (i, j), v in form.components.items()
                }
                for power, form in self.omega_series
            },
            "ordering": self.ordering_name,
            "mu": [[format_scalar(v) for v in row] for row in self.ordering.mu],
            "s": str(self.s),
            "s_min_degree": self.s_min_degree,
            "lagrangian": [a + 1 for a in self.lagrangian],
            "lambda_order": self.lambda_order,
            "budget": self.budget,
            "relative_h1_vanishes": self.relative_h1_vanishes,
        }


def _matrix_to_sympy(matrix: Matrix) -> sp.Matrix:
    return sp.Matrix([[scalar_to_sympy(v) for v in row] for row in matrix])


def _matrix_from_sympy(matrix: sp.Matrix) -> Matrix:
    return tuple(tuple(scalar_from_sympy(matrix[i, j]) for j in range(matrix.cols)) for i in range(matrix.rows))


def _poisson_from_omega(omega: Matrix) -> Matrix | None:
    sym = _matrix_to_sympy(omega)
    if sym.det() == 0:
        return None
    return _matrix_from_sympy(-sym.inv())


def _lowered(christoffels: Mapping[ChristoffelIndex, ChartPoly], omega: Matrix, i: int, j: int, k: int, dimension: int) -> ChartPoly:
    total = ChartPoly.zero(dimension)
    for l in range(dimension):
        weight = omega[i][l]
        value = christoffels.get((l, j, k))
        if value is not None and not is_zero(weight):
            total = total + value.scale(weight)
    return total


def validate_setup(raw: RawSetup | QuantizationSetup) -> QuantizationSetup:
    """Check every construction invariant exactly and return the normalized setup.

    All violations are collected and raised together; locations are 1-based.
    """

    if isinstance(raw, QuantizationSetup):
        raw = raw.as_raw()

    violations: list[Violation] = []
    dimension = raw.dimension
    if dimension < 2 or dimension % 2:
        raise SetupValidationError(
            [Violation("dimension", f"chart dimension must be a positive even number, got {dimension}")]
        )
    n = dimension // 2

    # symplectic matrix
    omega = darboux_matrix(dimension) if raw.omega is None else tuple(tuple(as_scalar(v) for v in row) for row in raw.omega)
    poisson: Matrix | None = None
    if len(omega) != dimension or any(len(row) != dimension for row in omega):
        violations.append(Violation("omega_shape", f"omega must be a {dimension}x{dimension} matrix"))
    else:
        for i in range(dimension):
            for j in range(i, dimension):
                if omega[i][j] != -omega[j][i]:
                    violations.append(
                        Violation("omega_antisymmetry", f"omega is not antisymmetric at ({i + 1},{j + 1})", (i + 1, j + 1))
                    )
        if not violations:
            poisson = _poisson_from_omega(omega)
            if poisson is None:
                violations.append(Violation("omega_degenerate", "omega is not invertible"))

    # Lagrangian marker
    lagrangian = tuple(sorted(set(raw.lagrangian))) if raw.lagrangian is not None else tuple(range(n, dimension))
    if len(lagrangian) != n or any(not 0 <= a < dimension for a in lagrangian):
        violations.append(
            Violation("lagrangian", f"lagrangian must mark exactly {n} distinct axes in 1..{dimension}")
        )
    elif len(omega) == dimension:
        tangential = [a for a in range(dimension) if a not in lagrangian]
        for a, b in combinations(tangential, 2):
            if not is_zero(omega[a][b]):
                violations.append(
                    Violation(
                        "lagrangian",
                        f"{{p = 0}} is not Lagrangian: omega({a + 1},{b + 1}) != 0",
                        (a + 1, b + 1),
                    )
                )

    # connection
    christoffels: dict[ChristoffelIndex, ChartPoly] = {}
    for (l, j, k), value in raw.christoffels.items():
        if not all(0 <= a < dimension for a in (l, j, k)):
            violations.append(Violation("christoffel_index", f"Christoffel index ({l + 1},{j + 1},{k + 1}) out of range", (l + 1, j + 1, k + 1)))
            continue
        if value.dimension != dimension:
            violations.append(Violation("christoffel_dimension", "Christoffel coefficient on a different chart", (l + 1, j + 1, k + 1)))
            continue
        if not value.is_zero():
            christoffels[(l, j, k)] = value
    torsion_free = True
    for l in range(dimension):
        for j, k in combinations(range(dimension), 2):
            left = christoffels.get((l, j, k), ChartPoly.zero(dimension))
            right = christoffels.get((l, k, j), ChartPoly.zero(dimension))
            if left != right:
                torsion_free = False
                violations.append(
                    Violation(
                        "torsion",
                        f"Gamma^{l + 1}_{{{j + 1}{k + 1}}} != Gamma^{l + 1}_{{{k + 1}{j + 1}}}",
                        (l + 1, j + 1, k + 1),
                    )
                )
    if torsion_free and len(omega) == dimension:
        for i, j in combinations(range(dimension), 2):
            for k in range(dimension):
                if _lowered(christoffels, omega, i, j, k, dimension) != _lowered(christoffels, omega, j, i, k, dimension):
                    violations.append(
                        Violation(
                            "symplectic_connection",
                            f"omega-lowered Christoffel symbol not totally symmetric at ({i + 1},{j + 1},{k + 1})",
                            (i + 1, j + 1, k + 1),
                        )
                    )

    # formal 2-form
    omega_series: dict[int, ScalarForm] = {}
    for power, form in sorted(raw.omega_series.items()):
        if power < 1:
            violations.append(Violation("omega_order", f"Omega terms start at lambda^1, got lambda^{power}", (power,)))
            continue
        if form.dimension != dimension or form.degree != 2:
            violations.append(Violation("omega_shape", f"Omega_{power} must be a 2-form on the chart", (power,)))
            continue
        if form.is_zero():
            continue
        if dimension > 2:
            derivative = form.exterior_derivative()
            if not derivative.is_zero():
                index, _ = next(iter(derivative.components.items()))
                violations.append(
                    Violation(
                        "closedness",
                        f"Omega_{power} is not closed: d Omega_{power} has component {tuple(a + 1 for a in index)}",
                        (power,) + tuple(a + 1 for a in index),
                    )
                )
        omega_series[power] = form

    # truncation
    lambda_order = settings.default_lambda_order if raw.lambda_order is None else raw.lambda_order
    budget = settings.default_budget(lambda_order) if raw.budget is None else raw.budget
    if lambda_order < 0:
        violations.append(Violation("lambda_order", "lambda_order must be non-negative"))
    if budget < 3:
        violations.append(Violation("budget", f"degree budget must be at least 3, got {budget}", (budget,)))

    # normalization section
    s = WeylElement(dimension, max(budget, 0), {})
    s_min_degree: int | None = None
    if raw.s_terms:
        for (fiber, power), value in raw.s_terms.items():
            if len(fiber) != dimension:
                violations.append(Violation("normalization", f"s term {fiber} has the wrong number of fiber variables"))
                continue
            if sum(fiber) == 0:
                violations.append(Violation("normalization", "s must have vanishing central part", tuple(fiber)))
            elif sum(fiber) + 2 * power < 3:
                violations.append(Violation("normalization", "s must have total degree >= 3", tuple(fiber)))
        if not any(v.code == "normalization" for v in violations):
            s = WeylElement(dimension, max(budget, 0), raw.s_terms)
            s_min_degree = s.min_degree()
            if s_min_degree == 3 and settings.strict_s_degree:
                violations.append(Violation("normalization", "s has degree-3 terms and strict s degree is enabled", (3,)))

    # ordering
    ordering: OrderingSpec | None = None
    ordering_name = raw.ordering
    if poisson is not None:
        try:
            if ordering_name == OrderingMode.WEYL.value:
                ordering = OrderingSpec.weyl(poisson)
            elif ordering_name == "standard":
                ordering = OrderingSpec.standard(poisson, lagrangian)
            elif ordering_name == OrderingMode.MU.value:
                if raw.mu is None:
                    violations.append(Violation("ordering", "mu ordering requires explicit mu entries"))
                else:
                    ordering = OrderingSpec.from_mu(poisson, raw.mu)
            else:
                violations.append(Violation("ordering", f"unknown ordering {ordering_name!r}"))
        except SetupValidationError as exc:
            violations.extend(exc.violations)

    if violations:
        logger.info("Setup rejected with %d violation(s)", len(violations))
        raise SetupValidationError(violations)

    assert ordering is not None and poisson is not None
    setup = QuantizationSetup(
        n=n,
        omega=omega,
        poisson=poisson,
        christoffels=tuple(sorted(christoffels.items())),
        omega_series=tuple(sorted(omega_series.items())),
        ordering=ordering,
        ordering_name=ordering_name,
        s=s,
        lagrangian=lagrangian,
        lambda_order=lambda_order,
        budget=budget,
        s_min_degree=s_min_degree,
        relative_h1_vanishes=raw.relative_h1_vanishes,
    )
    logger.debug("Validated setup dim=%d ordering=%s N=%d D=%d", dimension, ordering_name, lambda_order, budget)
    return setup


@dataclass(frozen=True)
class ConditionVerdict:
    name: str
    passed: bool
    witness: str | None = None


@dataclass(frozen=True)
class AdaptednessReport:
    """Verdicts for the four adaptedness conditions on the construction data."""

    totally_geodesic: ConditionVerdict
    relative_symplectic: ConditionVerdict
    fiber_ideal_normalization: ConditionVerdict
    standard_ordering: ConditionVerdict

    @property
    def conditions(self) -> tuple[ConditionVerdict, ...]:
        return (
            self.totally_geodesic,
            self.relative_symplectic,
            self.fiber_ideal_normalization,
            self.standard_ordering,
        )

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in self.conditions)

    def failed(self) -> list[ConditionVerdict]:
        return [c for c in self.conditions if not c.passed]


def check_adapted_data(setup: QuantizationSetup) -> AdaptednessReport:
    """Test the construction data against the four adaptedness conditions."""

    p_axes = setup.lagrangian
    tangential = setup.tangential_axes

    geodesic = ConditionVerdict("i: totally geodesic", True)
    for l in p_axes:
        for j in tangential:
            for k in tangential:
                restricted = setup.christoffel(l, j, k).restrict(p_axes)
                if not restricted.is_zero():
                    geodesic = ConditionVerdict(
                        "i: totally geodesic",
                        False,
                        f"Gamma^{l + 1}_{{{j + 1}{k + 1}}}|L = {format_poly(restricted)}",
                    )
                    break
            if not geodesic.passed:
                break
        if not geodesic.passed:
            break

    relative = ConditionVerdict("ii: relative symplectic class", True)
    for power, form in setup.omega_series:
        pulled = form.pullback(p_axes)
        if not pulled.is_zero():
            (i, j), value = next(iter(pulled.components.items()))
            relative = ConditionVerdict(
                "ii: relative symplectic class",
                False,
                f"Omega_{power}({i + 1},{j + 1})|L = {format_poly(value)}",
            )
            break

    normalization = ConditionVerdict("iii: s in fiberwise vanishing ideal", True)
    for (fiber, power), value in setup.s.terms.items():
        if any(fiber[a] for a in p_axes):
            continue
        restricted = value.restrict(p_axes)
        if not restricted.is_zero():
            label = "*".join(f"y{a + 1}^{e}" for a, e in enumerate(fiber) if e)
            normalization = ConditionVerdict(
                "iii: s in fiberwise vanishing ideal",
                False,
                f"term {label} lam^{power} without p-type fiber factor, coefficient {format_poly(restricted)}",
            )
            break

    expected = standard_ordered_mu(setup.poisson, p_axes)
    ordering = ConditionVerdict("iv: standard ordering", True)
    if setup.ordering.mu != expected:
        mismatch = next(
            (i, j)
            for i in range(setup.dimension)
            for j in range(setup.dimension)
            if setup.ordering.mu[i][j] != expected[i][j]
        )
        ordering = ConditionVerdict(
            "iv: standard ordering",
            False,
            f"mu({mismatch[0] + 1},{mismatch[1] + 1}) differs from the standard-ordered tensor",
        )

    report = AdaptednessReport(geodesic, relative, normalization, ordering)
    logger.info("Adaptedness: %s", ", ".join(f"{c.name}={'pass' if c.passed else 'fail'}" for c in report.conditions))
    return report


__all__ = [
    "AdaptednessReport",
    "ChristoffelIndex",
    "ConditionVerdict",
    "QuantizationSetup",
    "RawSetup",
    "check_adapted_data",
    "darboux_matrix",
    "validate_setup",
]
