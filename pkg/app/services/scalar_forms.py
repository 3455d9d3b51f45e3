"""Polynomial differential forms on a chart: d, wedge, pullback to L, Poincare homotopy."""

from __future__ import annotations

import logging
from fractions import Fraction
from itertools import combinations, permutations
from typing import Iterable, Mapping, Sequence

from app.domain.errors import DimensionMismatchError, FormDegreeError, StructuralError
from app.services.exact_algebra import ChartPoly, ScalarLike, as_scalar

logger = logging.getLogger("fedosov.scalar_forms")

FormIndex = tuple[int, ...]


def sort_with_sign(indices: Sequence[int]) -> tuple[int, FormIndex]:
    """Return (sign, sorted indices); sign 0 if an index repeats."""

    items = list(indices)
    if len(set(items)) != len(items):
        return 0, ()
    sign = 1
    for i in range(len(items)):
        for j in range(len(items) - 1 - i):
            if items[j] > items[j + 1]:
                items[j], items[j + 1] = items[j + 1], items[j]
                sign = -sign
    return sign, tuple(items)


class ScalarForm:
    """A p-form sum over increasing index tuples I of c_I dx^I, c_I polynomial."""

    __slots__ = ("dimension", "degree", "_components")

    def __init__(self, dimension: int, degree: int, components: Mapping[FormIndex, ChartPoly] | None = None) -> None:
        if degree < 0 or degree > dimension:
            raise FormDegreeError(f"form degree {degree} impossible in dimension {dimension}")
        self.dimension = dimension
        self.degree = degree
        cleaned: dict[FormIndex, ChartPoly] = {}
        for index, coefficient in (components or {}).items():
            sign, ordered = sort_with_sign(index)
            if len(ordered) != degree and sign != 0:
                raise FormDegreeError(f"index {index} does not have length {degree}")
            if any(not 0 <= a < dimension for a in ordered):
                raise IndexError(f"form index {index} out of range")
            if coefficient.dimension != dimension:
                raise DimensionMismatchError("form coefficient has wrong dimension")
            if sign == 0 or coefficient.is_zero():
                continue
            value = coefficient if sign > 0 else -coefficient
            cleaned[ordered] = cleaned[ordered] + value if ordered in cleaned else value
        self._components = {k: v for k, v in cleaned.items() if not v.is_zero()}

    @classmethod
    def zero(cls, dimension: int, degree: int) -> "ScalarForm":
        return cls(dimension, degree)

    @classmethod
    def function(cls, poly: ChartPoly) -> "ScalarForm":
        return cls(poly.dimension, 0, {(): poly})

    @classmethod
    def from_matrix(cls, matrix: Sequence[Sequence[ScalarLike]]) -> "ScalarForm":
        """Constant 2-form sum_{i<j} M_ij dx^i ^ dx^j from an antisymmetric matrix."""

        n = len(matrix)
        comps = {
            (i, j): ChartPoly.constant(n, matrix[i][j])
            for i in range(n)
            for j in range(i + 1, n)
        }
        return cls(n, 2, comps)

    @property
    def components(self) -> dict[FormIndex, ChartPoly]:
        return dict(sorted(self._components.items()))

    def component(self, indices: Sequence[int]) -> ChartPoly:
        sign, ordered = sort_with_sign(indices)
        if sign == 0:
            return ChartPoly.zero(self.dimension)
        value = self._components.get(ordered, ChartPoly.zero(self.dimension))
        return value if sign > 0 else -value

    def as_function(self) -> ChartPoly:
        if self.degree != 0:
            raise FormDegreeError("only 0-forms are functions")
        return self.component(())

    def is_zero(self) -> bool:
        return not self._components

    def _check(self, other: "ScalarForm") -> None:
        if (self.dimension, self.degree) != (other.dimension, other.degree):
            raise DimensionMismatchError("forms of different shape")

    def __add__(self, other: "ScalarForm") -> "ScalarForm":
        self._check(other)
        out = dict(self._components)
        for k, v in other._components.items():
            out[k] = out[k] + v if k in out else v
        return ScalarForm(self.dimension, self.degree, out)

    def __neg__(self) -> "ScalarForm":
        return ScalarForm(self.dimension, self.degree, {k: -v for k, v in self._components.items()})

    def __sub__(self, other: "ScalarForm") -> "ScalarForm":
        return self + (-other)

    def scale(self, value: ScalarLike) -> "ScalarForm":
        scalar = as_scalar(value)
        return ScalarForm(self.dimension, self.degree, {k: v.scale(scalar) for k, v in self._components.items()})

    def mul_poly(self, poly: ChartPoly) -> "ScalarForm":
        return ScalarForm(self.dimension, self.degree, {k: v * poly for k, v in self._components.items()})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScalarForm):
            return NotImplemented
        return (self.dimension, self.degree, self._components) == (other.dimension, other.degree, other._components)

    def __hash__(self) -> int:
        return hash((self.dimension, self.degree, frozenset(self._components.items())))

    def __repr__(self) -> str:
        body = ", ".join(f"{tuple(i + 1 for i in k)}: {v}" for k, v in self.components.items())
        return f"ScalarForm(degree={self.degree}, {{{body}}})"

    # calculus
    def exterior_derivative(self) -> "ScalarForm":
        if self.degree >= self.dimension:
            raise FormDegreeError("exterior derivative of a top-degree form")
        out: dict[FormIndex, ChartPoly] = {}
        for target in combinations(range(self.dimension), self.degree + 1):
            total = ChartPoly.zero(self.dimension)
            for position, axis in enumerate(target):
                rest = target[:position] + target[position + 1 :]
                piece = self._components.get(rest)
                if piece is None:
                    continue
                term = piece.diff(axis)
                total = total + term if position % 2 == 0 else total - term
            if not total.is_zero():
                out[target] = total
        return ScalarForm(self.dimension, self.degree + 1, out)

    def is_closed(self) -> bool:
        return self.degree >= self.dimension or self.exterior_derivative().is_zero()

    def wedge(self, other: "ScalarForm") -> "ScalarForm":
        if self.dimension != other.dimension:
            raise DimensionMismatchError("forms on different charts")
        degree = self.degree + other.degree
        if degree > self.dimension:
            raise FormDegreeError("wedge exceeds top degree")
        out: dict[FormIndex, ChartPoly] = {}
        for i, a in self._components.items():
            for j, b in other._components.items():
                sign, ordered = sort_with_sign(i + j)
                if sign == 0:
                    continue
                value = a * b if sign > 0 else -(a * b)
                out[ordered] = out[ordered] + value if ordered in out else value
        return ScalarForm(self.dimension, degree, out)

    def evaluate(self, *vectors: Sequence[ChartPoly]) -> ChartPoly:
        """Contract with ``degree`` vector fields given by polynomial components."""

        if len(vectors) != self.degree:
            raise FormDegreeError(f"{self.degree}-form needs {self.degree} vectors")
        total = ChartPoly.zero(self.dimension)
        if self.degree == 0:
            return self.component(())
        for index, coefficient in self._components.items():
            for perm in permutations(range(self.degree)):
                sign, _ = sort_with_sign(perm)
                product = coefficient
                for slot, position in enumerate(perm):
                    product = product * vectors[slot][index[position]]
                total = total + product if sign > 0 else total - product
        return total

    def pullback(self, zeroed_axes: Iterable[int]) -> "ScalarForm":
        """i*_L for L = {x_a = 0, a in zeroed_axes}."""

        axes = set(zeroed_axes)
        out = {
            k: v.restrict(axes)
            for k, v in self._components.items()
            if not axes.intersection(k)
        }
        return ScalarForm(self.dimension, self.degree, out)


def poincare_primitive(form: ScalarForm, check_closed: bool = True) -> ScalarForm:
    """Radial homotopy primitive centred at the origin.

    For closed forms of degree >= 1, d(K form) = form. A monomial x^m dx^I
    contributes (1/(|m| + p)) sum_r (-1)^r x^{I_r} x^m dx^{I without I_r}.
    """

    if form.degree < 1:
        raise FormDegreeError("Poincare homotopy needs a form of degree >= 1")
    if check_closed and not form.is_closed():
        raise StructuralError("Poincare primitive requested for a non-closed form")
    n, p = form.dimension, form.degree
    out: dict[FormIndex, ChartPoly] = {}
    for index, coefficient in form.components.items():
        for monom, coeff in coefficient.terms.items():
            base = ChartPoly.monomial(monom, coeff).scale(Fraction(1, sum(monom) + p))
            for position, axis in enumerate(index):
                rest = index[:position] + index[position + 1 :]
                term = base * ChartPoly.coordinate(n, axis)
                if position % 2:
                    term = -term
                out[rest] = out[rest] + term if rest in out else term
    return ScalarForm(n, p - 1, out)


def exterior_derivative(form: ScalarForm) -> ScalarForm:
    return form.exterior_derivative()


def differential(poly: ChartPoly) -> ScalarForm:
    return ScalarForm.function(poly).exterior_derivative()


__all__ = [
    "FormIndex",
    "ScalarForm",
    "differential",
    "exterior_derivative",
    "poincare_primitive",
    "sort_with_sign",
]
