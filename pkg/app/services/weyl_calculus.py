"""Formal Weyl bundle on a chart: fiber algebra, delta, delta^-1, sigma and covariant D.

Elements are finite maps (fiber exponent vector, lambda power) -> ChartPoly,
graded by |y| + 2*(lambda power) and truncated at an explicit budget. Forms
store one element per strictly increasing dx index tuple.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Callable, Iterable, Mapping, Protocol, Sequence

from app.domain.conventions import OrderingMode
from app.domain.errors import (
    BudgetError,
    DimensionMismatchError,
    FormDegreeError,
    SetupValidationError,
    UnvalidatedSetupError,
    Violation,
)
from app.services.exact_algebra import (
    ONE,
    ZERO,
    ChartPoly,
    GaussRational,
    LambdaPoly,
    Monomial,
    ScalarLike,
    as_scalar,
    format_monomial,
    format_poly,
    gauss,
    is_zero,
)
from app.services.scalar_forms import FormIndex, ScalarForm, sort_with_sign

logger = logging.getLogger("fedosov.weyl_calculus")

MAX_FORM_DEGREE = 3

WeylKey = tuple[Monomial, int]
Matrix = tuple[tuple[GaussRational, ...], ...]

INV_2I = gauss(0, Fraction(-1, 2))
INV_4I = gauss(0, Fraction(-1, 4))
I_UNIT = gauss(0, 1)


def key_degree(key: WeylKey) -> int:
    return sum(key[0]) + 2 * key[1]


def _unit(dimension: int, axis: int) -> Monomial:
    return tuple(1 if k == axis else 0 for k in range(dimension))


def _accumulate(out: dict, key, value: ChartPoly) -> None:
    if key in out:
        out[key] = out[key] + value
    else:
        out[key] = value


class WeylElement:
    """Truncated section of the Weyl bundle over one chart."""

    __slots__ = ("dimension", "budget", "_terms")

    def __init__(self, dimension: int, budget: int, terms: Mapping[WeylKey, ChartPoly] | None = None) -> None:
        if budget < 0:
            raise BudgetError("degree budget must be non-negative")
        self.dimension = dimension
        self.budget = budget
        cleaned: dict[WeylKey, ChartPoly] = {}
        for (fiber, power), coefficient in (terms or {}).items():
            if len(fiber) != dimension or coefficient.dimension != dimension:
                raise DimensionMismatchError(f"Weyl term {fiber} does not match dimension {dimension}")
            if power < 0:
                raise ValueError("negative lambda power in Weyl element")
            if sum(fiber) + 2 * power > budget or coefficient.is_zero():
                continue
            cleaned[(tuple(fiber), power)] = coefficient
        self._terms = cleaned

    # construction
    @classmethod
    def zero(cls, dimension: int, budget: int) -> "WeylElement":
        return cls(dimension, budget)

    @classmethod
    def one(cls, dimension: int, budget: int) -> "WeylElement":
        return cls(dimension, budget, {((0,) * dimension, 0): ChartPoly.one(dimension)})

    @classmethod
    def monomial(
        cls,
        dimension: int,
        budget: int,
        fiber: Monomial,
        lam: int = 0,
        coefficient: ChartPoly | ScalarLike = 1,
    ) -> "WeylElement":
        coeff = coefficient if isinstance(coefficient, ChartPoly) else ChartPoly.constant(dimension, coefficient)
        return cls(dimension, budget, {(tuple(fiber), lam): coeff})

    @classmethod
    def fiber_coordinate(cls, dimension: int, budget: int, axis: int) -> "WeylElement":
        return cls.monomial(dimension, budget, _unit(dimension, axis))

    @classmethod
    def central(cls, value: LambdaPoly | ChartPoly, budget: int) -> "WeylElement":
        if isinstance(value, ChartPoly):
            return cls(value.dimension, budget, {((0,) * value.dimension, 0): value})
        zero = (0,) * value.dimension
        return cls(value.dimension, budget, {(zero, k): v for k, v in value.coefficients.items()})

    # inspection
    @property
    def terms(self) -> dict[WeylKey, ChartPoly]:
        return dict(sorted(self._terms.items(), key=lambda kv: (key_degree(kv[0]), kv[0][1], tuple(-e for e in kv[0][0]))))

    def coefficient(self, fiber: Monomial, lam: int = 0) -> ChartPoly:
        return self._terms.get((tuple(fiber), lam), ChartPoly.zero(self.dimension))

    def is_zero(self) -> bool:
        return not self._terms

    def min_degree(self) -> int | None:
        return min((key_degree(k) for k in self._terms), default=None)

    def min_fiber_degree(self) -> int | None:
        return min((sum(k[0]) for k in self._terms), default=None)

    def degree_part(self, degree: int) -> "WeylElement":
        return WeylElement(self.dimension, self.budget, {k: v for k, v in self._terms.items() if key_degree(k) == degree})

    def fiber_degree_part(self, fiber_degree: int) -> "WeylElement":
        return WeylElement(self.dimension, self.budget, {k: v for k, v in self._terms.items() if sum(k[0]) == fiber_degree})

    def central_part(self) -> LambdaPoly:
        return LambdaPoly(
            self.dimension,
            self.budget // 2,
            {k[1]: v for k, v in self._terms.items() if sum(k[0]) == 0},
        )

    def is_central(self) -> bool:
        return all(sum(k[0]) == 0 for k in self._terms)

    # arithmetic
    def _check(self, other: "WeylElement") -> None:
        if self.dimension != other.dimension:
            raise DimensionMismatchError(f"dimension mismatch: {self.dimension} vs {other.dimension}")
        if self.budget != other.budget:
            raise BudgetError(
                f"degree budget mismatch: {self.budget} vs {other.budget}",
                {"left": self.budget, "right": other.budget},
            )

    def __add__(self, other: "WeylElement") -> "WeylElement":
        if not isinstance(other, WeylElement):
            return NotImplemented
        self._check(other)
        out = dict(self._terms)
        for k, v in other._terms.items():
            _accumulate(out, k, v)
        return WeylElement(self.dimension, self.budget, out)

    def __neg__(self) -> "WeylElement":
        return WeylElement(self.dimension, self.budget, {k: -v for k, v in self._terms.items()})

    def __sub__(self, other: "WeylElement") -> "WeylElement":
        if not isinstance(other, WeylElement):
            return NotImplemented
        return self + (-other)

    def scale(self, value: ScalarLike) -> "WeylElement":
        scalar = as_scalar(value)
        return WeylElement(self.dimension, self.budget, {k: v.scale(scalar) for k, v in self._terms.items()})

    def mul_poly(self, poly: ChartPoly) -> "WeylElement":
        return WeylElement(self.dimension, self.budget, {k: v * poly for k, v in self._terms.items()})

    def map_coefficients(self, fn: Callable[[ChartPoly], ChartPoly]) -> "WeylElement":
        return WeylElement(self.dimension, self.budget, {k: fn(v) for k, v in self._terms.items()})

    def shift_lambda(self, power: int) -> "WeylElement":
        if power < 0 and any(k[1] + power < 0 for k in self._terms):
            raise ValueError("Weyl element not divisible by the requested lambda power")
        return WeylElement(self.dimension, self.budget, {(k[0], k[1] + power): v for k, v in self._terms.items()})

    def with_budget(self, budget: int) -> "WeylElement":
        return WeylElement(self.dimension, budget, self._terms)

    def fiber_diff(self, axis: int) -> "WeylElement":
        out: dict[WeylKey, ChartPoly] = {}
        for (fiber, power), coefficient in self._terms.items():
            exponent = fiber[axis]
            if exponent:
                lowered = fiber[:axis] + (exponent - 1,) + fiber[axis + 1 :]
                _accumulate(out, (lowered, power), coefficient.scale(exponent))
        return WeylElement(self.dimension, self.budget, out)

    def fiber_multiply(self, axis: int) -> "WeylElement":
        """Commutative multiplication by y^axis (raises degree by one)."""

        out = {}
        for (fiber, power), coefficient in self._terms.items():
            raised = fiber[:axis] + (fiber[axis] + 1,) + fiber[axis + 1 :]
            out[(raised, power)] = coefficient
        return WeylElement(self.dimension, self.budget, out)

    def base_diff(self, axis: int) -> "WeylElement":
        return self.map_coefficients(lambda c: c.diff(axis))

    def restrict(self, axes: Iterable[int]) -> "WeylElement":
        zeroed = tuple(axes)
        return self.map_coefficients(lambda c: c.restrict(zeroed))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeylElement):
            return NotImplemented
        return (self.dimension, self.budget, self._terms) == (other.dimension, other.budget, other._terms)

    def __hash__(self) -> int:
        return hash((self.dimension, self.budget, frozenset(self._terms.items())))

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for (fiber, power), coefficient in self.terms.items():
            factors = [f for f in (format_monomial(fiber, "y"), "" if power == 0 else ("lam" if power == 1 else f"lam^{power}")) if f]
            parts.append(f"({format_poly(coefficient)})" + "".join(f"*{f}" for f in factors))
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"WeylElement({self}, budget={self.budget})"


class WeylForm:
    """Weyl-valued differential form of degree 0..3."""

    __slots__ = ("dimension", "budget", "degree", "_components")

    def __init__(
        self,
        dimension: int,
        budget: int,
        degree: int,
        components: Mapping[FormIndex, WeylElement] | None = None,
    ) -> None:
        if not 0 <= degree <= MAX_FORM_DEGREE:
            raise FormDegreeError(f"form degree {degree} outside 0..{MAX_FORM_DEGREE}")
        self.dimension = dimension
        self.budget = budget
        self.degree = degree
        cleaned: dict[FormIndex, WeylElement] = {}
        for index, element in (components or {}).items():
            sign, ordered = sort_with_sign(index)
            if sign == 0:
                continue
            if len(ordered) != degree:
                raise FormDegreeError(f"index {index} has wrong length for a {degree}-form")
            if any(not 0 <= a < dimension for a in ordered):
                raise IndexError(f"form index {index} out of range")
            if element.dimension != dimension:
                raise DimensionMismatchError("form component has wrong dimension")
            if element.budget != budget:
                raise BudgetError(f"component budget {element.budget} differs from form budget {budget}")
            value = element if sign > 0 else -element
            if ordered in cleaned:
                value = cleaned[ordered] + value
            cleaned[ordered] = value
        self._components = {k: v for k, v in cleaned.items() if not v.is_zero()}

    @classmethod
    def zero(cls, dimension: int, budget: int, degree: int) -> "WeylForm":
        return cls(dimension, budget, degree)

    @classmethod
    def from_element(cls, element: WeylElement) -> "WeylForm":
        return cls(element.dimension, element.budget, 0, {(): element})

    @classmethod
    def from_scalar_form(cls, form: ScalarForm, budget: int, lam: int = 0) -> "WeylForm":
        zero = (0,) * form.dimension
        return cls(
            form.dimension,
            budget,
            form.degree,
            {k: WeylElement(form.dimension, budget, {(zero, lam): v}) for k, v in form.components.items()},
        )

    @property
    def components(self) -> dict[FormIndex, WeylElement]:
        return dict(sorted(self._components.items()))

    def component(self, index: Sequence[int]) -> WeylElement:
        sign, ordered = sort_with_sign(index)
        zero = WeylElement.zero(self.dimension, self.budget)
        if sign == 0:
            return zero
        value = self._components.get(ordered, zero)
        return value if sign > 0 else -value

    def as_element(self) -> WeylElement:
        if self.degree != 0:
            raise FormDegreeError("only 0-forms are Weyl elements")
        return self.component(())

    def is_zero(self) -> bool:
        return not self._components

    def _check(self, other: "WeylForm") -> None:
        if self.dimension != other.dimension:
            raise DimensionMismatchError("forms over different charts")
        if self.budget != other.budget:
            raise BudgetError(f"degree budget mismatch: {self.budget} vs {other.budget}")
        if self.degree != other.degree:
            raise FormDegreeError(f"form degree mismatch: {self.degree} vs {other.degree}")

    def __add__(self, other: "WeylForm") -> "WeylForm":
        if not isinstance(other, WeylForm):
            return NotImplemented
        self._check(other)
        out = dict(self._components)
        for k, v in other._components.items():
            _accumulate(out, k, v)
        return WeylForm(self.dimension, self.budget, self.degree, out)

    def __neg__(self) -> "WeylForm":
        return self.map(lambda e: -e)

    def __sub__(self, other: "WeylForm") -> "WeylForm":
        if not isinstance(other, WeylForm):
            return NotImplemented
        return self + (-other)

    def scale(self, value: ScalarLike) -> "WeylForm":
        scalar = as_scalar(value)
        return self.map(lambda e: e.scale(scalar))

    def map(self, fn: Callable[[WeylElement], WeylElement]) -> "WeylForm":
        mapped = {k: fn(v) for k, v in self._components.items()}
        budget = next(iter(mapped.values())).budget if mapped else self.budget
        return WeylForm(self.dimension, budget, self.degree, mapped)

    def with_budget(self, budget: int) -> "WeylForm":
        return WeylForm(self.dimension, budget, self.degree, {k: v.with_budget(budget) for k, v in self._components.items()})

    def shift_lambda(self, power: int) -> "WeylForm":
        return self.map(lambda e: e.shift_lambda(power))

    def degree_part(self, degree: int) -> "WeylForm":
        return self.map(lambda e: e.degree_part(degree))

    def up_to_degree(self, degree: int) -> "WeylForm":
        return self.map(lambda e: WeylElement(e.dimension, e.budget, {k: v for k, v in e.terms.items() if key_degree(k) <= degree}))

    def min_degree(self) -> int | None:
        return min((d for d in (v.min_degree() for v in self._components.values()) if d is not None), default=None)

    def wedge_dx(self, axis: int) -> "WeylForm":
        """dx^axis ^ self."""

        if self.degree + 1 > MAX_FORM_DEGREE:
            raise FormDegreeError("form degree would exceed 3")
        out: dict[FormIndex, WeylElement] = {}
        for index, element in self._components.items():
            sign, ordered = sort_with_sign((axis,) + index)
            if sign == 0:
                continue
            _accumulate(out, ordered, element if sign > 0 else -element)
        return WeylForm(self.dimension, self.budget, self.degree + 1, out)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeylForm):
            return NotImplemented
        return (self.dimension, self.budget, self.degree, self._components) == (
            other.dimension,
            other.budget,
            other.degree,
            other._components,
        )

    def __hash__(self) -> int:
        return hash((self.dimension, self.budget, self.degree, frozenset(self._components.items())))

    def __repr__(self) -> str:
        body = ", ".join(f"dx{tuple(i + 1 for i in k)}: {v}" for k, v in self.components.items())
        return f"WeylForm(degree={self.degree}, budget={self.budget}, {{{body}}})"


def _as_matrix(rows: Sequence[Sequence[ScalarLike]]) -> Matrix:
    return tuple(tuple(as_scalar(v) for v in row) for row in rows)


@dataclass(frozen=True)
class OrderingSpec:
    """Constant fiber ordering tensor mu with antisymmetric part equal to pi."""

    mode: OrderingMode
    mu: Matrix
    poisson: Matrix

    @classmethod
    def weyl(cls, poisson: Sequence[Sequence[ScalarLike]]) -> "OrderingSpec":
        matrix = _as_matrix(poisson)
        return cls(OrderingMode.WEYL, matrix, matrix)

    @classmethod
    def from_mu(cls, poisson: Sequence[Sequence[ScalarLike]], mu: Sequence[Sequence[ScalarLike]]) -> "OrderingSpec":
        pi, mu_matrix = _as_matrix(poisson), _as_matrix(mu)
        n = len(pi)
        half = gauss(Fraction(1, 2))
        for i in range(n):
            for j in range(n):
                if (mu_matrix[i][j] - mu_matrix[j][i]) * half != pi[i][j]:
                    raise SetupValidationError(
                        [
                            Violation(
                                "ordering_antisymmetric_part",
                                f"antisymmetric part of mu differs from the Poisson matrix at ({i + 1},{j + 1})",
                                (i + 1, j + 1),
                            )
                        ]
                    )
        return cls(OrderingMode.MU, mu_matrix, pi)

    @classmethod
    def standard(cls, poisson: Sequence[Sequence[ScalarLike]], p_axes: Iterable[int]) -> "OrderingSpec":
        return cls.from_mu(poisson, standard_ordered_mu(poisson, p_axes))

    @property
    def dimension(self) -> int:
        return len(self.mu)

    @cached_property
    def contraction_pairs(self) -> tuple[tuple[int, int, GaussRational], ...]:
        """(i, j, mu^{ij}/(2i)) for nonzero entries."""

        return tuple(
            (i, j, self.mu[i][j] * INV_2I)
            for i in range(self.dimension)
            for j in range(self.dimension)
            if not is_zero(self.mu[i][j])
        )

    @cached_property
    def symmetric_pairs(self) -> tuple[tuple[int, int, GaussRational], ...]:
        """(i, j, sigma^{ij}/(4i)) with sigma the symmetric part of mu."""

        half = gauss(Fraction(1, 2))
        out = []
        for i in range(self.dimension):
            for j in range(self.dimension):
                value = (self.mu[i][j] + self.mu[j][i]) * half
                if not is_zero(value):
                    out.append((i, j, value * INV_4I))
        return tuple(out)

    @property
    def is_symmetric_free(self) -> bool:
        return not self.symmetric_pairs


def standard_ordered_mu(poisson: Sequence[Sequence[ScalarLike]], p_axes: Iterable[int]) -> Matrix:
    """Ordering tensor whose product keeps the ideal generated by the p-type fiber variables a left ideal."""

    pi = _as_matrix(poisson)
    fiber = set(p_axes)
    n = len(pi)
    rows = []
    for a in range(n):
        row = []
        for b in range(n):
            if b in fiber:
                row.append(ZERO)
            elif a in fiber:
                row.append(pi[a][b] * gauss(2))
            else:
                row.append(pi[a][b])
        rows.append(tuple(row))
    return tuple(rows)


Pairs = tuple[tuple[int, int, GaussRational], ...]


@lru_cache(maxsize=262144)
def _monomial_expansion(ya: Monomial, yb: Monomial, pairs: Pairs) -> tuple[tuple[WeylKey, GaussRational], ...]:
    """y^a o y^b as ((fiber exponents, k), scalar) with k the lambda power."""

    out: dict[WeylKey, GaussRational] = {}
    current: dict[tuple[Monomial, Monomial], GaussRational] = {(ya, yb): ONE}
    level = 0
    while current:
        for (a, b), coeff in current.items():
            key = (tuple(x + y for x, y in zip(a, b)), level)
            out[key] = out.get(key, ZERO) + coeff
        level += 1
        inverse = gauss(Fraction(1, level))
        nxt: dict[tuple[Monomial, Monomial], GaussRational] = {}
        for (a, b), coeff in current.items():
            for i, j, c in pairs:
                if a[i] and b[j]:
                    a2 = a[:i] + (a[i] - 1,) + a[i + 1 :]
                    b2 = b[:j] + (b[j] - 1,) + b[j + 1 :]
                    value = coeff * c * gauss(a[i] * b[j]) * inverse
                    nxt[(a2, b2)] = nxt.get((a2, b2), ZERO) + value
        current = {k: v for k, v in nxt.items() if not is_zero(v)}
    return tuple((k, v) for k, v in out.items() if not is_zero(v))


@lru_cache(maxsize=262144)
def _full_contraction(ya: Monomial, yb: Monomial, pairs: Pairs) -> GaussRational:
    """Scalar coefficient of the fiber-free term of y^a o y^b (lambda power |a|)."""

    if sum(ya) != sum(yb):
        return ZERO
    for (fiber, _), value in _monomial_expansion(ya, yb, pairs):
        if not any(fiber):
            return value
    return ZERO


def _product_terms(
    a: WeylElement,
    b: WeylElement,
    ordering: OrderingSpec,
    budget: int,
    central_only: bool = False,
) -> dict[WeylKey, ChartPoly]:
    pairs = ordering.contraction_pairs
    zero = (0,) * a.dimension
    out: dict[WeylKey, ChartPoly] = {}
    for key_a, ca in a._terms.items():
        da = key_degree(key_a)
        for key_b, cb in b._terms.items():
            if da + key_degree(key_b) > budget:
                continue
            if central_only:
                scalar = _full_contraction(key_a[0], key_b[0], pairs)
                if is_zero(scalar):
                    continue
                _accumulate(out, (zero, key_a[1] + key_b[1] + sum(key_a[0])), (ca * cb).scale(scalar))
                continue
            product = ca * cb
            for (fiber, level), scalar in _monomial_expansion(key_a[0], key_b[0], pairs):
                _accumulate(out, (fiber, key_a[1] + key_b[1] + level), product.scale(scalar))
    return out


def _check_pair(a: WeylElement, b: WeylElement, ordering: OrderingSpec) -> None:
    a._check(b)
    if ordering.dimension != a.dimension:
        raise DimensionMismatchError("ordering tensor does not match the chart dimension")


def fiberwise_product(a: WeylElement, b: WeylElement, ordering: OrderingSpec) -> WeylElement:
    """Exact mu-ordered fiber product truncated at the common budget."""

    _check_pair(a, b, ordering)
    return WeylElement(a.dimension, a.budget, _product_terms(a, b, ordering, a.budget))


def central_product(a: WeylElement, b: WeylElement, ordering: OrderingSpec) -> LambdaPoly:
    """sigma(a o b) without forming the fiber-dependent part of the product."""

    _check_pair(a, b, ordering)
    terms = _product_terms(a, b, ordering, a.budget, central_only=True)
    return LambdaPoly(a.dimension, a.budget // 2, {k[1]: v for k, v in terms.items()})


def form_product(alpha: WeylForm, beta: WeylForm, ordering: OrderingSpec) -> WeylForm:
    if alpha.dimension != beta.dimension or alpha.budget != beta.budget:
        raise BudgetError("forms with different chart or budget")
    degree = alpha.degree + beta.degree
    if degree > MAX_FORM_DEGREE:
        raise FormDegreeError("product form degree exceeds 3")
    out: dict[FormIndex, WeylElement] = {}
    for i, a in alpha._components.items():
        for j, b in beta._components.items():
            sign, ordered = sort_with_sign(i + j)
            if sign == 0:
                continue
            product = fiberwise_product(a, b, ordering)
            _accumulate(out, ordered, product if sign > 0 else -product)
    return WeylForm(alpha.dimension, alpha.budget, degree, out)


def graded_commutator(alpha: WeylForm, beta: WeylForm, ordering: OrderingSpec) -> WeylForm:
    forward = form_product(alpha, beta, ordering)
    backward = form_product(beta, alpha, ordering)
    if (alpha.degree * beta.degree) % 2:
        return forward + backward
    return forward - backward


def lambda_adjoint(gamma: WeylForm, alpha: WeylForm, ordering: OrderingSpec) -> WeylForm:
    """(i/lambda)[gamma, alpha]; exact through total degree budget - 1."""

    budget = alpha.budget
    wide = graded_commutator(gamma.with_budget(budget + 2), alpha.with_budget(budget + 2), ordering)
    return wide.shift_lambda(-1).scale(I_UNIT).with_budget(budget)


def delta_apply(alpha: WeylForm) -> WeylForm:
    """delta = dx^i ^ d/dy^i."""

    result = WeylForm.zero(alpha.dimension, alpha.budget, alpha.degree + 1)
    for axis in range(alpha.dimension):
        result = result + alpha.map(lambda e, axis=axis: e.fiber_diff(axis)).wedge_dx(axis)
    return result


def _interior(index: FormIndex, axis: int) -> tuple[int, FormIndex] | None:
    if axis not in index:
        return None
    position = index.index(axis)
    return (-1 if position % 2 else 1), index[:position] + index[position + 1 :]


def delta_inv_apply(alpha: WeylForm) -> WeylForm:
    """delta^-1 = (1/(s+p)) y^i iota(d/dx^i) on fiber degree s, form degree p."""

    if alpha.degree == 0:
        return WeylForm.zero(alpha.dimension, alpha.budget, 0)
    out: dict[FormIndex, dict[WeylKey, ChartPoly]] = {}
    for index, element in alpha._components.items():
        for (fiber, power), coefficient in element._terms.items():
            weight = Fraction(1, sum(fiber) + alpha.degree)
            for axis in index:
                sign, rest = _interior(index, axis)  # type: ignore[misc]
                raised = fiber[:axis] + (fiber[axis] + 1,) + fiber[axis + 1 :]
                value = coefficient.scale(weight * sign)
                _accumulate(out.setdefault(rest, {}), (raised, power), value)
    components = {k: WeylElement(alpha.dimension, alpha.budget, v) for k, v in out.items()}
    return WeylForm(alpha.dimension, alpha.budget, alpha.degree - 1, components)


def homotopy_projection(alpha: WeylForm) -> WeylForm:
    """sigma in delta delta^-1 + delta^-1 delta = id - sigma: fiber degree 0 and form degree 0."""

    if alpha.degree != 0:
        return WeylForm.zero(alpha.dimension, alpha.budget, alpha.degree)
    return alpha.map(lambda e: e.fiber_degree_part(0))


def central_part(value: WeylElement | WeylForm) -> LambdaPoly | WeylForm:
    """Projection onto fiber-degree-0 terms."""

    if isinstance(value, WeylElement):
        return value.central_part()
    return value.map(lambda e: e.fiber_degree_part(0))


def ordering_shift(alpha: WeylForm, sign: int, ordering: OrderingSpec) -> WeylForm:
    """exp(sign * lambda * S) applied componentwise, S = (1/4i) sigma^{ij} d_i d_j."""

    pairs = ordering.symmetric_pairs
    if not pairs:
        return alpha

    def apply_s(element: WeylElement) -> WeylElement:
        total = WeylElement.zero(element.dimension, element.budget)
        for i, j, c in pairs:
            total = total + element.fiber_diff(i).fiber_diff(j).scale(c)
        return total.shift_lambda(1)

    def shift(element: WeylElement) -> WeylElement:
        total = element
        current = element
        k = 0
        while not current.is_zero():
            k += 1
            current = apply_s(current).scale(Fraction(sign, k))
            total = total + current
        return total

    return alpha.map(shift)


class ConnectionData(Protocol):
    """What covariant_D needs from a validated setup."""

    is_validated: bool
    ordering: OrderingSpec

    def christoffel_action(self, m: int) -> tuple[tuple[int, int, ChartPoly], ...]: ...


def _nabla_component(element: WeylElement, m: int, action: tuple[tuple[int, int, ChartPoly], ...]) -> WeylElement:
    result = element.base_diff(m)
    for k, j, gamma in action:
        result = result - element.fiber_diff(k).fiber_multiply(j).mul_poly(gamma)
    return result


def nabla_apply(alpha: WeylForm, setup: ConnectionData) -> WeylForm:
    """Exterior covariant derivative with the Christoffel action on fiber indices."""

    result = WeylForm.zero(alpha.dimension, alpha.budget, alpha.degree + 1)
    for m in range(alpha.dimension):
        action = setup.christoffel_action(m)
        result = result + alpha.map(lambda e, m=m, action=action: _nabla_component(e, m, action)).wedge_dx(m)
    return result


def covariant_D(alpha: WeylForm, setup: ConnectionData) -> WeylForm:
    """D = nabla in Weyl mode and exp(lambda S) nabla exp(-lambda S) otherwise."""

    if not getattr(setup, "is_validated", False):
        raise UnvalidatedSetupError("covariant_D requires a setup returned by validate_setup")
    ordering = setup.ordering
    if ordering.is_symmetric_free:
        return nabla_apply(alpha, setup)
    return ordering_shift(nabla_apply(ordering_shift(alpha, -1, ordering), setup), 1, ordering)


__all__ = [
    "ConnectionData",
    "MAX_FORM_DEGREE",
    "Matrix",
    "OrderingSpec",
    "WeylElement",
    "WeylForm",
    "WeylKey",
    "central_part",
    "central_product",
    "covariant_D",
    "delta_apply",
    "delta_inv_apply",
    "fiberwise_product",
    "form_product",
    "graded_commutator",
    "homotopy_projection",
    "key_degree",
    "lambda_adjoint",
    "nabla_apply",
    "ordering_shift",
    "standard_ordered_mu",
]
