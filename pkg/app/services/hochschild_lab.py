"""Differential Hochschild complex of the polynomial algebra on a chart."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import product as cartesian
from math import comb, factorial
from typing import Callable, Iterator, Mapping, Protocol, Sequence

from app.config import settings
from app.domain.errors import DimensionMismatchError, StructuralError
from app.services.exact_algebra import (
    ChartPoly,
    GaussRational,
    Monomial,
    ScalarLike,
    as_scalar,
    format_poly,
    gauss,
    is_zero,
    monomials_up_to,
)
from app.services.scalar_forms import ScalarForm, poincare_primitive

logger = logging.getLogger("fedosov.hochschild_lab")

OpKey = tuple[Monomial, ...]
Matrix = Sequence[Sequence[GaussRational]]


def _unit(dimension: int, axis: int) -> Monomial:
    return tuple(1 if k == axis else 0 for k in range(dimension))


def _splits(alpha: Monomial, parts: int) -> Iterator[tuple[tuple[Monomial, ...], int]]:
    """All ways to write alpha as an ordered sum of ``parts`` multi-indices, with multinomial weight."""

    per_axis = []
    for power in alpha:
        options = []
        for combo in _compositions(power, parts):
            weight = 1
            remaining = power
            for piece in combo:
                weight *= comb(remaining, piece)
                remaining -= piece
            options.append((combo, weight))
        per_axis.append(options)
    for choice in cartesian(*per_axis):
        weight = 1
        for _, w in choice:
            weight *= w
        pieces = tuple(tuple(choice[axis][0][part] for axis in range(len(alpha))) for part in range(parts))
        yield pieces, weight


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _add(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x + y for x, y in zip(a, b))


def _derivative(poly: ChartPoly, alpha: Monomial) -> ChartPoly:
    for axis, power in enumerate(alpha):
        for _ in range(power):
            poly = poly.diff(axis)
    return poly


class MultiDiffOp:
    """Multidifferential operator sum_K c_K(x) d^{K_1} f_1 ... d^{K_m} f_m."""

    __slots__ = ("dimension", "arity", "_table")

    def __init__(self, dimension: int, arity: int, table: Mapping[OpKey, ChartPoly] | None = None) -> None:
        self.dimension = dimension
        self.arity = arity
        cleaned: dict[OpKey, ChartPoly] = {}
        for key, value in (table or {}).items():
            if len(key) != arity or any(len(alpha) != dimension for alpha in key):
                raise DimensionMismatchError(f"cochain key {key} does not match arity {arity}, dimension {dimension}")
            if value.is_zero():
                continue
            key = tuple(tuple(alpha) for alpha in key)
            cleaned[key] = cleaned[key] + value if key in cleaned else value
        self._table = {k: v for k, v in cleaned.items() if not v.is_zero()}

    # construction
    @classmethod
    def zero(cls, dimension: int, arity: int) -> "MultiDiffOp":
        return cls(dimension, arity)

    @classmethod
    def identity(cls, dimension: int) -> "MultiDiffOp":
        return cls(dimension, 1, {((0,) * dimension,): ChartPoly.one(dimension)})

    @classmethod
    def multiplication(cls, dimension: int) -> "MultiDiffOp":
        zero = (0,) * dimension
        return cls(dimension, 2, {(zero, zero): ChartPoly.one(dimension)})

    @classmethod
    def vector_field(cls, components: Sequence[ChartPoly]) -> "MultiDiffOp":
        dimension = len(components)
        return cls(dimension, 1, {(_unit(dimension, c),): v for c, v in enumerate(components)})

    @classmethod
    def poisson_bracket(cls, poisson: Matrix) -> "MultiDiffOp":
        dimension = len(poisson)
        table = {
            (_unit(dimension, i), _unit(dimension, j)): ChartPoly.constant(dimension, poisson[i][j])
            for i in range(dimension)
            for j in range(dimension)
            if not is_zero(poisson[i][j])
        }
        return cls(dimension, 2, table)

    @classmethod
    def from_two_form(cls, form: ScalarForm, poisson: Matrix) -> "MultiDiffOp":
        """(f, g) -> beta(X f, X g) with (X f)^i = pi^{il} d_l f."""

        dimension = form.dimension
        table: dict[OpKey, ChartPoly] = {}
        for a in range(dimension):
            for b in range(dimension):
                total = ChartPoly.zero(dimension)
                for (i, j), value in form.components.items():
                    weight = poisson[i][a] * poisson[j][b] - poisson[j][a] * poisson[i][b]
                    if not is_zero(weight):
                        total = total + value.scale(weight)
                if not total.is_zero():
                    table[(_unit(dimension, a), _unit(dimension, b))] = total
        return cls(dimension, 2, table)

    # inspection
    @property
    def table(self) -> dict[OpKey, ChartPoly]:
        return dict(sorted(self._table.items(), key=lambda kv: (sum(sum(a) for a in kv[0]), kv[0])))

    def coefficient(self, key: Sequence[Monomial]) -> ChartPoly:
        return self._table.get(tuple(tuple(a) for a in key), ChartPoly.zero(self.dimension))

    def is_zero(self) -> bool:
        return not self._table

    def order_in(self, argument: int) -> int:
        return max((sum(key[argument]) for key in self._table), default=0)

    def orders(self) -> tuple[int, ...]:
        return tuple(self.order_in(a) for a in range(self.arity))

    # arithmetic
    def _check(self, other: "MultiDiffOp") -> None:
        if (self.dimension, self.arity) != (other.dimension, other.arity):
            raise DimensionMismatchError(
                f"cochains of different shape: ({self.dimension},{self.arity}) vs ({other.dimension},{other.arity})"
            )

    def __add__(self, other: "MultiDiffOp") -> "MultiDiffOp":
        self._check(other)
        out = dict(self._table)
        for k, v in other._table.items():
            out[k] = out[k] + v if k in out else v
        return MultiDiffOp(self.dimension, self.arity, out)

    def __neg__(self) -> "MultiDiffOp":
        return MultiDiffOp(self.dimension, self.arity, {k: -v for k, v in self._table.items()})

    def __sub__(self, other: "MultiDiffOp") -> "MultiDiffOp":
        return self + (-other)

    def scale(self, value: ScalarLike) -> "MultiDiffOp":
        scalar = as_scalar(value)
        return MultiDiffOp(self.dimension, self.arity, {k: v.scale(scalar) for k, v in self._table.items()})

    def mul_poly(self, poly: ChartPoly) -> "MultiDiffOp":
        return MultiDiffOp(self.dimension, self.arity, {k: v * poly for k, v in self._table.items()})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MultiDiffOp):
            return NotImplemented
        return (self.dimension, self.arity, self._table) == (other.dimension, other.arity, other._table)

    def __hash__(self) -> int:
        return hash((self.dimension, self.arity, frozenset(self._table.items())))

    def __repr__(self) -> str:
        return f"MultiDiffOp(arity={self.arity}, terms={len(self._table)})"

    # evaluation
    def apply(self, *arguments: ChartPoly) -> ChartPoly:
        if len(arguments) != self.arity:
            raise DimensionMismatchError(f"cochain of arity {self.arity} applied to {len(arguments)} arguments")
        total = ChartPoly.zero(self.dimension)
        for key, coefficient in self._table.items():
            term = coefficient
            for alpha, argument in zip(key, arguments):
                term = term * _derivative(argument, alpha)
                if term.is_zero():
                    break
            total = total + term
        return total

    # structural operations
    def insert(self, position: int, inner: "MultiDiffOp") -> "MultiDiffOp":
        """C(f_0, .., inner(f_i, .., f_{i+l}), ..) expanded with the Leibniz rule."""

        if self.dimension != inner.dimension:
            raise DimensionMismatchError("cochains on different charts")
        out: dict[OpKey, ChartPoly] = {}
        for key, coefficient in self._table.items():
            alpha = key[position]
            for inner_key, inner_coefficient in inner._table.items():
                for pieces, weight in _splits(alpha, inner.arity + 1):
                    new_key = key[:position] + tuple(_add(b, pieces[m + 1]) for m, b in enumerate(inner_key)) + key[position + 1 :]
                    value = (coefficient * _derivative(inner_coefficient, pieces[0])).scale(weight)
                    if value.is_zero():
                        continue
                    out[new_key] = out[new_key] + value if new_key in out else value
        return MultiDiffOp(self.dimension, self.arity + inner.arity - 1, out)

    def merge_product(self, position: int) -> "MultiDiffOp":
        """C(.., f_i f_{i+1}, ..): arity grows by one."""

        out: dict[OpKey, ChartPoly] = {}
        for key, coefficient in self._table.items():
            for (left, right), weight in _splits(key[position], 2):
                new_key = key[:position] + (left, right) + key[position + 1 :]
                value = coefficient.scale(weight)
                out[new_key] = out[new_key] + value if new_key in out else value
        return MultiDiffOp(self.dimension, self.arity + 1, out)

    def left_multiply(self) -> "MultiDiffOp":
        zero = (0,) * self.dimension
        return MultiDiffOp(self.dimension, self.arity + 1, {(zero,) + k: v for k, v in self._table.items()})

    def right_multiply(self) -> "MultiDiffOp":
        zero = (0,) * self.dimension
        return MultiDiffOp(self.dimension, self.arity + 1, {k + (zero,): v for k, v in self._table.items()})

    def swapped(self) -> "MultiDiffOp":
        if self.arity != 2:
            raise DimensionMismatchError("argument swap is defined for bidifferential operators")
        return MultiDiffOp(self.dimension, 2, {(k[1], k[0]): v for k, v in self._table.items()})

    def antisymmetric_part(self) -> "MultiDiffOp":
        return (self - self.swapped()).scale(Fraction(1, 2))

    def symmetric_part(self) -> "MultiDiffOp":
        return (self + self.swapped()).scale(Fraction(1, 2))


def hochschild_b(cochain: MultiDiffOp) -> MultiDiffOp:
    """bC(f_0..f_m) = f_0 C(f_1..) + sum_i (-1)^i C(.., f_{i-1} f_i, ..) + (-1)^{m+1} C(..) f_m."""

    m = cochain.arity
    result = cochain.left_multiply()
    for i in range(1, m + 1):
        merged = cochain.merge_product(i - 1)
        result = result + merged if i % 2 == 0 else result - merged
    tail = cochain.right_multiply()
    return result + tail if (m + 1) % 2 == 0 else result - tail


def gerstenhaber_composition(outer: MultiDiffOp, inner: MultiDiffOp) -> MultiDiffOp:
    """sum_i (-1)^{i |inner|} outer(.., inner(f_i..), ..) with |C| = arity - 1."""

    inner_degree = inner.arity - 1
    result = MultiDiffOp.zero(outer.dimension, outer.arity + inner.arity - 1)
    for i in range(outer.arity):
        inserted = outer.insert(i, inner)
        result = result - inserted if (i * inner_degree) % 2 else result + inserted
    return result


def gerstenhaber_bracket(left: MultiDiffOp, right: MultiDiffOp) -> MultiDiffOp:
    """[C, C'] = C o C' - (-1)^{|C||C'|} C' o C."""

    sign = ((left.arity - 1) * (right.arity - 1)) % 2
    forward = gerstenhaber_composition(left, right)
    backward = gerstenhaber_composition(right, left)
    return forward + backward if sign else forward - backward


def associativity_residual(coefficients: Sequence[MultiDiffOp], n: int) -> MultiDiffOp:
    """Order-n associativity equation: sum_{i=1}^{n-1} [star_i, star_{n-i}] - 2 b star_n.

    With bC = -[C, mu_0] this is the order-n part of [star, star], which
    vanishes exactly when the product is associative at order n.
    """

    if n < 1 or n >= len(coefficients):
        raise ValueError(f"need star_0..star_{n}, got {len(coefficients)} coefficients")
    residual = hochschild_b(coefficients[n]).scale(-2)
    for i in range(1, n):
        residual = residual + gerstenhaber_bracket(coefficients[i], coefficients[n - i])
    return residual


@dataclass(frozen=True)
class ResidualWitness:
    arguments: tuple[Monomial, ...]
    value: ChartPoly

    def describe(self) -> str:
        args = ", ".join("x^" + str(a) for a in self.arguments)
        return f"({args}) -> {format_poly(self.value)}"


def residual_witness(operator: MultiDiffOp) -> ResidualWitness | None:
    """Monomial arguments on which a nonzero operator evaluates to a nonzero polynomial."""

    if operator.is_zero():
        return None
    key = next(iter(operator.table))
    arguments = tuple(ChartPoly.monomial(alpha) for alpha in key)
    return ResidualWitness(key, operator.apply(*arguments))


def hkr_antisymmetrize(cochain: MultiDiffOp, omega: Matrix) -> ScalarForm:
    """Antisymmetric first-order part B as the 2-form beta = (pi^T)^{-1} B pi^{-1} = -omega B omega."""

    if cochain.arity != 2:
        raise DimensionMismatchError("HKR antisymmetrization takes a bidifferential operator")
    dimension = cochain.dimension
    half = gauss(Fraction(1, 2))
    bivector: dict[tuple[int, int], ChartPoly] = {}
    for a in range(dimension):
        for b in range(dimension):
            forward = cochain.coefficient((_unit(dimension, a), _unit(dimension, b)))
            backward = cochain.coefficient((_unit(dimension, b), _unit(dimension, a)))
            value = (forward - backward).scale(half)
            if not value.is_zero():
                bivector[(a, b)] = value
    components: dict[tuple[int, int], ChartPoly] = {}
    for i in range(dimension):
        for j in range(i + 1, dimension):
            total = ChartPoly.zero(dimension)
            for (a, b), value in bivector.items():
                weight = omega[i][a] * omega[b][j]
                if not is_zero(weight):
                    total = total - value.scale(weight)
            if not total.is_zero():
                components[(i, j)] = total
    return ScalarForm(dimension, 2, components)


class BidifferentialSource(Protocol):
    """Anything exposing extracted star-product coefficients."""

    @property
    def dimension(self) -> int: ...

    @property
    def omega(self) -> Matrix: ...

    @property
    def poisson(self) -> Matrix: ...

    def bidifferential(self, order: int) -> MultiDiffOp: ...


@dataclass(frozen=True)
class LichnerowiczSplit:
    """Order-k difference of two products split into a closed-form part and a coboundary candidate."""

    order: int
    alpha: ScalarForm
    class_form: ScalarForm
    hkr_form: ScalarForm
    residual: MultiDiffOp
    certified: bool


def lichnerowicz_split(star_a: BidifferentialSource, star_b: BidifferentialSource, k: int) -> LichnerowiczSplit:
    """Split star_b - star_a at order k; class form 2i*HKR(difference) = d alpha."""

    if star_a.dimension != star_b.dimension:
        raise DimensionMismatchError("products on different charts")
    for j in range(k):
        if star_a.bidifferential(j) != star_b.bidifferential(j):
            raise StructuralError(f"products differ at order {j} < {k}", {"order": j})
    difference = star_b.bidifferential(k) - star_a.bidifferential(k)
    coboundary = hochschild_b(difference)
    if not coboundary.is_zero():
        witness = residual_witness(coboundary)
        raise StructuralError(
            f"order-{k} difference is not a Hochschild cocycle",
            {"order": k, "witness": witness.describe() if witness else None},
        )
    beta = hkr_antisymmetrize(difference, star_a.omega)
    if not beta.is_closed():
        raise StructuralError(f"antisymmetrized order-{k} difference is not closed", {"order": k})
    class_form = beta.scale(gauss(0, 2))
    if class_form.is_zero():
        alpha = ScalarForm.zero(star_a.dimension, 1)
    else:
        alpha = poincare_primitive(class_form, check_closed=False)
    residual = difference - MultiDiffOp.from_two_form(beta, star_a.poisson)
    certified = hkr_antisymmetrize(residual, star_a.omega).is_zero()
    logger.info("Lichnerowicz split at order %d: alpha %s, certified=%s", k, "zero" if alpha.is_zero() else "nonzero", certified)
    return LichnerowiczSplit(k, alpha, class_form, beta, residual, certified)


def random_cochain(rng: random.Random, dimension: int, arity: int, max_order: int | None = None, terms: int = 3, max_degree: int = 2) -> MultiDiffOp:
    """Seeded random cochain with small integer coefficients (test and verify helper)."""

    max_order = settings.max_diff_order if max_order is None else max_order
    indices = monomials_up_to(dimension, max_order)
    coefficients = monomials_up_to(dimension, max_degree)
    table: dict[OpKey, ChartPoly] = {}
    for _ in range(terms):
        key = tuple(rng.choice(indices) for _ in range(arity))
        poly = ChartPoly.monomial(rng.choice(coefficients), rng.randint(-3, 3))
        table[key] = table[key] + poly if key in table else poly
    return MultiDiffOp(dimension, arity, table)


def _falling(power: Monomial, alpha: Monomial) -> int:
    """d^alpha x^power = falling(power, alpha) * x^(power - alpha)."""

    out = 1
    for p, a in zip(power, alpha):
        for step in range(a):
            out *= p - step
    return out


def tabulate_bidifferential(
    evaluator: Callable[[ChartPoly, ChartPoly], ChartPoly],
    dimension: int,
    sample_degree: int,
) -> MultiDiffOp:
    """Recover c_{alpha,beta}(x) of a bidifferential operator from its values on monomials.

    Pairs are processed so that every (alpha, beta) <= (a, b) is already known;
    the value on (x^a, x^b) minus the known contributions is a! b! c_{a,b}.
    """

    samples = monomials_up_to(dimension, sample_degree)
    table: dict[OpKey, ChartPoly] = {}
    for a in samples:
        for b in samples:
            value = evaluator(ChartPoly.monomial(a), ChartPoly.monomial(b))
            for (alpha, beta), known in table.items():
                if (alpha, beta) == (a, b):
                    continue
                if any(x > y for x, y in zip(alpha, a)) or any(x > y for x, y in zip(beta, b)):
                    continue
                rest = tuple(p - q for p, q in zip(a, alpha)), tuple(p - q for p, q in zip(b, beta))
                weight = _falling(a, alpha) * _falling(b, beta)
                value = value - known * ChartPoly.monomial(_add(rest[0], rest[1]), weight)
            if value.is_zero():
                continue
            table[(a, b)] = value.scale(Fraction(1, _falling(a, a) * _falling(b, b)))
    return MultiDiffOp(dimension, 2, table)


@dataclass(frozen=True)
class NaturalnessCertificate:
    """Order bounds observed on an extracted coefficient star_k."""

    order: int
    sample_degree: int
    max_orders: tuple[int, int]
    offending: tuple[OpKey, ...]

    @property
    def natural(self) -> bool:
        return not self.offending


def naturalness_certificate(operator: MultiDiffOp, k: int, sample_degree: int) -> NaturalnessCertificate:
    """star_k must have order <= k in each argument and, for k >= 1, no zeroth-order slot."""

    offending = []
    for key in operator.table:
        left, right = sum(key[0]), sum(key[1])
        if left > k or right > k or (k >= 1 and (left == 0 or right == 0)):
            offending.append(key)
    return NaturalnessCertificate(k, sample_degree, operator.orders(), tuple(offending))


def constant_ordering_coefficient(mu: Matrix, k: int) -> MultiDiffOp:
    """(1/k!)(1/2i)^k mu^{i1 j1}..mu^{ik jk} d_{i..} f d_{j..} g: the flat product for a constant tensor."""

    dimension = len(mu)
    zero = (0,) * dimension
    current: dict[OpKey, GaussRational] = {(zero, zero): gauss(1)}
    for _ in range(k):
        nxt: dict[OpKey, GaussRational] = {}
        for (alpha, beta), value in current.items():
            for i in range(dimension):
                for j in range(dimension):
                    if is_zero(mu[i][j]):
                        continue
                    key = (_add(alpha, _unit(dimension, i)), _add(beta, _unit(dimension, j)))
                    nxt[key] = nxt.get(key, gauss(0)) + value * mu[i][j]
        current = nxt
    factor = gauss(Fraction(1, factorial(k)))
    for _ in range(k):
        factor = factor * gauss(0, Fraction(-1, 2))
    return MultiDiffOp(
        dimension,
        2,
        {key: ChartPoly.constant(dimension, value * factor) for key, value in current.items() if not is_zero(value)},
    )

__all__ = [
    "BidifferentialSource",
    "NaturalnessCertificate",
    "constant_ordering_coefficient",
    "tabulate_bidifferential",
    "LichnerowiczSplit",
    "MultiDiffOp",
    "OpKey",
    "ResidualWitness",
    "associativity_residual",
    "gerstenhaber_bracket",
    "gerstenhaber_composition",
    "hkr_antisymmetrize",
    "hochschild_b",
    "naturalness_certificate",
    "lichnerowicz_split",
    "random_cochain",
    "residual_witness",
]
