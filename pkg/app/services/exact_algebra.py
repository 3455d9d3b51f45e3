"""Exact Gaussian-rational scalars, chart polynomials and truncated lambda-series.

Coefficients live in sympy's ``QQ_I`` domain and polynomials are sparse
``PolyElement`` values of a ring cached per chart dimension. Everything here is
immutable after construction.
"""

from __future__ import annotations

import logging
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Union

import sympy as sp
from sympy.polys.domains import QQ, QQ_I
from sympy.polys.orderings import grlex
from sympy.polys.rings import PolyElement, PolyRing

from app.domain.errors import DimensionMismatchError

logger = logging.getLogger("fedosov.exact_algebra")

GaussRational = type(QQ_I.one)
Monomial = tuple[int, ...]
ScalarLike = Union[int, Fraction, GaussRational]

ZERO = QQ_I.zero
ONE = QQ_I.one
I_UNIT = QQ_I(0, 1)


def _rational(value: int | Fraction | str | sp.Rational) -> object:
    if isinstance(value, str):
        value = Fraction(value)
    if isinstance(value, sp.Basic):
        if not value.is_Rational:
            raise ValueError(f"not a rational number: {value}")
        return QQ(int(value.p), int(value.q))
    if isinstance(value, Fraction):
        return QQ(value.numerator, value.denominator)
    return QQ(int(value))


def gauss(re: int | Fraction | str | sp.Rational = 0, im: int | Fraction | str | sp.Rational = 0) -> GaussRational:
    """Build the exact scalar ``re + im*i``."""

    return QQ_I(_rational(re), _rational(im))


def as_scalar(value: ScalarLike) -> GaussRational:
    if isinstance(value, GaussRational):
        return value
    if isinstance(value, (int, Fraction)):
        return gauss(value)
    if isinstance(value, sp.Basic):
        return scalar_from_sympy(value)
    raise TypeError(f"unsupported scalar {value!r}")


def is_zero(value: GaussRational) -> bool:
    return value == ZERO


def real_part(value: GaussRational) -> Fraction:
    return Fraction(int(value.x.numerator), int(value.x.denominator))


def imag_part(value: GaussRational) -> Fraction:
    return Fraction(int(value.y.numerator), int(value.y.denominator))


def conjugate(value: GaussRational) -> GaussRational:
    return gauss(real_part(value), -imag_part(value))


def scalar_inverse(value: GaussRational) -> GaussRational:
    if is_zero(value):
        raise ZeroDivisionError("inverse of zero scalar")
    return QQ_I.quo(ONE, value)


def scalar_to_sympy(value: GaussRational) -> sp.Expr:
    return sp.Rational(real_part(value)) + sp.I * sp.Rational(imag_part(value))


def scalar_from_sympy(expr: sp.Expr) -> GaussRational:
    expr = sp.expand(sp.sympify(expr))
    re_part, im_part = sp.re(expr), sp.im(expr)
    if not (re_part.is_Rational and im_part.is_Rational):
        raise ValueError(f"not a Gaussian rational: {expr}")
    return gauss(re_part, im_part)


def _format_fraction(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def format_scalar(value: GaussRational) -> str:
    """Render as ``3/2``, ``-i``, ``1/2+1/3i``."""

    a, b = real_part(value), imag_part(value)
    if b == 0:
        return _format_fraction(a)
    if b == 1:
        imag = "i"
    elif b == -1:
        imag = "-i"
    else:
        imag = f"{_format_fraction(b)}i"
    if a == 0:
        return imag
    sign = "" if imag.startswith("-") else "+"
    return f"{_format_fraction(a)}{sign}{imag}"


@lru_cache(maxsize=None)
def chart_ring(dimension: int) -> PolyRing:
    """Polynomial ring in ``x1..x<dimension>`` over the Gaussian rationals."""

    if dimension < 1:
        raise ValueError("chart dimension must be positive")
    names = ",".join(f"x{k}" for k in range(1, dimension + 1))
    return PolyRing(names, QQ_I, grlex)


def _check_axis(axis: int, dimension: int) -> None:
    if not 0 <= axis < dimension:
        raise IndexError(f"axis {axis} out of range for dimension {dimension}")


class ChartPoly:
    """Exact polynomial in the chart coordinates with Gaussian-rational coefficients."""

    __slots__ = ("_poly",)

    def __init__(self, poly: PolyElement) -> None:
        self._poly = poly

    # construction
    @classmethod
    def zero(cls, dimension: int) -> "ChartPoly":
        return cls(chart_ring(dimension).zero)

    @classmethod
    def one(cls, dimension: int) -> "ChartPoly":
        return cls(chart_ring(dimension).one)

    @classmethod
    def constant(cls, dimension: int, value: ScalarLike) -> "ChartPoly":
        ring = chart_ring(dimension)
        return cls(ring.from_dict({(0,) * dimension: as_scalar(value)}))

    @classmethod
    def coordinate(cls, dimension: int, axis: int) -> "ChartPoly":
        _check_axis(axis, dimension)
        return cls(chart_ring(dimension).gens[axis])

    @classmethod
    def monomial(cls, exponents: Monomial, coefficient: ScalarLike = 1) -> "ChartPoly":
        ring = chart_ring(len(exponents))
        return cls(ring.from_dict({tuple(exponents): as_scalar(coefficient)}))

    @classmethod
    def from_terms(cls, dimension: int, terms: Mapping[Monomial, ScalarLike]) -> "ChartPoly":
        ring = chart_ring(dimension)
        cleaned = {}
        for exponents, coefficient in terms.items():
            if len(exponents) != dimension:
                raise DimensionMismatchError(
                    f"monomial {exponents} does not match dimension {dimension}"
                )
            value = as_scalar(coefficient)
            if not is_zero(value):
                cleaned[tuple(exponents)] = value
        return cls(ring.from_dict(cleaned))

    # inspection
    @property
    def dimension(self) -> int:
        return self._poly.ring.ngens

    @property
    def terms(self) -> dict[Monomial, GaussRational]:
        return {monom: coeff for monom, coeff in self._poly.items() if not is_zero(coeff)}

    def items(self) -> Iterator[tuple[Monomial, GaussRational]]:
        return iter(sorted(self.terms.items(), key=lambda kv: (-sum(kv[0]), tuple(-e for e in kv[0]))))

    @property
    def total_degree(self) -> int:
        return max((sum(m) for m in self.terms), default=-1)

    def coefficient(self, exponents: Monomial) -> GaussRational:
        return self._poly.get(tuple(exponents), ZERO)

    def constant_term(self) -> GaussRational:
        return self.coefficient((0,) * self.dimension)

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(sum(m) == 0 for m in self.terms)

    def depends_on(self, axis: int) -> bool:
        return any(m[axis] for m in self.terms)

    @property
    def raw(self) -> PolyElement:
        return self._poly

    # arithmetic
    def _check(self, other: "ChartPoly") -> None:
        if self.dimension != other.dimension:
            raise DimensionMismatchError(
                f"dimension mismatch: {self.dimension} vs {other.dimension}",
                {"left": self.dimension, "right": other.dimension},
            )

    def __add__(self, other: "ChartPoly") -> "ChartPoly":
        if not isinstance(other, ChartPoly):
            return NotImplemented
        self._check(other)
        return ChartPoly(self._poly + other._poly)

    def __sub__(self, other: "ChartPoly") -> "ChartPoly":
        if not isinstance(other, ChartPoly):
            return NotImplemented
        self._check(other)
        return ChartPoly(self._poly - other._poly)

    def __neg__(self) -> "ChartPoly":
        return ChartPoly(-self._poly)

    def __mul__(self, other: object) -> "ChartPoly":
        if isinstance(other, ChartPoly):
            self._check(other)
            return ChartPoly(self._poly * other._poly)
        if isinstance(other, (int, Fraction, GaussRational)):
            return self.scale(other)
        return NotImplemented

    def __rmul__(self, other: object) -> "ChartPoly":
        if isinstance(other, (int, Fraction, GaussRational)):
            return self.scale(other)
        return NotImplemented

    def __pow__(self, exponent: int) -> "ChartPoly":
        if exponent < 0:
            raise ValueError("negative power of a polynomial")
        return ChartPoly(self._poly**exponent)

    def scale(self, value: ScalarLike) -> "ChartPoly":
        scalar = as_scalar(value)
        if is_zero(scalar):
            return ChartPoly.zero(self.dimension)
        return ChartPoly(self._poly.mul_ground(scalar))

    def diff(self, axis: int) -> "ChartPoly":
        _check_axis(axis, self.dimension)
        return ChartPoly(self._poly.diff(self._poly.ring.gens[axis]))

    def restrict(self, axes: Iterable[int]) -> "ChartPoly":
        zeroed = tuple(sorted(set(axes)))
        for axis in zeroed:
            _check_axis(axis, self.dimension)
        kept = {m: c for m, c in self._poly.items() if all(m[a] == 0 for a in zeroed)}
        return ChartPoly(self._poly.ring.from_dict(kept))

    def evaluate_sympy(self, symbols: list[sp.Symbol]) -> sp.Expr:
        total = sp.Integer(0)
        for monom, coeff in self.items():
            term = scalar_to_sympy(coeff)
            for symbol, power in zip(symbols, monom):
                if power:
                    term *= symbol**power
            total += term
        return total

    # protocol
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ChartPoly):
            return NotImplemented
        return self.dimension == other.dimension and self.terms == other.terms

    def __hash__(self) -> int:
        return hash((self.dimension, frozenset(self.terms.items())))

    def __bool__(self) -> bool:
        return not self.is_zero()

    def __str__(self) -> str:
        return format_poly(self)

    def __repr__(self) -> str:
        return f"ChartPoly({format_poly(self)!r}, dim={self.dimension})"


def format_monomial(exponents: Monomial, prefix: str = "x") -> str:
    parts = []
    for index, power in enumerate(exponents, start=1):
        if power == 1:
            parts.append(f"{prefix}{index}")
        elif power > 1:
            parts.append(f"{prefix}{index}^{power}")
    return "*".join(parts)


def format_term(coefficient: GaussRational, factors: str) -> str:
    """Signed term text; the caller joins terms with the returned sign."""

    text = format_scalar(coefficient)
    compound = real_part(coefficient) != 0 and imag_part(coefficient) != 0
    if not factors:
        return f"({text})" if compound else text
    if compound:
        return f"({text})*{factors}"
    if text == "1":
        return factors
    if text == "-1":
        return f"-{factors}"
    if text == "i":
        return f"i*{factors}"
    if text == "-i":
        return f"-i*{factors}"
    return f"{text}*{factors}"


def join_terms(terms: list[str]) -> str:
    if not terms:
        return "0"
    out = terms[0]
    for term in terms[1:]:
        if term.startswith("-"):
            out += f" - {term[1:]}"
        else:
            out += f" + {term}"
    return out


def format_poly(poly: ChartPoly) -> str:
    """Deterministic literal text accepted back by the literal parser."""

    return join_terms([format_term(c, format_monomial(m)) for m, c in poly.items()])


class ArithOp(str, Enum):
    ADD = "add"
    MUL = "mul"
    SCALE = "scale"


class LambdaPoly:
    """Formal series in lambda with ChartPoly coefficients, truncated above ``order``."""

    __slots__ = ("dimension", "order", "_coefficients")

    def __init__(self, dimension: int, order: int, coefficients: Mapping[int, ChartPoly] | None = None) -> None:
        if order < 0:
            raise ValueError("truncation order must be non-negative")
        self.dimension = dimension
        self.order = order
        cleaned: dict[int, ChartPoly] = {}
        for power, poly in (coefficients or {}).items():
            if power < 0:
                raise ValueError("negative lambda power")
            if poly.dimension != dimension:
                raise DimensionMismatchError(
                    f"coefficient of lambda^{power} has dimension {poly.dimension}, expected {dimension}"
                )
            if power <= order and not poly.is_zero():
                cleaned[power] = poly
        self._coefficients = cleaned

    @classmethod
    def zero(cls, dimension: int, order: int) -> "LambdaPoly":
        return cls(dimension, order)

    @classmethod
    def from_poly(cls, poly: ChartPoly, order: int, power: int = 0) -> "LambdaPoly":
        return cls(poly.dimension, order, {power: poly})

    @property
    def coefficients(self) -> dict[int, ChartPoly]:
        return dict(sorted(self._coefficients.items()))

    def coefficient(self, power: int) -> ChartPoly:
        return self._coefficients.get(power, ChartPoly.zero(self.dimension))

    def is_zero(self) -> bool:
        return not self._coefficients

    def lowest_power(self) -> int | None:
        return min(self._coefficients, default=None)

    def _check(self, other: "LambdaPoly") -> None:
        if self.dimension != other.dimension:
            raise DimensionMismatchError(
                f"dimension mismatch: {self.dimension} vs {other.dimension}",
                {"left": self.dimension, "right": other.dimension},
            )
        if self.order != other.order:
            raise DimensionMismatchError(
                f"truncation order mismatch: {self.order} vs {other.order}",
                {"left": self.order, "right": other.order},
            )

    def __add__(self, other: "LambdaPoly") -> "LambdaPoly":
        if not isinstance(other, LambdaPoly):
            return NotImplemented
        self._check(other)
        out = dict(self._coefficients)
        for power, poly in other._coefficients.items():
            out[power] = out[power] + poly if power in out else poly
        return LambdaPoly(self.dimension, self.order, out)

    def __neg__(self) -> "LambdaPoly":
        return LambdaPoly(self.dimension, self.order, {k: -v for k, v in self._coefficients.items()})

    def __sub__(self, other: "LambdaPoly") -> "LambdaPoly":
        if not isinstance(other, LambdaPoly):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other: object) -> "LambdaPoly":
        if isinstance(other, LambdaPoly):
            self._check(other)
            out: dict[int, ChartPoly] = {}
            for i, a in self._coefficients.items():
                for j, b in other._coefficients.items():
                    if i + j > self.order:
                        continue
                    product = a * b
                    out[i + j] = out[i + j] + product if i + j in out else product
            return LambdaPoly(self.dimension, self.order, out)
        if isinstance(other, (int, Fraction, GaussRational)):
            return self.scale(other)
        return NotImplemented

    def __rmul__(self, other: object) -> "LambdaPoly":
        if isinstance(other, (int, Fraction, GaussRational)):
            return self.scale(other)
        return NotImplemented

    def scale(self, value: ScalarLike) -> "LambdaPoly":
        return LambdaPoly(self.dimension, self.order, {k: v.scale(value) for k, v in self._coefficients.items()})

    def mul_poly(self, poly: ChartPoly) -> "LambdaPoly":
        return LambdaPoly(self.dimension, self.order, {k: v * poly for k, v in self._coefficients.items()})

    def shift(self, power: int) -> "LambdaPoly":
        """Multiply by lambda^power (power may be negative if divisible)."""

        if power < 0 and any(k + power < 0 for k in self._coefficients):
            raise ValueError("series not divisible by the requested lambda power")
        return LambdaPoly(self.dimension, self.order, {k + power: v for k, v in self._coefficients.items()})

    def truncate(self, order: int) -> "LambdaPoly":
        return LambdaPoly(self.dimension, order, self._coefficients)

    def diff(self, axis: int) -> "LambdaPoly":
        return LambdaPoly(self.dimension, self.order, {k: v.diff(axis) for k, v in self._coefficients.items()})

    def restrict(self, axes: Iterable[int]) -> "LambdaPoly":
        zeroed = tuple(axes)
        return LambdaPoly(self.dimension, self.order, {k: v.restrict(zeroed) for k, v in self._coefficients.items()})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LambdaPoly):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and self.order == other.order
            and self._coefficients == other._coefficients
        )

    def __hash__(self) -> int:
        return hash((self.dimension, self.order, frozenset(self._coefficients.items())))

    def __str__(self) -> str:
        if not self._coefficients:
            return "0"
        parts = []
        for power, poly in sorted(self._coefficients.items()):
            label = "" if power == 0 else ("lam" if power == 1 else f"lam^{power}")
            body = format_poly(poly)
            parts.append(body if not label else f"{label}*({body})")
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"LambdaPoly({self}, order={self.order})"


def poly_arith(a: ChartPoly | LambdaPoly, b: ChartPoly | LambdaPoly | ScalarLike, op: ArithOp | str) -> ChartPoly | LambdaPoly:
    """Add, multiply or scale exact polynomials of matching shape."""

    op = ArithOp(op)
    if op is ArithOp.SCALE:
        return a.scale(b)  # type: ignore[arg-type]
    if type(a) is not type(b):
        raise DimensionMismatchError(f"cannot combine {type(a).__name__} with {type(b).__name__}")
    if op is ArithOp.ADD:
        return a + b  # type: ignore[operator]
    return a * b  # type: ignore[operator]


def poly_diff(p: ChartPoly, axis: int) -> ChartPoly:
    return p.diff(axis)


def restrict_to_subspace(p: ChartPoly | LambdaPoly, axes: Iterable[int]) -> ChartPoly | LambdaPoly:
    """Substitute zero for every coordinate in ``axes``."""

    return p.restrict(axes)


def monomials_up_to(dimension: int, degree: int) -> list[Monomial]:
    """All exponent vectors of total degree <= ``degree`` in a fixed order."""

    out: list[Monomial] = []

    def build(prefix: tuple[int, ...], remaining: int) -> None:
        if len(prefix) == dimension:
            out.append(prefix)
            return
        for power in range(remaining + 1):
            build(prefix + (power,), remaining - power)

    build((), degree)
    return sorted(out, key=lambda m: (sum(m), tuple(-e for e in m)))


__all__ = [
    "ArithOp",
    "ChartPoly",
    "GaussRational",
    "I_UNIT",
    "LambdaPoly",
    "Monomial",
    "ONE",
    "ZERO",
    "as_scalar",
    "chart_ring",
    "conjugate",
    "format_monomial",
    "format_poly",
    "format_scalar",
    "format_term",
    "gauss",
    "imag_part",
    "is_zero",
    "join_terms",
    "monomials_up_to",
    "poly_arith",
    "poly_diff",
    "real_part",
    "restrict_to_subspace",
    "scalar_from_sympy",
    "scalar_inverse",
    "scalar_to_sympy",
]
