"""Adapted star products: ideal scans, quotient modules on L, equivalences and holonomy twists.

The chart model fixes L = {p = 0}; its vanishing ideal is generated by the
coordinates listed in ``setup.lagrangian`` and restriction to L drops every
monomial that contains one of them.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Iterable, Iterator, Mapping, Protocol, Sequence, Union

import sympy as sp

from app.config import settings
from app.domain.errors import BudgetError, DimensionMismatchError, StructuralError
from app.services.bohr_sommerfeld import LoopPath, liouville_integral
from app.services.exact_algebra import (
    ChartPoly,
    LambdaPoly,
    Monomial,
    format_poly,
    gauss,
    is_zero,
    monomials_up_to,
)
from app.services.fedosov_engine import StarProduct
from app.services.geometry_spec import QuantizationSetup
from app.services.hochschild_lab import (
    LichnerowiczSplit,
    MultiDiffOp,
    hkr_antisymmetrize,
    lichnerowicz_split,
    tabulate_bidifferential,
)
from app.services.scalar_forms import ScalarForm
from app.services.weyl_calculus import Matrix

logger = logging.getLogger("fedosov.adapted_quantization")

Series = Union[ChartPoly, LambdaPoly]
ClosedOneForm = Union[ScalarForm, Mapping[int, sp.Expr]]


class Product(Protocol):
    """Anything that multiplies lambda-series on a validated setup."""

    @property
    def dimension(self) -> int: ...

    @property
    def order(self) -> int: ...

    @property
    def setup(self) -> QuantizationSetup: ...

    def __call__(self, f: Series, g: Series) -> LambdaPoly: ...


def _unit(dimension: int, axis: int) -> Monomial:
    return tuple(1 if k == axis else 0 for k in range(dimension))


def _times(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x + y for x, y in zip(a, b))


@dataclass(frozen=True)
class IdealWitness:
    f: ChartPoly
    g: ChartPoly
    order: int
    value: ChartPoly

    def describe(self) -> str:
        return (
            f"({format_poly(self.f)}) * ({format_poly(self.g)}) restricted to L has "
            f"lambda^{self.order} coefficient {format_poly(self.value)}"
        )


@dataclass(frozen=True)
class IdealVerdict:
    passed: bool
    degree: int
    order: int
    checked: int
    axes: tuple[int, ...]
    witness: IdealWitness | None = None


def _ideal_pairs(dimension: int, axes: Sequence[int], degree: int) -> Iterator[tuple[Monomial, Monomial]]:
    functions = monomials_up_to(dimension, degree)
    cofactors = monomials_up_to(dimension, degree - 1) if degree >= 1 else []
    for f in functions:
        seen: set[Monomial] = set()
        for axis in axes:
            for h in cofactors:
                g = _times(_unit(dimension, axis), h)
                if g not in seen:
                    seen.add(g)
                    yield f, g


def _first_failure(product: Product, axes: tuple[int, ...], f: Monomial, g: Monomial) -> IdealWitness | None:
    value = product(ChartPoly.monomial(f), ChartPoly.monomial(g)).restrict(axes)
    if value.is_zero():
        return None
    power = value.lowest_power()
    return IdealWitness(ChartPoly.monomial(f), ChartPoly.monomial(g), power, value.coefficient(power))


def verify_ideal_preservation(
    product: Product,
    axes: Iterable[int] | None = None,
    degree: int | None = None,
) -> IdealVerdict:
    """Scan f * (p_j h) restricted to L over monomials f (deg <= d) and h (deg <= d - 1).

    Stops at the first pair whose product does not vanish on L. Batches are
    spread over ``settings.workers`` threads; results are read back in scan order.
    """

    axes = tuple(sorted(set(product.setup.lagrangian if axes is None else axes)))
    degree = settings.scan_degree if degree is None else degree
    pairs = list(_ideal_pairs(product.dimension, axes, degree))
    workers = max(1, settings.workers)
    warm = getattr(product, "warm", None)
    if warm is not None and workers > 1:
        warm({monomial for pair in pairs for monomial in pair})
    batch = max(1, workers * 4)
    checked = 0
    with ThreadPoolExecutor(max_workers=workers) as executor:
        for start in range(0, len(pairs), batch):
            chunk = pairs[start : start + batch]
            results = executor.map(lambda pair: _first_failure(product, axes, *pair), chunk)
            for witness in results:
                checked += 1
                if witness is not None:
                    logger.info("Ideal scan failed after %d pair(s): %s", checked, witness.describe())
                    return IdealVerdict(False, degree, product.order, checked, axes, witness)
    logger.info("Ideal scan passed: %d pair(s), degree %d, order %d", checked, degree, product.order)
    return IdealVerdict(True, degree, product.order, checked, axes)


@dataclass
class QuotientModule:
    """Left module A[[lambda]] / I_L realized on polynomials of L."""

    product: Product
    axes: tuple[int, ...]
    verdict: IdealVerdict

    def __post_init__(self) -> None:
        if not self.verdict.passed:
            raise StructuralError(
                "the product does not preserve the vanishing ideal of L; no quotient module",
                {"witness": self.verdict.witness.describe() if self.verdict.witness else None},
            )

    @property
    def dimension(self) -> int:
        return self.product.dimension

    def act(self, f: Series, phi: Series) -> LambdaPoly:
        """f . [phi] = (f * phi)|_L; a p-independent phi is its own canonical lift."""

        return self.product(f, phi).restrict(self.axes)

    __call__ = act


def quotient_action(
    product: Product,
    axes: Iterable[int] | None = None,
    verdict: IdealVerdict | None = None,
    degree: int | None = None,
) -> QuotientModule:
    axes = tuple(sorted(set(product.setup.lagrangian if axes is None else axes)))
    if verdict is None:
        verdict = verify_ideal_preservation(product, axes, degree)
    return QuotientModule(product, axes, verdict)


def standard_fiber_action(poisson: Matrix, axis: int, phi: ChartPoly, order: int) -> LambdaPoly:
    """Action of the fiber generator x_axis on the flat chart: -i lambda sum_a pi^{axis a} d_a phi.

    In Darboux coordinates this is i lambda d phi / dq for the p coordinate.
    """

    dimension = phi.dimension
    total = ChartPoly.zero(dimension)
    for a in range(dimension):
        weight = poisson[axis][a]
        if not is_zero(weight):
            total = total + phi.diff(a).scale(weight)
    return LambdaPoly.from_poly(total.scale(gauss(0, -1)), order, power=1)


def vector_field_of(alpha: ScalarForm, poisson: Matrix) -> MultiDiffOp:
    """alpha.X with components E^c = alpha_j pi^{jc}."""

    dimension = alpha.dimension
    components = []
    for c in range(dimension):
        total = ChartPoly.zero(dimension)
        for j in range(dimension):
            weight = poisson[j][c]
            if not is_zero(weight):
                total = total + alpha.component((j,)).scale(weight)
        components.append(total)
    return MultiDiffOp.vector_field(components)


@dataclass(frozen=True)
class EquivalenceMap:
    """S = 1 + lambda^power T, or exp(lambda^power T) when ``exponential``."""

    dimension: int
    power: int
    generator: MultiDiffOp
    order: int
    exponential: bool = False
    alpha: ScalarForm | None = None

    def __post_init__(self) -> None:
        if self.generator.arity != 1 or self.generator.dimension != self.dimension:
            raise DimensionMismatchError("equivalence generators are differential operators on the chart")
        if self.power < 1 and not self.generator.is_zero():
            raise StructuralError("an equivalence must be the identity at lambda^0", {"power": self.power})

    @classmethod
    def identity(cls, dimension: int, order: int) -> "EquivalenceMap":
        return cls(dimension, 1, MultiDiffOp.zero(dimension, 1), order)

    @classmethod
    def from_alpha(cls, alpha: ScalarForm, poisson: Matrix, power: int, order: int, exponential: bool = False) -> "EquivalenceMap":
        return cls(alpha.dimension, power, vector_field_of(alpha, poisson), order, exponential, alpha)

    @property
    def is_identity(self) -> bool:
        return self.generator.is_zero()

    def _series(self, value: Series) -> LambdaPoly:
        if isinstance(value, LambdaPoly):
            return value.truncate(self.order)
        return LambdaPoly.from_poly(value, self.order)

    def _generator_step(self, series: LambdaPoly) -> LambdaPoly:
        """lambda^power T applied coefficientwise."""

        out = {k: self.generator.apply(v) for k, v in series.coefficients.items()}
        return LambdaPoly(self.dimension, self.order, out).shift(self.power)

    def apply(self, value: Series) -> LambdaPoly:
        if not self.exponential:
            if self.is_identity:
                return self._series(value)
            series = self._series(value)
            return series + self._generator_step(series)
        return self._exp(value, 1)

    def inverse(self, value: Series) -> LambdaPoly:
        if self.exponential:
            return self._exp(value, -1)
        return self._geometric(value)

    def _geometric(self, value: Series) -> LambdaPoly:
        """(1 + lambda^j T)^-1 = sum_m (-lambda^j T)^m."""

        series = self._series(value)
        total, term = series, series
        while not term.is_zero():
            term = -self._generator_step(term)
            total = total + term
        return total

    def _exp(self, value: Series, sign: int) -> LambdaPoly:
        series = self._series(value)
        total, term, m = series, series, 0
        while not term.is_zero():
            m += 1
            term = self._generator_step(term).scale(gauss(sign, 0))
            total = total + term.scale(Fraction(1, factorial(m)))
        return total

    __call__ = apply

    def transport(self, product: Product) -> "TransportedProduct":
        return TransportedProduct(product, self)


@dataclass
class TransportedProduct:
    """(f, g) -> S^-1(S f * S g)."""

    base: Product
    mapping: EquivalenceMap

    @property
    def dimension(self) -> int:
        return self.base.dimension

    @property
    def order(self) -> int:
        return self.base.order

    @property
    def setup(self) -> QuantizationSetup:
        return self.base.setup

    def __call__(self, f: Series, g: Series) -> LambdaPoly:
        return self.mapping.inverse(self.base(self.mapping.apply(f), self.mapping.apply(g)))

    def coefficient(self, f: ChartPoly, g: ChartPoly, k: int) -> ChartPoly:
        return self(f, g).coefficient(k)


@dataclass(frozen=True)
class EquivalenceResult:
    order: int
    split: LichnerowiczSplit
    obstruction: ScalarForm
    mapping: EquivalenceMap
    lower_orders_agree: bool
    certified: bool
    alpha_vanishes_on_L: bool
    relative_h1_vanishes: bool

    @property
    def adapted(self) -> bool:
        return self.obstruction.is_zero()

    @property
    def status(self) -> str:
        if not self.adapted:
            return f"adapted-inequivalent at order {self.order}"
        if self.mapping.is_identity:
            return "identical at this order"
        return "adapted-equivalent at this order"


def equivalence_step(star: StarProduct, other: StarProduct, k: int) -> EquivalenceResult:
    """Build S_alpha with S_alpha^-1(S_alpha f *' S_alpha g) = f * g + O(lambda^(k+1)) modulo coboundaries.

    Both products must come from setups that differ only in the Omega series.
    """

    if star.dimension != other.dimension:
        raise DimensionMismatchError("products on different charts")
    if not star.setup.differs_only_in_omega(other.setup):
        raise StructuralError("equivalence_step compares setups that differ only in the Omega series")
    order = min(star.order, other.order)
    if not 1 <= k <= order:
        raise BudgetError(f"order {k} is outside 1..{order}", {"order": k})
    split = lichnerowicz_split(star, other, k)
    axes = star.setup.lagrangian
    obstruction = split.class_form.pullback(axes)
    if split.alpha.is_zero():
        mapping = EquivalenceMap.identity(star.dimension, order)
    else:
        if k == 1:
            raise StructuralError("products differing at lambda^1 are not equivalent by a lambda-deformation of the identity")
        mapping = EquivalenceMap.from_alpha(split.alpha, star.poisson, k - 1, order)

    transported = mapping.transport(other)
    cache: dict[tuple[ChartPoly, ChartPoly], LambdaPoly] = {}

    def moved(f: ChartPoly, g: ChartPoly) -> LambdaPoly:
        key = (f, g)
        if key not in cache:
            cache[key] = transported(f, g)
        return cache[key]

    lower = True
    for a in monomials_up_to(star.dimension, k):
        for b in monomials_up_to(star.dimension, k):
            f, g = ChartPoly.monomial(a), ChartPoly.monomial(b)
            ours, base = moved(f, g), star(f, g)
            if any(ours.coefficient(j) != base.coefficient(j) for j in range(k)):
                lower = False
                break
        if not lower:
            break

    difference = tabulate_bidifferential(
        lambda f, g: moved(f, g).coefficient(k) - star.coefficient(f, g, k), star.dimension, k + 1
    )
    certified = lower and hkr_antisymmetrize(difference, star.omega).is_zero()
    result = EquivalenceResult(
        order=k,
        split=split,
        obstruction=obstruction,
        mapping=mapping,
        lower_orders_agree=lower,
        certified=certified,
        alpha_vanishes_on_L=split.alpha.pullback(axes).is_zero(),
        relative_h1_vanishes=star.setup.relative_h1_vanishes,
    )
    logger.info("Equivalence step at order %d: %s (certified=%s)", k, result.status, certified)
    return result


def _chart_symbols(dimension: int) -> list[sp.Symbol]:
    return [sp.Symbol(f"x{k}") for k in range(1, dimension + 1)]


def _require_closed(alpha: ClosedOneForm, dimension: int) -> None:
    if isinstance(alpha, ScalarForm):
        if alpha.degree != 1:
            raise StructuralError("holonomy needs a 1-form")
        if not alpha.is_closed():
            raise StructuralError("holonomy of a non-closed 1-form depends on the path")
        return
    xs = _chart_symbols(dimension)
    components = {i: sp.sympify(alpha.get(i, 0)) for i in range(dimension)}
    for i in range(dimension):
        for j in range(i + 1, dimension):
            if sp.simplify(sp.diff(components[j], xs[i]) - sp.diff(components[i], xs[j])) != 0:
                raise StructuralError(
                    "holonomy of a non-closed 1-form depends on the path", {"axes": [i + 1, j + 1]}
                )


@dataclass(frozen=True)
class HolonomyTwist:
    """exp(i lambda closed-integral alpha) as coefficients of lambda^0..lambda^N."""

    loop: LoopPath
    integral: sp.Expr
    coefficients: tuple[sp.Expr, ...] = field(default_factory=tuple)

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    @property
    def is_trivial(self) -> bool:
        return all(sp.simplify(c) == 0 for c in self.coefficients[1:])

    def compose(self, other: "HolonomyTwist") -> "HolonomyTwist":
        """Holonomy of the concatenated loop: the truncated product of both series."""

        order = min(self.order, other.order)
        product = tuple(
            sp.simplify(sum(self.coefficients[j] * other.coefficients[m - j] for j in range(m + 1)))
            for m in range(order + 1)
        )
        return HolonomyTwist(self.loop.concatenate(other.loop), sp.simplify(self.integral + other.integral), product)


def _holonomy_series(integral: sp.Expr, order: int) -> tuple[sp.Expr, ...]:
    return tuple(sp.simplify((sp.I * integral) ** m / sp.factorial(m)) for m in range(order + 1))


def holonomy_twist(loop: LoopPath, alpha: ClosedOneForm, order: int | None = None) -> HolonomyTwist:
    order = settings.default_lambda_order if order is None else order
    _require_closed(alpha, loop.dimension)
    integral = liouville_integral(loop, alpha)
    twist = HolonomyTwist(loop, integral, _holonomy_series(integral, order))
    logger.debug("Holonomy of %s: closed integral %s", loop.name, integral)
    return twist


def holonomy_intertwiner(alpha: ScalarForm, poisson: Matrix, order: int) -> EquivalenceMap:
    """exp(lambda alpha.X) for a closed 1-form alpha."""

    if not alpha.is_closed():
        raise StructuralError("intertwiners are generated by closed 1-forms")
    return EquivalenceMap.from_alpha(alpha, poisson, 1, order, exponential=True)


__all__ = [
    "EquivalenceMap",
    "EquivalenceResult",
    "HolonomyTwist",
    "IdealVerdict",
    "IdealWitness",
    "Product",
    "QuotientModule",
    "TransportedProduct",
    "equivalence_step",
    "holonomy_intertwiner",
    "holonomy_twist",
    "quotient_action",
    "standard_fiber_action",
    "vector_field_of",
    "verify_ideal_preservation",
]
