"""Fedosov construction on one chart: curvature, gamma, flat sections and the star product.

Flow:
1) compute_curvature lifts the connection curvature to a Weyl 2-form R
2) solve_gamma fixes gamma degree by degree from
   gamma = delta s + delta^-1 (D gamma + (i/lambda) gamma o gamma - R + Omega)
3) tau lifts f to the flat section with sigma(tau f) = f
4) StarProduct evaluates sigma(tau f o tau g) truncated at lambda^N
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Union

from app.domain.errors import BudgetError, FormDegreeError, StructuralError
from app.services.exact_algebra import ChartPoly, LambdaPoly, Monomial, is_zero, monomials_up_to
from app.services.geometry_spec import QuantizationSetup
from app.services.hochschild_lab import (
    MultiDiffOp,
    NaturalnessCertificate,
    naturalness_certificate,
    tabulate_bidifferential,
)
from app.services.scalar_forms import differential
from app.services.weyl_calculus import (
    Matrix,
    OrderingSpec,
    WeylElement,
    WeylForm,
    central_product,
    covariant_D,
    delta_apply,
    delta_inv_apply,
    lambda_adjoint,
    ordering_shift,
)

logger = logging.getLogger("fedosov.fedosov_engine")

CurvatureIndex = tuple[int, int, int, int]
Series = Union[ChartPoly, LambdaPoly]


def curvature_tensor(setup: QuantizationSetup) -> dict[CurvatureIndex, ChartPoly]:
    """R^k_{j m i} for m < i, keyed (k, j, m, i).

    R^k_{jmi} = d_m G^k_{ij} - d_i G^k_{mj} + G^k_{ml} G^l_{ij} - G^k_{il} G^l_{mj}
    """

    dim = setup.dimension
    if setup.is_flat_connection:
        return {}
    gamma = setup.christoffel
    out: dict[CurvatureIndex, ChartPoly] = {}
    for k in range(dim):
        for j in range(dim):
            for m in range(dim):
                for i in range(m + 1, dim):
                    value = gamma(k, i, j).diff(m) - gamma(k, m, j).diff(i)
                    for l in range(dim):
                        value = value + gamma(k, m, l) * gamma(l, i, j) - gamma(k, i, l) * gamma(l, m, j)
                    if not value.is_zero():
                        out[(k, j, m, i)] = value
    return out


def compute_curvature(setup: QuantizationSetup) -> WeylForm:
    """R = 1/2 omega_{ak} R^k_{c m i} y^a y^c dx^m ^ dx^i, moved to the mu-ordering by exp(lambda S)."""

    dim, budget = setup.dimension, setup.budget
    half = Fraction(1, 2)
    components: dict[tuple[int, int], dict] = {}
    for (k, c, m, i), value in curvature_tensor(setup).items():
        for a in range(dim):
            weight = setup.omega[a][k]
            if is_zero(weight):
                continue
            fiber = [0] * dim
            fiber[a] += 1
            fiber[c] += 1
            key = (tuple(fiber), 0)
            term = value.scale(weight).scale(half)
            bucket = components.setdefault((m, i), {})
            bucket[key] = bucket[key] + term if key in bucket else term
    hat = WeylForm(
        dim,
        budget,
        2,
        {index: WeylElement(dim, budget, terms) for index, terms in components.items()},
    )
    if setup.ordering.is_symmetric_free:
        return hat
    return ordering_shift(hat, 1, setup.ordering)


def formal_omega(setup: QuantizationSetup) -> WeylForm:
    """Omega = sum_k lambda^k Omega_k as a central Weyl 2-form."""

    total = WeylForm.zero(setup.dimension, setup.budget, 2)
    for power, form in setup.omega_series:
        total = total + WeylForm.from_scalar_form(form, setup.budget, lam=power)
    return total


def _gamma_rhs(setup: QuantizationSetup, gamma: WeylForm, source: WeylForm) -> WeylForm:
    """D gamma + (i/lambda) gamma o gamma + source."""

    rhs = source + covariant_D(gamma, setup)
    if not gamma.is_zero():
        rhs = rhs + lambda_adjoint(gamma, gamma, setup.ordering).scale(Fraction(1, 2))
    return rhs


@dataclass(frozen=True)
class SolutionCertificate:
    """Residual checks on a computed gamma."""

    residual_zero: bool
    normalization_holds: bool
    checked_degree: int

    @property
    def ok(self) -> bool:
        return self.residual_zero and self.normalization_holds


@dataclass(frozen=True)
class FedosovSolution:
    setup: QuantizationSetup
    curvature: WeylForm
    gamma: WeylForm
    certificate: SolutionCertificate

    @property
    def dimension(self) -> int:
        return self.setup.dimension

    @property
    def budget(self) -> int:
        return self.setup.budget

    @property
    def ordering(self) -> OrderingSpec:
        return self.setup.ordering


def certify_solution(setup: QuantizationSetup, gamma: WeylForm, curvature: WeylForm | None = None) -> SolutionCertificate:
    """delta gamma equals the right-hand side through degree budget - 1 and delta^-1 gamma = s."""

    curvature = compute_curvature(setup) if curvature is None else curvature
    source = formal_omega(setup) - curvature
    residual = delta_apply(gamma) - _gamma_rhs(setup, gamma, source)
    checked = setup.budget - 1
    normalization = delta_inv_apply(gamma).as_element()
    return SolutionCertificate(
        residual_zero=residual.up_to_degree(checked).is_zero(),
        normalization_holds=normalization == setup.s,
        checked_degree=checked,
    )


def solve_gamma(setup: QuantizationSetup) -> FedosovSolution:
    """Solve for gamma degree by degree and certify the result."""

    if setup.budget < 3:
        raise BudgetError(f"degree budget {setup.budget} too small for a connection form", {"budget": setup.budget})
    curvature = compute_curvature(setup)
    source = formal_omega(setup) - curvature
    lifted_s = delta_apply(WeylForm.from_element(setup.s))
    gamma = WeylForm.zero(setup.dimension, setup.budget, 1)
    for degree in range(2, setup.budget + 1):
        gamma = (lifted_s + delta_inv_apply(_gamma_rhs(setup, gamma, source))).up_to_degree(degree)
        logger.debug("gamma through degree %d: %d component(s)", degree, len(gamma.components))

    certificate = certify_solution(setup, gamma, curvature)
    if not certificate.ok:
        raise StructuralError(
            "gamma failed its residual certificate",
            {"residual_zero": certificate.residual_zero, "normalization_holds": certificate.normalization_holds},
        )
    logger.info("Solved gamma: dim=%d budget=%d ordering=%s", setup.dimension, setup.budget, setup.ordering_name)
    return FedosovSolution(setup, curvature, gamma, certificate)


def _q_operator(solution: FedosovSolution, alpha: WeylForm) -> WeylForm:
    """D + (i/lambda) ad gamma."""

    out = covariant_D(alpha, solution.setup)
    if not solution.gamma.is_zero():
        out = out + lambda_adjoint(solution.gamma, alpha, solution.ordering)
    return out


def fedosov_derivative(solution: FedosovSolution, alpha: WeylForm) -> WeylForm:
    """nabla_F = -delta + D + (i/lambda) ad gamma."""

    return _q_operator(solution, alpha) - delta_apply(alpha)


def fedosov_inverse(solution: FedosovSolution, alpha: WeylForm) -> WeylForm:
    """-delta^-1 sum_k (Q delta^-1)^k alpha; the sum stops once the degree leaves the budget."""

    if alpha.degree == 0:
        raise FormDegreeError("the inverse of the Fedosov derivative acts on forms of degree >= 1")
    total = WeylForm.zero(alpha.dimension, alpha.budget, alpha.degree - 1)
    current = alpha
    for _ in range(alpha.budget + 2):
        if current.is_zero():
            return -total
        lifted = delta_inv_apply(current)
        total = total + lifted
        current = _q_operator(solution, lifted)
    raise StructuralError("Fedosov inverse series failed to terminate within the degree budget")


def tau(solution: FedosovSolution, f: ChartPoly) -> WeylElement:
    """Flat lift tau(f) = f - nabla_F^-1 df."""

    budget = solution.budget
    base = WeylElement.central(f, budget)
    if f.is_constant():
        return base
    df = WeylForm.from_scalar_form(differential(f), budget)
    return base - fedosov_inverse(solution, df).as_element()


def tau_operator(solution: FedosovSolution, sample_degree: int) -> dict[Monomial, WeylElement]:
    """Coefficients T_beta with tau(f) = sum_beta T_beta d^beta f, for |beta| <= sample_degree."""

    dim = solution.dimension
    table: dict[Monomial, WeylElement] = {}
    for beta in monomials_up_to(dim, sample_degree):
        value = tau(solution, ChartPoly.monomial(beta))
        for alpha, known in table.items():
            if any(x > y for x, y in zip(alpha, beta)):
                continue
            weight = 1
            for p, a in zip(beta, alpha):
                for step in range(a):
                    weight *= p - step
            rest = tuple(p - a for p, a in zip(beta, alpha))
            value = value - known.mul_poly(ChartPoly.monomial(rest, weight))
        if value.is_zero():
            continue
        norm = 1
        for p in beta:
            for step in range(p):
                norm *= p - step
        table[beta] = value.scale(Fraction(1, norm))
    return table


class StarProduct:
    """f * g = sigma(tau f o tau g) mod lambda^(N+1) with cached monomial pairings."""

    def __init__(self, solution: FedosovSolution, order: int | None = None) -> None:
        self.solution = solution
        self._order = solution.setup.lambda_order if order is None else order
        if solution.budget < 2 * self._order:
            raise BudgetError(
                f"degree budget {solution.budget} cannot carry lambda^{self._order}; need at least {2 * self._order}",
                {"budget": solution.budget, "order": self._order},
            )
        self._tau: dict[Monomial, WeylElement] = {}
        self._pairs: dict[tuple[Monomial, Monomial], LambdaPoly] = {}
        self._bidiff: dict[int, tuple[MultiDiffOp, NaturalnessCertificate]] = {}
        self._lock = threading.Lock()

    @property
    def order(self) -> int:
        return self._order

    @property
    def dimension(self) -> int:
        return self.solution.dimension

    @property
    def omega(self) -> Matrix:
        return self.solution.setup.omega

    @property
    def poisson(self) -> Matrix:
        return self.solution.setup.poisson

    @property
    def setup(self) -> QuantizationSetup:
        return self.solution.setup

    def tau_monomial(self, exponents: Monomial) -> WeylElement:
        key = tuple(exponents)
        cached = self._tau.get(key)
        if cached is not None:
            return cached
        value = tau(self.solution, ChartPoly.monomial(key))
        with self._lock:
            return self._tau.setdefault(key, value)

    def pairing(self, a: Monomial, b: Monomial) -> LambdaPoly:
        key = (tuple(a), tuple(b))
        cached = self._pairs.get(key)
        if cached is not None:
            return cached
        value = central_product(self.tau_monomial(a), self.tau_monomial(b), self.solution.ordering).truncate(self._order)
        with self._lock:
            return self._pairs.setdefault(key, value)

    def warm(self, monomials: Iterable[Monomial]) -> int:
        """Fill the tau cache serially; returns the number of cached lifts."""

        for monomial in monomials:
            self.tau_monomial(monomial)
        return len(self._tau)

    def _as_series(self, value: Series) -> LambdaPoly:
        if isinstance(value, LambdaPoly):
            return value.truncate(self._order)
        return LambdaPoly.from_poly(value, self._order)

    def evaluate(self, f: Series, g: Series) -> LambdaPoly:
        """Bilinear extension over lambda-series arguments."""

        left, right = self._as_series(f), self._as_series(g)
        total = LambdaPoly.zero(self.dimension, self._order)
        for i, fi in left.coefficients.items():
            for j, gj in right.coefficients.items():
                if i + j > self._order:
                    continue
                for ma, ca in fi.terms.items():
                    for mb, cb in gj.terms.items():
                        total = total + self.pairing(ma, mb).scale(ca * cb).shift(i + j)
        return total

    __call__ = evaluate

    def coefficient(self, f: ChartPoly, g: ChartPoly, k: int) -> ChartPoly:
        return self.evaluate(f, g).coefficient(k)

    def extract(self, k: int, sample_degree: int | None = None) -> tuple[MultiDiffOp, NaturalnessCertificate]:
        """Tabulate star_k from monomials of degree <= sample_degree (default k + 2)."""

        if k > self._order:
            raise BudgetError(f"coefficient lambda^{k} is beyond the truncation order {self._order}")
        degree = k + 2 if sample_degree is None else sample_degree
        cache_key = k if sample_degree is None else -1
        if cache_key in self._bidiff:
            return self._bidiff[cache_key]
        operator = tabulate_bidifferential(lambda f, g: self.coefficient(f, g, k), self.dimension, degree)
        result = (operator, naturalness_certificate(operator, k, degree))
        if sample_degree is None:
            self._bidiff[k] = result
        logger.debug("Extracted star_%d with %d term(s)", k, len(operator.table))
        return result

    def bidifferential(self, order: int) -> MultiDiffOp:
        return self.extract(order)[0]


def build_star_product(setup: QuantizationSetup, order: int | None = None) -> StarProduct:
    return StarProduct(solve_gamma(setup), order)


def star(solution: FedosovSolution, f: Series, g: Series) -> LambdaPoly:
    return StarProduct(solution)(f, g)


def extract_bidiff(
    source: FedosovSolution | StarProduct,
    k: int,
    sample_degree: int | None = None,
) -> tuple[MultiDiffOp, NaturalnessCertificate]:
    product = source if isinstance(source, StarProduct) else StarProduct(source)
    return product.extract(k, sample_degree)


__all__ = [
    "FedosovSolution",
    "SolutionCertificate",
    "StarProduct",
    "build_star_product",
    "certify_solution",
    "compute_curvature",
    "curvature_tensor",
    "extract_bidiff",
    "fedosov_derivative",
    "fedosov_inverse",
    "formal_omega",
    "solve_gamma",
    "star",
    "tau",
    "tau_operator",
]
