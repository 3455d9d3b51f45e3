import random

import pytest
from hypothesis import given, settings as hsettings, strategies as st

from app.domain.errors import BudgetError, FormDegreeError
from app.services.exact_algebra import ChartPoly, LambdaPoly, gauss, monomials_up_to
from app.services.fedosov_engine import compute_curvature
from app.services.geometry_spec import RawSetup, darboux_matrix, validate_setup
from app.services.weyl_calculus import (
    OrderingSpec,
    WeylElement,
    WeylForm,
    central_product,
    covariant_D,
    delta_apply,
    delta_inv_apply,
    fiberwise_product,
    form_product,
    graded_commutator,
    homotopy_projection,
    lambda_adjoint,
    ordering_shift,
)

POISSON = darboux_matrix(2)
WEYL = OrderingSpec.weyl(POISSON)
STANDARD = OrderingSpec.standard(POISSON, [1])
BUDGET = 6


def _y(axis, budget=BUDGET):
    return WeylElement.fiber_coordinate(2, budget, axis)


def _random_element(rng, budget=BUDGET, terms=4):
    fibers = monomials_up_to(2, 3)
    coefficients = monomials_up_to(2, 1)
    table = {}
    for _ in range(terms):
        key = (rng.choice(fibers), rng.randint(0, 1))
        poly = ChartPoly.monomial(rng.choice(coefficients), gauss(rng.randint(-2, 2), rng.randint(-2, 2)))
        table[key] = table[key] + poly if key in table else poly
    return WeylElement(2, budget, table)


def _random_form(rng, degree):
    components = {(): None} if degree == 0 else {(0,): None, (1,): None} if degree == 1 else {(0, 1): None}
    return WeylForm(2, BUDGET, degree, {k: _random_element(rng) for k in components})


def test_weyl_commutator_of_fiber_coordinates():
    q, p = _y(0), _y(1)
    commutator = fiberwise_product(q, p, WEYL) - fiberwise_product(p, q, WEYL)
    expected = WeylElement.monomial(2, BUDGET, (0, 0), lam=1, coefficient=gauss(0, -1))
    assert commutator == expected
    ordered = fiberwise_product(q, p, WEYL) - WeylElement.monomial(2, BUDGET, (1, 1))
    assert ordered == expected.scale(gauss("1/2"))


def test_standard_ordering_moves_p_left():
    q, p = _y(0), _y(1)
    qp = WeylElement.monomial(2, BUDGET, (1, 1))
    assert fiberwise_product(q, p, STANDARD) == qp
    assert fiberwise_product(p, q, STANDARD) == qp + WeylElement.monomial(2, BUDGET, (0, 0), lam=1, coefficient=gauss(0, 1))


@pytest.mark.parametrize("ordering", [WEYL, STANDARD], ids=["weyl", "standard"])
@pytest.mark.parametrize("seed", range(3))
def test_fiber_product_is_associative(ordering, seed):
    rng = random.Random(seed)
    a, b, c = (_random_element(rng) for _ in range(3))
    left = fiberwise_product(fiberwise_product(a, b, ordering), c, ordering)
    right = fiberwise_product(a, fiberwise_product(b, c, ordering), ordering)
    assert left == right


def test_central_product_matches_full_product():
    rng = random.Random(3)
    a, b = _random_element(rng), _random_element(rng)
    full = fiberwise_product(a, b, WEYL).central_part()
    assert central_product(a, b, WEYL) == full


def test_delta_squares_to_zero():
    rng = random.Random(5)
    form = _random_form(rng, 0)
    assert delta_apply(delta_apply(form)).is_zero()


@hsettings(derandomize=True, deadline=None, max_examples=50)
@given(st.randoms(use_true_random=False), st.sampled_from([0, 1, 2]))
def test_homotopy_identity(rng, degree):
    form = _random_form(rng, degree)
    restored = delta_apply(delta_inv_apply(form)) + delta_inv_apply(delta_apply(form)) + homotopy_projection(form)
    assert restored == form


def test_ordering_shift_round_trips():
    rng = random.Random(8)
    form = _random_form(rng, 1)
    assert ordering_shift(ordering_shift(form, -1, STANDARD), 1, STANDARD) == form
    assert ordering_shift(form, 1, WEYL) == form


def test_graded_commutator_of_one_forms_is_symmetric():
    rng = random.Random(9)
    a, b = _random_form(rng, 1), _random_form(rng, 1)
    assert graded_commutator(a, b, WEYL) == graded_commutator(b, a, WEYL)


def test_budget_mismatch_is_rejected():
    with pytest.raises(BudgetError):
        _y(0, 4) + _y(0, 6)
    with pytest.raises(FormDegreeError):
        WeylForm(2, BUDGET, 4)


def test_central_lift_of_lambda_series():
    x1 = ChartPoly.coordinate(2, 0)
    series = LambdaPoly(2, 2, {0: x1, 2: ChartPoly.one(2)})
    element = WeylElement.central(series, BUDGET)
    assert element.is_central()
    assert element.central_part() == LambdaPoly(2, BUDGET // 2, {0: x1, 2: ChartPoly.one(2)})


@hsettings(derandomize=True, deadline=None, max_examples=30)
@given(st.randoms(use_true_random=False), st.sampled_from([1, 2]))
def test_delta_inverse_squares_to_zero(rng, degree):
    form = _random_form(rng, degree)
    assert delta_inv_apply(delta_inv_apply(form)).is_zero()


def _curved(ordering):
    x2 = ChartPoly.coordinate(2, 1)
    lagrangian = [1] if ordering == "standard" else None
    raw = RawSetup(dimension=2, christoffels={(1, 0, 0): x2}, ordering=ordering, lagrangian=lagrangian)
    return validate_setup(raw).with_truncation(lambda_order=2, budget=BUDGET)


@pytest.fixture(scope="module", params=["weyl", "standard"])
def curved_setup(request):
    return _curved(request.param)


@hsettings(derandomize=True, deadline=None, max_examples=20)
@given(rng=st.randoms(use_true_random=False))
def test_covariant_derivative_squares_to_curvature_adjoint(curved_setup, rng):
    form = _random_form(rng, 0)
    curvature = compute_curvature(curved_setup)
    twice = covariant_D(covariant_D(form, curved_setup), curved_setup)
    expected = -lambda_adjoint(curvature, form, curved_setup.ordering)
    assert twice.up_to_degree(BUDGET - 1) == expected.up_to_degree(BUDGET - 1)


@hsettings(derandomize=True, deadline=None, max_examples=20)
@given(rng=st.randoms(use_true_random=False), degree=st.sampled_from([0, 1]))
def test_covariant_derivative_is_a_graded_derivation(curved_setup, rng, degree):
    ordering = curved_setup.ordering
    a, b = _random_form(rng, degree), _random_form(rng, 1)
    left = covariant_D(form_product(a, b, ordering), curved_setup)
    first = form_product(covariant_D(a, curved_setup), b, ordering)
    second = form_product(a, covariant_D(b, curved_setup), ordering)
    assert left == (first - second if degree % 2 else first + second)
