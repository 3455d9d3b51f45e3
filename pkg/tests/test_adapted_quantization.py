from pathlib import Path

import pytest
import sympy as sp
from hypothesis import given, settings as hsettings, strategies as st

from app.config import settings
from app.domain.errors import BudgetError, StructuralError
from app.ingestors.setup_config import load_config, parse_config
from app.services.adapted_quantization import (
    EquivalenceMap,
    HolonomyTwist,
    QuotientModule,
    equivalence_step,
    holonomy_intertwiner,
    holonomy_twist,
    quotient_action,
    standard_fiber_action,
    verify_ideal_preservation,
)
from app.services.bohr_sommerfeld import T, LoopPath, Segment
from app.services.exact_algebra import ChartPoly, LambdaPoly, gauss, monomials_up_to
from app.services.fedosov_engine import build_star_product
from app.services.geometry_spec import RawSetup, check_adapted_data, validate_setup
from app.services.hochschild_lab import MultiDiffOp
from app.services.scalar_forms import ScalarForm

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _star(name, order=2):
    return build_star_product(validate_setup(load_config(CONFIGS / name).raw).with_truncation(lambda_order=order))


def _x(axis, dimension=2):
    return ChartPoly.coordinate(dimension, axis)


@pytest.fixture(scope="module")
def standard_star():
    return _star("flat_standard.cfg")


@pytest.fixture(scope="module")
def weyl_star():
    return _star("flat_weyl.cfg")


def test_standard_ordering_preserves_the_ideal(standard_star):
    verdict = verify_ideal_preservation(standard_star, degree=3)
    assert verdict.passed
    assert verdict.axes == (1,)
    assert verdict.checked > 0
    assert verdict.witness is None


def test_weyl_ordering_breaks_the_ideal(weyl_star):
    verdict = verify_ideal_preservation(weyl_star, degree=3)
    assert not verdict.passed
    witness = verdict.witness
    assert witness.f == _x(0)
    assert witness.g == _x(1)
    assert witness.order == 1
    assert witness.value == ChartPoly.constant(2, gauss(0, "-1/2"))
    assert "x1" in witness.describe()


def test_ideal_scan_is_independent_of_worker_count(weyl_star, monkeypatch):
    monkeypatch.setattr(settings, "workers", 3)
    verdict = verify_ideal_preservation(weyl_star, degree=2)
    assert not verdict.passed
    assert verdict.witness.f == _x(0)


def test_parallel_scan_matches_serial_scan(monkeypatch):
    serial = verify_ideal_preservation(_star("flat_standard.cfg"), degree=3)
    monkeypatch.setattr(settings, "workers", 4)
    star = _star("flat_standard.cfg")
    parallel = verify_ideal_preservation(star, degree=3)
    assert (parallel.passed, parallel.checked) == (serial.passed, serial.checked)
    lifted = star.tau_monomial((1, 1))
    assert star.tau_monomial((1, 1)) is lifted


def test_warm_fills_the_lift_cache_once():
    star = _star("flat_weyl.cfg", order=1)
    assert star.warm([(0, 1), (1, 0), (0, 1)]) == 2
    assert star.warm([(1, 0)]) == 2


def test_curved_adapted_product_preserves_the_ideal():
    star = _star("curved_adapted.cfg")
    assert verify_ideal_preservation(star, degree=3).passed


def test_quotient_module_action(standard_star):
    module = quotient_action(standard_star, degree=3)
    q, p = _x(0), _x(1)
    phi = q * q * q
    order = standard_star.order
    # functions on L act by multiplication
    assert module(q, phi) == LambdaPoly.from_poly(q * phi, order)
    # fiber coordinates act by i lambda d/dq
    assert module(p, phi) == standard_fiber_action(standard_star.poisson, 1, phi, order)
    assert module(p, phi) == LambdaPoly.from_poly((q * q).scale(gauss(0, 3)), order, power=1)


small = st.integers(min_value=-3, max_value=3)


@st.composite
def chart_polys(draw):
    terms = draw(st.dictionaries(st.sampled_from(monomials_up_to(2, 2)), st.tuples(small, small), min_size=1, max_size=3))
    return ChartPoly.from_terms(2, {m: gauss(re, im) for m, (re, im) in terms.items()})


@pytest.fixture(scope="module")
def standard_module(standard_star):
    return quotient_action(standard_star, degree=3)


@hsettings(derandomize=True, deadline=None, max_examples=50)
@given(f=chart_polys(), g=chart_polys(), power=st.integers(0, 3))
def test_quotient_module_law(standard_star, standard_module, f, g, power):
    phi = ChartPoly.monomial((power, 0))
    assert standard_module(standard_star(f, g), phi) == standard_module(f, standard_module(g, phi))


def test_quotient_module_refuses_non_preserving_products(weyl_star):
    with pytest.raises(StructuralError):
        quotient_action(weyl_star, degree=2)


def test_equivalence_step_on_shifted_class(weyl_star):
    shifted = _star("flat_weyl_shifted.cfg")
    result = equivalence_step(weyl_star, shifted, 2)
    assert result.lower_orders_agree
    assert result.certified
    assert result.adapted
    assert result.status == "adapted-equivalent at this order"
    assert result.alpha_vanishes_on_L
    assert result.split.alpha.exterior_derivative() == shifted.setup.omega_form(1)
    assert result.mapping.power == 1
    assert not result.mapping.is_identity


def test_equivalence_step_obstruction_in_dimension_four():
    base = build_star_product(validate_setup(RawSetup(dimension=4, lambda_order=2)))
    form = ScalarForm.from_matrix([[0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]])
    shifted = build_star_product(base.setup.with_omega_series({1: form}))
    result = equivalence_step(base, shifted, 2)
    assert not result.adapted
    assert result.status == "adapted-inequivalent at order 2"
    assert result.obstruction.component((0, 1)) == ChartPoly.one(4)


def test_equivalence_step_checks_its_arguments(weyl_star):
    with pytest.raises(BudgetError):
        equivalence_step(weyl_star, weyl_star, 5)
    standard = _star("flat_standard.cfg")
    with pytest.raises(StructuralError):
        equivalence_step(weyl_star, standard, 2)


def test_identical_products_need_no_equivalence(weyl_star):
    result = equivalence_step(weyl_star, weyl_star, 2)
    assert result.mapping.is_identity
    assert result.status == "identical at this order"
    assert result.certified


def test_equivalence_map_inverse():
    alpha = ScalarForm(2, 1, {(0,): _x(1), (1,): _x(0)})
    mapping = EquivalenceMap.from_alpha(alpha, validate_setup(RawSetup(dimension=2)).poisson, 1, 3)
    f = _x(0) * _x(0) * _x(1)
    assert mapping.inverse(mapping.apply(f)) == LambdaPoly.from_poly(f, 3)
    with pytest.raises(StructuralError):
        EquivalenceMap(2, 0, MultiDiffOp.vector_field([_x(0), _x(1)]), 3)


def test_exponential_intertwiner_inverts():
    poisson = validate_setup(RawSetup(dimension=2)).poisson
    alpha = ScalarForm(2, 1, {(0,): ChartPoly.one(2)})
    mapping = holonomy_intertwiner(alpha, poisson, 3)
    f = _x(1) * _x(1)
    assert mapping.inverse(mapping(f)) == LambdaPoly.from_poly(f, 3)
    with pytest.raises(StructuralError):
        holonomy_intertwiner(ScalarForm(2, 1, {(0,): _x(1)}), poisson, 3)


ANGULAR = {0: -sp.Symbol("x2") / (sp.Symbol("x1") ** 2 + sp.Symbol("x2") ** 2), 1: sp.Symbol("x1") / (sp.Symbol("x1") ** 2 + sp.Symbol("x2") ** 2)}


def test_holonomy_of_angular_form():
    loop = LoopPath("circle", (Segment.circle(2, (0, 1)),))
    twist = holonomy_twist(loop, ANGULAR, order=3)
    assert twist.integral == 2 * sp.pi
    assert not twist.is_trivial
    for m, coefficient in enumerate(twist.coefficients):
        assert sp.simplify(coefficient - (2 * sp.pi * sp.I) ** m / sp.factorial(m)) == 0


def test_holonomy_of_exact_form_is_trivial():
    loop = LoopPath("circle", (Segment.circle(2, (0, 1)),))
    exact = ScalarForm(2, 1, {(0,): _x(1), (1,): _x(0)})
    assert holonomy_twist(loop, exact, order=2).is_trivial


def test_holonomy_of_concatenated_loops_multiplies():
    loop = LoopPath("circle", (Segment.circle(2, (0, 1)),))
    once = holonomy_twist(loop, ANGULAR, order=3)
    composed = once.compose(once)
    direct = holonomy_twist(loop.concatenate(loop), ANGULAR, order=3)
    assert isinstance(composed, HolonomyTwist)
    assert sp.simplify(composed.integral - direct.integral) == 0
    for a, b in zip(composed.coefficients, direct.coefficients):
        assert sp.simplify(a - b) == 0


def test_holonomy_rejects_open_forms():
    loop = LoopPath("circle", (Segment.circle(2, (0, 1)),))
    with pytest.raises(StructuralError):
        holonomy_twist(loop, ScalarForm(2, 1, {(0,): _x(1)}))


def _scan_setup(setup):
    star = build_star_product(validate_setup(setup).with_truncation(lambda_order=3))
    return check_adapted_data(star.setup), verify_ideal_preservation(star, degree=4)


def test_non_geodesic_connection_breaks_the_ideal(config_text):
    text = config_text("curved_adapted.cfg").replace("2,1,1 = x2", "2,1,1 = 1")
    report, verdict = _scan_setup(parse_config(text).raw)
    assert [c.name for c in report.failed()] == ["i: totally geodesic"]
    assert not verdict.passed
    assert verdict.order == 3
    assert verdict.witness.f == _x(1)
    assert verdict.witness.g == _x(1) * _x(1)
    assert verdict.witness.order == 2


def test_omega_with_nonzero_restriction_breaks_the_ideal():
    form = ScalarForm.from_matrix([[0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]])
    raw = RawSetup(dimension=4, omega_series={1: form}, ordering="standard", lagrangian=[2, 3])
    report, verdict = _scan_setup(raw)
    assert [c.name for c in report.failed()] == ["ii: relative symplectic class"]
    assert not verdict.passed
    assert verdict.witness.order == 2


def test_normalization_outside_fiber_ideal_breaks_the_ideal():
    raw = RawSetup(
        dimension=2,
        s_terms={((3, 0), 0): ChartPoly.one(2)},
        ordering="standard",
        lagrangian=[1],
    )
    report, verdict = _scan_setup(raw)
    assert [c.name for c in report.failed()] == ["iii: s in fiberwise vanishing ideal"]
    assert not verdict.passed
    assert verdict.witness.f == _x(1)
    assert verdict.witness.g == _x(1) * _x(1)
    assert verdict.witness.order == 2


def test_transport_by_form_vanishing_on_lagrangian_keeps_the_ideal(standard_star):
    alpha = ScalarForm(2, 1, {(0,): _x(1)})
    mapping = EquivalenceMap.from_alpha(alpha, standard_star.poisson, 1, standard_star.order)
    transported = mapping.transport(standard_star)
    q, p = _x(0), _x(1)
    assert transported(p, q) != standard_star(p, q)
    assert transported(q, p) == standard_star(q, p)
    verdict = verify_ideal_preservation(transported, degree=3)
    assert verdict.passed
    assert verdict.checked > 0


def test_holonomy_is_independent_of_parametrization():
    once = holonomy_twist(LoopPath("circle", (Segment.circle(2, (0, 1)),)), ANGULAR, order=2)
    halves = LoopPath(
        "halves",
        (
            Segment((sp.cos(sp.pi * T), sp.sin(sp.pi * T))),
            Segment((sp.cos(sp.pi + sp.pi * T), sp.sin(sp.pi + sp.pi * T))),
        ),
    )
    shifted_start = LoopPath(
        "shifted",
        (Segment((sp.cos(2 * sp.pi * T + sp.pi / 2), sp.sin(2 * sp.pi * T + sp.pi / 2))),),
    )
    for loop in (halves, shifted_start):
        twist = holonomy_twist(loop, ANGULAR, order=2)
        assert sp.simplify(twist.integral - once.integral) == 0
        for a, b in zip(twist.coefficients, once.coefficients):
            assert sp.simplify(a - b) == 0
