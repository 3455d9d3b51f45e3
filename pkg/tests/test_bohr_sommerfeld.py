from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from app.domain.errors import NumericalGuardError, SetupValidationError, UnsupportedCoefficientError
from app.services.bohr_sommerfeld import (
    E,
    T,
    BSProblem,
    LoopPath,
    Segment,
    bs_spectrum,
    evaluate_condition,
    liouville_integral,
    maslov_from_gauge,
    maslov_winding,
)

P_DQ = {0: sp.Symbol("x2")}


def test_liouville_integral_of_counter_clockwise_circle():
    loop = LoopPath("circle", (Segment.circle(2, (0, 1)),))
    # p dq around a counter-clockwise circle encloses -pi
    assert liouville_integral(loop, P_DQ) == -sp.pi
    assert liouville_integral(loop.reverse(), P_DQ) == sp.pi


def test_liouville_integral_scales_with_radius():
    r = sp.Rational(3, 2)
    loop = LoopPath("big", (Segment.circle(2, (0, 1), radius=r),))
    assert liouville_integral(loop, P_DQ) == -sp.pi * r**2


def test_polygon_loop_gives_signed_area():
    corners = [(0, 0), (1, 0), (1, 1), (0, 1)]
    segments = tuple(Segment.line(corners[i], corners[(i + 1) % 4]) for i in range(4))
    loop = LoopPath("square", segments)
    assert loop.is_closed()
    assert liouville_integral(loop, P_DQ) == -1


def test_open_loops_are_rejected():
    loop = LoopPath("open", (Segment.line((0, 0), (1, 0)),))
    with pytest.raises(SetupValidationError) as exc:
        loop.require_closed()
    assert exc.value.codes() == {"loop_closure"}


def test_unsupported_coefficients_are_rejected():
    loop = LoopPath("circle", (Segment.circle(2, (0, 1)),))
    with pytest.raises(UnsupportedCoefficientError):
        liouville_integral(loop, {0: sp.exp(sp.Symbol("x2"))})


def test_concatenated_loop_adds_actions():
    circle = LoopPath("circle", (Segment.circle(2, (0, 1)),))
    double = circle.concatenate(circle)
    assert liouville_integral(double, P_DQ) == -2 * sp.pi


def test_maslov_winding_of_rotating_line():
    frame = sp.Matrix([[-sp.sin(T)], [sp.cos(T)]])
    result = maslov_winding(frame)
    assert result.index == 2
    assert result.residual < 1e-9


def test_maslov_winding_rejects_singular_frames():
    def frame(t):
        return np.array([[0.0], [0.0]])

    with pytest.raises(NumericalGuardError):
        maslov_winding(frame)


def test_maslov_winding_rejects_open_paths():
    frame = sp.Matrix([[sp.cos(T)], [sp.sin(T)]])
    with pytest.raises(NumericalGuardError):
        maslov_winding(frame, t_range=(0.0, np.pi / 2))


def test_maslov_from_gauge_agrees_with_winding():
    result = maslov_from_gauge(sp.Matrix([[sp.exp(sp.I * T)]]))
    assert result.index == 2
    assert result.residual < 1e-6


def test_oscillator_spectrum_is_exact():
    problem = BSProblem(
        action=2 * sp.pi * E,
        maslov=2,
        lam=Fraction(1, 10),
        window=(Fraction(0), Fraction(21, 10)),
    )
    levels = bs_spectrum(problem)
    assert [level.n for level in levels] == list(range(21))
    assert [level.energy for level in levels] == [sp.Rational(2 * n + 1, 20) for n in range(21)]


def test_condition_value_is_integral_at_levels():
    problem = BSProblem(action=2 * sp.pi * E, maslov=2, lam=Fraction(1, 10), window=(Fraction(0), Fraction(1)))
    assert evaluate_condition(problem, Fraction(1, 20)).integral
    assert not evaluate_condition(problem, Fraction(1, 10)).integral


def test_non_monotone_action_is_rejected():
    problem = BSProblem(action=E**2, maslov=0, lam=Fraction(1), window=(Fraction(-1), Fraction(1)))
    with pytest.raises(SetupValidationError) as exc:
        bs_spectrum(problem)
    assert "monotonicity" in exc.value.codes()


def test_critical_point_on_window_boundary_is_accepted():
    problem = BSProblem(action=2 * sp.pi * E**2, maslov=0, lam=Fraction(1), window=(Fraction(0), Fraction(1)))
    levels = bs_spectrum(problem)
    assert [(level.n, level.energy) for level in levels] == [(0, 0), (1, 1)]


def test_interior_critical_point_without_sign_change_is_accepted():
    problem = BSProblem(action=2 * sp.pi * E**3, maslov=0, lam=Fraction(1), window=(Fraction(-1), Fraction(1)))
    levels = bs_spectrum(problem)
    assert [(level.n, level.energy) for level in levels] == [(-1, -1), (0, 0), (1, 1)]


def test_spectrum_energies_stay_exact():
    problem = BSProblem(action=2 * sp.pi * E**2, maslov=0, lam=Fraction(1), window=(Fraction(0), Fraction(2)))
    energies = [level.energy for level in bs_spectrum(problem)]
    assert energies == [0, 1, sp.sqrt(2), sp.sqrt(3), 2]
