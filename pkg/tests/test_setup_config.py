from fractions import Fraction
from pathlib import Path

import pytest
import sympy as sp

from app.domain.errors import ConfigParseError
from app.ingestors.literals import parse_chart_poly, parse_scalar, parse_weyl_terms, split_top_level
from app.ingestors.setup_config import load_config, parse_config
from app.services.exact_algebra import ChartPoly, format_poly, gauss

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_parse_scalar_accepts_gaussian_rationals():
    assert parse_scalar("3/2") == gauss(Fraction(3, 2))
    assert parse_scalar("-i") == gauss(0, -1)
    assert parse_scalar("1/2 + 1/3*i") == gauss(Fraction(1, 2), Fraction(1, 3))
    with pytest.raises(ValueError):
        parse_scalar("sqrt(2)")


def test_parse_chart_poly_round_trips_through_formatting():
    poly = parse_chart_poly("3/2*x1^2*x2 - i*x3", 3)
    assert format_poly(poly) == "3/2*x1^2*x2 - i*x3"
    assert parse_chart_poly(format_poly(poly), 3) == poly


def test_parse_chart_poly_rejects_unknown_symbols():
    with pytest.raises(ValueError):
        parse_chart_poly("x1 + z", 2)
    with pytest.raises(ValueError):
        parse_chart_poly("x3", 2)


def test_parse_weyl_terms_splits_fiber_and_lambda():
    terms = parse_weyl_terms("x1*y1^2*y2 + 2*lam*y2", 2)
    assert terms[((2, 1), 0)] == ChartPoly.coordinate(2, 0)
    assert terms[((0, 1), 1)] == ChartPoly.constant(2, 2)


def test_split_top_level_respects_parentheses():
    assert split_top_level("cos(2*pi*t), -sin(t, 1), x") == ["cos(2*pi*t)", "-sin(t, 1)", "x"]


def test_shipped_configs_parse():
    oscillator = load_config(CONFIGS / "oscillator.cfg")
    assert oscillator.raw.dimension == 2
    assert oscillator.bs is not None
    assert oscillator.bs.maslov == 2
    assert oscillator.bs.lam == Fraction(1, 10)
    assert oscillator.bs.window == (Fraction(0), Fraction(21, 10))
    assert oscillator.loops[0].name == "unit"
    assert oscillator.frame.shape == (2, 1)
    assert oscillator.gauge.shape == (1, 1)

    curved = load_config(CONFIGS / "curved_adapted.cfg")
    assert curved.raw.christoffels[(1, 0, 0)] == ChartPoly.coordinate(2, 1)
    assert curved.raw.lagrangian == [1]
    assert curved.raw.ordering == "standard"
    assert curved.scan_degree == 3


def test_omega_series_entries_become_forms():
    config = load_config(CONFIGS / "flat_weyl_shifted.cfg")
    form = config.raw.omega_series[1]
    assert form.degree == 2
    assert form.component((0, 1)) == ChartPoly.one(2)


def test_theta_and_loop_expressions_are_sympy():
    config = load_config(CONFIGS / "oscillator.cfg")
    assert config.theta == {0: sp.Symbol("x2")}
    t = sp.Symbol("t")
    assert config.loops[0].segments[0] == (sp.cos(2 * sp.pi * t), -sp.sin(2 * sp.pi * t))


@pytest.mark.parametrize(
    "text, line",
    [
        ("[chart]\ndim = 3\n", 2),
        ("dim = 2\n", 1),
        ("[chart]\ndim = 2\n[nowhere]\n", 3),
        ("[chart]\ndim = 2\n[omega]\n2,1 = 1\n", 4),
        ("[chart]\ndim = 2\n[christoffel]\n1,1,5 = x1\n", 4),
        ("[chart]\ndim = 2\n[christoffel]\n1,1,1 = x1 +\n", 4),
        ("[chart]\ndim = 2\n[bs]\nwindow = [2, 1]\n", 4),
        ("[omega]\ndarboux\n", 2),
    ],
)
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigParseError) as exc:
        parse_config(text)
    assert exc.value.line == line
    assert exc.value.exit_code == 2


def test_missing_file_is_a_parse_error(tmp_path):
    with pytest.raises(ConfigParseError):
        load_config(tmp_path / "missing.cfg")


def test_kappa_is_a_constant():
    config = parse_config("[chart]\ndim = 2\n[bs]\nkappa = 1/2\n")
    assert config.bs.kappa == sp.Rational(1, 2)
    with pytest.raises(ConfigParseError) as exc:
        parse_config("[chart]\ndim = 2\n[bs]\nkappa = E\n")
    assert exc.value.line == 4
