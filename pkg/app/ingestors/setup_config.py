"""Line-oriented run configuration parser.

Sections are introduced by ``[name]`` headers; indices are 1-based in the file
and converted to 0-based here. Every failure is a ConfigParseError carrying the
1-based line number.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import sympy as sp

from app.domain.errors import ConfigParseError
from app.ingestors.literals import (
    parse_chart_poly,
    parse_expression,
    parse_scalar,
    parse_weyl_terms,
    split_top_level,
)
from app.services.exact_algebra import ZERO, ChartPoly, GaussRational
from app.services.geometry_spec import RawSetup, darboux_matrix
from app.services.scalar_forms import ScalarForm
from app.services.weyl_calculus import WeylKey

logger = logging.getLogger("fedosov.ingestors.setup_config")

SECTIONS = (
    "chart",
    "omega",
    "christoffel",
    "Omega",
    "ordering",
    "s",
    "lagrangian",
    "truncation",
    "verify",
    "bs",
    "loop",
    "theta",
    "frame",
    "gauge",
)

_SECTION_RE = re.compile(r"^\[(?P<name>[A-Za-z_]+)\]$")
_KEY_RE = re.compile(r"^(?P<key>[A-Za-z_][A-Za-z0-9_\-]*)\s*=\s*(?P<value>.*)$")
_INDEX_RE = re.compile(r"^(?P<indices>\d+(?:\s*,\s*\d+)*)\s*=\s*(?P<value>.+)$")
_SERIES_RE = re.compile(r"^(?P<power>\d+)\s*:\s*(?P<i>\d+)\s*,\s*(?P<j>\d+)\s*=\s*(?P<value>.+)$")
_WINDOW_RE = re.compile(r"^\[\s*(?P<lo>[^,\]]+)\s*,\s*(?P<hi>[^,\]]+)\s*\]$")


@dataclass
class BSSection:
    """Bohr-Sommerfeld family descriptor; ``action`` is an expression in E."""

    action: sp.Expr | None = None
    maslov: int | None = None
    kappa: sp.Expr = sp.Integer(0)
    lam: Fraction | None = None
    window: tuple[Fraction, Fraction] | None = None
    maslov_weight: Fraction | None = None


@dataclass
class LoopSection:
    """Closed loop as consecutive segments; each segment maps t in [0, 1] to the chart."""

    name: str
    segments: list[tuple[sp.Expr, ...]] = field(default_factory=list)


@dataclass
class ParsedConfig:
    raw: RawSetup
    scan_degree: int | None = None
    bs: BSSection | None = None
    loops: list[LoopSection] = field(default_factory=list)
    theta: dict[int, sp.Expr] = field(default_factory=dict)
    frame: sp.Matrix | None = None
    gauge: sp.Matrix | None = None
    source: str | None = None


@dataclass
class _State:
    dimension: int | None = None
    omega: list[list[GaussRational]] | None = None
    christoffels: dict[tuple[int, int, int], ChartPoly] = field(default_factory=dict)
    omega_series: dict[int, dict[tuple[int, int], ChartPoly]] = field(default_factory=dict)
    ordering: str | None = None
    mu: list[list[GaussRational]] | None = None
    s_terms: dict[WeylKey, ChartPoly] = field(default_factory=dict)
    lagrangian: list[int] | None = None
    lambda_order: int | None = None
    budget: int | None = None
    scan_degree: int | None = None
    relative_h1_vanishes: bool = True
    bs: BSSection | None = None
    loops: list[LoopSection] = field(default_factory=list)
    theta: dict[int, sp.Expr] = field(default_factory=dict)
    frame_rows: list[str] = field(default_factory=list)
    gauge_rows: list[str] = field(default_factory=list)


def _require_dimension(state: _State, line_no: int) -> int:
    if state.dimension is None:
        raise ConfigParseError(line_no, "[chart] dim must be declared before this section")
    return state.dimension


def _index(text: str, dimension: int, line_no: int) -> int:
    value = int(text)
    if not 1 <= value <= dimension:
        raise ConfigParseError(line_no, f"index {value} out of range 1..{dimension}")
    return value - 1


def _indices(match: re.Match, count: int, dimension: int, line_no: int) -> list[int]:
    parts = [p.strip() for p in match.group("indices").split(",")]
    if len(parts) != count:
        raise ConfigParseError(line_no, f"expected {count} indices, got {len(parts)}")
    return [_index(p, dimension, line_no) for p in parts]


def _rational(text: str, line_no: int) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigParseError(line_no, f"not a rational number: {text.strip()!r}") from exc


def _integer(text: str, line_no: int) -> int:
    try:
        return int(text.strip())
    except ValueError as exc:
        raise ConfigParseError(line_no, f"not an integer: {text.strip()!r}") from exc


def _boolean(text: str, line_no: int) -> bool:
    value = text.strip().lower()
    if value in {"true", "yes", "1", "on"}:
        return True
    if value in {"false", "no", "0", "off"}:
        return False
    raise ConfigParseError(line_no, f"not a boolean: {text.strip()!r}")


def _key_value(line: str, line_no: int) -> tuple[str, str]:
    match = _KEY_RE.match(line)
    if not match:
        raise ConfigParseError(line_no, f"expected 'key = value', got {line!r}")
    return match.group("key").lower().replace("-", "_"), match.group("value").strip()


def _chart(state: _State, line: str, line_no: int) -> None:
    key, value = _key_value(line, line_no)
    if key != "dim":
        raise ConfigParseError(line_no, f"unknown chart key {key!r}")
    dimension = _integer(value, line_no)
    if dimension < 2 or dimension % 2:
        raise ConfigParseError(line_no, f"dim must be a positive even integer, got {dimension}")
    state.dimension = dimension


def _omega(state: _State, line: str, line_no: int) -> None:
    dimension = _require_dimension(state, line_no)
    if line.lower() == "darboux":
        state.omega = [list(row) for row in darboux_matrix(dimension)]
        return
    match = _INDEX_RE.match(line)
    if not match:
        raise ConfigParseError(line_no, f"expected 'darboux' or 'i,j = value', got {line!r}")
    i, j = _indices(match, 2, dimension, line_no)
    if i >= j:
        raise ConfigParseError(line_no, "omega entries are given for i < j")
    if state.omega is None:
        state.omega = [[ZERO] * dimension for _ in range(dimension)]
    value = _literal(parse_scalar, match.group("value"), line_no)
    state.omega[i][j] = value
    state.omega[j][i] = -value


def _literal(parser: Callable, text: str, line_no: int, *args):
    try:
        return parser(text, *args)
    except ValueError as exc:
        raise ConfigParseError(line_no, str(exc)) from exc


def _christoffel(state: _State, line: str, line_no: int) -> None:
    dimension = _require_dimension(state, line_no)
    match = _INDEX_RE.match(line)
    if not match:
        raise ConfigParseError(line_no, f"expected 'l,j,k = poly', got {line!r}")
    l, j, k = _indices(match, 3, dimension, line_no)
    state.christoffels[(l, j, k)] = _literal(parse_chart_poly, match.group("value"), line_no, dimension)


def _omega_series(state: _State, line: str, line_no: int) -> None:
    dimension = _require_dimension(state, line_no)
    match = _SERIES_RE.match(line)
    if not match:
        raise ConfigParseError(line_no, f"expected 'k: i,j = poly', got {line!r}")
    power = int(match.group("power"))
    i, j = _index(match.group("i"), dimension, line_no), _index(match.group("j"), dimension, line_no)
    if i >= j:
        raise ConfigParseError(line_no, "Omega entries are given for i < j")
    poly = _literal(parse_chart_poly, match.group("value"), line_no, dimension)
    state.omega_series.setdefault(power, {})[(i, j)] = poly


def _ordering(state: _State, line: str, line_no: int) -> None:
    dimension = _require_dimension(state, line_no)
    if state.ordering is None:
        name = line.strip().lower()
        if name not in {"weyl", "standard", "mu"}:
            raise ConfigParseError(line_no, f"ordering must be weyl, standard or mu, got {line!r}")
        state.ordering = name
        return
    match = _INDEX_RE.match(line)
    if not match or state.ordering != "mu":
        raise ConfigParseError(line_no, f"unexpected ordering line {line!r}")
    i, j = _indices(match, 2, dimension, line_no)
    if state.mu is None:
        state.mu = [[ZERO] * dimension for _ in range(dimension)]
    state.mu[i][j] = _literal(parse_scalar, match.group("value"), line_no)


def _s(state: _State, line: str, line_no: int) -> None:
    dimension = _require_dimension(state, line_no)
    for key, value in _literal(parse_weyl_terms, line, line_no, dimension).items():
        state.s_terms[key] = state.s_terms[key] + value if key in state.s_terms else value


def _lagrangian(state: _State, line: str, line_no: int) -> None:
    dimension = _require_dimension(state, line_no)
    key, value = _key_value(line, line_no)
    if key != "p_axes":
        raise ConfigParseError(line_no, f"unknown lagrangian key {key!r}")
    state.lagrangian = [_index(p.strip(), dimension, line_no) for p in value.split(",") if p.strip()]


def _truncation(state: _State, line: str, line_no: int) -> None:
    key, value = _key_value(line, line_no)
    if key == "lambda_order":
        state.lambda_order = _integer(value, line_no)
    elif key == "budget":
        state.budget = _integer(value, line_no)
    else:
        raise ConfigParseError(line_no, f"unknown truncation key {key!r}")


def _verify(state: _State, line: str, line_no: int) -> None:
    key, value = _key_value(line, line_no)
    if key == "degree":
        state.scan_degree = _integer(value, line_no)
    elif key == "relative_h1_vanishes":
        state.relative_h1_vanishes = _boolean(value, line_no)
    else:
        raise ConfigParseError(line_no, f"unknown verify key {key!r}")


def _bs(state: _State, line: str, line_no: int) -> None:
    key, value = _key_value(line, line_no)
    bs = state.bs if state.bs is not None else BSSection()
    if key == "action":
        bs.action = _literal(parse_expression, value, line_no, ("E",))
    elif key == "maslov":
        bs.maslov = _integer(value, line_no)
    elif key == "kappa":
        bs.kappa = _literal(parse_expression, value, line_no, ("E",))
        if bs.kappa.free_symbols:
            raise ConfigParseError(line_no, f"kappa must be a constant, got {value!r}")
    elif key == "lambda":
        bs.lam = _rational(value, line_no)
        if bs.lam <= 0:
            raise ConfigParseError(line_no, "lambda must be positive")
    elif key == "window":
        match = _WINDOW_RE.match(value)
        if not match:
            raise ConfigParseError(line_no, f"window must look like [lo, hi], got {value!r}")
        lo, hi = _rational(match.group("lo"), line_no), _rational(match.group("hi"), line_no)
        if lo >= hi:
            raise ConfigParseError(line_no, "window lower bound must be below the upper bound")
        bs.window = (lo, hi)
    elif key == "maslov_weight":
        bs.maslov_weight = _rational(value, line_no)
    else:
        raise ConfigParseError(line_no, f"unknown bs key {key!r}")
    state.bs = bs


def _loop(state: _State, line: str, line_no: int) -> None:
    dimension = _require_dimension(state, line_no)
    key, value = _key_value(line, line_no)
    loop = state.loops[-1]
    if key == "name":
        loop.name = value
    elif key == "segment":
        parts = split_top_level(value)
        if len(parts) != dimension:
            raise ConfigParseError(line_no, f"segment needs {dimension} coordinate expressions, got {len(parts)}")
        loop.segments.append(tuple(_literal(parse_expression, p, line_no, ("t",)) for p in parts))
    else:
        raise ConfigParseError(line_no, f"unknown loop key {key!r}")


def _theta(state: _State, line: str, line_no: int) -> None:
    dimension = _require_dimension(state, line_no)
    match = _INDEX_RE.match(line)
    if not match:
        raise ConfigParseError(line_no, f"expected 'i = expr', got {line!r}")
    (i,) = _indices(match, 1, dimension, line_no)
    state.theta[i] = _literal(parse_expression, match.group("value"), line_no, (), dimension)


def _matrix(rows_text: list[str], line_no: int, square: bool) -> sp.Matrix:
    rows = [r for r in split_top_level(" ".join(rows_text), ";")]
    parsed = [[_literal(parse_expression, e, line_no, ("t",)) for e in split_top_level(row)] for row in rows]
    width = {len(row) for row in parsed}
    if len(width) != 1:
        raise ConfigParseError(line_no, "matrix rows separated by ';' must have equal length")
    if square and width.pop() != len(parsed):
        raise ConfigParseError(line_no, "gauge matrix must be square")
    return sp.Matrix(parsed)


_HANDLERS: dict[str, Callable[[_State, str, int], None]] = {
    "chart": _chart,
    "omega": _omega,
    "christoffel": _christoffel,
    "Omega": _omega_series,
    "ordering": _ordering,
    "s": _s,
    "lagrangian": _lagrangian,
    "truncation": _truncation,
    "verify": _verify,
    "bs": _bs,
    "loop": _loop,
    "theta": _theta,
}


def parse_config(text: str, source: str | None = None) -> ParsedConfig:
    """Parse config text into raw setup data plus the optional run sections."""

    state = _State()
    section: str | None = None
    matrix_lines: dict[str, int] = {}
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        header = _SECTION_RE.match(line)
        if header:
            section = header.group("name")
            if section not in SECTIONS:
                raise ConfigParseError(line_no, f"unknown section [{section}]")
            if section == "loop":
                state.loops.append(LoopSection(name=f"loop{len(state.loops) + 1}"))
            continue
        if section is None:
            raise ConfigParseError(line_no, "content before the first section header")
        if section in {"frame", "gauge"}:
            (state.frame_rows if section == "frame" else state.gauge_rows).append(line)
            matrix_lines.setdefault(section, line_no)
            continue
        _HANDLERS[section](state, line, line_no)

    if state.dimension is None:
        raise ConfigParseError(max(1, len(text.splitlines())), "missing [chart] dim")

    omega_series = {
        power: ScalarForm(state.dimension, 2, components)
        for power, components in state.omega_series.items()
    }
    raw = RawSetup(
        dimension=state.dimension,
        omega=state.omega,
        christoffels=state.christoffels,
        omega_series=omega_series,
        ordering=state.ordering or "weyl",
        mu=state.mu,
        s_terms=state.s_terms,
        lagrangian=state.lagrangian,
        lambda_order=state.lambda_order,
        budget=state.budget,
        relative_h1_vanishes=state.relative_h1_vanishes,
    )
    parsed = ParsedConfig(
        raw=raw,
        scan_degree=state.scan_degree,
        bs=state.bs,
        loops=[loop for loop in state.loops if loop.segments],
        theta=state.theta,
        frame=_matrix(state.frame_rows, matrix_lines["frame"], square=False) if state.frame_rows else None,
        gauge=_matrix(state.gauge_rows, matrix_lines["gauge"], square=True) if state.gauge_rows else None,
        source=source,
    )
    logger.debug("Parsed config %s: dim=%d ordering=%s", source or "<text>", raw.dimension, raw.ordering)
    return parsed


def load_config(path: str | Path) -> ParsedConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParseError(0, f"cannot read {path}: {exc}") from exc
    return parse_config(text, source=str(path))


__all__ = [
    "BSSection",
    "LoopSection",
    "ParsedConfig",
    "SECTIONS",
    "load_config",
    "parse_config",
]
