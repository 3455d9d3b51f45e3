"""Literal parsers for scalars, chart polynomials, Weyl elements and sympy expressions.

Literals are read with sympy's ``parse_expr`` (``^`` accepted for powers)
against a fixed symbol table, so an unknown name is an error instead of a
silently created symbol.
"""

from __future__ import annotations

import logging
from functools import lru_cache
from typing import Iterable

import sympy as sp
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

from app.services.exact_algebra import ChartPoly, GaussRational, scalar_from_sympy
from app.services.weyl_calculus import WeylElement, WeylKey

logger = logging.getLogger("fedosov.ingestors.literals")

_TRANSFORMS = standard_transformations + (convert_xor,)
LAMBDA = sp.Symbol("lam")


@lru_cache(maxsize=None)
def chart_symbols(dimension: int) -> tuple[sp.Symbol, ...]:
    return tuple(sp.Symbol(f"x{k}") for k in range(1, dimension + 1))


@lru_cache(maxsize=None)
def fiber_symbols(dimension: int) -> tuple[sp.Symbol, ...]:
    return tuple(sp.Symbol(f"y{k}") for k in range(1, dimension + 1))


def _parse(text: str, allowed: Iterable[sp.Symbol], constants: dict[str, sp.Basic] | None = None) -> sp.Expr:
    source = text.strip()
    if not source:
        raise ValueError("empty literal")
    table: dict[str, sp.Basic] = {"i": sp.I, "I": sp.I}
    table.update(constants or {})
    allowed = tuple(allowed)
    table.update({s.name: s for s in allowed})
    try:
        expr = parse_expr(source, local_dict=table, transformations=_TRANSFORMS, evaluate=True)
    except Exception as exc:  # sympy raises SyntaxError, TokenError, TypeError, ...
        raise ValueError(f"cannot parse {source!r}: {exc}") from exc
    if not isinstance(expr, sp.Expr):
        raise ValueError(f"{source!r} is not an expression")
    unknown = expr.free_symbols - set(allowed)
    if unknown:
        names = ", ".join(sorted(s.name for s in unknown))
        raise ValueError(f"unknown symbol(s) {names} in {source!r}")
    return expr


def parse_scalar(text: str) -> GaussRational:
    """``3/2``, ``-i``, ``1/2 + 1/3*i``."""

    expr = _parse(text, ())
    try:
        return scalar_from_sympy(expr)
    except ValueError as exc:
        raise ValueError(f"{text.strip()!r} is not an exact Gaussian rational") from exc


def _to_chart_poly(expr: sp.Expr, dimension: int) -> ChartPoly:
    gens = chart_symbols(dimension)
    try:
        poly = sp.Poly(sp.expand(expr), *gens)
    except sp.PolynomialError as exc:
        raise ValueError(f"not a polynomial in x1..x{dimension}: {expr}") from exc
    terms = {}
    for monom, coeff in poly.terms():
        terms[tuple(monom)] = scalar_from_sympy(coeff)
    return ChartPoly.from_terms(dimension, terms)


def parse_chart_poly(text: str, dimension: int) -> ChartPoly:
    """Signed terms ``c*x<k>^e*...`` with Gaussian-rational ``c``; example ``3/2*x1^2*x2 - i*x3``."""

    expr = _parse(text, chart_symbols(dimension))
    try:
        return _to_chart_poly(expr, dimension)
    except ValueError as exc:
        raise ValueError(f"{text.strip()!r}: {exc}") from exc


def parse_weyl_terms(text: str, dimension: int) -> dict[WeylKey, ChartPoly]:
    """Weyl literal in fiber variables y<k>, base variables x<k> and ``lam``."""

    xs, ys = chart_symbols(dimension), fiber_symbols(dimension)
    expr = _parse(text, xs + ys + (LAMBDA,))
    try:
        poly = sp.Poly(sp.expand(expr), *ys, LAMBDA)
    except sp.PolynomialError as exc:
        raise ValueError(f"{text.strip()!r} is not polynomial in the fiber variables and lam") from exc
    out: dict[WeylKey, ChartPoly] = {}
    for monom, coeff in poly.terms():
        fiber, power = tuple(monom[:dimension]), monom[dimension]
        out[(fiber, power)] = _to_chart_poly(coeff, dimension)
    return out


def parse_weyl_literal(text: str, dimension: int, budget: int) -> WeylElement:
    return WeylElement(dimension, budget, parse_weyl_terms(text, dimension))


def parse_expression(text: str, names: Iterable[str] = (), dimension: int = 0) -> sp.Expr:
    """General sympy expression in the given free names (plus x<k> when ``dimension`` > 0); ``pi`` is symbolic."""

    symbols = tuple(sp.Symbol(name) for name in names)
    if dimension:
        symbols += chart_symbols(dimension)
    return _parse(text, symbols, {"pi": sp.pi})


def split_top_level(text: str, separator: str = ",") -> list[str]:
    """Split on ``separator`` outside parentheses and brackets."""

    parts, depth, current = [], 0, []
    for char in text:
        if char in "([":
            depth += 1
        elif char in ")]":
            depth -= 1
        if char == separator and depth == 0:
            parts.append("".join(current).strip())
            current = []
        else:
            current.append(char)
    parts.append("".join(current).strip())
    return [p for p in parts if p]


__all__ = [
    "LAMBDA",
    "chart_symbols",
    "fiber_symbols",
    "parse_chart_poly",
    "parse_expression",
    "parse_scalar",
    "parse_weyl_literal",
    "parse_weyl_terms",
    "split_top_level",
]
