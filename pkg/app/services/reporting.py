"""Run orchestration: config -> engines -> RunReport, plus text rendering and schema export.

Every table is emitted in sorted order and timing is opt-in, so two runs on
the same config produce byte-identical JSON.
"""

from __future__ import annotations

import json
import logging
import time
from contextlib import contextmanager
from dataclasses import replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterator

import sympy as sp

from app.domain import (
    CONVENTIONS,
    Command,
    SetupValidationError,
    Verdict,
    Violation,
)
from app.ingestors.setup_config import ParsedConfig, load_config, parse_config
from app.models.reports import (
    CoefficientTable,
    CoefficientTerm,
    ConditionModel,
    EquivalenceReport,
    LoopAction,
    MaslovReport,
    RunReport,
    SpectrumLevel,
    VerdictModel,
)
from app.services.adapted_quantization import equivalence_step, verify_ideal_preservation
from app.services.bohr_sommerfeld import (
    BSProblem,
    LoopPath,
    bs_spectrum,
    liouville_integral,
    maslov_from_gauge,
    maslov_winding,
)
from app.services.exact_algebra import format_poly, gauss
from app.services.fedosov_engine import StarProduct, solve_gamma
from app.services.geometry_spec import AdaptednessReport, QuantizationSetup, check_adapted_data, validate_setup
from app.services.hochschild_lab import (
    MultiDiffOp,
    NaturalnessCertificate,
    associativity_residual,
    residual_witness,
)
from app.services.scalar_forms import ScalarForm

logger = logging.getLogger("fedosov.reporting")

SCHEMA_PATH = Path(__file__).resolve().parents[2] / "schemas" / "run_report.schema.json"


def format_exact(value: Any) -> str:
    """sympy/Fraction value as an exact string with ``^`` for powers."""

    if isinstance(value, Fraction):
        value = sp.Rational(value.numerator, value.denominator)
    return sp.sstr(sp.sympify(value)).replace("**", "^")


def form_to_dict(form: ScalarForm) -> dict[str, str]:
    return {",".join(str(i + 1) for i in index): format_poly(value) for index, value in form.components.items()}


def operator_terms(operator: MultiDiffOp) -> list[CoefficientTerm]:
    terms = []
    for key, value in operator.table.items():
        left = list(key[0])
        right = list(key[1]) if len(key) > 1 else []
        terms.append(CoefficientTerm(left=left, right=right, coefficient=format_poly(value)))
    return terms


def coefficient_table(order: int, operator: MultiDiffOp, certificate: NaturalnessCertificate) -> CoefficientTable:
    return CoefficientTable(
        order=order,
        natural=certificate.natural,
        max_orders=list(certificate.max_orders),
        terms=operator_terms(operator),
    )


def adaptedness_models(report: AdaptednessReport) -> list[ConditionModel]:
    return [ConditionModel(name=c.name, passed=c.passed, witness=c.witness) for c in report.conditions]


def _verdict(name: str, passed: bool, detail: str | None = None, witness: str | None = None) -> VerdictModel:
    return VerdictModel(name=name, verdict=Verdict.PASS if passed else Verdict.FAIL, detail=detail, witness=witness)


def _skipped(name: str, detail: str) -> VerdictModel:
    return VerdictModel(name=name, verdict=Verdict.SKIPPED, detail=detail)


class _Timer:
    def __init__(self, enabled: bool) -> None:
        self.enabled = enabled
        self.phases: dict[str, float] = {}

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.phases[name] = round(time.perf_counter() - start, 6)

    def result(self) -> dict[str, float] | None:
        return dict(self.phases) if self.enabled else None


def load(source: str | Path | ParsedConfig, *, is_text: bool = False) -> ParsedConfig:
    if isinstance(source, ParsedConfig):
        return source
    if is_text:
        return parse_config(str(source), source="<text>")
    return load_config(source)


def build_setup(config: ParsedConfig, order: int | None = None, budget: int | None = None) -> QuantizationSetup:
    raw = config.raw
    if order is not None or budget is not None:
        raw = replace(
            raw,
            lambda_order=order if order is not None else raw.lambda_order,
            budget=budget if budget is not None else (None if order is not None else raw.budget),
        )
    return validate_setup(raw)


def _tables(star: StarProduct) -> tuple[list[MultiDiffOp], list[CoefficientTable]]:
    operators, tables = [], []
    for k in range(star.order + 1):
        operator, certificate = star.extract(k)
        operators.append(operator)
        tables.append(coefficient_table(k, operator, certificate))
    return operators, tables


def _associativity(operators: list[MultiDiffOp]) -> VerdictModel:
    for n in range(1, len(operators)):
        residual = associativity_residual(operators, n)
        if not residual.is_zero():
            witness = residual_witness(residual)
            return _verdict("associativity", False, f"order {n}", witness.describe() if witness else None)
    return _verdict("associativity", True, f"orders 1..{len(operators) - 1}")


def _truncation_stability(setup: QuantizationSetup, operators: list[MultiDiffOp]) -> VerdictModel:
    wider = StarProduct(solve_gamma(setup.with_truncation(budget=setup.budget + 2)), setup.lambda_order)
    for k, operator in enumerate(operators):
        if wider.bidifferential(k) != operator:
            return _verdict("truncation_stability", False, f"budget {setup.budget} vs {setup.budget + 2}", f"order {k} changed")
    return _verdict("truncation_stability", True, f"budget {setup.budget} vs {setup.budget + 2}")


def _class_shift(setup: QuantizationSetup, star: StarProduct) -> VerdictModel:
    if not setup.omega_series:
        return _skipped("class_shift", "no Omega series")
    power, form = min(setup.omega_series, key=lambda item: item[0])
    if power + 1 > star.order:
        return _skipped("class_shift", f"shift at lambda^{power + 1} is beyond the truncation")
    base = StarProduct(solve_gamma(setup.with_omega_series({})), star.order)
    for j in range(power + 1):
        if base.bidifferential(j) != star.bidifferential(j):
            return _verdict("class_shift", False, f"Omega_{power}", f"products differ at order {j}")
    difference = star.bidifferential(power + 1) - base.bidifferential(power + 1)
    expected = MultiDiffOp.from_two_form(form, setup.poisson).scale(gauss(0, Fraction(-1, 2)))
    if difference.antisymmetric_part() != expected:
        witness = residual_witness(difference.antisymmetric_part() - expected)
        return _verdict("class_shift", False, f"Omega_{power}", witness.describe() if witness else None)
    return _verdict("class_shift", True, f"Omega_{power} shifts lambda^{power + 1} by (1/2i) Omega(Xf, Xg)")


def _maslov(config: ParsedConfig) -> tuple[MaslovReport | None, VerdictModel | None]:
    if config.frame is None and config.gauge is None:
        return None, None
    report = MaslovReport()
    if config.frame is not None:
        winding = maslov_winding(config.frame)
        report.winding, report.winding_raw = winding.index, winding.raw
        report.winding_residual, report.winding_samples = winding.residual, winding.samples
    if config.gauge is not None:
        gauge = maslov_from_gauge(config.gauge)
        report.gauge, report.gauge_residual = gauge.index, gauge.residual
    if report.winding is None or report.gauge is None:
        return report, _skipped("maslov_agreement", "needs both a frame and a gauge path")
    return report, _verdict("maslov_agreement", report.winding == report.gauge, f"winding {report.winding}, gauge {report.gauge}")


def _actions(config: ParsedConfig) -> list[LoopAction]:
    if not config.theta:
        return []
    actions = []
    for loop in config.loops:
        path = LoopPath.from_coordinates(loop.name, loop.segments)
        actions.append(LoopAction(loop=loop.name, action=format_exact(liouville_integral(path, config.theta))))
    return actions


def bs_problem(config: ParsedConfig, maslov: int | None = None) -> BSProblem:
    bs = config.bs
    missing = []
    if bs is None:
        missing = ["action", "maslov", "lambda", "window"]
    else:
        missing = [
            name
            for name, value in (("action", bs.action), ("maslov", bs.maslov if bs.maslov is not None else maslov), ("lambda", bs.lam), ("window", bs.window))
            if value is None
        ]
    if missing:
        raise SetupValidationError([Violation("bs_incomplete", f"[bs] section is missing: {', '.join(missing)}")])
    problem = BSProblem(
        action=bs.action,
        maslov=bs.maslov if bs.maslov is not None else maslov,
        lam=bs.lam,
        window=bs.window,
        kappa=bs.kappa,
    )
    if bs.maslov_weight is not None:
        problem = replace(problem, maslov_weight=bs.maslov_weight)
    return problem


def _spectrum(config: ParsedConfig, maslov: MaslovReport | None) -> list[SpectrumLevel]:
    fallback = maslov.winding if maslov is not None else None
    levels = bs_spectrum(bs_problem(config, fallback))
    return [SpectrumLevel(n=point.n, energy=format_exact(point.energy)) for point in levels]


def _exit_code(verdicts: list[VerdictModel]) -> int:
    return 1 if any(v.verdict == Verdict.FAIL for v in verdicts) else 0


def _build(config: ParsedConfig, order: int | None, budget: int | None, timer: _Timer) -> tuple[QuantizationSetup, AdaptednessReport, StarProduct, list[MultiDiffOp], list[CoefficientTable]]:
    with timer.phase("validate"):
        setup = build_setup(config, order, budget)
        adapted = check_adapted_data(setup)
    with timer.phase("solve"):
        solution = solve_gamma(setup)
        star = StarProduct(solution)
    with timer.phase("extract"):
        operators, tables = _tables(star)
    return setup, adapted, star, operators, tables


def run_build(config: ParsedConfig, order: int | None = None, budget: int | None = None, include_timing: bool = False) -> RunReport:
    timer = _Timer(include_timing)
    setup, adapted, star, _, tables = _build(config, order, budget, timer)
    verdicts = [
        _verdict("fedosov_residual", star.solution.certificate.ok, f"degree {star.solution.certificate.checked_degree}"),
        _verdict("naturalness", all(t.natural for t in tables), f"orders 0..{star.order}"),
    ]
    return RunReport(
        command=Command.BUILD,
        exit_code=_exit_code(verdicts),
        source=config.source,
        setup=setup.echo(),
        adaptedness=adaptedness_models(adapted),
        star_coefficients=tables,
        verdicts=verdicts,
        timing=timer.result(),
        conventions=dict(CONVENTIONS),
    )


def run_verify(config: ParsedConfig, order: int | None = None, budget: int | None = None, include_timing: bool = False) -> RunReport:
    timer = _Timer(include_timing)
    setup, adapted, star, operators, tables = _build(config, order, budget, timer)
    declared = config.raw.lagrangian is not None
    verdicts = [
        _verdict("fedosov_residual", star.solution.certificate.ok, f"degree {star.solution.certificate.checked_degree}"),
        _verdict("naturalness", all(t.natural for t in tables), f"orders 0..{star.order}"),
    ]
    with timer.phase("associativity"):
        verdicts.append(_associativity(operators))
    with timer.phase("truncation"):
        verdicts.append(_truncation_stability(setup, operators))
    with timer.phase("ideal"):
        if declared:
            failed = adapted.failed()
            verdicts.append(
                _verdict(
                    "adaptedness",
                    not failed,
                    "conditions i-iv",
                    "; ".join(f"{c.name}: {c.witness}" for c in failed) or None,
                )
            )
            degree = config.scan_degree if config.scan_degree is not None else None
            ideal = verify_ideal_preservation(star, degree=degree)
            verdicts.append(
                _verdict(
                    "ideal_preservation",
                    ideal.passed,
                    f"{ideal.checked} pair(s), degree {ideal.degree}, order {ideal.order}",
                    ideal.witness.describe() if ideal.witness else None,
                )
            )
        else:
            verdicts.append(_skipped("adaptedness", "no [lagrangian] declared"))
            verdicts.append(_skipped("ideal_preservation", "no [lagrangian] declared"))
    with timer.phase("class_shift"):
        verdicts.append(_class_shift(setup, star))
    with timer.phase("bohr_sommerfeld"):
        maslov, agreement = _maslov(config)
        if agreement is not None:
            verdicts.append(agreement)
        actions = _actions(config)
        spectrum = _spectrum(config, maslov) if config.bs is not None else []
    report = RunReport(
        command=Command.VERIFY,
        exit_code=_exit_code(verdicts),
        source=config.source,
        setup=setup.echo(),
        adaptedness=adaptedness_models(adapted),
        star_coefficients=tables,
        verdicts=verdicts,
        spectrum=spectrum,
        actions=actions,
        maslov=maslov,
        timing=timer.result(),
        conventions=dict(CONVENTIONS),
    )
    logger.info("verify %s: exit %d", config.source or "<text>", report.exit_code)
    return report


def run_equiv(config: ParsedConfig, other: ParsedConfig, order: int | None = None, budget: int | None = None, include_timing: bool = False) -> RunReport:
    timer = _Timer(include_timing)
    with timer.phase("solve"):
        setup_a = build_setup(config, order, budget)
        setup_b = build_setup(other, order, budget)
        star_a = StarProduct(solve_gamma(setup_a))
        star_b = StarProduct(solve_gamma(setup_b), star_a.order)
    first = next((k for k in range(1, star_a.order + 1) if star_a.bidifferential(k) != star_b.bidifferential(k)), None)
    verdicts: list[VerdictModel] = []
    equivalence = None
    with timer.phase("equivalence"):
        if first is None:
            verdicts.append(_verdict("equivalence", True, f"products agree through lambda^{star_a.order}"))
        else:
            result = equivalence_step(star_a, star_b, first)
            equivalence = EquivalenceReport(
                order=result.order,
                status=result.status,
                alpha=form_to_dict(result.split.alpha),
                class_form=form_to_dict(result.split.class_form),
                obstruction=form_to_dict(result.obstruction),
                generator=operator_terms(result.mapping.generator),
                certified=result.certified,
                alpha_vanishes_on_L=result.alpha_vanishes_on_L,
                relative_h1_vanishes=result.relative_h1_vanishes,
            )
            verdicts.append(_verdict("equivalence", result.certified, f"order {first}"))
            verdicts.append(
                _verdict(
                    "adapted_equivalence",
                    result.adapted,
                    result.status,
                    json.dumps(form_to_dict(result.obstruction), sort_keys=True) if not result.adapted else None,
                )
            )
    return RunReport(
        command=Command.EQUIV,
        exit_code=_exit_code(verdicts),
        source=f"{config.source or '<text>'} vs {other.source or '<text>'}",
        setup=setup_a.echo(),
        verdicts=verdicts,
        equivalence=equivalence,
        timing=timer.result(),
        conventions=dict(CONVENTIONS),
    )


def run_spectrum(config: ParsedConfig, include_timing: bool = False) -> RunReport:
    timer = _Timer(include_timing)
    with timer.phase("spectrum"):
        maslov = None
        if config.bs is not None and config.bs.maslov is None and config.frame is not None:
            maslov, _ = _maslov(config)
        spectrum = _spectrum(config, maslov)
    return RunReport(
        command=Command.SPECTRUM,
        exit_code=0,
        source=config.source,
        spectrum=spectrum,
        maslov=maslov,
        timing=timer.result(),
        conventions=dict(CONVENTIONS),
    )


def run_maslov(config: ParsedConfig, include_timing: bool = False) -> RunReport:
    timer = _Timer(include_timing)
    with timer.phase("maslov"):
        maslov, agreement = _maslov(config)
        actions = _actions(config)
    if maslov is None and not actions:
        raise SetupValidationError([Violation("maslov_missing", "config has no [frame], [gauge] or [loop]/[theta] data")])
    verdicts = [agreement] if agreement is not None else []
    return RunReport(
        command=Command.MASLOV,
        exit_code=_exit_code(verdicts),
        source=config.source,
        verdicts=verdicts,
        actions=actions,
        maslov=maslov,
        timing=timer.result(),
        conventions=dict(CONVENTIONS),
    )


def run(
    command: Command | str,
    config: str | Path | ParsedConfig,
    other: str | Path | ParsedConfig | None = None,
    *,
    order: int | None = None,
    budget: int | None = None,
    include_timing: bool = False,
    is_text: bool = False,
) -> RunReport:
    """Dispatch one command; WorkbenchError propagates with its exit code."""

    command = Command(command)
    parsed = load(config, is_text=is_text)
    if command is Command.BUILD:
        return run_build(parsed, order, budget, include_timing)
    if command is Command.VERIFY:
        return run_verify(parsed, order, budget, include_timing)
    if command is Command.EQUIV:
        if other is None:
            raise SetupValidationError([Violation("equiv_needs_two", "equiv compares two configs")])
        return run_equiv(parsed, load(other, is_text=is_text), order, budget, include_timing)
    if command is Command.SPECTRUM:
        return run_spectrum(parsed, include_timing)
    return run_maslov(parsed, include_timing)


def report_json(report: RunReport) -> str:
    return report.model_dump_json(indent=2) + "\n"


def report_schema() -> dict[str, Any]:
    return RunReport.model_json_schema()


def shipped_schema() -> dict[str, Any]:
    return json.loads(SCHEMA_PATH.read_text(encoding="utf-8"))


def render_text(report: RunReport) -> str:
    lines = [f"command: {report.command.value}", f"exit code: {report.exit_code}"]
    if report.source:
        lines.append(f"source: {report.source}")
    if report.setup:
        lines.append(
            f"setup: dim={report.setup['dimension']} ordering={report.setup['ordering']} "
            f"N={report.setup['lambda_order']} D={report.setup['budget']}"
        )
    if report.adaptedness:
        lines.append("adaptedness:")
        for condition in report.adaptedness:
            mark = "ok" if condition.passed else f"FAIL ({condition.witness})"
            lines.append(f"  {condition.name}: {mark}")
    for table in report.star_coefficients:
        lines.append(f"star_{table.order}: {len(table.terms)} term(s), max orders {table.max_orders}")
        for term in table.terms:
            lines.append(f"  d{term.left} (x) d{term.right}: {term.coefficient}")
    if report.verdicts:
        lines.append("verdicts:")
        for verdict in report.verdicts:
            text = f"  {verdict.name}: {verdict.verdict.value}"
            if verdict.detail:
                text += f" [{verdict.detail}]"
            if verdict.witness:
                text += f" witness: {verdict.witness}"
            lines.append(text)
    if report.equivalence:
        eq = report.equivalence
        lines.append(f"equivalence at order {eq.order}: {eq.status} (certified={eq.certified})")
        lines.append(f"  alpha: {eq.alpha or '0'}")
        if eq.obstruction:
            lines.append(f"  obstruction on L: {eq.obstruction}")
    if report.spectrum:
        lines.append("spectrum:")
        lines.extend(f"  n={level.n}: E={level.energy}" for level in report.spectrum)
    for action in report.actions:
        lines.append(f"action[{action.loop}] = {action.action}")
    if report.maslov:
        if report.maslov.winding is not None:
            lines.append(f"maslov (winding): {report.maslov.winding} residual {report.maslov.winding_residual:.2e}")
        if report.maslov.gauge is not None:
            lines.append(f"maslov (gauge): {report.maslov.gauge} residual {report.maslov.gauge_residual:.2e}")
    if report.timing:
        lines.append("timing: " + ", ".join(f"{k}={v:.3f}s" for k, v in report.timing.items()))
    return "\n".join(lines) + "\n"


__all__ = [
    "SCHEMA_PATH",
    "bs_problem",
    "build_setup",
    "coefficient_table",
    "form_to_dict",
    "format_exact",
    "load",
    "render_text",
    "report_json",
    "report_schema",
    "run",
    "run_build",
    "run_equiv",
    "run_maslov",
    "run_spectrum",
    "run_verify",
    "shipped_schema",
]
