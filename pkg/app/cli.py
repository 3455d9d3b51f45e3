"""Command-line surface of the Fedosov workbench.

Usage examples:
    python -m app.cli build configs/flat_weyl.cfg --order 2
    python -m app.cli verify configs/flat_standard.cfg --format text
    python -m app.cli equiv configs/flat_weyl.cfg configs/flat_weyl_shifted.cfg
    python -m app.cli spectrum configs/oscillator.cfg --out spectrum.json
    python -m app.cli maslov configs/oscillator.cfg
    python -m app.cli schema

Exit codes: 0 all verdicts pass, 1 verification failure, 2 parse error, 3 invalid setup.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from app.config import settings
from app.domain import Command, OutputFormat, WorkbenchError
from app.services.reporting import render_text, report_json, report_schema, run

logger = logging.getLogger("fedosov.cli")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
        logger.info("Report written to %s", out)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> None:
    command = Command(args.command)
    try:
        report = run(
            command,
            args.config,
            getattr(args, "other", None),
            order=getattr(args, "order", None),
            budget=getattr(args, "budget", None),
            include_timing=args.timing,
        )
    except WorkbenchError as exc:
        sys.stderr.write(json.dumps(exc.to_detail(), indent=2, default=str) + "\n")
        raise SystemExit(exc.exit_code)

    if OutputFormat(args.format) is OutputFormat.TEXT:
        _emit(render_text(report), args.out)
    else:
        _emit(report_json(report), args.out)
    raise SystemExit(report.exit_code)


def cmd_schema(args) -> None:
    _emit(json.dumps(report_schema(), indent=2) + "\n", args.out)


def _add_common(parser: argparse.ArgumentParser, truncation: bool = True) -> None:
    if truncation:
        parser.add_argument("--order", type=int, help="Lambda truncation order N")
        parser.add_argument("--budget", type=int, help="Degree budget D (default 2N + offset)")
    parser.add_argument("--out", help="Write the report to this path instead of stdout")
    parser.add_argument(
        "--format",
        choices=[f.value for f in OutputFormat],
        default=OutputFormat.JSON.value,
        help="Report format",
    )
    parser.add_argument("--timing", action="store_true", help="Include per-phase timings in the report")
    parser.set_defaults(func=cmd_run)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Fedosov star products, adaptedness checks and Bohr-Sommerfeld spectra")
    sub = parser.add_subparsers(dest="command", required=True)

    build_cmd = sub.add_parser(Command.BUILD.value, help="Solve gamma and emit the star product coefficients")
    build_cmd.add_argument("config", help="Path to a run config")
    _add_common(build_cmd)

    verify_cmd = sub.add_parser(Command.VERIFY.value, help="Run the full invariant suite")
    verify_cmd.add_argument("config", help="Path to a run config")
    _add_common(verify_cmd)

    equiv_cmd = sub.add_parser(Command.EQUIV.value, help="Equivalence step between two configs differing in Omega")
    equiv_cmd.add_argument("config", help="Reference config")
    equiv_cmd.add_argument("other", help="Config with the shifted Omega series")
    _add_common(equiv_cmd)

    spectrum_cmd = sub.add_parser(Command.SPECTRUM.value, help="Solve the Bohr-Sommerfeld condition")
    spectrum_cmd.add_argument("config", help="Path to a config with a [bs] section")
    _add_common(spectrum_cmd, truncation=False)

    maslov_cmd = sub.add_parser(Command.MASLOV.value, help="Maslov indices and loop actions")
    maslov_cmd.add_argument("config", help="Path to a config with [frame], [gauge] or [loop] data")
    _add_common(maslov_cmd, truncation=False)

    schema_cmd = sub.add_parser("schema", help="Print the JSON schema of run reports")
    schema_cmd.add_argument("--out", help="Write the schema to this path instead of stdout")
    schema_cmd.set_defaults(func=cmd_schema)

    return parser


def main(argv: list[str] | None = None) -> None:
    logging.basicConfig(
        level=settings.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s - %(message)s",
        stream=sys.stderr,
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    args.func(args)


if __name__ == "__main__":  # pragma: no cover - CLI entry point
    main()
