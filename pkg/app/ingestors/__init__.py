"""Text input parsers: polynomial literals and run configs."""

from .literals import parse_chart_poly, parse_expression, parse_scalar, parse_weyl_literal
from .setup_config import BSSection, LoopSection, ParsedConfig, load_config, parse_config

__all__ = [
    "BSSection",
    "LoopSection",
    "ParsedConfig",
    "load_config",
    "parse_chart_poly",
    "parse_config",
    "parse_expression",
    "parse_scalar",
    "parse_weyl_literal",
]
