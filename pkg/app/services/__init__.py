"""Computational modules of the Fedosov workbench."""

from .exact_algebra import ChartPoly, GaussRational, LambdaPoly, gauss
from .geometry_spec import QuantizationSetup, RawSetup, check_adapted_data, validate_setup
from .fedosov_engine import FedosovSolution, StarProduct, build_star_product, solve_gamma
from .adapted_quantization import equivalence_step, holonomy_twist, quotient_action, verify_ideal_preservation
from .bohr_sommerfeld import BSProblem, LoopPath, bs_spectrum, liouville_integral, maslov_from_gauge, maslov_winding

__all__ = [
    "BSProblem",
    "ChartPoly",
    "FedosovSolution",
    "GaussRational",
    "LambdaPoly",
    "LoopPath",
    "QuantizationSetup",
    "RawSetup",
    "StarProduct",
    "bs_spectrum",
    "build_star_product",
    "check_adapted_data",
    "equivalence_step",
    "gauss",
    "holonomy_twist",
    "liouville_integral",
    "maslov_from_gauge",
    "maslov_winding",
    "quotient_action",
    "solve_gamma",
    "validate_setup",
    "verify_ideal_preservation",
]
