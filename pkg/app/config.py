"""Configuration settings for the Fedosov workbench."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from fractions import Fraction

logger = logging.getLogger("fedosov.config")


def _get_bool(env_var: str, default: bool = False) -> bool:
    """Parse an environment variable into a boolean with a default."""

    value = os.getenv(env_var)
    if value is None:
        return default

    return value.lower() in {"1", "true", "yes", "on"}


@dataclass
class Settings:
    """Process configuration loaded from environment variables."""

    env: str = os.getenv("FEDOSOV_ENV", "local")
    log_level: str = os.getenv("FEDOSOV_LOG_LEVEL", "INFO")

    # Truncation defaults
    default_lambda_order: int = int(os.getenv("FEDOSOV_DEFAULT_ORDER", "3"))
    budget_offset: int = int(os.getenv("FEDOSOV_BUDGET_OFFSET", "2"))

    # Bohr-Sommerfeld / Maslov
    maslov_weight: Fraction = Fraction(os.getenv("FEDOSOV_MASLOV_WEIGHT", "1/4"))
    winding_tolerance: float = float(os.getenv("FEDOSOV_WINDING_TOLERANCE", "0.1"))

    # Verification
    max_diff_order: int = int(os.getenv("FEDOSOV_MAX_DIFF_ORDER", "4"))
    scan_degree: int = int(os.getenv("FEDOSOV_SCAN_DEGREE", "4"))
    workers: int = int(os.getenv("FEDOSOV_WORKERS", "1"))
    strict_s_degree: bool = _get_bool("FEDOSOV_STRICT_S_DEGREE", default=False)

    def default_budget(self, lambda_order: int) -> int:
        return 2 * lambda_order + self.budget_offset


settings = Settings()

__all__ = ["settings", "Settings"]
