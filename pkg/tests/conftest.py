import sys
from pathlib import Path

import pytest

ROOT_DIR = Path(__file__).resolve().parents[1]
if str(ROOT_DIR) not in sys.path:
    sys.path.insert(0, str(ROOT_DIR))

CONFIGS_DIR = ROOT_DIR / "configs"


@pytest.fixture()
def configs_dir() -> Path:
    return CONFIGS_DIR


@pytest.fixture()
def config_text():
    """Read a shipped config by file name."""

    def _read(name: str) -> str:
        return (CONFIGS_DIR / name).read_text(encoding="utf-8")

    return _read
