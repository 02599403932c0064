"""Shared fixtures: experiment runs are expensive, so each config runs once per session."""
from __future__ import annotations

from pathlib import Path

import pytest

from fourier_ocp.config import load_config
from fourier_ocp.experiment import run_experiment

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

ACCEPTANCE_LINES: list[str] = []


class _Runs:
    def __init__(self, base: Path) -> None:
        self.base = base
        self.cache = {}

    def get(self, name: str, tag: str = ""):
        key = (name, tag)
        if key not in self.cache:
            out = self.base / f"{name}{tag}"
            cfg = load_config(CONFIGS / f"{name}.toml", output_dir=out)
            self.cache[key] = (cfg, run_experiment(cfg))
        return self.cache[key]


@pytest.fixture(scope="session")
def runs(tmp_path_factory):
    return _Runs(tmp_path_factory.mktemp("runs"))


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
