from pathlib import Path

import numpy as np
import pytest

from jamshield.scenario import IrsGrid, Position3, Scenario

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

BASE = dict(
    q_start=Position3(0, 0, 100), q_end=Position3(500, 0, 100),
    q_g=Position3(100, -100, 0), q_m=Position3(100, 50, 0),
    irs=IrsGrid(2, 2, 0.0625, Position3(110, 50, 5)),
    h0=100.0, n_slots=20, delta_t=1.25, v_max=60.0,
    p_avg=0.2, p_peak=0.5, p_m=0.4, rho=1e-3, sigma2=1e-17,
)


def make_scenario(**kw) -> Scenario:
    args = dict(BASE)
    args.update(kw)
    return Scenario(**args)


@pytest.fixture
def scenario_factory():
    return make_scenario


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def configs_dir():
    return CONFIGS


ACCEPTANCE_LINES: dict = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
