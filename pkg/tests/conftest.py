"""Shared fixtures and the acceptance-summary report.

The flight-scenario closed-loop run is expensive, so it runs once per
session and is shared by the acceptance criteria that inspect it.
"""

import time
from dataclasses import dataclass

import numpy as np
import pytest

import mavmpc


@dataclass
class SharedRun:
    scenario: object
    log: object
    wall_time_s: float


@pytest.fixture(scope="session")
def flight_scenario():
    return mavmpc.load_scenario("cylinder")


@pytest.fixture(scope="session")
def flight_run(flight_scenario):
    """The 60 s obstacle-traversal run used by several acceptance criteria."""
    t0 = time.perf_counter()
    log = mavmpc.run_closed_loop(flight_scenario)
    wall = time.perf_counter() - t0
    return SharedRun(scenario=flight_scenario, log=log, wall_time_s=wall)


@pytest.fixture(scope="session")
def kernels_warm(flight_scenario):
    """Force the JIT compile outside any timed section."""
    cfg = flight_scenario.ocp
    problem = mavmpc.ShootingProblem(cfg, flight_scenario.x0)
    u = np.tile([9.81, 0.0, 0.0], cfg.horizon)
    problem.cost(u)
    problem.cost_and_grad(u)
    return True


# ---------------------------------------------------------------------------
# acceptance summary: one PASS/FAIL line per criterion at the end of the run

_ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    _ACCEPTANCE_RESULTS[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name in sorted(_ACCEPTANCE_RESULTS):
        outcome = _ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"  [{outcome}] {name}")
