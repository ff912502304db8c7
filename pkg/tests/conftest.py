"""Shared fixtures: the basic corridor scenario and cached solver runs.

The day-to-day oracle runs take seconds each, so they are session-scoped and
carry their wall-clock time for the runtime gates in the acceptance tests.
"""

from __future__ import annotations

import time
from dataclasses import replace

import pytest

from commuteq import (
    EnergyModel,
    Scenario,
    VehicleClass,
    run_until_converged,
    solve_mixed,
    solve_single_class,
)

N_TOTAL = 3000.0


def basic_scenario(mpr: float = 0.0) -> Scenario:
    return Scenario(
        alpha=8.4,
        beta=4.2,
        gamma=16.8,
        t_star=8.0,
        nu=4.1,
        n_total=N_TOTAL,
        capacity_r=8000.0,
        trip_km=20.0,
        s_max=60.0,
        mpr=mpr,
        gv_energy=EnergyModel(VehicleClass.GV, 4.0, 16.8),
        ev_energy=EnergyModel(VehicleClass.EV, 0.5, 3.0),
    )


@pytest.fixture(scope="session")
def scenario() -> Scenario:
    return basic_scenario()


@pytest.fixture(scope="session")
def gv_solution(scenario):
    return solve_single_class(scenario, scenario.gv_energy)


@pytest.fixture(scope="session")
def ev_solution(scenario):
    return solve_single_class(scenario, scenario.ev_energy)


@pytest.fixture(scope="session")
def mixed_solution(scenario):
    return solve_mixed(replace(scenario, mpr=0.5))


def _timed_oracle(scenario_run: Scenario):
    start = time.perf_counter()
    assignment, report = run_until_converged(
        scenario_run, bin_width=1.0 / 60.0, eta=0.05, gap_tol=1e-3
    )
    elapsed = time.perf_counter() - start
    return assignment, report, elapsed


@pytest.fixture(scope="session")
def oracle_mpr0(scenario):
    return _timed_oracle(scenario)


@pytest.fixture(scope="session")
def oracle_mpr1(scenario):
    return _timed_oracle(replace(scenario, mpr=1.0))


@pytest.fixture(scope="session")
def oracle_mixed(scenario):
    return _timed_oracle(replace(scenario, mpr=0.5))
