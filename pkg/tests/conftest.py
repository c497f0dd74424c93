import os

import pytest
from hypothesis import HealthCheck, settings

from incsynth.abstraction import build_abstract_game
from incsynth.fixtures import B, gate_tables

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=500,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for the acceptance summary (also printed immediately)."""
    def emit(name: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'} {name}" + (f": {detail}" if detail else "")
        print(line)
        request.config.stash[ACCEPTANCE].append(line)
        return ok
    return emit


@pytest.fixture
def gate():
    """(before table, after table, before game, after game, spec)."""
    before, after = gate_tables()
    g0, spec = build_abstract_game(before, B)
    g1, _ = build_abstract_game(after, B)
    return before, after, g0, g1, spec


def small_scenario(seed: int = 3):
    """6 x 6 car workspace that solves in well under a second and has a nonempty winning region."""
    from incsynth.geometry import Box, GridPartition
    from incsynth.scenario import CarModel, Region, Scenario

    n = 6
    dom = Box.from_bounds([0, 0], [n, n])
    grid = GridPartition(dom, (n, n))
    wall = grid.flat_index((n - 1, n - 1))
    return Scenario(
        domain=dom, cells=(n, n),
        goal=frozenset({grid.flat_index((1, 1)), grid.flat_index((1, 2))}),
        obstacles=frozenset({wall}), start=frozenset(grid.states()) - {wall},
        regions=[Region("gray", Box.from_bounds([n - 2, 0], [n, 4]), 10)],
        rooms=[Region("r1", Box.from_bounds([n - 2, 0], [n, 2]), 200),
               Region("r2", Box.from_bounds([n - 2, 2], [n, 4]), 200)],
        base_budget=30 * 8 * n * n, model=CarModel(noise=1.5), seed=seed,
    )


@pytest.fixture
def small():
    return small_scenario()
