from pathlib import Path

import pytest

from freshsched.derivation import derive_periods
from freshsched.graphio import load_graph
from freshsched.model import DependencyEdge, PlatformSpec, TaskGraph, TaskSpec

MS = 1000  # ticks per millisecond at the default 1 us tick
FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def aeb(cores: int = 2) -> TaskGraph:
    g = TaskGraph(
        (TaskSpec("imu", 2 * MS), TaskSpec("vis", 10 * MS), TaskSpec("ctrl", 1 * MS, period=20 * MS)),
        (DependencyEdge("imu", "ctrl", 5 * MS, 0), DependencyEdge("vis", "ctrl", 20 * MS, 0)),
        platform=PlatformSpec(cores=cores),
    )
    return derive_periods(g)


def fixture_graph(name: str, cores: int | None = None) -> TaskGraph:
    g = derive_periods(load_graph(str(FIXTURES / name)))
    return g if cores is None else g.with_platform(cores=cores)


@pytest.fixture
def aeb2() -> TaskGraph:
    return aeb(2)


@pytest.fixture
def aeb1() -> TaskGraph:
    return aeb(1)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(':'))):
            terminalreporter.write_line(line)
