from __future__ import annotations

import pytest

from commenergy.scenarios import load_fixture
from commenergy.solver import solve
from commenergy.transcription import build_program

# filled by tests/test_acceptance.py, one entry per criterion
CRITERIA: dict[str, tuple[bool, str]] = {}


def record(criterion: str, passed: bool, detail: str) -> None:
    CRITERIA[criterion] = (passed, detail)
    print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERIA, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        ok, detail = CRITERIA[key]
        terminalreporter.write_line(f"criterion {key:>3}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def single_cfg():
    return load_fixture("single_node")


@pytest.fixture(scope="session")
def two_cfg():
    return load_fixture("two_node_fixed")


@pytest.fixture(scope="session")
def tiny_cfg():
    return load_fixture("tiny_oracle")


@pytest.fixture(scope="session")
def single_solved(single_cfg):
    prog = build_program(single_cfg)
    sol, stats = solve(prog)
    return prog, sol, stats


@pytest.fixture(scope="session")
def two_solved(two_cfg):
    prog = build_program(two_cfg)
    sol, stats = solve(prog)
    return prog, sol, stats
