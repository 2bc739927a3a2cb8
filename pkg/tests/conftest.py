from importlib.resources import files

import pytest

from stripslearn.pddl import load_domain, load_problem

DATA = files("stripslearn") / "data"

# predicate order of the worked BlocksWorld vectors: arm first, then per-object predicates
BW_ORDER = ("armempty", "clear", "ontable", "holding", "on")

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def data_path(name: str):
    return DATA / name


@pytest.fixture(scope="session")
def bw():
    return load_domain(DATA / "blocksworld.pddl")


@pytest.fixture(scope="session")
def bw_train(bw):
    return load_problem(DATA / "blocksworld-train-13.pddl", bw)


@pytest.fixture(scope="session")
def bw_test(bw):
    return load_problem(DATA / "blocksworld-test-30.pddl", bw)


@pytest.fixture(scope="session")
def zeno():
    return load_domain(DATA / "zenotravel.pddl")


@pytest.fixture(scope="session")
def zeno_train(zeno):
    return load_problem(DATA / "zenotravel-train.pddl", zeno)


@pytest.fixture(scope="session")
def zeno_test(zeno):
    return load_problem(DATA / "zenotravel-test.pddl", zeno)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
