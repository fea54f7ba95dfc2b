"""Shared fixtures: the three-bundle reference instance S1."""

import sys

import pytest

from vflbargain.harness.instances import s1
from vflbargain.market import QuotedPrice, TaskEconomics, Tolerances
from vflbargain.oracle.oracles import SyntheticOracle
from vflbargain.protocol.engine import SessionConfig
from vflbargain.strategy import DataState


@pytest.fixture
def inst():
    return s1()


@pytest.fixture
def econ():
    return TaskEconomics(50.0, 10.0)


@pytest.fixture
def data_state(inst):
    return DataState(inst.catalog, inst.gains, Tolerances())


@pytest.fixture
def session_cfg(inst):
    def make(**kw):
        base = dict(econ=inst.econ, catalog=inst.catalog, oracle=SyntheticOracle.from_table(inst.gains),
                    target=0.1)
        base.update(kw)
        return SessionConfig(**base)
    return make


@pytest.fixture
def q_ref():
    return QuotedPrice(10, 1.2, 2.2)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
