import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from ctlimprov import automata, grammars  # noqa: E402

DATA = os.path.join(os.path.dirname(__file__), os.pardir, "src", "ctlimprov", "data")
DATA = os.path.normpath(DATA)

ACCEPTANCE_LINES = []


def data_path(name):
    return os.path.join(DATA, name)


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def no11():
    return automata.load_dfa(data_path("no11.dfa"))


@pytest.fixture
def near001():
    return automata.load_dfa(data_path("near001.dfa"))


@pytest.fixture
def dyck():
    return grammars.load_cfg(data_path("dyck.cfg"))


@pytest.fixture
def depth1():
    return automata.load_dfa(data_path("depth1.dfa"))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
