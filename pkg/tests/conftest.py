import numpy as np
import pytest

from jcsp.experiments import validation_model
from jcsp.model import INF, PS, ModelBuilder


def two_layer(users=2, think=1.0, demand=0.5, multiplicity=1):
    """Reference users calling one entry of a task on a PS processor."""
    b = ModelBuilder("two-layer")
    b.processor("Pu", INF, is_pseudo=True)
    b.processor("P1", PS, 1)
    b.task("users", "Pu", users, "reference")
    b.task("T1", "P1", multiplicity)
    b.activity("think", "users", think)
    b.entry("go", "users", "think")
    b.call("think", "E1")
    b.activity("work", "E1", demand)
    b.entry("E1", "T1", "work")
    return b.build()


def three_level(users=3):
    """Users -> front task -> back task, each on its own processor."""
    b = ModelBuilder("three-level")
    b.processor("Pu", INF, is_pseudo=True)
    b.processor("P1", PS, 1)
    b.processor("P2", PS, 1)
    b.task("users", "Pu", users, "reference")
    b.task("front", "P1", 2)
    b.task("back", "P2", 1)
    b.activity("think", "users", 1.0)
    b.entry("go", "users", "think")
    b.call("think", "F")
    b.activity("f", "F", 0.2)
    b.entry("F", "front", "f")
    b.call("f", "B")
    b.activity("b", "B", 0.3)
    b.entry("B", "back", "b")
    return b.build()


@pytest.fixture
def vmodel():
    return validation_model(2, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the test session
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
