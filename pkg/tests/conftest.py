from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import settings

from bayesinterp.finstoch import Kernel
from bayesinterp.interpretation import Interpretation
from bayesinterp.specfile import load_spec

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

_criteria: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.rsplit("::", 1)[1]
        _criteria[name] = ("PASS" if report.outcome == "passed" else "FAIL", name)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria, key=lambda n: int(n.split("_")[2])):
        status, _ = _criteria[name]
        terminalreporter.write_line(f"{status}  {name}")


def set_entry(k: Kernel, a, b, p, rebalance) -> Kernel:
    """Copy of ``k`` with ``k(b | a) = p``, moving the difference onto ``rebalance``."""
    cols = [list(c) for c in k.cols]
    col = cols[k.src.index(a)]
    i, j = k.dst.index(b), k.dst.index(rebalance)
    col[j] += col[i] - Fraction(p)
    col[i] = Fraction(p)
    return Kernel(k.src, k.dst, cols)


@pytest.fixture
def three_state():
    doc = load_spec("three_state.spec")
    return doc.machine, doc.interpretation


@pytest.fixture
def three_state_det():
    doc = load_spec("three_state_deterministic.spec")
    return doc.machine, doc.interpretation


@pytest.fixture
def perturbed_psi():
    """Belief map of the three-state example with psi(h1 | y1) lowered to 3/4."""

    def make(i: Interpretation) -> Interpretation:
        return Interpretation(set_entry(i.psi, "y1", "h1", Fraction(3, 4), "h2"), i.model)

    return make


def rng_for(seed: int) -> random.Random:
    return random.Random(seed)
