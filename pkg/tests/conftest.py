"""Shared fixtures plus a session-wide audit of the ascent property.

Every FitResult built anywhere in the suite (in this process) has its trace
checked for a decrease of Q_eps beyond the 1e-12 relative slack.  The tally
and the acceptance PASS/FAIL lines are printed in the terminal summary.
"""

import numpy as np
import pytest

from pennmm import solver

ASCENT_AUDIT = {"fits": 0, "iterations": 0, "violations": 0}
ACCEPTANCE_LINES = []


def _audited_init(original):
    def __init__(self, *args, **kwargs):
        original(self, *args, **kwargs)
        ASCENT_AUDIT["fits"] += 1
        ASCENT_AUDIT["iterations"] += max(len(self.trace) - 1, 0)
        ASCENT_AUDIT["violations"] += solver.ascent_violations(self.trace)

    return __init__


def pytest_configure(config):
    solver.FitResult.__init__ = _audited_init(solver.FitResult.__init__)


def pytest_collection_modifyitems(session, config, items):
    # acceptance criteria run last so the ascent check sees every other fit
    items.sort(key=lambda item: item.path.name == "test_acceptance.py")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    tr = terminalreporter
    tr.section("ascent audit")
    a = ASCENT_AUDIT
    verdict = "PASS" if a["violations"] == 0 else "FAIL"
    tr.write_line(
        f"{verdict} criterion 3 (suite-wide): {a['violations']} ascent violations over "
        f"{a['fits']} fits / {a['iterations']} accepted iterations"
    )
    if ACCEPTANCE_LINES:
        tr.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            tr.write_line(line)


def pytest_sessionfinish(session, exitstatus):
    if ASCENT_AUDIT["violations"] and session.exitstatus == 0:
        session.exitstatus = 1


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def ascent_audit():
    return ASCENT_AUDIT


@pytest.fixture
def acceptance_line():
    """Record and print a PASS/FAIL line, then return the verdict."""

    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record
