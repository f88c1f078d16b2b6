"""Suite-wide post-conditions on every solver call.

Every converged result of the package's solver core is checked for (block)
KKT optimality and a non-increasing objective trace; violations fail the
test that produced them. Acceptance tests run last so that they can report the
suite-wide tally.
"""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

import largevar.solvers as _solvers  # noqa: E402

KKT_TOL = 1e-5
TRACE_SLACK = 1e-12

_original_solve = _solvers._solve


class FitLedger:
    def __init__(self):
        self.pending = []
        self.checked = 0
        self.worst_kkt = 0.0
        self.failures = []

    def check(self, prob, part, res):
        # checked at once: keeping every problem alive until the end of a test exhausts memory
        if not res.converged:
            return
        v = _solvers.kkt_violation(prob, res.coef, part)
        tr = res.trace
        up = bool(np.any(np.diff(tr) > TRACE_SLACK * np.maximum(1.0, np.abs(tr[:-1]))))
        self.checked += 1
        self.worst_kkt = max(self.worst_kkt, v)
        if v > KKT_TOL or up:
            self.pending.append((v, up))

    def drain(self):
        bad = list(self.pending)
        self.pending.clear()
        self.failures.extend(bad)
        return bad


LEDGER = FitLedger()


def _recording_solve(prob, part, cfg):
    res = _original_solve(prob, part, cfg)
    LEDGER.check(prob, part, res)
    return res


_solvers._solve = _recording_solve


@pytest.fixture(autouse=True)
def _fit_postconditions():
    yield
    bad = LEDGER.drain()
    assert not bad, f"solver post-condition violated (kkt, trace increase): {bad[:5]}"


@pytest.fixture
def fit_ledger():
    return LEDGER


ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion; printed at the end of the run."""
    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}"
        ACCEPTANCE[number] = line
        print(line)
        return passed
    return record


def pytest_collection_modifyitems(config, items):
    items.sort(key=lambda it: "test_acceptance" in it.nodeid)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
    terminalreporter.write_line(
        f"suite-wide solver post-conditions: {LEDGER.checked} converged fits checked, "
        f"max KKT violation {LEDGER.worst_kkt:.3g}, failures {len(LEDGER.failures)}")
