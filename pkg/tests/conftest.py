"""Suite-wide bookkeeping for the acceptance run.

Every fit produced anywhere in the test session passes through a recorder
that checks ``||b_hat||_inf <= lambda1 / (2 lambda2) + 1e-8``; the dedicated
acceptance test runs last and asserts no violation was seen.  Acceptance
tests also register a one-line verdict that is printed in the terminal
summary.
"""

import threading

import numpy as np
import pytest

from genlava.penalty import split_theta
from genlava.solver import Problem

B_BOUND_SLACK = 1e-8
B_BOUND_TEST = "test_c3_b_bound_over_whole_suite"


class BBoundRecorder:
    def __init__(self):
        self.lock = threading.Lock()
        self.checked = 0
        self.worst_excess = -np.inf
        self.violations = []

    def check(self, params, b, origin):
        bound = params.kappa_t if not params.is_lasso else 0.0
        excess = float(np.max(np.abs(b), initial=0.0)) - bound
        with self.lock:
            self.checked += 1
            self.worst_excess = max(self.worst_excess, excess)
            if excess > B_BOUND_SLACK:
                self.violations.append((origin, params, excess))


RECORDER = BBoundRecorder()
VERDICTS = {}


def _install_recorder():
    finish, path = Problem._finish, Problem.path

    def recording_finish(self, params, theta, obj, trace, it, ok, step):
        fit = finish(self, params, theta, obj, trace, it, ok, step)
        if fit.converged:
            RECORDER.check(fit.params, fit.b_hat, "fit")
        return fit

    def recording_path(self, params_seq, opts=None, theta0=None, step=None):
        params_seq = list(params_seq)
        thetas = path(self, params_seq, opts, theta0, step)
        for pp, theta in zip(params_seq, thetas):
            RECORDER.check(pp, split_theta(pp, theta)[1], "path")
        return thetas

    Problem._finish = recording_finish
    Problem.path = recording_path


_install_recorder()


def pytest_collection_modifyitems(config, items):
    last = [it for it in items if it.name == B_BOUND_TEST]
    items[:] = [it for it in items if it.name != B_BOUND_TEST] + last


@pytest.fixture
def b_bound_recorder():
    return RECORDER


@pytest.fixture
def verdict():
    """``verdict(number, passed, detail)`` records an acceptance criterion outcome."""

    def record(number, passed, detail):
        VERDICTS[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(VERDICTS):
        passed, detail = VERDICTS[number]
        terminalreporter.write_line(
            f"criterion {number:>2}: {'PASS' if passed else 'FAIL'} | {detail}")
