import itertools

import numpy as np
import pytest

from greedy_ising.greedy import contract_violations
from greedy_ising.losses import NodeConditionalLogisticLoss

# criterion -> (passed, detail); filled by test_acceptance, printed at the end
ACCEPTANCE = {}
# every greedy run checked against the contract during the session
CONTRACT_LOG = {"runs": 0, "violations": []}


def orthonormal_design(n, p, rng):
    """n x p design with X^T X / n = I."""
    q, _ = np.linalg.qr(rng.standard_normal((n, p)))
    return q * np.sqrt(n)


def best_subset(design, response, size):
    """Exhaustive least-squares best subset of the given size."""
    n, p = design.shape
    best, best_rss = None, np.inf
    for S in itertools.combinations(range(p), size):
        cols = design[:, S]
        coef, *_ = np.linalg.lstsq(cols, response, rcond=None)
        r = response - cols @ coef
        rss = float(r @ r)
        if rss < best_rss - 1e-12:
            best, best_rss = S, rss
    return tuple(best)


def check_contract(loss, result, config):
    problems = contract_violations(loss, result, config)
    CONTRACT_LOG["runs"] += 1
    CONTRACT_LOG["violations"].extend(problems)
    assert not problems, problems


def check_structure_contract(data, estimates, config, include_intercept=False):
    for est in estimates:
        loss = NodeConditionalLogisticLoss(data, est.node, include_intercept)
        check_contract(loss, est.extra["result"], config)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
