import numpy as np
import pytest

from regsat.analytic import ModelParams
from regsat.model import Formula

ACCEPTANCE_RESULTS = []


def record(criterion, name, passed, detail=""):
    ACCEPTANCE_RESULTS.append((criterion, name, bool(passed), detail))
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, name, passed, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        terminalreporter.write_line(
            f"[{criterion:>2}] {'PASS' if passed else 'FAIL'} {name}: {detail}")


def formula_from_clauses(clauses, n, d):
    """Regular formula from signed 1-based literals, copies assigned in order."""
    k = len(clauses[0])
    params = ModelParams(n, d, k)
    flat = [lit for c in clauses for lit in c]
    seen = {}
    var, copy, sign = [], [], []
    for lit in flat:
        key = (abs(lit), lit > 0)
        copy.append(seen.get(key, 0))
        seen[key] = copy[-1] + 1
        var.append(abs(lit) - 1)
        sign.append(1 if lit > 0 else -1)
    return Formula.from_slots(params, var, copy, sign)


@pytest.fixture
def cycle_fixture():
    # One 4-cycle through x1, x2 and one 6-cycle through x3, x4, x5.
    clauses = [(1, 2), (-1, -2), (3, 4), (-4, 5), (-5, -3)]
    return formula_from_clauses(clauses, n=5, d=1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
