import math
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_spd(rng, n, lam_max=None):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = rng.uniform(0.1, 1.0, n)
    if lam_max is not None:
        lam *= lam_max / lam.max()
    A = (Q * lam) @ Q.T
    return 0.5 * (A + A.T)


def continuous_allocation(Vs, Cs, eps, rounds=6):
    # minimize sum N C over real N0, N1 on shrinking log grids; N2 closes the budget exactly
    budget = eps**2 / 2
    lo, hi = np.full(2, -3.0), np.full(2, 8.0)
    for _ in range(rounds):
        a, b = np.meshgrid(np.linspace(lo[0], hi[0], 401), np.linspace(lo[1], hi[1], 401))
        n0, n1 = 10.0**a, 10.0**b
        rest = budget - Vs[0] / n0 - Vs[1] / n1
        cost = np.where(rest > 0, n0 * Cs[0] + n1 * Cs[1] + Vs[2] / np.where(rest > 0, rest, 1) * Cs[2], np.inf)
        k = np.unravel_index(np.argmin(cost), cost.shape)
        best = np.array([a[k], b[k]])
        width = (hi - lo) / 40
        lo, hi = best - width, best + width
    n0, n1 = 10.0**best
    return np.array([n0, n1, Vs[2] / (budget - Vs[0] / n0 - Vs[1] / n1)])


def integer_optimum_cost(Vs, Cs, eps, x):
    budget = eps**2 / 2
    best = math.inf
    for n0 in range(1, int(3 * x[0]) + 3):
        n1 = np.arange(1, int(3 * x[1]) + 3)
        rest = budget - Vs[0] / n0 - Vs[1] / n1
        ok = rest > 0
        n2 = np.ceil(Vs[2] / rest[ok] * (1 - 1e-12))
        if ok.any():
            best = min(best, float(np.min(n0 * Cs[0] + n1[ok] * Cs[1] + n2 * Cs[2])))
    return best


@pytest.fixture(autouse=True)
def _quiet_hierarchy_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*below h_f.*")
        yield


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
