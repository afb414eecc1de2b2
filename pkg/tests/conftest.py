import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def jittered_lattice(n, dims, L=1.0, jitter=0.25, seed=0):
    """Lattice of ``n**dims`` points with interior points shifted by up to
    ``jitter`` spacings."""
    rng = np.random.default_rng(seed)
    dx = L / (n - 1)
    g = np.meshgrid(*([np.arange(n) * dx] * dims), indexing="ij")
    x = np.stack([a.ravel() for a in g], axis=1)
    inner = np.all((x > 0) & (x < L - 1e-12), axis=1)
    x[inner] += rng.uniform(-jitter, jitter, (inner.sum(), dims)) * dx
    return x, dx


_criteria = {}


@pytest.fixture
def criterion():
    """``criterion(n, ok, detail, warn=False)`` records and prints one verdict line."""
    def record(n, ok, detail, warn=False):
        status = "PASS" if ok else ("WARN" if warn else "FAIL")
        line = f"criterion {n:2d}: {status}  {detail}"
        _criteria[n] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _criteria:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_criteria):
            terminalreporter.write_line(_criteria[n])
