import numpy as np
import pytest

from extpos import kernels
from extpos.drone import drone

_ACCEPTANCE = {}


@pytest.fixture(params=sorted(kernels.backends()))
def kernel_impl(request):
    return kernels.backends()[request.param]


@pytest.fixture
def plant():
    return drone(0.1)


def random_observable(rng, n, m, p, rho_max=1.2):
    """Random plant with spectral radius in [0.3, rho_max], redrawn until observable."""
    from extpos._linalg import matrix_rank
    from extpos.lti import LtiSystem

    while True:
        A = rng.standard_normal((n, n))
        A *= rng.uniform(0.3, rho_max) / max(1e-9, np.max(np.abs(np.linalg.eigvals(A))))
        B = rng.standard_normal((n, m))
        C = rng.standard_normal((p, n))
        sys = LtiSystem(A, B, C)
        if matrix_rank(sys.observability_matrix()) == n:
            return sys


@pytest.fixture
def acceptance():
    def record(criterion, passed, detail=""):
        _ACCEPTANCE[criterion] = (bool(passed), detail)
        assert passed, f"criterion {criterion} failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key}: {detail}")
