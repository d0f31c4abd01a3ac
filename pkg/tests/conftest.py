import numpy as np
import pytest

from poroplate.model import PhysicalParams, sin_in_time_permeability
from poroplate.operators import make_context


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def params():
    return PhysicalParams(D=1.3, alpha=0.8, c_p=0.6, rho_p=0.0, h=0.5)


@pytest.fixture
def ctx(params):
    return make_context(params, 4, 3, 17)


@pytest.fixture
def ctx_tk(params):
    """Context with the time-dependent transverse preset."""
    return make_context(params, 3, 3, 17, sin_in_time_permeability())


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for lines in results:
        for line in lines:
            terminalreporter.write_line(line)
