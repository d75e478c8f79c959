import numpy as np
import pytest

from epiwave import kpp, pde, tw
from epiwave.model import validate_params

BASE = (2.0, 0.5, 0.01)
CMP_R, CMP_MU = 2.0, 0.001
CMP_K = (0.05, 0.25, 0.75)

# filled by the acceptance tests, printed at the end of the session
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def base_params():
    return validate_params(*BASE)


@pytest.fixture(scope="session")
def base_run(base_params):
    grid = pde.Grid.from_interval(0.0, 400.0, 0.1)
    box = pde.BoxMonitor(every=1)
    res = pde.run(base_params, grid, pde.Heaviside(x0=10.0), 120.0, 0.02, "semi_implicit", observers=[box])
    return res, box


@pytest.fixture(scope="session")
def base_waves(base_params):
    return tw.continue_in_domain(base_params, [40.0, 80.0, 160.0])


@pytest.fixture(scope="session")
def cmp_waves():
    out = {}
    for K in CMP_K:
        p = validate_params(CMP_R, K, CMP_MU)
        out[K] = (p, tw.continue_in_domain(p, [40.0, 80.0])[-1])
    return out


@pytest.fixture(scope="session")
def cmp_reports(cmp_waves):
    return {K: kpp.compare_to_kpp(s.x, s.w, p, s.c) for K, (p, s) in cmp_waves.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
