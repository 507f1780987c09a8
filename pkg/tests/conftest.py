import sys

import numpy as np
import pytest
from hypothesis import settings

from gaussian_decoherence import model as mdl

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


def random_model(rng: np.random.Generator, n: int, K: int, hbar: float = 1.0) -> mdl.SystemModel:
    """Model with Q and l_k entries uniform in [-1, 1]."""
    Q = rng.uniform(-1, 1, (2 * n, 2 * n))
    Q = 0.5 * (Q + Q.T)
    ls = [rng.uniform(-1, 1, 2 * n) + 1j * rng.uniform(-1, 1, 2 * n) for _ in range(K)]
    return mdl.build_model(n, hbar, Q, ls)


def random_stable_model(rng: np.random.Generator, n: int, K: int) -> mdl.SystemModel:
    """Rejection-sample a model whose drift A has spectral abscissa <= 0."""
    while True:
        m = random_model(rng, n, K)
        if np.max(np.linalg.eigvals(m.A).real) <= 0.0:
            return m


def scenario_models() -> dict[str, mdl.SystemModel]:
    return {
        "free_particle": mdl.scenario_free_particle(),
        "quadratic_potential": mdl.scenario_quadratic_potential(),
        "damped_oscillator": mdl.scenario_damped_oscillator(),
        "pq": mdl.scenario_pq(),
        "chain3_end": mdl.scenario_chain([1, 1, 1], mdl.nearest_neighbour(3, 1.0), 1),
        "chain3_middle": mdl.scenario_chain([1, 1, 1], mdl.nearest_neighbour(3, 1.0), 2),
        "chain4_site2": mdl.scenario_chain([1, 1, 1, 1], mdl.nearest_neighbour(4, 1.0), 2),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number, (ok, detail) in sorted(results.items()):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
