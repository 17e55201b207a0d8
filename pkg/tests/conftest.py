import numpy as np
import pytest

from bectrack.harness import ExperimentConfig, simulate_ensemble
from bectrack.spinspace import ModelParams

SEEDS = tuple(range(1, 11))

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def random_state(rng: np.random.Generator, dim: int) -> np.ndarray:
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return psi / np.linalg.norm(psi)


def random_density(rng: np.random.Generator, dim: int, rank: int = 3) -> np.ndarray:
    vecs = [random_state(rng, dim) for _ in range(rank)]
    w = rng.dirichlet(np.ones(rank))
    return sum(wk * np.outer(v, v.conj()) for wk, v in zip(w, vecs))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def _measured_ensemble(u: float, snapshot: float):
    config = ExperimentConfig(
        params=ModelParams(100, interaction_u=u, tunneling_k=1.0, gamma_bar=1.0),
        t_final=60.0,
        dt=1e-3,
        seeds=SEEDS,
        wigner_times=(snapshot,),
    )
    return simulate_ensemble(config)


@pytest.fixture(scope="session")
def ensemble_u0():
    """N=100, u=0, gamma_bar=1, seeds 1..10, 60 t_R, with estimator."""
    return _measured_ensemble(0.0, 25.0)


@pytest.fixture(scope="session")
def ensemble_u1():
    """N=100, u=1, gamma_bar=1, seeds 1..10, 60 t_R, with estimator."""
    return _measured_ensemble(1.0, 48.0)


@pytest.fixture(scope="session")
def acceptance():
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
