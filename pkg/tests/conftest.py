import numpy as np
import pytest

from mjls_randobs import (
    MjlsModel,
    build_custom,
    build_extended_chain,
    build_periodic_with_failures,
    check_recurrent,
    synthesize,
    validate_stochastic,
)

EXAMPLE_A = [
    [[-0.45, -0.3], [1.2, 0.45]],
    [[-0.7, 0.7], [0.2, 0.8]],
    [[-0.7, 0.7], [0.2, 0.8]],
]
EXAMPLE_B = [[[1.0], [1.0]], [[1.0], [0.0]], [[-1.0], [0.0]]]
EXAMPLE_P = [[0.6, 0.2, 0.2], [0.2, 0.6, 0.2], [0.2, 0.2, 0.6]]


def example_model():
    return MjlsModel.build(EXAMPLE_A, EXAMPLE_B, EXAMPLE_P)


def example_obs():
    return build_periodic_with_failures(4, 0.5, T=4)


def random_stochastic(rng, k, sparsity=0.3):
    Q = rng.dirichlet(np.ones(k), size=k)
    Q[rng.random((k, k)) < sparsity] = 0.0
    Q[np.arange(k), rng.integers(0, k, k)] += 0.1
    return Q / Q.sum(axis=1, keepdims=True)


def random_instance(rng, n_max=2, N_max=3, M_max=3, T_max=3, radius=(0.3, 1.3)):
    """Random (model, obs) pair with a recurrent observation set."""
    n = int(rng.integers(1, n_max + 1))
    N = int(rng.integers(1, N_max + 1))
    M = int(rng.integers(1, M_max + 1))
    T = int(rng.integers(1, T_max + 1))
    A = rng.normal(size=(N, n, n))
    A *= rng.uniform(*radius) / np.abs(np.linalg.eigvals(A)).max(axis=1)[:, None, None]
    B = rng.normal(size=(N, n, 1))
    while True:
        Q = random_stochastic(rng, M)
        lam = set((np.flatnonzero(rng.random(M) < 0.5) + 1).tolist()) or {1}
        if check_recurrent(validate_stochastic(Q), lam):
            break
    return MjlsModel.build(A, B, random_stochastic(rng, N)), build_custom(Q, lam, T)


@pytest.fixture(scope="session")
def model():
    return example_model()


@pytest.fixture(scope="session")
def obs():
    return example_obs()


@pytest.fixture(scope="session")
def chain(model, obs):
    return build_extended_chain(model, obs)


@pytest.fixture(scope="session")
def example_synthesis(model, obs):
    return synthesize(model, obs)


ACCEPTANCE = {}


@pytest.fixture
def record(request):
    """Store a one-line verdict for the acceptance summary."""
    key = request.node.name

    def _record(passed, detail):
        ACCEPTANCE[key] = (bool(passed), detail)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split("_")[2])):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} {key}: {detail}")
