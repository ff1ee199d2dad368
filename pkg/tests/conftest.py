"""Shared fixtures: small synthetic systems and the pinned experiment data.

The expensive experiment-scale fixtures are session-scoped so the
acceptance tests share one regeneration of the pinned-seed datasets.
"""

import numpy as np
import pytest

import dmdlpv as dl
from dmdlpv.experiments import (
    experiment1_config,
    generate_global_dataset,
    generate_local_bundle,
    make_test_signals,
)


def simulate_lti(A, B, u, x0=None, rng=None):
    """Roll out x[k+1] = A x[k] + B u[k]; returns a SnapshotDataset."""
    n = A.shape[0]
    U = np.atleast_2d(u)
    N = U.shape[1]
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    X = np.empty((n, N))
    for k in range(N):
        X[:, k] = x
        x = A @ x + B @ U[:, k]
    Y = np.hstack([X[:, 1:], x[:, None]])
    return dl.SnapshotDataset(X=X, U=U, Y=Y, P=np.zeros((0, N)), sample_time=1.0)


def simulate_lpv(W_A, W_B, basis, U, P, x0=None):
    """Roll out x[k+1] = W_A (phi kron x) + W_B (phi kron u) as a dataset."""
    n = W_A.shape[0]
    U = np.atleast_2d(U)
    P = np.atleast_2d(P)
    N = U.shape[1]
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    X = np.empty((n, N))
    for k in range(N):
        X[:, k] = x
        phi = dl.eval_basis(basis, P[:, k])
        x = W_A @ np.kron(phi, x) + W_B @ np.kron(phi, U[:, k])
    Y = np.hstack([X[:, 1:], x[:, None]])
    return dl.SnapshotDataset(X=X, U=U, Y=Y, P=P, sample_time=1.0)


def make_stable_lpv(rng, n_s, basis, n_u=1):
    """Random LPV weights, stable over the unit parameter box."""
    blocks = [0.75 * np.linalg.qr(rng.normal(size=(n_s, n_s)))[0]
              @ np.diag(rng.uniform(0.3, 0.9, n_s))]
    blocks += [0.03 * rng.normal(size=(n_s, n_s)) for _ in range(basis.count - 1)]
    W_A = np.hstack(blocks)
    W_B = np.hstack([rng.normal(size=(n_s, n_u))]
                    + [0.2 * rng.normal(size=(n_s, n_u))
                       for _ in range(basis.count - 1)])
    return W_A, W_B


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def stable_lti(rng):
    """Random 10-state stable discrete pair with a known real spectrum."""
    n = 10
    eigs = np.sort(rng.uniform(0.3, 0.95, n))[::-1]
    Q = np.linalg.qr(rng.normal(size=(n, n)))[0]
    A = Q @ np.diag(eigs) @ Q.T
    B = rng.normal(size=(n, 1))
    return A, B, eigs


@pytest.fixture(scope="session")
def exp1_plant():
    return dl.build_plant(h=0.02)


@pytest.fixture(scope="session")
def exp1_dataset(exp1_plant):
    """Regenerated pinned-seed experiment-1 dataset (N = 90000)."""
    cfg = experiment1_config()
    _, dataset = generate_global_dataset(cfg, exp1_plant)
    return dataset


@pytest.fixture(scope="session")
def exp1_bundle(exp1_plant):
    cfg = experiment1_config()
    _, bundle = generate_local_bundle(cfg, exp1_plant)
    return bundle


@pytest.fixture(scope="session")
def exp1_fitter(exp1_dataset):
    """Shared stacked-feature factorization for the exact basis."""
    return dl.GlobalLpvFitter(exp1_dataset, dl.basis_exact_1p())


@pytest.fixture(scope="session")
def exp1_test_truth(exp1_plant):
    """Held-out test signals and the plant truth trajectory."""
    cfg = experiment1_config()
    u, p = make_test_signals(cfg, exp1_plant)
    truth = dl.simulate(exp1_plant, None, u, p)
    return u, p, truth
