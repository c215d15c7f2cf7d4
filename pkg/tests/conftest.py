"""Shared test oracles and builders.

The oracles here are deliberately independent of the package's fast paths:
dense joint-Gaussian conditioning uses ``np.linalg.solve`` on the full joint
covariance, and the Kronecker construction uses ``np.kron`` directly.
"""

import numpy as np
import pytest

from mtgp.coregionalization import (
    CoregionalizationTerm,
    MultiTaskKernelSpec,
    build_B,
)
from mtgp.data import MultiTaskDataset
from mtgp.kernels import SQUARED_EXPONENTIAL, ScalarKernelSpec, kernel_matrix
from mtgp.seeding import make_rng


def dense_gaussian_conditioning(joint, n_train, y_train):
    """Condition an (n_train + m)-point joint Gaussian on its first block."""
    K_tt = joint[:n_train, :n_train]
    K_st = joint[n_train:, :n_train]
    K_ss = joint[n_train:, n_train:]
    A = np.linalg.solve(K_tt, np.eye(n_train))
    mean = K_st @ A @ y_train
    cov = K_ss - K_st @ A @ K_st.T
    return mean, cov


def kronecker_joint(spec: MultiTaskKernelSpec, X: np.ndarray) -> np.ndarray:
    """Isotopic joint covariance via explicit Kronecker products."""
    n = X.shape[0]
    out = np.zeros((spec.num_tasks * n, spec.num_tasks * n))
    for term in spec.terms:
        out += np.kron(build_B(term), kernel_matrix(term.base_kernel, X, X))
    return out


def random_kernel(rng, dim=1, kind=SQUARED_EXPONENTIAL):
    return ScalarKernelSpec(
        kind, rng.uniform(0.3, 1.5, size=dim), float(rng.uniform(0.5, 2.0))
    )


def random_mtgp_spec(rng, num_tasks, num_terms=2, dim=1, with_gamma=False):
    terms = []
    for _ in range(num_terms):
        W = rng.normal(0.0, 0.7, size=(num_tasks, 1))
        gamma = rng.uniform(0.05, 0.3, size=num_tasks) if with_gamma else np.zeros(num_tasks)
        terms.append(CoregionalizationTerm(W, gamma, random_kernel(rng, dim)))
    return MultiTaskKernelSpec(num_tasks, tuple(terms))


def random_dataset(rng, num_tasks, dim=1, max_per_task=3, min_per_task=1):
    counts = rng.integers(min_per_task, max_per_task + 1, size=num_tasks)
    return MultiTaskDataset(
        tuple(rng.uniform(0.0, 1.0, size=(int(c), dim)) for c in counts),
        tuple(rng.normal(size=int(c)) for c in counts),
    )


@pytest.fixture
def rng():
    return make_rng("tests", 0)
