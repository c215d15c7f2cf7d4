"""Task-covariance construction for multi-task kernels.

A multi-task kernel is a sum of Q latent components. Component q pairs a
D x D positive semidefinite task matrix

    B_q = W_q W_q^T + diag(gamma_q)

with a scalar input-space kernel k_q, giving the matrix-valued kernel

    K(x, x')[d, e] = sum_q B_q[d, e] * k_q(x, x').

The rank-one restriction (every W_q a single column, gamma_q = 0) is the
latent-factor special case used as the package default.
"""

from dataclasses import dataclass

import numpy as np

from .data import MultiTaskDataset
from .errors import ShapeError
from .kernels import ScalarKernelSpec, kernel_matrix


@dataclass(frozen=True, eq=False)
class CoregionalizationTerm:
    """One latent component: task loadings W (D x R), task-specific
    variances gamma (length D, non-negative), and the shared input kernel."""

    W: np.ndarray
    gamma: np.ndarray
    base_kernel: ScalarKernelSpec

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        if W.ndim == 1:
            W = W.reshape(-1, 1)
        if W.ndim != 2 or W.shape[0] == 0:
            raise ShapeError("W must be a D x R matrix with D >= 1")
        gamma = np.asarray(self.gamma, dtype=float).reshape(-1)
        if gamma.shape[0] != W.shape[0]:
            raise ShapeError(
                f"gamma has length {gamma.shape[0]} but W has {W.shape[0]} rows"
            )
        if not np.all(np.isfinite(W)) or not np.all(np.isfinite(gamma)):
            raise ValueError("W and gamma must be finite")
        if np.any(gamma < 0.0):
            raise ValueError("gamma entries must be non-negative")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "gamma", gamma)

    @property
    def num_tasks(self) -> int:
        return self.W.shape[0]

    @property
    def rank(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True, eq=False)
class MultiTaskKernelSpec:
    """Ordered sum of Q coregionalization terms over D tasks."""

    num_tasks: int
    terms: tuple

    def __post_init__(self):
        terms = tuple(self.terms)
        if len(terms) == 0:
            raise ShapeError("need at least one coregionalization term")
        for q, term in enumerate(terms):
            if term.num_tasks != self.num_tasks:
                raise ShapeError(
                    f"term {q} covers {term.num_tasks} tasks, spec declares {self.num_tasks}"
                )
        dims = {term.base_kernel.input_dim for term in terms}
        if len(dims) != 1:
            raise ShapeError(f"terms disagree on input dimension: {sorted(dims)}")
        object.__setattr__(self, "terms", terms)

    @property
    def num_terms(self) -> int:
        return len(self.terms)

    @property
    def input_dim(self) -> int:
        return self.terms[0].base_kernel.input_dim

    def is_rank_one_factor_model(self) -> bool:
        """True when every term is rank one with gamma identically zero."""
        return all(t.rank == 1 and np.all(t.gamma == 0.0) for t in self.terms)


def build_B(term: CoregionalizationTerm) -> np.ndarray:
    """Task covariance ``W W^T + diag(gamma)``, symmetric PSD by construction."""
    B = term.W @ term.W.T + np.diag(term.gamma)
    return 0.5 * (B + B.T)


def cross_covariance_block(
    spec: MultiTaskKernelSpec, d: int, d2: int, X_d, X_d2
) -> np.ndarray:
    """Covariance block between task d at inputs X_d and task d2 at X_d2."""
    if not (0 <= d < spec.num_tasks and 0 <= d2 < spec.num_tasks):
        raise ShapeError(f"task indices ({d}, {d2}) out of range for D={spec.num_tasks}")
    X_d = np.asarray(X_d, dtype=float)
    X_d2 = np.asarray(X_d2, dtype=float)
    n = X_d.shape[0] if X_d.ndim == 2 else len(np.atleast_1d(X_d))
    m = X_d2.shape[0] if X_d2.ndim == 2 else len(np.atleast_1d(X_d2))
    block = np.zeros((n, m))
    for term in spec.terms:
        B = build_B(term)
        if B[d, d2] != 0.0:
            block += B[d, d2] * kernel_matrix(term.base_kernel, X_d, X_d2)
    return block


def joint_covariance_parts(
    spec: MultiTaskKernelSpec, dataset: MultiTaskDataset
) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
    """Joint prior covariance plus the per-term pieces needed for gradients.

    Returns ``(K, K_terms, B_masks)`` where ``K = sum_q B_masks[q] * K_terms[q]``,
    ``K_terms[q]`` is the base-kernel Gram matrix of term q over the stacked
    inputs and ``B_masks[q]`` expands ``B_q`` to entry (i, j) = B_q[task_i, task_j].
    """
    if dataset.num_tasks != spec.num_tasks:
        raise ShapeError(
            f"dataset has {dataset.num_tasks} tasks, kernel spec declares {spec.num_tasks}"
        )
    if dataset.input_dim != spec.input_dim:
        raise ShapeError(
            f"dataset input dimension {dataset.input_dim} != kernel's {spec.input_dim}"
        )
    X_all = dataset.stacked_inputs()
    tasks = dataset.task_indices()
    K = np.zeros((dataset.total_count, dataset.total_count))
    K_terms, B_masks = [], []
    for term in spec.terms:
        Kq = kernel_matrix(term.base_kernel, X_all, X_all)
        Bq = build_B(term)
        mask = Bq[np.ix_(tasks, tasks)]
        K += mask * Kq
        K_terms.append(Kq)
        B_masks.append(mask)
    return K, K_terms, B_masks


def assemble_joint_covariance(
    spec: MultiTaskKernelSpec, dataset: MultiTaskDataset
) -> np.ndarray:
    """Full joint prior covariance over all tasks, task-major ordering.

    Block (d, d2) equals :func:`cross_covariance_block` for the tasks' input
    sets; for isotopic data this reproduces the Kronecker sum
    ``sum_q B_q (x) K_q`` exactly.
    """
    K, _, _ = joint_covariance_parts(spec, dataset)
    return K
