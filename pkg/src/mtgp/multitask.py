"""Exact multi-task Gaussian process regression over heterotopic data.

The joint prior over all observations (task-major order) has covariance
``sum_q B_q[task_i, task_j] k_q(x_i, x_j)``; observation noise adds a
block-diagonal ``noise_d`` on each task's rows. Posterior inference is the
standard Gaussian conditioning on that joint matrix, so predictions for one
task borrow strength from every coupled task.

Targets are standardized per task inside fitting by default (tasks often
live in wildly different units); statistics are stored on the model and
inverted at prediction time. Pass ``standardize=False`` to work in raw units.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .coregionalization import MultiTaskKernelSpec, build_B, joint_covariance_parts
from .data import MultiTaskDataset, standardize_targets
from .errors import ShapeError
from .gp import NOISE_FLOOR, PosteriorPrediction
from .linalg import cholesky_with_jitter, chol_solve, logdet_from_chol, tri_solve


@dataclass(eq=False)
class MTGPModel:
    """Immutable fitted state of a multi-task GP."""

    kernel: MultiTaskKernelSpec
    noise_variances: np.ndarray
    dataset: MultiTaskDataset
    task_means: np.ndarray
    task_stds: np.ndarray
    L: np.ndarray
    weights: np.ndarray
    jitter: float
    standardized: bool = True
    fit_info: dict | None = field(default=None, repr=False)

    @property
    def num_tasks(self) -> int:
        return self.kernel.num_tasks

    @property
    def input_dim(self) -> int:
        return self.kernel.input_dim


def _noise_vector(noise_variances, num_tasks: int) -> np.ndarray:
    noise = np.asarray(noise_variances, dtype=float).reshape(-1)
    if noise.shape[0] != num_tasks:
        raise ShapeError(f"expected {num_tasks} noise variances, got {noise.shape[0]}")
    return noise


def mtgp_fit(
    kernel: MultiTaskKernelSpec,
    noise_variances,
    dataset: MultiTaskDataset,
    standardize: bool = True,
) -> MTGPModel:
    """Factorize the joint covariance and solve for the weight vector.

    Noise variances are floored at ``NOISE_FLOOR``. With ``standardize=True``
    the factorization happens in per-task standardized target units.
    """
    noise = np.maximum(_noise_vector(noise_variances, kernel.num_tasks), NOISE_FLOOR)
    if standardize:
        work, means, stds = standardize_targets(dataset)
    else:
        work = dataset
        means = np.zeros(dataset.num_tasks)
        stds = np.ones(dataset.num_tasks)
    K, _, _ = joint_covariance_parts(kernel, work)
    K += np.diag(noise[work.task_indices()])
    L, jitter = cholesky_with_jitter(K)
    weights = chol_solve(L, work.stacked_targets())
    return MTGPModel(
        kernel, noise, dataset, means, stds, L, weights, jitter, standardized=standardize
    )


def _cross_rows(
    spec: MultiTaskKernelSpec, task: int, Xstar: np.ndarray, dataset: MultiTaskDataset
) -> np.ndarray:
    """K(X*, X) rows for one query task against the stacked training inputs."""
    X_all = dataset.stacked_inputs()
    tasks = dataset.task_indices()
    out = np.zeros((Xstar.shape[0], X_all.shape[0]))
    for term in spec.terms:
        B = build_B(term)
        coeffs = B[task, tasks]
        if np.any(coeffs != 0.0):
            out += kernels.kernel_matrix(term.base_kernel, Xstar, X_all) * coeffs[None, :]
    return out


def mtgp_predict(
    model: MTGPModel, task: int, Xstar, full_cov: bool = False
) -> PosteriorPrediction:
    """Posterior mean/variance for one task at query points Xstar."""
    if not 0 <= task < model.num_tasks:
        raise ShapeError(f"task {task} out of range for D={model.num_tasks}")
    Xstar = np.asarray(Xstar, dtype=float)
    if Xstar.ndim == 1:
        Xstar = Xstar.reshape(-1, 1)
    if Xstar.shape[1] != model.input_dim:
        raise ShapeError(
            f"query has {Xstar.shape[1]} columns, model expects {model.input_dim}"
        )
    mu, s = model.task_means[task], model.task_stds[task]
    if Xstar.shape[0] == 0:
        empty = np.zeros(0)
        return PosteriorPrediction(empty, empty.copy(), np.zeros((0, 0)) if full_cov else None)
    Kstar = _cross_rows(model.kernel, task, Xstar, model.dataset)
    mean = mu + s * (Kstar @ model.weights)
    V = tri_solve(model.L, Kstar.T)
    if full_cov:
        Kss = np.zeros((Xstar.shape[0], Xstar.shape[0]))
        for term in model.kernel.terms:
            Btt = build_B(term)[task, task]
            if Btt != 0.0:
                Kss += Btt * kernels.kernel_matrix(term.base_kernel, Xstar, Xstar)
        cov = (Kss - V.T @ V) * s**2
        cov = 0.5 * (cov + cov.T)
        variance = np.maximum(np.diag(cov).copy(), 0.0)
        np.fill_diagonal(cov, variance)
        return PosteriorPrediction(mean, variance, cov)
    prior_diag = np.zeros(Xstar.shape[0])
    for term in model.kernel.terms:
        Btt = build_B(term)[task, task]
        prior_diag += Btt * kernels.kernel_diag(term.base_kernel, Xstar)
    variance = (prior_diag - np.sum(V**2, axis=0)) * s**2
    return PosteriorPrediction(mean, np.maximum(variance, 0.0))


def mtgp_parameter_names(spec: MultiTaskKernelSpec) -> list[str]:
    """Canonical order of all transformed parameters, matching the gradient
    returned by :func:`mtgp_log_marginal_likelihood`.

    Per term q: the base kernel's log-parameters, then W entries row-major,
    then log-gamma per task; finally log-noise per task.
    """
    names: list[str] = []
    for q, term in enumerate(spec.terms):
        for kname in kernels.log_param_names(term.base_kernel):
            names.append(f"term{q}.{kname}")
        for d in range(term.num_tasks):
            for r in range(term.rank):
                names.append(f"term{q}.W[{d},{r}]")
        for d in range(term.num_tasks):
            names.append(f"term{q}.log_gamma{d}")
    for d in range(spec.num_tasks):
        names.append(f"log_noise{d}")
    return names


def mtgp_log_marginal_likelihood(
    kernel: MultiTaskKernelSpec,
    noise_variances,
    dataset: MultiTaskDataset,
) -> tuple[float, np.ndarray]:
    """Joint log marginal likelihood and its full parameter gradient.

    The value is the log density of the stacked targets under the joint
    prior plus block-diagonal noise, with the Gaussian constant using the
    total observation count. Gradient order follows
    :func:`mtgp_parameter_names`; gamma gradients are reported in log-space
    (zero whenever gamma is pinned at zero).
    """
    noise = _noise_vector(noise_variances, kernel.num_tasks)
    K, K_terms, B_masks = joint_covariance_parts(kernel, dataset)
    tasks = dataset.task_indices()
    K += np.diag(noise[tasks])
    L, _ = cholesky_with_jitter(K)
    y = dataset.stacked_targets()
    alpha = chol_solve(L, y)
    ntot = dataset.total_count
    value = (
        -0.5 * float(y @ alpha)
        - 0.5 * logdet_from_chol(L)
        - 0.5 * ntot * np.log(2.0 * np.pi)
    )

    Kinv = chol_solve(L, np.eye(ntot))
    M = np.outer(alpha, alpha) - Kinv
    onehot = np.zeros((ntot, kernel.num_tasks))
    onehot[np.arange(ntot), tasks] = 1.0

    X_all = dataset.stacked_inputs()
    grads: list[float] = []
    for q, term in enumerate(kernel.terms):
        masked = M * B_masks[q]
        for dKq in kernels.kernel_matrix_grad(term.base_kernel, X_all):
            grads.append(0.5 * float(np.sum(masked * dKq)))
        # T[d, e] = sum of (M * K_q) over the (d, e) task block; then
        # dL/dW = T W and dL/d(log gamma_d) = gamma_d * T[d, d] / 2.
        T = onehot.T @ (M * K_terms[q]) @ onehot
        grads.extend((T @ term.W).reshape(-1).tolist())
        grads.extend((0.5 * term.gamma * np.diag(T)).tolist())
    diag_M = np.diag(M)
    for d in range(kernel.num_tasks):
        grads.append(0.5 * noise[d] * float(np.sum(diag_M[tasks == d])))
    return value, np.asarray(grads)
