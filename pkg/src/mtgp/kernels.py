"""Scalar covariance kernels on vector inputs.

Two stationary anisotropic kernels are provided:

    squared_exponential:  k(x, x') = s2 * exp(-1/2 * sum_p ((x_p - x'_p) / l_p)^2)
    matern52:             k(r) = s2 * (1 + sqrt(5) r + 5 r^2 / 3) * exp(-sqrt(5) r),
                          r^2 = sum_p ((x_p - x'_p) / l_p)^2

where ``l_p`` are per-dimension lengthscales and ``s2`` the signal variance.
All hyperparameters are positive and are optimized in log-space elsewhere;
:func:`kernel_matrix_grad` therefore returns derivatives with respect to the
log-transformed parameters.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

SQUARED_EXPONENTIAL = "squared_exponential"
MATERN52 = "matern52"
KERNEL_KINDS = (SQUARED_EXPONENTIAL, MATERN52)

_SQRT5 = np.sqrt(5.0)


@dataclass(frozen=True, eq=False)
class ScalarKernelSpec:
    """Hyperparameterized positive-definite kernel on R^P.

    Attributes:
        kind: one of :data:`KERNEL_KINDS`.
        lengthscales: shape (P,), strictly positive, one per input dimension.
        signal_variance: strictly positive; equals k(x, x) for every x.
    """

    kind: str
    lengthscales: np.ndarray
    signal_variance: float

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}; expected one of {KERNEL_KINDS}")
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        if ls.ndim != 1 or ls.size == 0:
            raise ShapeError("lengthscales must be a nonempty 1-d vector")
        if not np.all(np.isfinite(ls)) or np.any(ls <= 0.0):
            raise ValueError("lengthscales must be finite and strictly positive")
        sv = float(self.signal_variance)
        if not np.isfinite(sv) or sv <= 0.0:
            raise ValueError("signal_variance must be finite and strictly positive")
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "signal_variance", sv)

    @property
    def input_dim(self) -> int:
        return self.lengthscales.size

    def with_params(self, lengthscales: np.ndarray, signal_variance: float) -> "ScalarKernelSpec":
        return ScalarKernelSpec(self.kind, lengthscales, signal_variance)


def log_param_names(spec: ScalarKernelSpec) -> list[str]:
    """Names of the kernel's log-hyperparameters, in gradient order."""
    names = [f"log_lengthscale{p}" for p in range(spec.input_dim)]
    names.append("log_signal_variance")
    return names


def _as_matrix(X, dim: int, name: str) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if dim == 1 else X.reshape(1, -1)
    if X.ndim != 2:
        raise ShapeError(f"{name} must be a 2-d array, got ndim={X.ndim}")
    if X.shape[1] != dim:
        raise ShapeError(f"{name} has {X.shape[1]} columns, kernel expects {dim}")
    return X


def _scaled_sq_dists(spec: ScalarKernelSpec, X: np.ndarray, X2: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - X2[None, :, :]
    return np.sum((diff / spec.lengthscales) ** 2, axis=-1)


def kernel_eval(spec: ScalarKernelSpec, x, x2) -> float:
    """Evaluate k(x, x2) for single input vectors."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x.shape != (spec.input_dim,) or x2.shape != (spec.input_dim,):
        raise ShapeError(
            f"inputs must have dimension {spec.input_dim}, got {x.shape} and {x2.shape}"
        )
    return float(kernel_matrix(spec, x[None, :], x2[None, :])[0, 0])


def kernel_matrix(spec: ScalarKernelSpec, X, X2=None) -> np.ndarray:
    """Covariance matrix with entries k(X_i, X2_j).

    ``X2=None`` means ``X2 = X``; the result is then symmetric positive
    semidefinite by construction.
    """
    X = _as_matrix(X, spec.input_dim, "X")
    X2 = X if X2 is None else _as_matrix(X2, spec.input_dim, "X2")
    if X.shape[0] == 0 or X2.shape[0] == 0:
        return np.zeros((X.shape[0], X2.shape[0]))
    sq = _scaled_sq_dists(spec, X, X2)
    if spec.kind == SQUARED_EXPONENTIAL:
        return spec.signal_variance * np.exp(-0.5 * sq)
    r = np.sqrt(sq)
    return spec.signal_variance * (1.0 + _SQRT5 * r + (5.0 / 3.0) * sq) * np.exp(-_SQRT5 * r)


def kernel_diag(spec: ScalarKernelSpec, X) -> np.ndarray:
    """Diagonal k(x_i, x_i), which is the signal variance for every row."""
    X = _as_matrix(X, spec.input_dim, "X")
    return np.full(X.shape[0], spec.signal_variance)


def kernel_matrix_grad(spec: ScalarKernelSpec, X) -> list[np.ndarray]:
    """Derivatives of ``kernel_matrix(spec, X, X)`` w.r.t. log-hyperparameters.

    Returns one N x N matrix per parameter, ordered as
    ``[log l_1, ..., log l_P, log s2]`` (see :func:`log_param_names`).

    For both kernel kinds dK/d(log s2) = K since K is linear in the signal
    variance; the lengthscale derivatives follow from the chain rule
    d/d(log l_p) = l_p * d/d(l_p) and vanish on the diagonal.
    """
    X = _as_matrix(X, spec.input_dim, "X")
    if X.shape[0] == 0:
        raise ShapeError("kernel_matrix_grad requires a nonempty X")
    diff = X[:, None, :] - X[None, :, :]
    scaled_sq = (diff / spec.lengthscales) ** 2  # per-dimension (d_p / l_p)^2
    sq = np.sum(scaled_sq, axis=-1)

    grads: list[np.ndarray] = []
    if spec.kind == SQUARED_EXPONENTIAL:
        K = spec.signal_variance * np.exp(-0.5 * sq)
        for p in range(spec.input_dim):
            grads.append(K * scaled_sq[:, :, p])
    else:
        r = np.sqrt(sq)
        e = np.exp(-_SQRT5 * r)
        K = spec.signal_variance * (1.0 + _SQRT5 * r + (5.0 / 3.0) * sq) * e
        # dK/d(log l_p) = (5/3) s2 (1 + sqrt5 r) e^{-sqrt5 r} * (d_p/l_p)^2;
        # the 1/r singularity cancels exactly, so r=0 entries are simply 0.
        front = (5.0 / 3.0) * spec.signal_variance * (1.0 + _SQRT5 * r) * e
        for p in range(spec.input_dim):
            grads.append(front * scaled_sq[:, :, p])
    grads.append(K.copy())
    return grads
