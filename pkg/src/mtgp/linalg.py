"""Cholesky helpers with relative jitter and bounded escalation."""

import numpy as np
from scipy.linalg import cholesky, cho_solve, solve_triangular

from .errors import IllConditionedKernelError

BASE_JITTER_REL = 1e-8
MAX_JITTER_REL = 1e-4


def jitter_scale(K: np.ndarray) -> float:
    """Reference scale for relative jitter: mean of the diagonal, floored at 1."""
    if K.shape[0] == 0:
        return 1.0
    scale = float(np.mean(np.diag(K)))
    return scale if scale > 0.0 else 1.0


def cholesky_with_jitter(
    K: np.ndarray,
    base_rel: float = BASE_JITTER_REL,
    max_rel: float = MAX_JITTER_REL,
) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``K + jitter*I``.

    A jitter of ``base_rel`` times the mean diagonal is always added; on
    factorization failure it is multiplied by 10 until ``max_rel`` is
    exceeded, at which point :class:`IllConditionedKernelError` is raised.

    Returns:
        (L, jitter) with ``L @ L.T == K + jitter*I`` and the jitter actually used.
    """
    scale = jitter_scale(K)
    rel = base_rel
    while rel <= max_rel:
        jitter = rel * scale
        try:
            L = cholesky(K + jitter * np.eye(K.shape[0]), lower=True)
            return L, jitter
        except np.linalg.LinAlgError:
            rel *= 10.0
    raise IllConditionedKernelError(
        f"Cholesky failed for {K.shape[0]}x{K.shape[0]} matrix even with "
        f"relative jitter {max_rel:g}"
    )


def chol_solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``(L L^T) x = b`` given the lower factor L."""
    return cho_solve((L, True), b)


def tri_solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``L x = b`` for lower-triangular L."""
    return solve_triangular(L, b, lower=True)


def logdet_from_chol(L: np.ndarray) -> float:
    """log|A| where ``A = L L^T``."""
    return 2.0 * float(np.sum(np.log(np.diag(L))))
