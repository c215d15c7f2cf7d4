"""Hyperparameter estimation by log-marginal-likelihood ascent.

Positive parameters are optimized through log-transforms; task loadings W
are unconstrained, which keeps every task matrix positive semidefinite by
construction. The optimizer is Adam with bias correction run full-batch,
restarted from several seeded initializations; the restart with the best
objective wins (ties to the lowest restart index).
"""

import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .coregionalization import CoregionalizationTerm, MultiTaskKernelSpec
from .data import MultiTaskDataset, standardize_targets
from .errors import MTGPError, TrainingFailedError
from .gp import GPModel, gp_fit, gp_log_marginal_likelihood
from .kernels import SQUARED_EXPONENTIAL, ScalarKernelSpec
from .multitask import (
    MTGPModel,
    mtgp_fit,
    mtgp_log_marginal_likelihood,
    mtgp_parameter_names,
)
from .seeding import make_rng

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
CONVERGENCE_WINDOW = 20
RESTART_LOG_JITTER = 0.3
W_INIT_STD = 0.5
# diagonal-dominant start for low-rank-plus-diagonal models: tasks begin
# nearly independent and coupling grows only where the data supports it
LMC_W_INIT_STD = 0.2
LMC_GAMMA_INIT_FRACTION = 0.6

LOG = "log"
IDENTITY = "identity"


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    max_iterations: int = 2000
    convergence_tolerance: float = 1e-7
    num_restarts: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")
        if self.convergence_tolerance <= 0.0:
            raise ValueError("convergence_tolerance must be positive")
        if self.num_restarts < 1:
            raise ValueError("num_restarts must be at least 1")


@dataclass(frozen=True)
class MTGPFamily:
    """Model family for multi-task training.

    mode "slfm": rank-one loadings per term, gamma pinned to zero.
    mode "lmc": low-rank-plus-diagonal task matrices, gamma learned.
    mode "independent": fixed indicator loadings, one term per task; tasks
    share nothing (used for decoupling checks).
    """

    mode: str = "slfm"
    kernel_kind: str = SQUARED_EXPONENTIAL
    num_terms: int | None = None
    rank: int = 1

    def __post_init__(self):
        if self.mode not in ("slfm", "lmc", "independent"):
            raise ValueError(f"unknown family mode {self.mode!r}")
        if self.rank < 1:
            raise ValueError("rank must be at least 1")


# ---------------------------------------------------------------------------
# Parameter schema: flat unconstrained vector <-> named raw values
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamSpec:
    name: str
    transform: str  # LOG or IDENTITY


@dataclass(frozen=True)
class ParameterSchema:
    entries: tuple

    def __post_init__(self):
        names = [e.name for e in self.entries]
        if len(names) != len(set(names)):
            raise ValueError("duplicate parameter names in schema")

    @property
    def size(self) -> int:
        return len(self.entries)

    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def unpack(self, vector: np.ndarray) -> dict:
        """Flat vector -> {name: raw transformed value}; pure reshaping."""
        vector = np.asarray(vector, dtype=float).reshape(-1)
        if vector.shape[0] != self.size:
            raise ValueError(f"vector has {vector.shape[0]} entries, schema {self.size}")
        return {e.name: float(v) for e, v in zip(self.entries, vector)}

    def pack(self, values: dict) -> np.ndarray:
        """{name: raw value} -> flat vector; exact inverse of :meth:`unpack`."""
        return np.asarray([values[e.name] for e in self.entries], dtype=float)


def _inverse(raw: float, transform: str) -> float:
    return float(np.exp(raw)) if transform == LOG else float(raw)


# ---------------------------------------------------------------------------
# Single-task parameterization
# ---------------------------------------------------------------------------


def gp_schema(input_dim: int) -> ParameterSchema:
    entries = [ParamSpec(f"log_lengthscale{p}", LOG) for p in range(input_dim)]
    entries.append(ParamSpec("log_signal_variance", LOG))
    entries.append(ParamSpec("log_noise", LOG))
    return ParameterSchema(tuple(entries))


def gp_vector(kernel: ScalarKernelSpec, noise_variance: float) -> np.ndarray:
    raw = [np.log(l) for l in kernel.lengthscales]
    raw += [np.log(kernel.signal_variance), np.log(noise_variance)]
    return np.asarray(raw)


def gp_materialize(template: ScalarKernelSpec, vector: np.ndarray) -> tuple[ScalarKernelSpec, float]:
    P = template.input_dim
    lengthscales = np.exp(vector[:P])
    signal_variance = float(np.exp(vector[P]))
    noise = float(np.exp(vector[P + 1]))
    return template.with_params(lengthscales, signal_variance), noise


# ---------------------------------------------------------------------------
# Multi-task parameterization
# ---------------------------------------------------------------------------


def mtgp_schema(spec: MultiTaskKernelSpec, family: MTGPFamily) -> ParameterSchema:
    """Learnable subset of the canonical parameter list for the family."""
    entries = []
    for name in mtgp_parameter_names(spec):
        if ".W[" in name:
            if family.mode == "independent":
                continue
            entries.append(ParamSpec(name, IDENTITY))
        elif ".log_gamma" in name:
            if family.mode != "lmc":
                continue
            entries.append(ParamSpec(name, LOG))
        else:
            entries.append(ParamSpec(name, LOG))
    return ParameterSchema(tuple(entries))


def mtgp_vector(
    spec: MultiTaskKernelSpec, noise_variances: np.ndarray, schema: ParameterSchema
) -> np.ndarray:
    values = {}
    for q, term in enumerate(spec.terms):
        for kname, raw in zip(
            kernels.log_param_names(term.base_kernel),
            gp_vector(term.base_kernel, 1.0)[:-1],
        ):
            values[f"term{q}.{kname}"] = float(raw)
        for d in range(term.num_tasks):
            for r in range(term.rank):
                values[f"term{q}.W[{d},{r}]"] = float(term.W[d, r])
        for d in range(term.num_tasks):
            values[f"term{q}.log_gamma{d}"] = float(np.log(max(term.gamma[d], 1e-300)))
    for d, nv in enumerate(np.asarray(noise_variances, dtype=float)):
        values[f"log_noise{d}"] = float(np.log(nv))
    return schema.pack({n: values[n] for n in schema.names()})


def mtgp_materialize(
    template: MultiTaskKernelSpec,
    template_noise: np.ndarray,
    schema: ParameterSchema,
    vector: np.ndarray,
) -> tuple[MultiTaskKernelSpec, np.ndarray]:
    """Rebuild (kernel spec, noise vector) from a schema vector.

    Parameters absent from the schema keep their template values (fixed W
    for independent mode, pinned gamma for rank-one factor models).
    """
    raw = schema.unpack(vector)
    transforms = {e.name: e.transform for e in schema.entries}

    def natural(name: str, default: float) -> float:
        if name in raw:
            return _inverse(raw[name], transforms[name])
        return default

    terms = []
    for q, term in enumerate(template.terms):
        P = term.base_kernel.input_dim
        ls = np.array(
            [
                natural(f"term{q}.log_lengthscale{p}", term.base_kernel.lengthscales[p])
                for p in range(P)
            ]
        )
        sv = natural(f"term{q}.log_signal_variance", term.base_kernel.signal_variance)
        W = np.array(
            [
                [natural(f"term{q}.W[{d},{r}]", term.W[d, r]) for r in range(term.rank)]
                for d in range(term.num_tasks)
            ]
        )
        gamma = np.array(
            [
                natural(f"term{q}.log_gamma{d}", term.gamma[d])
                for d in range(term.num_tasks)
            ]
        )
        terms.append(
            CoregionalizationTerm(W, gamma, term.base_kernel.with_params(ls, sv))
        )
    noise = np.array(
        [
            natural(f"log_noise{d}", float(template_noise[d]))
            for d in range(template.num_tasks)
        ]
    )
    return MultiTaskKernelSpec(template.num_tasks, tuple(terms)), noise


# ---------------------------------------------------------------------------
# Gradient verification
# ---------------------------------------------------------------------------


def check_gradients(objective, point, step: float = 1e-6) -> float:
    """Worst relative error between analytic and central-difference gradients.

    ``objective(v)`` must return ``(value, gradient)``. The denominator is
    ``max(|analytic|, |numeric|, 1e-8)`` per coordinate.
    """
    point = np.asarray(point, dtype=float)
    _, analytic = objective(point)
    analytic = np.asarray(analytic, dtype=float)
    worst = 0.0
    for i in range(point.size):
        shifted = point.copy()
        shifted[i] = point[i] + step
        up, _ = objective(shifted)
        shifted[i] = point[i] - step
        down, _ = objective(shifted)
        numeric = (up - down) / (2.0 * step)
        denom = max(abs(analytic[i]), abs(numeric), 1e-8)
        worst = max(worst, abs(analytic[i] - numeric) / denom)
    return worst


# ---------------------------------------------------------------------------
# Adam ascent
# ---------------------------------------------------------------------------


@dataclass
class AdamRun:
    vector: np.ndarray
    value: float
    initial_value: float
    iterations: int
    converged: bool
    trajectory: list | None = None


def adam_maximize(
    objective,
    x0: np.ndarray,
    config: TrainConfig,
    trace=None,
    record_trajectory: bool = False,
) -> AdamRun:
    """Maximize ``objective`` with bias-corrected Adam from ``x0``.

    Returns the best iterate seen (the initialization included), so the
    reported value never falls below the initial one. Stops early when the
    objective changed by less than the relative tolerance over the last
    :data:`CONVERGENCE_WINDOW` iterations.
    """
    x = np.asarray(x0, dtype=float).copy()
    value, grad = objective(x)
    if not np.isfinite(value):
        raise MTGPError("objective not finite at the initial point")
    initial_value = value
    best_x, best_value = x.copy(), value
    trajectory = [x.copy()] if record_trajectory else None
    if trace is not None:
        trace(0, value, float(np.linalg.norm(grad)))

    m = np.zeros_like(x)
    v = np.zeros_like(x)
    history = [value]
    converged = False
    iterations = 0
    for t in range(1, config.max_iterations + 1):
        m = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * grad
        v = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * grad**2
        mhat = m / (1.0 - ADAM_BETA1**t)
        vhat = v / (1.0 - ADAM_BETA2**t)
        x = x + config.learning_rate * mhat / (np.sqrt(vhat) + ADAM_EPS)
        iterations = t
        if record_trajectory:
            trajectory.append(x.copy())
        value, grad = objective(x)
        if trace is not None:
            trace(t, value, float(np.linalg.norm(grad)))
        if np.isfinite(value) and value > best_value:
            best_value = value
            best_x = x.copy()
        history.append(value)
        if len(history) > CONVERGENCE_WINDOW:
            prev = history[-1 - CONVERGENCE_WINDOW]
            if np.isfinite(value) and np.isfinite(prev):
                if abs(value - prev) <= config.convergence_tolerance * max(1.0, abs(prev)):
                    converged = True
                    break
    return AdamRun(best_x, best_value, initial_value, iterations, converged, trajectory)


# ---------------------------------------------------------------------------
# Initialization heuristics
# ---------------------------------------------------------------------------


def median_lengthscales(X: np.ndarray) -> np.ndarray:
    """Median positive pairwise distance per input dimension, fallback 1."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    out = np.ones(X.shape[1])
    if X.shape[0] < 2:
        return out
    iu = np.triu_indices(X.shape[0], k=1)
    for p in range(X.shape[1]):
        dists = np.abs(X[iu[0], p] - X[iu[1], p])
        positive = dists[dists > 0.0]
        if positive.size:
            out[p] = float(np.median(positive))
    return out


def _target_variance(Y: np.ndarray) -> float:
    var = float(np.var(Y)) if Y.size else 0.0
    return var if var > 0.0 else 1.0


# ---------------------------------------------------------------------------
# Training drivers
# ---------------------------------------------------------------------------


def _run_restarts(objective, initial_vector_for, config: TrainConfig, trace=None):
    """Run the configured restarts; return (best run, restart index, diagnostics)."""
    best_run, best_index = None, -1
    diagnostics = []
    for r in range(config.num_restarts):
        run_trace = None
        if trace is not None:
            run_trace = lambda it, val, gn, _r=r: trace(_r, it, val, gn)
        try:
            run = adam_maximize(objective, initial_vector_for(r), config, trace=run_trace)
        except MTGPError as exc:
            diagnostics.append({"restart": r, "status": "failed", "error": str(exc)})
            continue
        diagnostics.append(
            {
                "restart": r,
                "status": "ok",
                "initial_objective": run.initial_value,
                "final_objective": run.value,
                "iterations": run.iterations,
                "converged": run.converged,
            }
        )
        if best_run is None or run.value > best_run.value:
            best_run, best_index = run, r
    if best_run is None:
        raise TrainingFailedError("all restarts failed", diagnostics)
    return best_run, best_index, diagnostics


def train_gp(
    X,
    Y,
    config: TrainConfig = TrainConfig(),
    kernel_kind: str = SQUARED_EXPONENTIAL,
    standardize: bool = True,
    trace=None,
) -> GPModel:
    """Fit a single-task GP by marginal-likelihood ascent.

    Optimization runs on standardized targets when ``standardize`` is set;
    the learned scale and offset are folded back exactly into the returned
    model's signal variance, noise variance, and constant mean, so the model
    predicts in raw units.
    """
    started = time.perf_counter()
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    Y = np.asarray(Y, dtype=float).reshape(-1)
    if standardize:
        mu = float(np.mean(Y)) if Y.size else 0.0
        s = float(np.std(Y)) if Y.size else 1.0
        if s <= 0.0:
            s = 1.0
    else:
        mu, s = 0.0, 1.0
    Ys = (Y - mu) / s

    template = ScalarKernelSpec(kernel_kind, np.ones(X.shape[1]), 1.0)
    var = _target_variance(Ys)
    base = np.concatenate(
        [np.log(median_lengthscales(X)), [np.log(var), np.log(0.01 * var)]]
    )

    def initial_vector(restart: int) -> np.ndarray:
        vec = base.copy()
        if restart > 0:
            rng = make_rng(config.seed, "gp-restart", restart)
            vec = vec + rng.normal(0.0, RESTART_LOG_JITTER, size=vec.shape)
        return vec

    def objective(vec):
        kern, noise = gp_materialize(template, vec)
        return gp_log_marginal_likelihood(kern, noise, X, Ys)

    run, restart, diagnostics = _run_restarts(objective, initial_vector, config, trace)
    kern_s, noise_s = gp_materialize(template, run.vector)
    kern = kern_s.with_params(kern_s.lengthscales, kern_s.signal_variance * s**2)
    model = gp_fit(kern, noise_s * s**2, X, Y, mean_const=mu)
    value_raw, _ = gp_log_marginal_likelihood(kern, noise_s * s**2, X, Y, mean_const=mu)
    model.fit_info = {
        "log_marginal_likelihood": value_raw,
        "objective": run.value,
        "iterations": run.iterations,
        "restart": restart,
        "wall_time_s": time.perf_counter() - started,
        "restarts": diagnostics,
    }
    return model


def build_mtgp_template(
    family: MTGPFamily, dataset: MultiTaskDataset
) -> tuple[MultiTaskKernelSpec, np.ndarray]:
    """Family-shaped kernel spec with heuristic scales and placeholder W.

    Latent terms start at staggered lengthscales (a geometric spread over one
    octave pair per term) so that separate components can pick up smooth
    trends and short-scale structure; a single shared scale tends to collapse
    all latents onto the same structure. Independent mode keeps one scale per
    task term.
    """
    D = dataset.num_tasks
    Q = D if family.num_terms is None else family.num_terms
    if family.mode == "independent":
        Q = D
    rank = 1 if family.mode in ("slfm", "independent") else family.rank
    X_all = dataset.stacked_inputs()
    ls = median_lengthscales(X_all)
    pooled_var = _target_variance(dataset.stacked_targets())
    task_vars = np.array([_target_variance(Y) for Y in dataset.targets])
    if family.mode != "independent" and Q > 1:
        scale_spread = np.geomspace(1.0, 4.0, Q)
    else:
        scale_spread = np.ones(Q)
    terms = []
    for q in range(Q):
        base_kernel = ScalarKernelSpec(family.kernel_kind, ls * scale_spread[q], pooled_var)
        if family.mode == "independent":
            W = np.zeros((D, 1))
            W[q % D, 0] = 1.0
        else:
            W = np.zeros((D, rank))
        if family.mode == "lmc":
            gamma = (LMC_GAMMA_INIT_FRACTION / Q) * task_vars
        else:
            gamma = np.zeros(D)
        terms.append(CoregionalizationTerm(W, gamma, base_kernel))
    noise = 0.01 * task_vars
    return MultiTaskKernelSpec(D, tuple(terms)), noise


def train_mtgp(
    dataset: MultiTaskDataset,
    config: TrainConfig = TrainConfig(),
    family: MTGPFamily = MTGPFamily(),
    standardize: bool = True,
    trace=None,
) -> MTGPModel:
    """Fit a multi-task GP by joint marginal-likelihood ascent.

    Each restart redraws the task loadings W (scale depends on the family:
    diagonal-dominant families start with timid coupling); restarts after
    the first also jitter the log-parameters. The winning restart's
    parameters are refitted on the raw dataset (standardization statistics
    are recomputed identically inside :func:`mtgp_fit`).
    """
    started = time.perf_counter()
    if standardize:
        work, _, stds = standardize_targets(dataset)
        # change of variables: observed-units likelihood differs by -sum N_d log s_d
        log_scale = float(np.sum([n * np.log(s) for n, s in zip(dataset.counts, stds)]))
    else:
        work = dataset
        log_scale = 0.0
    template, template_noise = build_mtgp_template(family, work)
    schema = mtgp_schema(template, family)
    canonical = mtgp_parameter_names(template)
    positions = {name: i for i, name in enumerate(canonical)}
    grad_index = np.asarray([positions[n] for n in schema.names()], dtype=int)
    base = mtgp_vector(template, template_noise, schema)
    is_w = np.asarray([".W[" in n for n in schema.names()])
    w_std = LMC_W_INIT_STD if family.mode == "lmc" else W_INIT_STD

    def initial_vector(restart: int) -> np.ndarray:
        vec = base.copy()
        rng = make_rng(config.seed, "mtgp-restart", restart)
        if np.any(is_w):
            vec[is_w] = rng.normal(0.0, w_std, size=int(np.sum(is_w)))
        if restart > 0:
            vec[~is_w] = vec[~is_w] + rng.normal(
                0.0, RESTART_LOG_JITTER, size=int(np.sum(~is_w))
            )
        return vec

    def objective(vec):
        spec, noise = mtgp_materialize(template, template_noise, schema, vec)
        value, full_grad = mtgp_log_marginal_likelihood(spec, noise, work)
        return value, full_grad[grad_index]

    run, restart, diagnostics = _run_restarts(objective, initial_vector, config, trace)
    spec, noise = mtgp_materialize(template, template_noise, schema, run.vector)
    model = mtgp_fit(spec, noise, dataset, standardize=standardize)
    model.fit_info = {
        "log_marginal_likelihood": run.value - log_scale,
        "objective": run.value,
        "iterations": run.iterations,
        "restart": restart,
        "wall_time_s": time.perf_counter() - started,
        "restarts": diagnostics,
    }
    return model
