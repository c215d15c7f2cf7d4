"""Exact single- and multi-task Gaussian process regression.

Multi-task kernels couple tasks through sums of task-covariance matrices
paired with scalar input kernels; hyperparameters are learned by Adam ascent
on the log marginal likelihood. A benchmark harness compares the multi-task
model against a single-task baseline on correlated Forrester curves.
"""

__version__ = "0.1.0"

from .benchmark import (
    BenchmarkScenario,
    ComparisonResult,
    ForresterParams,
    StudyConfig,
    calibrate_auxiliary,
    forrester,
    pearson_correlation,
    percent_improvement,
    rmse,
    run_scenario,
    run_study,
)
from .coregionalization import (
    CoregionalizationTerm,
    MultiTaskKernelSpec,
    assemble_joint_covariance,
    build_B,
    cross_covariance_block,
)
from .data import MultiTaskDataset, read_task_csv, standardize_targets
from .errors import (
    CalibrationError,
    DomainError,
    IllConditionedKernelError,
    MTGPError,
    ShapeError,
    TrainingFailedError,
    UndefinedCorrelationError,
    ValidationError,
)
from .gp import (
    GPModel,
    PosteriorPrediction,
    gp_fit,
    gp_log_marginal_likelihood,
    gp_predict,
)
from .kernels import (
    KERNEL_KINDS,
    MATERN52,
    SQUARED_EXPONENTIAL,
    ScalarKernelSpec,
    kernel_eval,
    kernel_matrix,
    kernel_matrix_grad,
)
from .multitask import (
    MTGPModel,
    mtgp_fit,
    mtgp_log_marginal_likelihood,
    mtgp_parameter_names,
    mtgp_predict,
)
from .selfcheck import run_self_checks
from .training import (
    MTGPFamily,
    ParameterSchema,
    ParamSpec,
    TrainConfig,
    check_gradients,
    train_gp,
    train_mtgp,
)
