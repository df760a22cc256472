"""Gradient-only regularized quadratic-model solvers with runtime
variable-metric quasi-Fejér convergence certificates."""

from ._kernels import NUMBA_ENABLED
from .driver import (
    ConditionError,
    IterationRecord,
    SolverConfig,
    SolveTrace,
    accept_step,
    gradient_method_config,
    next_sigma,
    run_algorithm1,
    run_algorithm2,
)
from .metric import MetricPolicy, MetricStream, iter_matrices, next_matrix, validate_sequence
from .model import (
    ModelState,
    model_decrease,
    model_gradient,
    model_value,
    quadratic_value,
    stopping_satisfied,
)
from .monitor import (
    FejerCertificate,
    build_certificates,
    check_radius,
    convergence_report,
    derived_reference_point,
    measured_constants,
    prefix_trace,
    rate_check,
    summability_report,
)
from .problems import (
    ProblemInstance,
    check_gradient,
    eval_f,
    eval_grad,
    get_problem,
    list_problems,
)
from .subsolver import SubsolveResult, SubsolverError, solve_descent, solve_secular

__version__ = "0.1.0"

__all__ = [
    "ConditionError",
    "FejerCertificate",
    "IterationRecord",
    "MetricPolicy",
    "MetricStream",
    "ModelState",
    "NUMBA_ENABLED",
    "ProblemInstance",
    "SolveTrace",
    "SolverConfig",
    "SubsolveResult",
    "SubsolverError",
    "accept_step",
    "build_certificates",
    "check_gradient",
    "check_radius",
    "convergence_report",
    "derived_reference_point",
    "eval_f",
    "eval_grad",
    "get_problem",
    "gradient_method_config",
    "iter_matrices",
    "list_problems",
    "measured_constants",
    "model_decrease",
    "model_gradient",
    "model_value",
    "next_matrix",
    "next_sigma",
    "prefix_trace",
    "quadratic_value",
    "rate_check",
    "run_algorithm1",
    "run_algorithm2",
    "solve_descent",
    "solve_secular",
    "stopping_satisfied",
    "summability_report",
    "validate_sequence",
    "__version__",
]
