"""Run specifications: a flat, serializable description of one solver run.

``RunSpec`` is what the CLI builds from flags/config files and what suite
matrix files list row by row.  ``execute`` materializes the problem, config
and policy and dispatches to the right loop.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .driver import (
    SolverConfig,
    SolveTrace,
    gradient_method_config,
    run_algorithm1,
    run_algorithm2,
)
from .metric import MetricPolicy
from .problems import get_problem

ALGORITHMS = ("alg1", "alg2", "gradient")


@dataclass
class RunSpec:
    problem: str
    algorithm: str = "alg1"
    seed: int = 0
    x0: Optional[list] = None            # explicit start overrides the seed draw
    # gradient embedding parameters
    alpha: float = 0.25
    gamma: float = 0.5
    # solver configuration (see SolverConfig for semantics)
    r: float = 3.0
    tau: float = 0.0
    eta: float = 0.1
    sigma_max: float = 0.0
    sigma_rule: str = "constant"
    sigma_bar: float = 0.0
    sigma_init: float = 1.0
    gamma_inc: float = 4.0
    gamma_dec: float = 0.5
    acceptance: Optional[str] = None     # alg1 only: ratio_m (default) | ratio_q
    grad_tol: Optional[float] = None
    max_iters: int = 10000
    subsolver: str = "secular"
    max_inner: int = 20000
    patience: int = 50
    # metric policy
    policy: str = "constant"             # constant | inflated | shrink
    a: object = "auto"                   # float, or "auto" for the minimal admissible floor
    psi0: float = 0.0
    q0_scale: float = 1.0                # Q0 = q0_scale * a * I

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown run-spec fields: {sorted(unknown)}")
        return cls(**d)


_POLICY_ALIASES = {"constant": "constant", "inflated": "inflated",
                   "shrink": "shrink_to_floor", "shrink_to_floor": "shrink_to_floor"}


def resolve_floor(spec: RunSpec, lipschitz_L) -> float:
    """The eigenvalue floor a: explicit number, or the minimal admissible one.

    "auto" picks 2*tau + L/(1-eta) for alg2 (the strengthened floor) and
    the problem's L for alg1 (comfortably above 2*tau for usual taus).
    """
    if spec.a != "auto":
        return float(spec.a)
    if spec.algorithm == "alg2":
        if lipschitz_L is None:
            raise ValueError("a='auto' with alg2 needs the problem's Lipschitz constant")
        return 2.0 * spec.tau + lipschitz_L / (1.0 - spec.eta)
    if lipschitz_L is not None and lipschitz_L > 2.0 * spec.tau:
        return float(lipschitz_L)
    return 2.0 * spec.tau + 1.0


def build(spec: RunSpec):
    """(problem, config, policy, x0) for a run spec."""
    problem = get_problem(spec.problem)
    if spec.algorithm == "gradient":
        cfg, pol = gradient_method_config(spec.alpha, spec.gamma, problem.dim)
        if spec.grad_tol is not None or spec.max_iters != 10000:
            from dataclasses import replace
            cfg = replace(cfg, grad_tol=spec.grad_tol, max_iters=spec.max_iters)
    else:
        a = resolve_floor(spec, problem.lipschitz_L)
        if spec.algorithm == "alg2":
            acceptance = "always"
        else:
            acceptance = spec.acceptance or "ratio_m"
        cfg = SolverConfig(
            r=spec.r, tau=spec.tau, eta=spec.eta, sigma_max=spec.sigma_max,
            sigma_rule=spec.sigma_rule, sigma_bar=spec.sigma_bar,
            sigma_init=spec.sigma_init, gamma_inc=spec.gamma_inc,
            gamma_dec=spec.gamma_dec, acceptance=acceptance,
            grad_tol=spec.grad_tol, max_iters=spec.max_iters,
            subsolver=spec.subsolver, max_inner=spec.max_inner,
            patience=spec.patience,
        )
        kind = _POLICY_ALIASES[spec.policy]
        Q0 = spec.q0_scale * a * np.eye(problem.dim)
        pol = MetricPolicy(kind=kind, Q0=Q0, a=a, psi0=spec.psi0)
    if spec.x0 is not None:
        x0 = np.asarray(spec.x0, dtype=float)
    else:
        x0 = np.random.default_rng(spec.seed).uniform(-2.0, 2.0, problem.dim)
    return problem, cfg, pol, x0


def execute(spec: RunSpec) -> SolveTrace:
    problem, cfg, pol, x0 = build(spec)
    if spec.algorithm == "alg2":
        return run_algorithm2(problem, cfg, pol, x0)
    return run_algorithm1(problem, cfg, pol, x0)
