"""Outer solver loops: the general accept/reject scheme and the always-accept
variant, plus the sigma schedule and the classical-gradient embedding.

Per iteration k the driver computes Q_k from the metric policy, a trial step
s_k from the subsolver, and either moves (x_{k+1} = x_k + s_k, "successful"
iteration) or stays put, depending on the acceptance rule.  The run stops when
||grad f(x_k)|| <= grad_tol, when max_iters is hit, or when rejections persist
at sigma_max for longer than the patience window ("stalled").
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .metric import MetricPolicy, MetricStream
from .model import ModelState
from .problems import ProblemInstance, eval_f, eval_grad
from .subsolver import solve_descent, solve_secular

log = logging.getLogger(__name__)

ACCEPTANCE_RULES = ("ratio_m", "ratio_q", "always")
SIGMA_RULES = ("constant", "adaptive")
SUBSOLVERS = ("secular", "descent")

# rho denominators below this scale are not divided through; the record then
# carries rho = None (the acceptance decision itself never divides)
DENOM_FLOOR = 1e-14


class ConditionError(ValueError):
    """A policy/config pairing violates the preconditions of the chosen loop."""


@dataclass(frozen=True)
class SolverConfig:
    r: float = 3.0
    tau: float = 0.0
    eta: float = 0.1
    sigma_max: float = 0.0
    sigma_rule: str = "constant"       # constant | adaptive
    sigma_bar: float = 0.0             # value used by the constant rule
    sigma_init: float = 1.0            # starting value for the adaptive rule
    gamma_inc: float = 4.0
    gamma_dec: float = 0.5
    acceptance: str = "ratio_m"        # ratio_m | ratio_q | always
    grad_tol: Optional[float] = None   # None -> 1e-8 * (1 + ||grad f(x0)||)
    max_iters: int = 10000
    subsolver: str = "secular"         # secular | descent
    max_inner: int = 20000
    patience: int = 50                 # consecutive rejections at sigma_max before "stalled"
    secular_tol: float = 1e-10

    def __post_init__(self):
        if self.r < 3.0:
            raise ValueError("r must be >= 3")
        if self.tau < 0.0:
            raise ValueError("tau must be >= 0")
        if self.eta <= 0.0:
            raise ValueError("eta must be positive")
        if self.sigma_max < 0.0:
            raise ValueError("sigma_max must be >= 0")
        if self.sigma_rule not in SIGMA_RULES:
            raise ValueError(f"sigma_rule must be one of {SIGMA_RULES}")
        if self.acceptance not in ACCEPTANCE_RULES:
            raise ValueError(f"acceptance must be one of {ACCEPTANCE_RULES}")
        if self.subsolver not in SUBSOLVERS:
            raise ValueError(f"subsolver must be one of {SUBSOLVERS}")
        if not (0.0 <= self.sigma_bar <= self.sigma_max):
            raise ValueError("sigma_bar must lie in [0, sigma_max]")
        if self.sigma_rule == "adaptive":
            if not (0.0 <= self.sigma_init <= self.sigma_max):
                raise ValueError("sigma_init must lie in [0, sigma_max]")
            if self.gamma_inc < 1.0 or not (0.0 <= self.gamma_dec <= 1.0):
                raise ValueError("need gamma_inc >= 1 and gamma_dec in [0, 1]")
        if self.grad_tol is not None and self.grad_tol <= 0.0:
            raise ValueError("grad_tol must be positive")
        if self.max_iters < 0 or self.max_inner < 1 or self.patience < 1:
            raise ValueError("iteration limits must be positive")
        if self.subsolver == "descent" and self.tau <= 0.0:
            raise ValueError("the descent subsolver needs tau > 0")


@dataclass(frozen=True)
class IterationRecord:
    k: int
    x: np.ndarray
    f_x: float
    grad_norm: float
    sigma: float
    s: np.ndarray
    s_norm: float
    model_grad_norm: float
    model_decrease: float
    rho: Optional[float]
    accepted: bool


@dataclass
class SolveTrace:
    """Immutable-by-convention run record: one IterationRecord per iteration,
    the final point, and the run's configuration for later certification."""

    records: list
    x_final: np.ndarray
    f_final: float
    gnorm_final: float
    status: str                      # converged | maxiter | stalled
    problem_name: str
    config: SolverConfig
    policy: MetricPolicy
    x0: np.ndarray
    grad_tol_used: float
    q_norms: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def iterates(self) -> np.ndarray:
        """All points x_0 ... x_K as a (K+1, n) array (last row = x_final)."""
        return np.vstack([r.x for r in self.records] + [self.x_final])

    def accepted_indices(self) -> np.ndarray:
        return np.array([r.k for r in self.records if r.accepted], dtype=int)


def accept_step(f_k: float, f_trial: float, dec_m: float, dec_q: float,
                rule: str, eta: float) -> bool:
    """Acceptance test for a trial step.

    ratio_m compares the realized decrease against the regularized-model
    decrease, ratio_q against the quadratic-model decrease; always accepts
    unconditionally.  The comparison is done multiplicatively
    (f_k - f_trial >= eta * decrease), which is the same test as rho >= eta
    for a positive denominator but stays well defined when the decrease is at
    float scale.  A nonpositive decrease counts as "model failed to decrease":
    the step is rejected (and, with a positive eigenvalue floor and s != 0,
    points at a subsolver bug).
    """
    if rule == "always":
        return True
    if rule == "ratio_m":
        denom = dec_m
    elif rule == "ratio_q":
        denom = dec_q
    else:
        raise ValueError(f"unknown acceptance rule {rule!r}")
    if denom <= 0.0:
        log.warning("model decrease %.3g is nonpositive; rejecting the step", denom)
        return False
    return f_k - f_trial >= eta * denom


def next_sigma(cfg: SolverConfig, sigma_k: float, accepted: bool,
               sigma_max: Optional[float] = None) -> float:
    """Regularization weight for the next iteration, always in [0, sigma_max]."""
    if sigma_max is None:
        sigma_max = cfg.sigma_max
    if cfg.sigma_rule == "constant":
        return cfg.sigma_bar
    if accepted:
        return max(cfg.gamma_dec * sigma_k, 0.0)
    return min(cfg.gamma_inc * sigma_k, sigma_max)


def _initial_sigma(cfg: SolverConfig) -> float:
    if cfg.sigma_rule == "constant":
        return cfg.sigma_bar
    return cfg.sigma_init


def _check_condition(cfg: SolverConfig, pol: MetricPolicy, problem: ProblemInstance):
    """Validate the policy/config pairing before running."""
    if cfg.acceptance == "always":
        if not (0.0 < cfg.eta < 1.0):
            raise ConditionError("always-accept mode needs eta in (0, 1)")
        if problem.lipschitz_L is None:
            raise ConditionError(
                "always-accept mode requires the problem's gradient Lipschitz "
                "constant L (strengthened floor a >= 2*tau + L/(1-eta))"
            )
        floor = 2.0 * cfg.tau + problem.lipschitz_L / (1.0 - cfg.eta)
        if pol.a < floor * (1.0 - 1e-12):
            raise ConditionError(
                f"eigenvalue floor a={pol.a:g} below 2*tau + L/(1-eta) = {floor:g}"
            )
    else:
        if not pol.a > 2.0 * cfg.tau:
            raise ConditionError(
                f"eigenvalue floor a={pol.a:g} must exceed 2*tau = {2.0 * cfg.tau:g}"
            )
    if pol.dim != problem.dim:
        raise ConditionError(
            f"policy dimension {pol.dim} != problem dimension {problem.dim}"
        )


def _subsolve(st: ModelState, cfg: SolverConfig, evals, evecs):
    if cfg.subsolver == "secular":
        return solve_secular(st, tol=cfg.secular_tol, evals=evals, evecs=evecs)
    return solve_descent(st, tau=cfg.tau, max_inner=cfg.max_inner)


def _run(problem: ProblemInstance, cfg: SolverConfig, pol: MetricPolicy,
         x0) -> SolveTrace:
    _check_condition(cfg, pol, problem)
    x = np.array(x0, dtype=float)
    if x.shape != (problem.dim,):
        raise ValueError(f"x0 must have shape ({problem.dim},), got {x.shape}")
    f_x = eval_f(problem, x)
    g = eval_grad(problem, x)
    if not np.isfinite(f_x) or not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite objective or gradient at x0")
    grad_tol = cfg.grad_tol
    if grad_tol is None:
        grad_tol = 1e-8 * (1.0 + float(np.linalg.norm(g)))

    stream = MetricStream(pol)
    sigma = _initial_sigma(cfg)
    records = []
    q_norms = []
    reject_streak = 0
    status = "maxiter"

    for k in range(cfg.max_iters):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= grad_tol:
            status = "converged"
            break
        Q, evals, evecs = stream.advance()
        q_norms.append(float(np.abs(evals).max()))
        st = ModelState(x=x, f_x=f_x, g=g, Q=Q, sigma=sigma, r=cfg.r)
        res = _subsolve(st, cfg, evals, evecs)
        s = res.s
        x_trial = x + s
        f_trial = eval_f(problem, x_trial)
        if not np.isfinite(f_trial):
            raise FloatingPointError(f"non-finite objective at trial point, k={k}")
        dec_m = res.model_decrease
        dec_q = dec_m + (sigma / cfg.r) * float(np.linalg.norm(s)) ** cfg.r

        if cfg.acceptance == "always":
            accepted, rho = True, None
        else:
            accepted = accept_step(f_x, f_trial, dec_m, dec_q, cfg.acceptance, cfg.eta)
            denom = dec_m if cfg.acceptance == "ratio_m" else dec_q
            # report rho only when the division cannot blow up
            if denom > DENOM_FLOOR * (1.0 + abs(f_x)):
                rho = (f_x - f_trial) / denom
            else:
                rho = None

        records.append(IterationRecord(
            k=k, x=x.copy(), f_x=f_x, grad_norm=gnorm, sigma=sigma,
            s=np.array(s, dtype=float), s_norm=float(np.linalg.norm(s)),
            model_grad_norm=res.grad_norm, model_decrease=dec_m,
            rho=rho, accepted=accepted,
        ))

        if accepted:
            x, f_x, g = x_trial, f_trial, eval_grad(problem, x_trial)
            reject_streak = 0
        else:
            if sigma >= cfg.sigma_max:
                reject_streak += 1
                if reject_streak > cfg.patience:
                    status = "stalled"
                    break
        sigma = next_sigma(cfg, sigma, accepted)

    if status == "maxiter" and float(np.linalg.norm(g)) <= grad_tol:
        status = "converged"

    return SolveTrace(
        records=records, x_final=x, f_final=f_x,
        gnorm_final=float(np.linalg.norm(g)), status=status,
        problem_name=problem.name, config=cfg, policy=pol,
        x0=np.array(x0, dtype=float), grad_tol_used=float(grad_tol),
        q_norms=np.array(q_norms),
    )


def run_algorithm1(problem: ProblemInstance, cfg: SolverConfig,
                   pol: MetricPolicy, x0) -> SolveTrace:
    """General accept/reject loop; needs a ratio acceptance rule and a > 2*tau."""
    if cfg.acceptance not in ("ratio_m", "ratio_q"):
        raise ConditionError("run_algorithm1 needs acceptance ratio_m or ratio_q")
    return _run(problem, cfg, pol, x0)


def run_algorithm2(problem: ProblemInstance, cfg: SolverConfig,
                   pol: MetricPolicy, x0) -> SolveTrace:
    """Always-accept loop; valid under the strengthened eigenvalue floor
    a >= 2*tau + L/(1-eta) with eta in (0,1), which guarantees the same
    objective decrease as the accept/reject loop at every iteration."""
    if cfg.acceptance != "always":
        cfg = replace(cfg, acceptance="always")
    return _run(problem, cfg, pol, x0)


def gradient_method_config(alpha: float, gamma: float, dim: int):
    """Config/policy pair that reduces the loop to x_{k+1} = x_k - alpha*grad f.

    tau = 0 and sigma_max = 0 with the constant matrix (1/alpha) I make the
    trial step exactly -alpha * grad f(x_k) with model decrease
    (alpha/2)||grad f||^2; the ratio_m rule with eta = 2*gamma is then the
    classical sufficient-decrease test f_next <= f - gamma*alpha*||grad f||^2.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if not (0.0 < gamma < 1.0):
        raise ValueError("gamma must lie in (0, 1)")
    if dim < 1:
        raise ValueError("dim must be positive")
    cfg = SolverConfig(
        r=3.0, tau=0.0, eta=2.0 * gamma, sigma_max=0.0,
        sigma_rule="constant", sigma_bar=0.0, acceptance="ratio_m",
    )
    pol = MetricPolicy(kind="constant", Q0=np.eye(dim) / alpha, a=1.0 / alpha)
    return cfg, pol
