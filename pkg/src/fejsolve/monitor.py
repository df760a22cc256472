"""Runtime certification of solver traces.

A finished (or in-progress) trace is checked against the convergence theory it
is supposed to obey: per-iteration variable-metric quasi-Fejér certificates, a
finite-sum radius recursion bounding every iterate, summability of the step
and model-gradient series, and the O(1/k) objective-error envelope on convex
runs.  All checks recompute both sides of each inequality from the trace; none
of them trusts the solver's own bookkeeping beyond the recorded points.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .driver import SolveTrace, SolverConfig, run_algorithm2
from .metric import MetricPolicy, iter_matrices
from .problems import ProblemInstance, eval_f, get_problem

# sums at or below this total are float noise (e.g. model-gradient norms on
# exact-subsolver runs) and count as stabilized
NOISE_FLOOR = 1e-8

# float guard on membership in the target set {x : f(x) <= lim f(x_k)}
MEMBER_RTOL = 1e-12


@dataclass(frozen=True)
class FejerCertificate:
    """Both sides of the variable-metric quasi-Fejér inequality at iteration k.

    lhs = ||x_{k+1}-y||^2_{Q_{k+1}},
    rhs = (1+psi_k) ||x_k-y||^2_{Q_k} + theta_k ||x_k-y|| + eps_k;
    nonnegative slack = rhs - lhs certifies the iteration.
    """

    k: int
    psi_k: float
    theta_k: float
    eps_k: float
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def _resolve_problem(trace: SolveTrace, problem: Optional[ProblemInstance]):
    return problem if problem is not None else get_problem(trace.problem_name)


def _require_member(problem: ProblemInstance, y: np.ndarray, f_final: float):
    fy = eval_f(problem, y)
    if fy > f_final + MEMBER_RTOL * (1.0 + abs(f_final)):
        raise ValueError(
            f"reference point rejected: f(y)={fy:.17g} exceeds the final "
            f"objective {f_final:.17g}, so y is not in the target set"
        )


def _qnorm_sq(Q: np.ndarray, v: np.ndarray) -> float:
    return float(v @ (Q @ v))


def reference_point(trace: SolveTrace, problem: Optional[ProblemInstance] = None,
                    y=None) -> np.ndarray:
    """Reference point y for certification: explicit > catalog minimizer >
    high-accuracy reference run."""
    problem = _resolve_problem(trace, problem)
    if y is not None:
        return np.asarray(y, dtype=float)
    if problem.minimizer is not None:
        return problem.minimizer
    return derived_reference_point(problem)


_REFERENCE_CACHE: dict = {}


def derived_reference_point(problem: ProblemInstance) -> np.ndarray:
    """Best point from a long, tight always-accept run (for problems without
    a stored minimizer).  Certificates against it should use a looser
    tolerance (~1e-6)."""
    if problem.name in _REFERENCE_CACHE:
        return _REFERENCE_CACHE[problem.name]
    if problem.lipschitz_L is None:
        raise ValueError(
            f"cannot derive a reference point for {problem.name}: no Lipschitz constant"
        )
    eta = 0.5
    a = 2.0 * problem.lipschitz_L / (1.0 - eta)
    cfg = SolverConfig(eta=eta, sigma_max=0.0, sigma_rule="constant", sigma_bar=0.0,
                       acceptance="always", grad_tol=1e-13, max_iters=100000)
    pol = MetricPolicy(kind="constant", Q0=a * np.eye(problem.dim), a=a)
    trace = run_algorithm2(problem, cfg, pol, np.zeros(problem.dim))
    _REFERENCE_CACHE[problem.name] = trace.x_final
    return trace.x_final


def prefix_trace(trace: SolveTrace, count: int) -> SolveTrace:
    """View of the first ``count`` iterations, for online-style certification.

    Certificates at iteration k use only x_0..x_{k+1}, so certifying a prefix
    mid-run gives exactly the first ``count`` certificates of the full run.
    The target-set membership gate still uses the prefix's final objective,
    which is the correct (conservative) bound while the run is in flight.
    """
    if count < 0 or count > len(trace):
        raise ValueError(f"count must lie in [0, {len(trace)}]")
    if count == len(trace):
        return trace
    x_final = trace[count].x
    return SolveTrace(
        records=trace.records[:count], x_final=x_final,
        f_final=trace[count].f_x, gnorm_final=trace[count].grad_norm,
        status="running", problem_name=trace.problem_name, config=trace.config,
        policy=trace.policy, x0=trace.x0, grad_tol_used=trace.grad_tol_used,
        q_norms=trace.q_norms[:count],
    )


def build_certificates(trace: SolveTrace, Qs=None, psi=None, y=None,
                       problem: Optional[ProblemInstance] = None) -> list:
    """One :class:`FejerCertificate` per iteration of the trace.

    Unsuccessful iterations carry theta_k = eps_k = 0 (the inequality then
    reduces to the pure metric-ordering bound); successful ones use
    eps_k = (1+psi_k) ||s_k||^2_{Q_k} and
    theta_k = 2 (1+psi_k) (||grad m_k(s_k)|| + sigma_k ||s_k||^{r-1}).

    ``Qs`` may be any iterable yielding Q_0 ... Q_K (default: regenerate from
    the trace's policy); ``psi`` any indexable slack sequence (default: the
    policy's).  ``y`` must satisfy f(y) <= f_final, i.e. belong to the target
    set of the run.
    """
    problem = _resolve_problem(trace, problem)
    K = len(trace)
    y = reference_point(trace, problem, y)
    if y.shape != trace.x_final.shape:
        raise ValueError(
            f"dimension mismatch: y has shape {y.shape}, iterates {trace.x_final.shape}"
        )
    _require_member(problem, y, trace.f_final)
    if Qs is None:
        Qs = iter_matrices(trace.policy, K + 1)
    if psi is None:
        psi = trace.policy.psi_sequence(K)
    r = trace.config.r

    certs = []
    it = iter(Qs)
    if K == 0:
        return certs
    Q_cur = np.asarray(next(it), dtype=float)
    for k in range(K):
        rec = trace[k]
        Q_next = np.asarray(next(it), dtype=float)
        x_next = trace[k + 1].x if k + 1 < K else trace.x_final
        dxk = rec.x - y
        dxn = x_next - y
        psi_k = float(psi[k])
        if rec.accepted:
            eps_k = (1.0 + psi_k) * _qnorm_sq(Q_cur, rec.s)
            theta_k = 2.0 * (1.0 + psi_k) * (
                rec.model_grad_norm + rec.sigma * rec.s_norm ** (r - 1.0)
            )
        else:
            eps_k = 0.0
            theta_k = 0.0
        lhs = _qnorm_sq(Q_next, dxn)
        rhs = (1.0 + psi_k) * _qnorm_sq(Q_cur, dxk) \
            + theta_k * float(np.linalg.norm(dxk)) + eps_k
        certs.append(FejerCertificate(k=k, psi_k=psi_k, theta_k=theta_k,
                                      eps_k=eps_k, lhs=lhs, rhs=rhs))
        Q_cur = Q_next
    return certs


def folded_sequences(certs, a: float) -> tuple:
    """Fold the linear theta term into (psi, eps).

    The inequality with a theta_k ||x_k - y|| term implies the plain
    quasi-Fejér form with psi_k + theta_k/a and eps_k + theta_k: the linear
    term is at most theta_k at distances below 1 and at most
    (theta_k/a) ||x_k - y||^2_{Q_k} above.  The radius recursion consumes this
    folded form.
    """
    psi_t = np.array([c.psi_k + c.theta_k / a for c in certs])
    eps_t = np.array([c.eps_k + c.theta_k for c in certs])
    return psi_t, eps_t


def check_radius(trace: SolveTrace, Qs=None, psi=None, eps=None, y=None,
                 problem: Optional[ProblemInstance] = None,
                 tol: float = 1e-8) -> dict:
    """Finite-sum radius recursion over the whole trace.

    Verifies, for every observed iterate x_k (k = 0..K),

        a ||x_k - y||^2 <= zeta_k (||x_0 - y||^2_{Q_0} + sum_{i<k} eps_i) + tol

    with zeta_k = prod_{i<k}(1 + psi_i), and reports the implied radius
    R_hat = sqrt(zeta_K (||x_0-y||^2_{Q_0} + sum eps) / a) together with the
    iterate bound ||x_k|| <= ||y|| + R_hat.  By default psi/eps are the folded
    sequences from the certificates (theta absorbed); pass explicit arrays to
    override.
    """
    problem = _resolve_problem(trace, problem)
    y = reference_point(trace, problem, y)
    a = trace.policy.a
    certs = None
    if psi is None or eps is None:
        certs = build_certificates(trace, Qs=Qs, psi=None, y=y, problem=problem)
        psi_f, eps_f = folded_sequences(certs, a)
        psi = psi_f if psi is None else np.asarray(psi, dtype=float)
        eps = eps_f if eps is None else np.asarray(eps, dtype=float)
    else:
        psi = np.asarray(psi, dtype=float)
        eps = np.asarray(eps, dtype=float)

    Q0 = trace.policy.Q0
    d0 = _qnorm_sq(Q0, trace.x0 - y)
    iterates = trace.iterates()
    K = len(trace)
    zeta = 1.0
    eps_sum = 0.0
    max_violation = -math.inf
    ok = True
    norm_max = 0.0
    for k in range(K + 1):
        lhs = a * float(np.sum((iterates[k] - y) ** 2))
        bound = zeta * (d0 + eps_sum)
        viol = lhs - bound - tol
        max_violation = max(max_violation, viol)
        if viol > 0:
            ok = False
        norm_max = max(norm_max, float(np.linalg.norm(iterates[k])))
        if k < K:
            zeta *= 1.0 + float(psi[k])
            eps_sum += float(eps[k])
    r_hat = math.sqrt(max(zeta * (d0 + eps_sum), 0.0) / a)
    norm_bound = float(np.linalg.norm(y)) + r_hat
    return {
        "ok": ok and norm_max <= norm_bound + tol,
        "radius_ok": ok,
        "R_hat": r_hat,
        "zeta_hat": zeta,
        "d0": d0,
        "eps_total": eps_sum,
        "max_violation": max_violation,
        "iterate_norm_max": norm_max,
        "iterate_norm_bound": norm_bound,
        "bounded_ok": norm_max <= norm_bound + tol,
    }


def _partial_series(values, K):
    csum = np.cumsum(values) if len(values) else np.zeros(0)
    total = float(csum[-1]) if len(csum) else 0.0
    return csum, total


def _stabilized(per_iteration_values, converged: bool) -> dict:
    """Final-quarter growth of a partial-sum series (<= 1% of the total, or a
    total at the float-noise floor)."""
    vals = np.asarray(per_iteration_values, dtype=float)
    total = float(vals.sum())
    if len(vals) == 0 or total <= NOISE_FLOOR:
        return {"total": total, "final_quarter": 0.0, "stabilized": True}
    cut = int(math.floor(0.75 * len(vals)))
    final_quarter = float(vals[cut:].sum())
    stabilized = (not converged) or final_quarter <= 0.01 * total
    return {"total": total, "final_quarter": final_quarter, "stabilized": stabilized}


def summability_report(trace: SolveTrace, cfg: Optional[SolverConfig] = None,
                       Qs=None) -> dict:
    """Partial sums over successful iterations and their sanity bounds.

    Reports sum ||s_k||^p for p in {2, r-1}, sum ||grad m_k(s_k)||, and the
    certificate series sums (theta, eps); flags a violation when
    sum ||s_k||^2 exceeds (f(x_0) - f_final) / (eta c) * (1 + 1e-8) with
    c = a/2 - tau.  Stabilization = final-quarter growth <= 1% (converged runs).
    """
    cfg = cfg if cfg is not None else trace.config
    a = trace.policy.a
    K = len(trace)
    r = cfg.r
    c = 0.5 * a - cfg.tau
    if Qs is None:
        Qs = iter_matrices(trace.policy, K + 1)

    s2 = np.zeros(K)
    s_rm1 = np.zeros(K)
    mgrad = np.zeros(K)
    theta = np.zeros(K)
    eps = np.zeros(K)
    psi = trace.policy.psi_sequence(K)
    it = iter(Qs)
    Q_cur = np.asarray(next(it), dtype=float) if K else None
    t_hat = 0.0
    for k in range(K):
        rec = trace[k]
        if rec.accepted:
            s2[k] = rec.s_norm ** 2
            s_rm1[k] = rec.s_norm ** (r - 1.0)
            mgrad[k] = rec.model_grad_norm
            theta[k] = 2.0 * (1.0 + psi[k]) * (
                rec.model_grad_norm + rec.sigma * rec.s_norm ** (r - 1.0)
            )
            eps[k] = (1.0 + psi[k]) * _qnorm_sq(Q_cur, rec.s)
            t_hat = max(t_hat, rec.s_norm)
        Q_cur = np.asarray(next(it), dtype=float)

    converged = trace.status == "converged"
    f0 = trace[0].f_x if K else trace.f_final
    decrease = f0 - trace.f_final
    s2_total = float(s2.sum())
    if c > 0:
        s2_bound = decrease / (cfg.eta * c) * (1.0 + 1e-8)
        s2_ok = s2_total <= s2_bound + 1e-15
    else:
        s2_bound = math.inf
        s2_ok = True
    return {
        "accepted": int(sum(1 for rec in trace if rec.accepted)),
        "T_hat": t_hat,
        "c": c,
        "sum_s2": s2_total,
        "sum_s2_bound": s2_bound,
        "sum_s2_ok": s2_ok,
        "sum_s_rm1": float(s_rm1.sum()),
        "sum_mgrad": float(mgrad.sum()),
        "sum_theta": float(theta.sum()),
        "sum_eps": float(eps.sum()),
        "stab_mgrad": _stabilized(mgrad, converged),
        "stab_s_rm1": _stabilized(s_rm1, converged),
        "stab_theta": _stabilized(theta, converged),
        "stab_eps": _stabilized(eps, converged),
        "ok": s2_ok,
    }


def _condition2_floor(cfg: SolverConfig, L: float) -> float:
    return 2.0 * cfg.tau + L / (1.0 - cfg.eta)


def measured_constants(trace: SolveTrace) -> dict:
    """Run-level constants for the decrease and rate bounds, all measured:
    b_hat = max_k ||Q_k||, T_hat = max accepted ||s_k||, c = a/2 - tau, and
    nu_hat = eta c / (tau + b_hat + sigma_max T_hat^{r-2})^2 (None if c <= 0)."""
    cfg = trace.config
    a = trace.policy.a
    c = 0.5 * a - cfg.tau
    if len(trace.q_norms):
        b_hat = float(trace.q_norms.max())
    else:
        b_hat = float(np.abs(np.linalg.eigvalsh(trace.policy.Q0)).max())
    t_hat = max((rec.s_norm for rec in trace if rec.accepted), default=0.0)
    nu_hat = None
    if c > 0:
        denom = cfg.tau + b_hat + cfg.sigma_max * t_hat ** (cfg.r - 2.0)
        nu_hat = cfg.eta * c / denom ** 2
    return {"b_hat": b_hat, "T_hat": t_hat, "c": c, "nu_hat": nu_hat}


def rate_check(trace: SolveTrace, f_star: Optional[float] = None, y=None,
               problem: Optional[ProblemInstance] = None,
               tol: float = 1e-10) -> dict:
    """O(1/k) objective-error envelope for convex runs.

    With measured constants b_hat = max_k ||Q_k||, T_hat = max accepted
    ||s_k||, c = a/2 - tau, nu_hat = eta c / (tau + b_hat + sigma_max
    T_hat^{r-2})^2 and R_hat from :func:`check_radius`, asserts

        f(x_k) - f* <= R_hat^2 D0 / (R_hat^2 + nu_hat k D0) + tol,  k >= 1,

    where D0 = f(x_0) - f*.  Requires a convex problem with known f*, a run
    whose parameters meet the strengthened eigenvalue floor, and eta in (0,1).
    """
    problem = _resolve_problem(trace, problem)
    if problem.convexity_class != "convex":
        raise ValueError(f"rate bound needs a convex problem, got {problem.convexity_class}")
    if f_star is None:
        f_star = problem.f_star
    if f_star is None:
        raise ValueError("rate bound needs the optimal value f*")
    cfg = trace.config
    a = trace.policy.a
    if problem.lipschitz_L is None:
        raise ValueError("rate bound needs the gradient Lipschitz constant L")
    if not (0.0 < cfg.eta < 1.0):
        raise ValueError("rate bound needs eta in (0, 1)")
    floor = _condition2_floor(cfg, problem.lipschitz_L)
    if a < floor * (1.0 - 1e-12):
        raise ValueError(
            f"rate bound needs a >= 2*tau + L/(1-eta); a={a:g}, floor={floor:g}"
        )

    y = reference_point(trace, problem, y)
    radius = check_radius(trace, y=y, problem=problem)
    consts = measured_constants(trace)
    c, b_hat, t_hat, nu_hat = (consts["c"], consts["b_hat"],
                               consts["T_hat"], consts["nu_hat"])
    r2 = radius["R_hat"] ** 2

    K = len(trace)
    delta0 = (trace[0].f_x if K else trace.f_final) - f_star
    ok = True
    max_violation = -math.inf
    for k in range(1, K + 1):
        f_k = trace[k].f_x if k < K else trace.f_final
        delta_k = f_k - f_star
        if delta0 <= 0.0:
            bound = 0.0
        else:
            bound = r2 * delta0 / (r2 + nu_hat * k * delta0)
        viol = delta_k - bound - tol
        max_violation = max(max_violation, viol)
        if viol > 0:
            ok = False
    return {
        "ok": ok,
        "nu_hat": nu_hat,
        "R_hat": radius["R_hat"],
        "b_hat": b_hat,
        "T_hat": t_hat,
        "c": c,
        "delta0": delta0,
        "max_violation": max_violation,
        "n_checked": K,
    }


def convergence_report(trace: SolveTrace, x_star=None) -> dict:
    """Tail behavior of the iterate sequence.

    Reports sup_{j>=k} ||x_j - x_final|| over the last tenth of the run, the
    first index from which that sup stays below 1e-6, and (when a minimizer is
    given) the final gap ||x_final - x*||.
    """
    iterates = trace.iterates()
    gaps = np.linalg.norm(iterates - trace.x_final, axis=1)
    # running suffix maximum: sup_{j >= k} gap_j
    tail_sup = np.maximum.accumulate(gaps[::-1])[::-1]
    n = len(gaps)
    last_tenth = int(math.floor(0.9 * (n - 1))) if n > 1 else 0
    below = np.nonzero(tail_sup <= 1e-6)[0]
    report = {
        "iterations": len(trace),
        "tail_sup_last_tenth": float(tail_sup[last_tenth]) if n else 0.0,
        "first_index_below_1e-6": int(below[0]) if len(below) else None,
        "converged": trace.status == "converged",
    }
    if x_star is not None:
        x_star = np.asarray(x_star, dtype=float)
        report["final_gap_to_minimizer"] = float(np.linalg.norm(trace.x_final - x_star))
    return report
