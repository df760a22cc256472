"""The acceptance gate: every convergence-theory ingredient as a named check.

Each ``check_*`` function recomputes the quantity it asserts from first
principles (grid searches, raw trace arithmetic, independent formulas) and
returns a :class:`CheckResult` with pass/fail and diagnostics.  ``run_suite``
executes the shipped run matrix, ``evaluate_all`` maps the checks over its
traces; the CLI's ``suite`` subcommand and tests/test_acceptance.py both drive
this module.
"""

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import monitor
from .driver import SolveTrace
from .model import ModelState
from .problems import check_gradient, eval_grad, get_problem, list_problems, PROBE_SEED
from .runs import RunSpec, execute
from .subsolver import solve_secular


@dataclass
class CheckResult:
    cid: str
    label: str
    passed: bool
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.passed = bool(self.passed)

    def line(self) -> str:
        return f"[{self.cid}] {'PASS' if self.passed else 'FAIL'} {self.label}"


def load_default_matrix() -> dict:
    with resources.files("fejsolve.data").joinpath("acceptance_matrix.json").open() as fh:
        return json.load(fh)


def run_suite(matrix: dict) -> dict:
    """Execute every run in a matrix; failures are recorded, not raised.

    Returns {name: {"spec", "tags", "trace" | "error"}}.
    """
    out = {}
    for row in matrix.get("runs", []):
        name = row["name"]
        entry = {"tags": row.get("tags", []), "spec": row.get("spec", {})}
        try:
            spec = RunSpec.from_dict(row["spec"])
            entry["trace"] = execute(spec)
        except Exception as exc:  # per-row isolation: the suite must go on
            entry["error"] = f"{type(exc).__name__}: {exc}"
        out[name] = entry
    return out


def _traces(suite, tag=None):
    for name, entry in suite.items():
        if "trace" not in entry:
            continue
        if tag is None or tag in entry["tags"]:
            yield name, entry["trace"]


# ---------------------------------------------------------------------------
# independent oracles


def _batch_model_values(st: ModelState, S: np.ndarray) -> np.ndarray:
    """Model values over a batch of steps (rows of S), by the raw formula."""
    lin = S @ st.g
    quad = 0.5 * np.einsum("ij,ij->i", S @ st.Q, S)
    norms = np.linalg.norm(S, axis=1)
    return st.f_x + lin + quad + (st.sigma / st.r) * norms ** st.r


def grid_refine_minimum(st: ModelState, radius: float, points: int = 41,
                        rounds: int = 8) -> float:
    """Smallest model value found by a dense grid with window refinement.

    A cube of the given radius is scanned with ``points`` per axis; each round
    recenters at the best point and shrinks the window by 10x (four grid
    cells).  The model under a positive definite Q is strictly convex, so the
    refinement cannot lose the global minimizer.
    """
    n = st.dim
    center = np.zeros(n)
    width = float(radius)
    best_val = math.inf
    axes = [np.linspace(-1.0, 1.0, points) for _ in range(n)]
    for _ in range(rounds):
        grids = np.meshgrid(*axes, indexing="ij")
        S = np.stack([g.ravel() for g in grids], axis=1) * width + center
        vals = _batch_model_values(st, S)
        i = int(np.argmin(vals))
        best_val = min(best_val, float(vals[i]))
        center = S[i]
        width /= 10.0
    return best_val


def _random_states(count: int, seed: int):
    """Random 1-D/2-D model states with positive definite Q, cycling
    sigma through {0, 0.5, 3} and r through {3, 3.5, 4}."""
    rng = np.random.default_rng(seed)
    sigmas = (0.0, 0.5, 3.0)
    rs = (3.0, 3.5, 4.0)
    for i in range(count):
        n = 1 + (i % 2)
        sigma = sigmas[(i // 2) % 3]
        r = rs[(i // 6) % 3]
        g = rng.normal(0.0, 2.0, n)
        evals = rng.uniform(0.2, 5.0, n)
        if n == 1:
            Q = np.array([[evals[0]]])
        else:
            V, _ = np.linalg.qr(rng.normal(size=(n, n)))
            Q = (V * evals) @ V.T
            Q = 0.5 * (Q + Q.T)
        yield ModelState(x=np.zeros(n), f_x=float(rng.normal()), g=g, Q=Q,
                         sigma=sigma, r=r)


# ---------------------------------------------------------------------------
# the eleven checks


def check_subproblem_oracle(count: int = 200, seed: int = PROBE_SEED) -> CheckResult:
    """Exact-subsolver model values against dense grid search (1e-6 absolute),
    plus the closed-form 1-D case with (g, Q, sigma, r) = (-2, 2, 3, 3)."""
    worst = 0.0
    for st in _random_states(count, seed):
        res = solve_secular(st)
        radius = 2.0 * float(np.linalg.norm(res.s)) + 1.0
        grid_val = grid_refine_minimum(st, radius)
        sec_val = st.f_x - res.model_decrease
        worst = max(worst, abs(sec_val - grid_val))
    st1 = ModelState(x=np.zeros(1), f_x=0.0, g=np.array([-2.0]),
                     Q=np.array([[2.0]]), sigma=3.0, r=3.0)
    s_analytic = (-1.0 + math.sqrt(7.0)) / 3.0
    s_gap = abs(float(solve_secular(st1).s[0]) - s_analytic)
    passed = worst <= 1e-6 and s_gap <= 1e-9
    return CheckResult("criterion-01", "subproblem oracle equivalence", passed,
                       {"worst_value_gap": worst, "analytic_step_gap": s_gap,
                        "states": count})


def check_inexactness(suite) -> CheckResult:
    """Every returned step of every run obeys the first-order test with
    1e-12 slack."""
    worst = -math.inf
    n_steps = 0
    for name, trace in _traces(suite):
        tau = trace.config.tau
        for rec in trace:
            lhs = rec.model_grad_norm
            rhs = tau * rec.s_norm * min(rec.s_norm, 1.0) + 1e-12
            worst = max(worst, lhs - rhs)
            n_steps += 1
    return CheckResult("criterion-02", "inexact first-order condition on all steps",
                       worst <= 0.0, {"worst_violation": worst, "steps": n_steps})


def check_decrease_bounds(suite) -> CheckResult:
    """Model decrease >= (a/2 - tau)||s||^2 at every iteration, and realized
    objective decrease >= eta (a/2 - tau)||s||^2 at accepted ones."""
    worst_m = -math.inf
    worst_f = -math.inf
    for name, trace in _traces(suite):
        cfg = trace.config
        c = 0.5 * trace.policy.a - cfg.tau
        K = len(trace)
        for k, rec in enumerate(trace):
            slack = 1e-10 * (1.0 + abs(rec.f_x))
            worst_m = max(worst_m, c * rec.s_norm ** 2 - rec.model_decrease - slack)
            if rec.accepted:
                f_next = trace[k + 1].f_x if k + 1 < K else trace.f_final
                worst_f = max(worst_f, cfg.eta * c * rec.s_norm ** 2
                              - (rec.f_x - f_next) - slack)
    passed = worst_m <= 0.0 and worst_f <= 0.0
    return CheckResult("criterion-03", "model and objective decrease floors", passed,
                       {"worst_model_violation": worst_m,
                        "worst_objective_violation": worst_f})


def check_monotone_objective(suite) -> CheckResult:
    """f(x_{k+1}) <= f(x_k) with zero slack, every iteration of every run."""
    bad = []
    for name, trace in _traces(suite):
        fs = [rec.f_x for rec in trace] + [trace.f_final]
        for i in range(len(fs) - 1):
            if not fs[i + 1] <= fs[i]:
                bad.append((name, i, fs[i], fs[i + 1]))
    return CheckResult("criterion-04", "monotone objective, zero slack",
                       not bad, {"violations": bad[:10]})


def check_summability(suite) -> CheckResult:
    """Step-square sums within the telescoped decrease budget; model-gradient
    and ||s||^{r-1} partial sums stabilize on converged runs."""
    details = {}
    passed = True
    for name, trace in _traces(suite):
        rep = monitor.summability_report(trace)
        ok = rep["sum_s2_ok"] and rep["stab_mgrad"]["stabilized"] \
            and rep["stab_s_rm1"]["stabilized"]
        details[name] = {"sum_s2": rep["sum_s2"], "bound": rep["sum_s2_bound"],
                         "ok": ok}
        passed = passed and ok
    return CheckResult("criterion-05", "step and model-gradient summability",
                       passed, details)


def _certify(trace: SolveTrace):
    problem = get_problem(trace.problem_name)
    y = problem.minimizer
    certs = monitor.build_certificates(trace, y=y)
    tol = 1e-8 * (1.0 + float(np.sum((trace.x0 - y) ** 2)))
    min_slack = min((c.slack for c in certs), default=0.0)
    return certs, y, min_slack, tol


def check_fejer_certificates(suite) -> CheckResult:
    """Per-iteration quasi-Fejér certificate slack >= -1e-8 (1+||x0-y||^2) on
    every certification run (known-minimizer problems)."""
    details = {}
    passed = True
    for name, trace in _traces(suite, tag="certify"):
        certs, y, min_slack, tol = _certify(trace)
        ok = min_slack >= -tol
        details[name] = {"min_slack": min_slack, "tol": tol, "ok": ok}
        passed = passed and ok
    return CheckResult("criterion-06", "variable-metric quasi-Fejér certificates",
                       passed, details)


def check_radius_and_convergence(suite) -> CheckResult:
    """Finite-sum radius recursion, plus full-sequence convergence: final gap
    to the minimizer <= 1e-6 and tail spread <= 1e-4 over the last tenth."""
    details = {}
    passed = True
    for name, trace in _traces(suite, tag="certify"):
        problem = get_problem(trace.problem_name)
        rad = monitor.check_radius(trace, y=problem.minimizer)
        conv = monitor.convergence_report(trace, x_star=problem.minimizer)
        ok = rad["ok"] and conv["final_gap_to_minimizer"] <= 1e-6 \
            and conv["tail_sup_last_tenth"] <= 1e-4
        details[name] = {"radius_ok": rad["ok"], "R_hat": rad["R_hat"],
                         "final_gap": conv["final_gap_to_minimizer"],
                         "tail_sup": conv["tail_sup_last_tenth"], "ok": ok}
        passed = passed and ok
    return CheckResult("criterion-07", "radius bound and full convergence",
                       passed, details)


def check_pseudoconvex_minimum(suite) -> CheckResult:
    """Always-accept runs on the pseudoconvex problem drive the gradient below
    1e-8 and land within 1e-5 of the global minimizer (the origin)."""
    details = {}
    passed = True
    count = 0
    for name, trace in _traces(suite, tag="pseudoconvex-min"):
        count += 1
        ok = trace.status == "converged" and trace.gnorm_final <= 1e-8 \
            and float(np.linalg.norm(trace.x_final)) <= 1e-5
        details[name] = {"status": trace.status, "gnorm": trace.gnorm_final,
                         "xnorm": float(np.linalg.norm(trace.x_final)), "ok": ok}
        passed = passed and ok
    return CheckResult("criterion-08", "pseudoconvex runs reach the minimizer",
                       passed and count > 0, details)


def check_convex_rate(suite) -> CheckResult:
    """O(1/k) objective-error envelope with measured constants on the
    ill-conditioned quadratic run."""
    details = {}
    passed = True
    count = 0
    for name, trace in _traces(suite, tag="rate"):
        count += 1
        rep = monitor.rate_check(trace, tol=1e-10)
        details[name] = {k: rep[k] for k in
                         ("ok", "nu_hat", "R_hat", "b_hat", "T_hat", "max_violation")}
        passed = passed and rep["ok"]
    return CheckResult("criterion-09", "convex O(1/k) rate envelope",
                       passed and count > 0, details)


def check_gradient_embedding(suite) -> CheckResult:
    """The gradient-method configuration reproduces x_{k+1} = x_k - alpha g_k
    to 1e-12 with every step accepted, and its trace passes the monotonicity,
    summability, certificate and radius checks."""
    details = {}
    passed = True
    count = 0
    for name, trace in _traces(suite, tag="embed"):
        count += 1
        problem = get_problem(trace.problem_name)
        alpha = 1.0 / trace.policy.a
        step_gap = 0.0
        dec_gap = 0.0
        K = len(trace)
        for k, rec in enumerate(trace):
            g_k = eval_grad(problem, rec.x)
            step_gap = max(step_gap, float(np.abs(rec.s + alpha * g_k).max()))
            x_next = trace[k + 1].x if k + 1 < K else trace.x_final
            step_gap = max(step_gap, float(np.abs(x_next - (rec.x - alpha * g_k)).max()))
            dec_gap = max(dec_gap, abs(rec.model_decrease
                                       - 0.5 * alpha * float(g_k @ g_k)))
        all_accepted = all(rec.accepted for rec in trace)
        sub = {
            "monotone": check_monotone_objective({name: suite[name]}).passed,
            "summability": check_summability({name: suite[name]}).passed,
        }
        certs, y, min_slack, tol = _certify(trace)
        rad = monitor.check_radius(trace, y=y)
        conv = monitor.convergence_report(trace, x_star=y)
        sub["certificates"] = min_slack >= -tol
        sub["radius"] = rad["ok"] and conv["final_gap_to_minimizer"] <= 1e-6 \
            and conv["tail_sup_last_tenth"] <= 1e-4
        ok = step_gap <= 1e-12 and dec_gap <= 1e-12 and all_accepted \
            and all(sub.values())
        details[name] = {"step_gap": step_gap, "decrease_gap": dec_gap,
                         "all_accepted": all_accepted, **sub, "ok": ok}
        passed = passed and ok
    return CheckResult("criterion-10", "classical gradient-method embedding",
                       passed and count > 0, details)


def check_gradient_correctness(points: int = 20, h: float = 1e-5,
                               tol: float = 1e-6) -> CheckResult:
    """Analytic gradients vs central differences across the whole catalog."""
    rng = np.random.default_rng(PROBE_SEED + 7)
    details = {}
    passed = True
    for name in list_problems():
        p = get_problem(name)
        lo, hi = p.test_box
        worst = 0.0
        for _ in range(points):
            x = rng.uniform(lo, hi, p.dim)
            worst = max(worst, check_gradient(p, x, h))
        details[name] = worst
        passed = passed and worst <= tol
    return CheckResult("criterion-11", "catalog gradient correctness", passed, details)


def evaluate_all(suite) -> list:
    """All eleven acceptance checks over an executed suite."""
    return [
        check_subproblem_oracle(),
        check_inexactness(suite),
        check_decrease_bounds(suite),
        check_monotone_objective(suite),
        check_summability(suite),
        check_fejer_certificates(suite),
        check_radius_and_convergence(suite),
        check_pseudoconvex_minimum(suite),
        check_convex_rate(suite),
        check_gradient_embedding(suite),
        check_gradient_correctness(),
    ]
