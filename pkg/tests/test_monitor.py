import numpy as np
import pytest

from fejsolve.driver import IterationRecord, SolveTrace, SolverConfig
from fejsolve.metric import MetricPolicy
from fejsolve.monitor import (
    build_certificates,
    check_radius,
    convergence_report,
    derived_reference_point,
    folded_sequences,
    rate_check,
    reference_point,
    summability_report,
)
from fejsolve.problems import ProblemInstance, get_problem
from fejsolve.runs import RunSpec, execute


def tiny_problem():
    return ProblemInstance(name="half-norm-sq", dim=2,
                           f=lambda x: 0.5 * float(x @ x), grad=lambda x: x,
                           convexity_class="convex", minimizer=np.zeros(2),
                           f_star=0.0, lipschitz_L=1.0)


def one_step_trace(accepted=True):
    """Hand-built trace: x0 = (1,1), one step s = (-1,0), Q = 2I, psi = 0."""
    x0 = np.array([1.0, 1.0])
    s = np.array([-1.0, 0.0]) if accepted else np.zeros(2)
    x1 = x0 + s if accepted else x0
    cfg = SolverConfig(sigma_max=1.0, sigma_rule="constant", sigma_bar=0.0)
    pol = MetricPolicy(kind="constant", Q0=2.0 * np.eye(2), a=2.0)
    rec = IterationRecord(k=0, x=x0, f_x=1.0, grad_norm=np.sqrt(2.0), sigma=0.0,
                          s=np.array([-1.0, 0.0]), s_norm=1.0,
                          model_grad_norm=0.0, model_decrease=0.4,
                          rho=1.0, accepted=accepted)
    return SolveTrace(records=[rec], x_final=x1, f_final=0.5 * float(x1 @ x1),
                      gnorm_final=float(np.linalg.norm(x1)), status="maxiter",
                      problem_name="half-norm-sq", config=cfg, policy=pol,
                      x0=x0, grad_tol_used=1e-8, q_norms=np.array([2.0]))


def test_certificate_accepted_epsilon_example():
    # eps_k = (1+psi) s'Q s = 2 for Q = 2I, psi = 0, s = (-1, 0)
    trace = one_step_trace(accepted=True)
    certs = build_certificates(trace, y=np.zeros(2), problem=tiny_problem())
    c = certs[0]
    assert c.eps_k == pytest.approx(2.0, abs=1e-15)
    assert c.theta_k == 0.0  # exact subsolve and sigma = 0
    # lhs = ||(0,1)||^2_{2I} = 2; rhs = ||(1,1)||^2_{2I} + eps = 4 + 2
    assert c.lhs == pytest.approx(2.0, abs=1e-15)
    assert c.rhs == pytest.approx(6.0, abs=1e-15)
    assert c.slack == pytest.approx(4.0, abs=1e-15)


def test_certificate_theta_formula_pinned():
    # theta_k = 2 (1+psi_k)(||grad m(s)|| + sigma ||s||^{r-1}) at an accepted k:
    # with psi0 = 0.2, sigma = 0.5, ||s|| = 1, residual 0.01 and r = 3 this is
    # 2 * 1.2 * (0.01 + 0.5) = 1.224
    x0 = np.array([1.0, 1.0])
    s = np.array([-1.0, 0.0])
    cfg = SolverConfig(sigma_max=1.0, sigma_rule="constant", sigma_bar=0.5)
    pol = MetricPolicy(kind="constant", Q0=2.0 * np.eye(2), a=2.0, psi0=0.2)
    rec = IterationRecord(k=0, x=x0, f_x=1.0, grad_norm=np.sqrt(2.0), sigma=0.5,
                          s=s, s_norm=1.0, model_grad_norm=0.01,
                          model_decrease=0.4, rho=1.0, accepted=True)
    trace = SolveTrace(records=[rec], x_final=x0 + s, f_final=0.5,
                       gnorm_final=1.0, status="maxiter",
                       problem_name="half-norm-sq", config=cfg, policy=pol,
                       x0=x0, grad_tol_used=1e-8, q_norms=np.array([2.0]))
    cert = build_certificates(trace, y=np.zeros(2), problem=tiny_problem())[0]
    assert cert.psi_k == 0.2
    assert cert.theta_k == pytest.approx(2.0 * 1.2 * (0.01 + 0.5), rel=1e-15)
    assert cert.eps_k == pytest.approx(1.2 * 2.0, rel=1e-15)


def test_certificate_unsuccessful_iteration_zero_sequences():
    trace = one_step_trace(accepted=False)
    certs = build_certificates(trace, y=np.zeros(2), problem=tiny_problem())
    c = certs[0]
    assert c.theta_k == 0.0 and c.eps_k == 0.0
    # x did not move: lhs equals the metric-ordering bound exactly (psi = 0)
    assert c.slack == pytest.approx(0.0, abs=1e-15)


def test_reference_point_membership_gate():
    trace = one_step_trace(accepted=True)
    far = np.array([5.0, 5.0])  # f(far) = 25 > f_final = 0.5
    with pytest.raises(ValueError, match="not in the target set"):
        build_certificates(trace, y=far, problem=tiny_problem())


def test_certificates_dimension_gate():
    trace = one_step_trace()
    with pytest.raises(ValueError, match="dimension"):
        build_certificates(trace, y=np.zeros(3), problem=tiny_problem())


def test_empty_trace_certificates():
    trace = one_step_trace()
    trace.records = []
    trace.x_final = trace.x0
    trace.f_final = 1.0
    certs = build_certificates(trace, y=np.zeros(2), problem=tiny_problem())
    assert certs == []


def test_gradient_run_certificates_nonnegative(suite):
    trace = suite["grad-quad2"]["trace"]
    certs = build_certificates(trace)
    assert min(c.slack for c in certs) >= 0.0


def test_folded_sequences():
    trace = one_step_trace(accepted=True)
    certs = build_certificates(trace, y=np.zeros(2), problem=tiny_problem())
    psi_t, eps_t = folded_sequences(certs, a=2.0)
    assert psi_t[0] == certs[0].psi_k + certs[0].theta_k / 2.0
    assert eps_t[0] == certs[0].eps_k + certs[0].theta_k


def test_check_radius_pure_contraction_case():
    # psi = 0 and eps = 0 reduce the recursion to non-increasing Q-distances:
    # a ||x_k - y||^2 <= ||x0 - y||^2_{Q0}
    x0 = np.array([2.0, 0.0])
    cfg = SolverConfig(sigma_max=0.0)
    pol = MetricPolicy(kind="constant", Q0=np.eye(2), a=1.0)
    records = []
    x = x0.copy()
    for k in range(10):
        s = -0.5 * x
        records.append(IterationRecord(k=k, x=x.copy(), f_x=float(x @ x),
                                       grad_norm=1.0, sigma=0.0, s=s,
                                       s_norm=float(np.linalg.norm(s)),
                                       model_grad_norm=0.0, model_decrease=1.0,
                                       rho=None, accepted=True))
        x = x + s
    trace = SolveTrace(records=records, x_final=x, f_final=float(x @ x),
                       gnorm_final=0.0, status="converged",
                       problem_name="half-norm-sq", config=cfg, policy=pol,
                       x0=x0, grad_tol_used=1e-8)
    rep = check_radius(trace, psi=np.zeros(10), eps=np.zeros(10),
                       y=np.zeros(2), problem=tiny_problem())
    assert rep["ok"]
    assert rep["R_hat"] == pytest.approx(2.0)  # sqrt(||x0||^2_{I} / 1)
    assert rep["zeta_hat"] == 1.0


def test_check_radius_bounds_iterates(suite):
    trace = suite["alg2-quad10-rate"]["trace"]
    rep = check_radius(trace)
    assert rep["ok"] and rep["bounded_ok"]
    assert rep["iterate_norm_max"] <= rep["iterate_norm_bound"] + 1e-8


def test_summability_empty_trace():
    trace = one_step_trace()
    trace.records = []
    trace.x_final = trace.x0
    trace.f_final = 1.0
    rep = summability_report(trace)
    assert rep["sum_s2"] == 0.0 and rep["sum_mgrad"] == 0.0
    assert rep["T_hat"] == 0.0 and rep["ok"]


def test_summability_budget_on_gradient_run(suite):
    trace = suite["grad-quad2"]["trace"]
    rep = summability_report(trace)
    assert rep["ok"]
    assert rep["sum_s2"] <= rep["sum_s2_bound"]
    assert rep["stab_eps"]["stabilized"] and rep["stab_theta"]["stabilized"]


def test_inexact_steps_quadratic_residual_bound(suite):
    # accepted steps with ||s|| <= 1 satisfy ||grad m(s)|| <= tau ||s||^2
    trace = suite["alg1-logistic-descent"]["trace"]
    tau = trace.config.tau
    assert tau > 0
    seen = 0
    for rec in trace:
        if rec.accepted and rec.s_norm <= 1.0:
            assert rec.model_grad_norm <= tau * rec.s_norm ** 2 + 1e-12
            seen += 1
    assert seen > 0


def test_rate_check_envelope(suite):
    trace = suite["alg2-quad10-rate"]["trace"]
    rep = rate_check(trace)
    assert rep["ok"]
    delta0 = rep["delta0"]
    r2 = rep["R_hat"] ** 2
    # the k = 1 envelope already sits strictly below the initial error
    bound1 = r2 * delta0 / (r2 + rep["nu_hat"] * delta0)
    assert bound1 < delta0
    # k * (f_k - f*) stays below R^2 / nu
    f_star = get_problem(trace.problem_name).f_star
    fs = [rec.f_x for rec in trace] + [trace.f_final]
    for k in (1, len(trace) // 2, len(trace)):
        assert k * (fs[k] - f_star) <= r2 / rep["nu_hat"] + 1e-9


def test_rate_check_on_condition2_gradient_run():
    # a gradient run with alpha = 1/(2L), gamma = 0.25 satisfies the
    # strengthened floor (1/alpha = 2L = L/(1-eta) with eta = 0.5)
    from fejsolve.driver import gradient_method_config, run_algorithm1

    p = get_problem("quad-d2")
    alpha = 1.0 / (2.0 * p.lipschitz_L)
    cfg, pol = gradient_method_config(alpha, 0.25, p.dim)
    trace = run_algorithm1(p, cfg, pol, np.array([1.1, -0.7]))
    assert trace.status == "converged"
    rep = rate_check(trace)
    assert rep["ok"]


def test_rate_check_refusals(suite):
    with pytest.raises(ValueError, match="convex"):
        rate_check(suite["alg2-ratio5-s100"]["trace"])
    with pytest.raises(ValueError, match="f\\*"):
        rate_check(suite["alg1-logistic-descent"]["trace"])
    # eta = 1 (gradient embedding with gamma = 0.5) fails the eta gate
    with pytest.raises(ValueError, match="eta"):
        rate_check(suite["grad-quad2"]["trace"])


def test_derived_reference_point_logistic():
    p = get_problem("logistic-d4")
    y = derived_reference_point(p)
    assert np.linalg.norm(p.grad(y)) <= 1e-12
    trace = execute(RunSpec(problem="logistic-d4", algorithm="alg2", tau=0.0,
                            eta=0.5, a="auto", sigma_rule="constant",
                            sigma_bar=0.0, sigma_max=0.0, grad_tol=1e-9, seed=1))
    certs = build_certificates(trace, y=y)
    # derived reference: the looser certificate bar applies
    assert min(c.slack for c in certs) >= -1e-6
    auto_y = reference_point(trace)
    np.testing.assert_array_equal(auto_y, y)


def test_certificate_series_stabilize_on_certified_runs(suite):
    # the theta and eps partial sums are finite and settle: the final quarter
    # adds at most 1% (or the whole sum sits at the float-noise floor)
    for name, entry in suite.items():
        if "certify" not in entry["tags"]:
            continue
        rep = summability_report(entry["trace"])
        assert rep["stab_theta"]["stabilized"], (name, rep["stab_theta"])
        assert rep["stab_eps"]["stabilized"], (name, rep["stab_eps"])
        assert np.isfinite(rep["sum_theta"]) and np.isfinite(rep["sum_eps"])


def test_tail_suprema_fall_below_threshold_on_certified_runs(suite):
    # sup_{j>=k} ||x_j - x_final|| eventually drops below 1e-6
    for name, entry in suite.items():
        if "certify" not in entry["tags"]:
            continue
        rep = convergence_report(entry["trace"])
        assert rep["first_index_below_1e-6"] is not None, name


def test_prefix_certificates_match_full_run(suite):
    # online certification: a mid-run prefix yields exactly the first
    # certificates of the finished run
    from fejsolve.monitor import prefix_trace

    trace = suite["alg2-lsq6"]["trace"]
    full = build_certificates(trace)
    cut = len(trace) // 3
    pre = build_certificates(prefix_trace(trace, cut))
    assert len(pre) == cut
    for a, b in zip(pre, full[:cut]):
        assert a.lhs == b.lhs and a.rhs == b.rhs and a.eps_k == b.eps_k
    with pytest.raises(ValueError):
        prefix_trace(trace, len(trace) + 1)


def test_convergence_report(suite):
    trace = suite["alg2-lsq6"]["trace"]
    p = get_problem("lstsq-d6")
    rep = convergence_report(trace, x_star=p.minimizer)
    assert rep["converged"]
    assert rep["final_gap_to_minimizer"] <= 1e-6
    assert rep["tail_sup_last_tenth"] <= 1e-4
    assert rep["first_index_below_1e-6"] is not None
