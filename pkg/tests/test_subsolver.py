import math

import numpy as np
import pytest

from fejsolve.model import ModelState, model_decrease, model_value, stopping_satisfied
from fejsolve.subsolver import SubsolverError, solve_descent, solve_secular

ROOT_1D = (-1.0 + math.sqrt(7.0)) / 3.0  # stationary point of -2 + 2s + 3s^2


def scalar_state(sigma=3.0, r=3.0):
    return ModelState(x=np.zeros(1), f_x=0.0, g=np.array([-2.0]),
                      Q=np.array([[2.0]]), sigma=sigma, r=r)


def random_state(dim, seed, sigma=1.0, r=3.0, eig_lo=0.3, eig_hi=4.0):
    rng = np.random.default_rng(seed)
    g = rng.normal(0, 2, dim)
    V, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    evals = rng.uniform(eig_lo, eig_hi, dim)
    Q = 0.5 * ((V * evals) @ V.T + ((V * evals) @ V.T).T)
    return ModelState(x=np.zeros(dim), f_x=float(rng.normal()), g=g, Q=Q,
                      sigma=sigma, r=r)


def test_zero_gradient_returns_zero_step():
    st = ModelState(x=np.zeros(2), f_x=1.0, g=np.zeros(2), Q=np.eye(2),
                    sigma=2.0, r=3.0)
    for res in (solve_secular(st), solve_descent(st, tau=0.1)):
        assert res.method == "zero"
        np.testing.assert_array_equal(res.s, np.zeros(2))
        assert res.model_decrease == 0.0


def test_secular_1d_analytic():
    res = solve_secular(scalar_state())
    assert abs(res.s[0] - ROOT_1D) <= 1e-9
    assert res.method == "secular"
    assert res.grad_norm <= 1e-12


def test_secular_sigma_zero_is_newton_step():
    st = random_state(4, seed=2, sigma=0.0)
    res = solve_secular(st)
    np.testing.assert_allclose(res.s, -np.linalg.solve(st.Q, st.g),
                               rtol=1e-12, atol=1e-14)


def test_secular_requires_positive_definite():
    st = ModelState(x=np.zeros(2), f_x=0.0, g=np.array([1.0, 0.0]),
                    Q=np.diag([1.0, -0.5]), sigma=1.0, r=3.0)
    with pytest.raises(ValueError, match="positive definite"):
        solve_secular(st)


def test_secular_accepts_shared_factorization():
    st = random_state(5, seed=9, sigma=2.0)
    evals, evecs = np.linalg.eigh(st.Q)
    res = solve_secular(st, evals=evals, evecs=evecs)
    res2 = solve_secular(st)
    np.testing.assert_array_equal(res.s, res2.s)
    with pytest.raises(ValueError, match="both"):
        solve_secular(st, evals=evals)


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("sigma,r", [(0.0, 3.0), (0.5, 3.5), (3.0, 4.0)])
def test_secular_matches_grid_oracle(seed, sigma, r):
    from fejsolve.verify import grid_refine_minimum

    dim = 1 + seed % 2
    st = random_state(dim, seed=100 + seed, sigma=sigma, r=r)
    res = solve_secular(st)
    radius = 2.0 * np.linalg.norm(res.s) + 1.0
    grid_val = grid_refine_minimum(st, radius)
    assert abs((st.f_x - res.model_decrease) - grid_val) <= 1e-6


def test_resolvent_norm_strictly_decreasing():
    # the scalar map lam -> ||(Q + lam I)^{-1} g|| behind the secular equation
    st = random_state(6, seed=11)
    evals, evecs = np.linalg.eigh(st.Q)
    g_rot = evecs.T @ st.g
    lams = np.linspace(0.0, 25.0, 200)
    vals = [np.linalg.norm(g_rot / (evals + lam)) for lam in lams]
    assert all(vals[i + 1] < vals[i] for i in range(len(vals) - 1))


def test_descent_1d_close_to_secular():
    res = solve_descent(scalar_state(), tau=0.1)
    assert res.method == "descent"
    assert abs(res.s[0] - ROOT_1D) <= 0.2
    assert stopping_satisfied(scalar_state(), res.s, 0.1)
    assert np.linalg.norm(res.s) > 0


@pytest.mark.parametrize("seed", range(6))
def test_descent_positive_decrease(seed):
    st = random_state(2, seed=seed, sigma=0.7)
    res = solve_descent(st, tau=0.2)
    assert res.model_decrease > 0.0
    # brute-force confirmation: the step really lowers the model
    assert model_value(st, res.s) < model_value(st, np.zeros(2))


@pytest.mark.parametrize("subsolver", ["secular", "descent"])
@pytest.mark.parametrize("seed", range(5))
def test_decrease_floor_under_eigen_floor(subsolver, seed):
    # m(0) - m(s) >= (a/2 - tau)||s||^2 for any step passing the stopping test
    tau = 0.15
    st = random_state(3, seed=40 + seed, sigma=1.2, eig_lo=1.0, eig_hi=3.0)
    a = 1.0  # eigenvalues were drawn at or above 1
    if subsolver == "secular":
        res = solve_secular(st)
    else:
        res = solve_descent(st, tau=tau)
    c = 0.5 * a - tau
    dec = model_decrease(st, res.s)
    assert dec >= c * np.linalg.norm(res.s) ** 2 - 1e-10 * (1 + abs(st.f_x))


@pytest.mark.parametrize("seed", range(4))
def test_decrease_includes_penalty_term(seed):
    # the sharper bound behind the floor keeps the penalty contribution:
    # m(0) - m(s) >= (a/2 - tau)||s||^2 + sigma (r-1)/r ||s||^r
    st = random_state(2, seed=60 + seed, sigma=2.0, r=3.5, eig_lo=1.0, eig_hi=2.5)
    res = solve_secular(st)
    sn = np.linalg.norm(res.s)
    sharper = 0.5 * 1.0 * sn ** 2 + st.sigma * (st.r - 1.0) / st.r * sn ** st.r
    assert res.model_decrease >= sharper - 1e-10 * (1 + abs(st.f_x))


def test_descent_rejects_tau_zero():
    with pytest.raises(ValueError, match="tau > 0"):
        solve_descent(scalar_state(), tau=0.0)


def test_descent_failure_carries_diagnostics():
    st = random_state(3, seed=77, sigma=1.0)
    with pytest.raises(SubsolverError) as exc:
        solve_descent(st, tau=1e-9, max_inner=3)
    assert exc.value.s is not None
    assert exc.value.residual is not None and exc.value.residual > 0
