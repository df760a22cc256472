import numpy as np
import pytest

from fejsolve import _kernels


def _inputs(dim, seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=dim)
    V, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    evals = rng.uniform(0.3, 4.0, dim)
    Q = (V * evals) @ V.T
    Q = 0.5 * (Q + Q.T)
    s = rng.normal(size=dim)
    return g, Q, np.sort(evals), V, s


@pytest.mark.skipif(not _kernels.NUMBA_ENABLED, reason="numba path inactive")
@pytest.mark.parametrize("dim", [1, 3, 12])
@pytest.mark.parametrize("rpow", [3.0, 3.5, 4.0])
def test_jitted_matches_python(dim, rpow):
    g, Q, evals, V, s = _inputs(dim, seed=dim * 7 + int(rpow * 2))
    sigma = 1.3
    for name, args in [
        ("model_terms", (g, Q, sigma, rpow, s)),
        ("model_grad", (g, Q, sigma, rpow, s)),
        ("secular_root", (evals, V.T @ g, sigma, rpow, 200)),
        ("descent_inner", (g, Q, sigma, rpow, 0.05, 20000)),
    ]:
        out_py = _kernels.PY_IMPLS[name](*args)
        out_jit = _kernels.JIT_IMPLS[name](*args)
        py_flat = np.atleast_1d(np.asarray(out_py, dtype=object)).ravel()
        jit_flat = np.atleast_1d(np.asarray(out_jit, dtype=object)).ravel()
        for a, b in zip(py_flat, jit_flat):
            np.testing.assert_allclose(np.asarray(a, dtype=float),
                                       np.asarray(b, dtype=float),
                                       rtol=1e-13, atol=1e-13,
                                       err_msg=f"kernel {name}")


def test_model_terms_zero_step():
    g, Q, *_ , s = _inputs(3, seed=1)
    assert _kernels.model_terms(g, Q, 2.0, 3.0, np.zeros(3)) == 0.0
    np.testing.assert_array_equal(
        _kernels.model_grad(g, Q, 2.0, 3.0, np.zeros(3)), g)


def test_model_grad_noninteger_power():
    g = np.array([0.5, -1.0])
    Q = np.eye(2)
    s = np.array([0.2, 0.1])
    out = _kernels.model_grad(g, Q, 1.5, 3.7, s)
    nrm = np.linalg.norm(s)
    expected = g + s + 1.5 * nrm ** 1.7 * s
    np.testing.assert_allclose(out, expected, rtol=1e-14)


def test_secular_root_solves_equation():
    g, Q, evals, V, _ = _inputs(5, seed=3)
    sigma, rpow = 2.0, 3.5
    g_rot = V.T @ g
    lam, iters = _kernels.secular_root(evals, g_rot, sigma, rpow, 200)
    snorm = np.linalg.norm(g_rot / (evals + lam))
    assert abs(snorm - (lam / sigma) ** (1.0 / (rpow - 2.0))) <= 1e-12 * (1 + snorm)
    assert 0 < iters <= 200


def test_descent_inner_reports_failure_on_tiny_budget():
    g, Q, *_ = _inputs(4, seed=5)
    s, iters, status = _kernels.descent_inner(g, Q, 1.0, 3.0, 1e-8, 2)
    assert status == 0
    assert iters <= 2
