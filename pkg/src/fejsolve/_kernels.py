"""Hot numeric kernels, numba-compiled when available.

Every kernel is written once as a plain numpy function and the public name is
bound to its ``@njit(cache=True)`` compilation unless numba is missing or the
environment variable ``FEJSOLVE_NO_NUMBA`` is set to a non-empty value other
than ``0``.  The uncompiled originals stay reachable through ``PY_IMPLS`` for
the equivalence tests and for ``benchmarks/bench_kernels.py``.

Kernels are self-contained (no calls between them) so that the pure-python
timings in the benchmark are not contaminated by compiled callees.
"""

import os

import numpy as np


def _numba_wanted() -> bool:
    flag = os.environ.get("FEJSOLVE_NO_NUMBA", "").strip()
    if flag not in ("", "0"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _numba_wanted()

if NUMBA_ENABLED:
    from numba import njit

    def _jit(func):
        return njit(cache=True)(func)
else:
    def _jit(func):
        return func


def _model_terms_py(g, Q, sigma, rpow, s):
    # step-dependent part of the regularized model:
    # g.s + 1/2 s.Qs + (sigma/r) ||s||^r   (the constant f(x_k) is added by callers)
    nrm = np.sqrt(s @ s)
    return g @ s + 0.5 * (s @ (Q @ s)) + (sigma / rpow) * nrm ** rpow


def _model_grad_py(g, Q, sigma, rpow, s):
    # gradient of the regularized model; rpow >= 3 makes the power term vanish
    # smoothly at s = 0 (exponent rpow-2 >= 1, so 0**(rpow-2) == 0)
    nrm = np.sqrt(s @ s)
    return g + Q @ s + (sigma * nrm ** (rpow - 2.0)) * s


def _secular_root_py(evals, g_rot, sigma, rpow, max_iter):
    """Root of ||(W+lam)^-1 g|| = (lam/sigma)^(1/(r-2)) over lam >= 0.

    ``evals`` are the (positive) eigenvalues of Q, ``g_rot`` the gradient in the
    eigenbasis, ``sigma > 0``, ``rpow >= 3``.  The left side is strictly
    decreasing and the right side strictly increasing from 0, so the root is
    unique.  Returns (lam, iterations).  Safeguarded Newton: any step leaving
    the current bracket falls back to bisection.
    """
    p = 1.0 / (rpow - 2.0)
    gnorm = np.sqrt(g_rot @ g_rot)

    # bracket: phi(0) > 0; double the upper end until the sign flips
    lo = 0.0
    hi = sigma * max(1.0, gnorm) ** (rpow - 2.0)
    for _ in range(200):
        w = g_rot / (evals + hi)
        if np.sqrt(w @ w) - (hi / sigma) ** p < 0.0:
            break
        lo = hi
        hi *= 2.0

    lam = 0.5 * (lo + hi)
    iters = 0
    for it in range(max_iter):
        iters = it + 1
        d = evals + lam
        w = g_rot / d
        nsq = w @ w
        dsq = (w * w / d).sum()
        nv = np.sqrt(nsq)
        rv = (lam / sigma) ** p
        phi = nv - rv
        if phi > 0.0:
            lo = lam
        else:
            hi = lam
        width = hi - lo
        if width <= 4.0 * 2.220446049250313e-16 * hi:
            break
        # phi'(lam) = -sum w^2/(w_i+lam) / ||w|| - (p/sigma) (lam/sigma)^(p-1)
        dphi = -dsq / nv
        if lam > 0.0:
            dphi -= (p / sigma) * (lam / sigma) ** (p - 1.0)
        step = -phi / dphi
        nxt = lam + step
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if nxt == lam:
            break
        lam = nxt
    return lam, iters


def _descent_inner_py(g, Q, sigma, rpow, tau, max_inner):
    """Backtracking gradient descent on the regularized model from s = 0.

    Stops at the first nonzero iterate with
    ||grad m(s)|| <= tau * ||s|| * min(||s||, 1).  The model value along the
    inner iterates is nonincreasing by construction (Armijo condition).
    Returns (s, iterations, status) with status 1 on success, 0 on failure
    (max_inner exhausted or the line search collapsed at float resolution).
    """
    n = g.shape[0]
    s = np.zeros(n)
    m = 0.0
    t = 1.0
    for it in range(max_inner):
        Qs = Q @ s
        snrm = np.sqrt(s @ s)
        grad = g + Qs + (sigma * snrm ** (rpow - 2.0)) * s
        gn = np.sqrt(grad @ grad)
        if it > 0 and gn <= tau * snrm * min(snrm, 1.0):
            return s, it, 1
        gsq = gn * gn
        ok = False
        s_new = s
        m_new = m
        for _ in range(80):
            s_new = s - t * grad
            nrm = np.sqrt(s_new @ s_new)
            m_new = g @ s_new + 0.5 * (s_new @ (Q @ s_new)) \
                + (sigma / rpow) * nrm ** rpow
            if m_new <= m - 1.0e-4 * t * gsq:
                ok = True
                break
            t *= 0.5
        if not ok:
            return s, it, 0
        s = s_new
        m = m_new
        t = min(t * 2.0, 1.0e12)
    return s, max_inner, 0


model_terms = _jit(_model_terms_py)
model_grad = _jit(_model_grad_py)
secular_root = _jit(_secular_root_py)
descent_inner = _jit(_descent_inner_py)

PY_IMPLS = {
    "model_terms": _model_terms_py,
    "model_grad": _model_grad_py,
    "secular_root": _secular_root_py,
    "descent_inner": _descent_inner_py,
}

JIT_IMPLS = {
    "model_terms": model_terms,
    "model_grad": model_grad,
    "secular_root": secular_root,
    "descent_inner": descent_inner,
}
