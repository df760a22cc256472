"""Trial-step computation for the regularized model.

Two routes are provided:

* :func:`solve_secular` (default) - exact minimization through the
  eigendecomposition of Q.  The minimizer satisfies (Q + lam I) s = -g with
  the scalar multiplier lam >= 0 solving ||(Q+lam I)^{-1} g|| = (lam/sigma)^{1/(r-2)};
  a safeguarded bisection/Newton iteration finds it.
* :func:`solve_descent` - backtracking gradient descent on the model itself,
  stopping at the inexact first-order test.  This is the route for genuinely
  inexact steps (tau > 0) and the fallback when factorizing Q is undesirable.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import ModelState, model_decrease, model_gradient


class SubsolverError(RuntimeError):
    """Trial-step computation failed; carries the last iterate and residual."""

    def __init__(self, message, s=None, residual=None):
        super().__init__(message)
        self.s = s
        self.residual = residual


@dataclass(frozen=True)
class SubsolveResult:
    s: np.ndarray
    grad_norm: float          # ||grad m(s)|| at the returned step
    model_decrease: float     # m(0) - m(s)
    iterations: int
    method: str               # secular | descent | zero


def _result(st: ModelState, s, iterations, method) -> SubsolveResult:
    return SubsolveResult(
        s=s,
        grad_norm=float(np.linalg.norm(model_gradient(st, s))),
        model_decrease=float(model_decrease(st, s)),
        iterations=int(iterations),
        method=method,
    )


def solve_secular(st: ModelState, tol: float = 1e-10, evals=None, evecs=None) -> SubsolveResult:
    """Global minimizer of the model, up to ~machine-precision root solves.

    Requires Q positive definite.  For sigma = 0 the step is -Q^{-1} g; for
    sigma > 0 the multiplier lam is bracketed from lam_lo = 0 with lam_hi
    doubled from sigma * max(1, ||g||)^{r-2} until the sign flips, then pinned
    by safeguarded Newton/bisection.  The returned step satisfies
    ||grad m(s)|| <= tol * max(1, ||g||); anything worse raises
    :class:`SubsolverError`.

    ``evals``/``evecs`` take a precomputed eigendecomposition of Q (the driver
    shares the metric stream's factorization); both or neither must be given.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if (evals is None) != (evecs is None):
        raise ValueError("pass both evals and evecs, or neither")
    if evals is None:
        evals, evecs = np.linalg.eigh(st.Q)
    evals = np.asarray(evals, dtype=float)
    if evals[0] <= 0.0:
        raise ValueError(
            f"secular subsolver needs Q positive definite; eigmin = {evals[0]:g}"
        )
    gnorm = float(np.linalg.norm(st.g))
    if gnorm == 0.0:
        return _result(st, np.zeros(st.dim), 0, "zero")

    g_rot = evecs.T @ st.g
    if st.sigma == 0.0:
        s = -(evecs @ (g_rot / evals))
        iters = 0
    else:
        lam, iters = _kernels.secular_root(evals, g_rot, st.sigma, st.r, 200)
        s = -(evecs @ (g_rot / (evals + lam)))
    res = _result(st, s, iters, "secular")
    if res.grad_norm > tol * max(1.0, gnorm):
        raise SubsolverError(
            f"secular step residual {res.grad_norm:g} exceeds tol*max(1,||g||)="
            f"{tol * max(1.0, gnorm):g}",
            s=s, residual=res.grad_norm,
        )
    return res


def solve_descent(st: ModelState, tau: float, max_inner: int = 20000) -> SubsolveResult:
    """Inexact step via gradient descent with backtracking on the model.

    tau must be positive: tau = 0 demands exact stationarity, which is the
    secular route's job.  Raises :class:`SubsolverError` when max_inner is
    exhausted before the stopping test holds.
    """
    if tau <= 0:
        raise ValueError("solve_descent requires tau > 0; use solve_secular for tau = 0")
    if np.linalg.norm(st.g) == 0.0:
        return _result(st, np.zeros(st.dim), 0, "zero")
    s, iters, status = _kernels.descent_inner(
        st.g, st.Q, st.sigma, st.r, float(tau), int(max_inner)
    )
    if status != 1:
        resid = float(np.linalg.norm(model_gradient(st, s)))
        raise SubsolverError(
            f"descent subsolver failed after {iters} inner iterations "
            f"(residual {resid:g})",
            s=s, residual=resid,
        )
    return _result(st, s, iters, "descent")
