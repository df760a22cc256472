"""The regularized local model and its elementary queries.

At a point x with objective value f_x and gradient g, the model of a trial
step s is

    m(s) = f_x + g.s + 1/2 s.Q s + (sigma/r) ||s||^r

with a symmetric matrix Q, penalty weight sigma >= 0 and power r >= 3.
The quadratic part q(s) drops the penalty term.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class ModelState:
    """One iteration's frozen model data (x, f(x), grad f(x), Q, sigma, r)."""

    x: np.ndarray
    f_x: float
    g: np.ndarray
    Q: np.ndarray
    sigma: float
    r: float

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        g = np.asarray(self.g, dtype=float)
        Q = np.asarray(self.Q, dtype=float)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "f_x", float(self.f_x))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "r", float(self.r))
        n = x.shape[0]
        if g.shape != (n,) or Q.shape != (n, n):
            raise ValueError(
                f"dimension mismatch: x has {n} entries, g {g.shape}, Q {Q.shape}"
            )
        qnorm = np.linalg.norm(Q)
        if np.linalg.norm(Q - Q.T) > 1e-12 * max(qnorm, 1.0):
            raise ValueError("Q must be symmetric")
        if self.sigma < 0.0:
            raise ValueError("sigma must be nonnegative")
        if self.r < 3.0:
            raise ValueError("regularization power r must be >= 3")

    @property
    def dim(self) -> int:
        return self.x.shape[0]


def _check_step(st: ModelState, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.shape != (st.dim,):
        raise ValueError(f"dimension mismatch: step has shape {s.shape}, expected ({st.dim},)")
    return s


def model_value(st: ModelState, s) -> float:
    """m(s); raises on non-finite results."""
    s = _check_step(st, s)
    val = st.f_x + float(_kernels.model_terms(st.g, st.Q, st.sigma, st.r, s))
    if not np.isfinite(val):
        raise FloatingPointError(f"model value is not finite at ||s||={np.linalg.norm(s)}")
    return val


def quadratic_value(st: ModelState, s) -> float:
    """q(s) = f_x + g.s + 1/2 s.Qs, i.e. the model without the penalty term."""
    s = _check_step(st, s)
    return st.f_x + float(_kernels.model_terms(st.g, st.Q, 0.0, st.r, s))


def model_gradient(st: ModelState, s) -> np.ndarray:
    """grad m(s) = g + Q s + sigma ||s||^(r-2) s."""
    s = _check_step(st, s)
    return _kernels.model_grad(st.g, st.Q, st.sigma, st.r, s)


def model_decrease(st: ModelState, s) -> float:
    """m(0) - m(s); positive when the step improves the model."""
    s = _check_step(st, s)
    return -float(_kernels.model_terms(st.g, st.Q, st.sigma, st.r, s))


def stopping_satisfied(st: ModelState, s, tau: float) -> bool:
    """Inexact first-order test ||grad m(s)|| <= tau ||s|| min(||s||, 1)."""
    s = _check_step(st, s)
    gm = np.linalg.norm(model_gradient(st, s))
    sn = np.linalg.norm(s)
    return bool(gm <= tau * sn * min(sn, 1.0))
