"""Catalog of differentiable test objectives with analytic gradients.

Every problem is a :class:`ProblemInstance` bundling the evaluators with
metadata (dimension, convexity class, known minimizer / optimal value /
Lipschitz constant of the gradient where available).  Problems are addressable
by name through :func:`get_problem`; :func:`list_problems` enumerates the
catalog.  A central-difference verifier :func:`check_gradient` is included.
"""

import csv
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Optional

import numpy as np

# fixed seed for all randomized catalog constructions and probe grids so that
# invariant suites are reproducible
PROBE_SEED = 20240614


@dataclass(frozen=True)
class ProblemInstance:
    name: str
    dim: int
    f: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    convexity_class: str = "unknown"  # convex | pseudoconvex | unknown
    minimizer: Optional[np.ndarray] = None
    f_star: Optional[float] = None
    lipschitz_L: Optional[float] = None
    test_box: tuple = (-3.0, 3.0)
    description: str = ""

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if self.convexity_class not in ("convex", "pseudoconvex", "unknown"):
            raise ValueError(f"unknown convexity class {self.convexity_class!r}")
        if self.minimizer is not None:
            object.__setattr__(self, "minimizer", np.asarray(self.minimizer, dtype=float))


def _check_point(p: ProblemInstance, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (p.dim,):
        raise ValueError(
            f"dimension mismatch: {p.name} expects shape ({p.dim},), got {x.shape}"
        )
    return x


def eval_f(p: ProblemInstance, x) -> float:
    """Objective value f(x); pure."""
    return float(p.f(_check_point(p, x)))


def eval_grad(p: ProblemInstance, x) -> np.ndarray:
    """Gradient grad f(x); pure."""
    return np.asarray(p.grad(_check_point(p, x)), dtype=float)


def check_gradient(p: ProblemInstance, x, h: float) -> float:
    """Max relative gap between the analytic gradient and central differences.

    Central differences with absolute step ``h`` per coordinate; the per-entry
    gap is scaled by 1 + |g_i|.  Raises if f evaluates non-finite near x.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    x = _check_point(p, x)
    g = eval_grad(p, x)
    worst = 0.0
    for i in range(p.dim):
        e = np.zeros(p.dim)
        e[i] = h
        fp = eval_f(p, x + e)
        fm = eval_f(p, x - e)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError(f"non-finite objective near x for {p.name}")
        fd = (fp - fm) / (2.0 * h)
        worst = max(worst, abs(fd - g[i]) / (1.0 + abs(g[i])))
    return worst


# ---------------------------------------------------------------------------
# builders


def make_quadratic(name, hess, x_star, description="") -> ProblemInstance:
    """f(x) = 1/2 (x-x*)' H (x-x*) for symmetric positive definite H."""
    hess = np.asarray(hess, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    n = x_star.shape[0]
    evals = np.linalg.eigvalsh(hess)
    if evals[0] <= 0:
        raise ValueError("quadratic Hessian must be positive definite")

    def f(x):
        d = x - x_star
        return 0.5 * float(d @ (hess @ d))

    def grad(x):
        return hess @ (x - x_star)

    return ProblemInstance(
        name=name, dim=n, f=f, grad=grad, convexity_class="convex",
        minimizer=x_star, f_star=0.0, lipschitz_L=float(evals[-1]),
        description=description or f"quadratic, condition number {evals[-1] / evals[0]:.3g}",
    )


def make_diag_quadratic(name, eigenvalues, x_star=None) -> ProblemInstance:
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    n = eigenvalues.shape[0]
    if x_star is None:
        x_star = np.zeros(n)
    return make_quadratic(name, np.diag(eigenvalues), x_star,
                          description=f"diagonal quadratic, eigenvalues in "
                                      f"[{eigenvalues.min():g}, {eigenvalues.max():g}]")


def make_dense_quadratic(name, dim, cond, seed) -> ProblemInstance:
    """Rotated quadratic with log-spaced spectrum [1, cond] and random center."""
    rng = np.random.default_rng(seed)
    V, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    evals = np.logspace(0.0, np.log10(cond), dim)
    H = (V * evals) @ V.T
    H = 0.5 * (H + H.T)
    x_star = rng.uniform(-1.0, 1.0, dim)
    return make_quadratic(name, H, x_star,
                          description=f"dense quadratic, condition number {cond:g}")


def make_least_squares(name, dim, n_rows, seed) -> ProblemInstance:
    """f(x) = 1/2 ||Ax - b||^2 with a consistent system b = A x*."""
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n_rows, dim))
    x_star = rng.uniform(-1.0, 1.0, dim)
    b = A @ x_star
    AtA = A.T @ A
    L = float(np.linalg.eigvalsh(AtA)[-1])

    def f(x):
        r = A @ x - b
        return 0.5 * float(r @ r)

    def grad(x):
        return A.T @ (A @ x - b)

    return ProblemInstance(
        name=name, dim=dim, f=f, grad=grad, convexity_class="convex",
        minimizer=x_star, f_star=0.0, lipschitz_L=L,
        description=f"linear least squares, {n_rows}x{dim}",
    )


def make_log_sum_exp(name, dim, scale=2.0) -> ProblemInstance:
    """f(x) = log sum_i (exp(c x_i) + exp(-c x_i)); minimizer 0, f* = log(2n).

    The exponent rows come in +/- pairs, so the gradient vanishes at the
    origin and the Hessian is bounded by c^2 I everywhere (L = c^2).
    """
    c = float(scale)

    def f(x):
        z = c * x
        mx = np.abs(z).max() if x.shape[0] else 0.0
        return float(mx + np.log(np.sum(np.exp(z - mx) + np.exp(-z - mx))))

    def grad(x):
        z = c * x
        mx = np.abs(z).max() if x.shape[0] else 0.0
        ep = np.exp(z - mx)
        em = np.exp(-z - mx)
        return c * (ep - em) / np.sum(ep + em)

    return ProblemInstance(
        name=name, dim=dim, f=f, grad=grad, convexity_class="convex",
        minimizer=np.zeros(dim), f_star=float(np.log(2 * dim)), lipschitz_L=c * c,
        test_box=(-2.0, 2.0),
        description=f"symmetric log-sum-exp, scale {c:g}",
    )


def _load_logistic_data():
    with resources.files("fejsolve.data").joinpath("logistic_tiny.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    X = np.array([[float(r["f1"]), float(r["f2"]), float(r["f3"])] for r in rows])
    y = np.array([float(r["label"]) for r in rows])
    # append an intercept column; weights live in R^4
    Z = np.hstack([X, np.ones((X.shape[0], 1))])
    return Z, y


def make_logistic(name, reg=0.1) -> ProblemInstance:
    """L2-regularized logistic loss on the tiny synthetic dataset shipped in-repo."""
    Z, y = _load_logistic_data()
    m, n = Z.shape
    lam = float(reg)
    # logistic curvature is at most 1/4 per sample
    L = lam + float(np.linalg.eigvalsh(Z.T @ Z)[-1]) / (4.0 * m)

    def f(w):
        margins = y * (Z @ w)
        return float(np.mean(np.logaddexp(0.0, -margins)) + 0.5 * lam * (w @ w))

    def grad(w):
        margins = y * (Z @ w)
        sig = 1.0 / (1.0 + np.exp(margins))  # sigmoid(-margins)
        return -(Z.T @ (y * sig)) / m + lam * w

    return ProblemInstance(
        name=name, dim=n, f=f, grad=grad, convexity_class="convex",
        minimizer=None, f_star=None, lipschitz_L=L, test_box=(-2.0, 2.0),
        description=f"regularized logistic loss, {m} samples, lambda={lam:g}",
    )


def _ratio_hessian_norm_bound(inflate=1.1) -> float:
    """Numeric grid bound on ||H(x)|| for the ratio objective, inflated 10%.

    The Hessian of ||x||^2/(1+||x||^2) depends on x only through t = ||x||^2:
    the radial eigenvalue is 2(1-3t)/(1+t)^3 and the tangential one
    2/(1+t)^2, so a dense t-grid bounds the operator norm globally (both
    branches decay for large t).
    """
    t = np.linspace(0.0, 400.0, 400001)
    radial = np.abs(2.0 * (1.0 - 3.0 * t) / (1.0 + t) ** 3)
    tangential = 2.0 / (1.0 + t) ** 2
    return float(inflate * max(radial.max(), tangential.max()))


def make_ratio(name, dim) -> ProblemInstance:
    """Pseudoconvex (non-convex) f(x) = ||x||^2 / (1 + ||x||^2), minimizer 0."""

    def f(x):
        t = float(x @ x)
        return t / (1.0 + t)

    def grad(x):
        t = float(x @ x)
        return 2.0 * x / (1.0 + t) ** 2

    return ProblemInstance(
        name=name, dim=dim, f=f, grad=grad, convexity_class="pseudoconvex",
        minimizer=np.zeros(dim), f_star=0.0,
        lipschitz_L=_ratio_hessian_norm_bound(),  # derived numeric bound, not exact
        description="bounded ratio of squared norm, pseudoconvex but not convex",
    )


# ---------------------------------------------------------------------------
# registry

def _build_catalog() -> dict:
    cat = {}

    def add(p):
        cat[p.name] = p

    add(make_diag_quadratic("quad-d2", [1.0, 4.0]))
    add(make_diag_quadratic("quad-d10-k100", np.logspace(0.0, 2.0, 10)))
    add(make_dense_quadratic("quad-dense-d8-k10", dim=8, cond=10.0, seed=PROBE_SEED))
    add(make_least_squares("lstsq-d6", dim=6, n_rows=12, seed=PROBE_SEED + 1))
    add(make_log_sum_exp("logsumexp-d2", dim=2))
    add(make_log_sum_exp("logsumexp-d5", dim=5))
    add(make_logistic("logistic-d4"))
    add(make_ratio("ratio-d2", dim=2))
    add(make_ratio("ratio-d5", dim=5))
    return cat


_CATALOG = None


def catalog() -> dict:
    global _CATALOG
    if _CATALOG is None:
        _CATALOG = _build_catalog()
    return _CATALOG


def get_problem(name: str) -> ProblemInstance:
    cat = catalog()
    if name not in cat:
        known = ", ".join(sorted(cat))
        raise KeyError(f"unknown problem {name!r}; known problems: {known}")
    return cat[name]


def list_problems() -> list:
    return sorted(catalog())
