"""Generation and validation of the variable-metric matrix sequence {Q_k}.

Admissible sequences keep every eigenvalue at or above a floor ``a`` and may
grow only by the summable factors (1 + psi_k), i.e. Q_{k+1} <= (1+psi_k) Q_k in
the semidefinite order.  psi_k = psi0/(k+1)^2, so the slack is summable by
construction (sum = psi0 * pi^2/6).

All three shipped policies keep the eigenvectors of Q0, so a
:class:`MetricStream` factors Q0 once and updates eigenvalues in closed form;
the subsolver reuses that factorization.
"""

from dataclasses import dataclass

import numpy as np

#: per-step blend toward the floor used by the shrink_to_floor policy
SHRINK_BLEND = 0.5

POLICY_KINDS = ("constant", "inflated", "shrink_to_floor")


@dataclass(frozen=True)
class MetricPolicy:
    kind: str
    Q0: np.ndarray
    a: float
    psi0: float = 0.0

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"kind must be one of {POLICY_KINDS}, got {self.kind!r}")
        Q0 = np.asarray(self.Q0, dtype=float)
        object.__setattr__(self, "Q0", Q0)
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "psi0", float(self.psi0))
        if self.a <= 0:
            raise ValueError("eigenvalue floor a must be positive")
        if self.psi0 < 0:
            raise ValueError("psi0 must be nonnegative")
        if Q0.ndim != 2 or Q0.shape[0] != Q0.shape[1]:
            raise ValueError("Q0 must be a square matrix")
        if np.linalg.norm(Q0 - Q0.T) > 1e-12 * max(np.linalg.norm(Q0), 1.0):
            raise ValueError("Q0 must be symmetric")
        lo = float(np.linalg.eigvalsh(Q0)[0])
        if lo < self.a * (1.0 - 1e-12):
            raise ValueError(
                f"eigenvalue floor violated: eigmin(Q0)={lo:g} < a={self.a:g}"
            )

    @property
    def dim(self) -> int:
        return self.Q0.shape[0]

    def psi(self, k: int) -> float:
        """Slack factor used in the ordering Q_{k+1} <= (1+psi_k) Q_k."""
        return self.psi0 / float(k + 1) ** 2

    def psi_sequence(self, count: int) -> np.ndarray:
        return np.array([self.psi(k) for k in range(count)])


def next_matrix(pol: MetricPolicy, k: int, prev=None) -> np.ndarray:
    """Q_k given Q_{k-1} (``prev`` is None exactly for k = 0).

    constant: Q0 forever.  inflated: (1+psi_{k-1}) Q_{k-1}, the largest growth
    the ordering allows.  shrink_to_floor: blend toward a*I, admissible for any
    psi since a*I <= Q_{k-1} implies Q_k <= Q_{k-1}.
    """
    if k == 0:
        if prev is not None:
            raise ValueError("prev must be None for k = 0")
        return pol.Q0
    if prev is None:
        raise ValueError("prev is required for k >= 1")
    if pol.kind == "constant":
        return prev
    if pol.kind == "inflated":
        return (1.0 + pol.psi(k - 1)) * prev
    eye = np.eye(pol.dim)
    return (1.0 - SHRINK_BLEND) * prev + SHRINK_BLEND * pol.a * eye


def iter_matrices(pol: MetricPolicy, count: int):
    """Yield Q_0, ..., Q_{count-1} exactly as a solver run generates them."""
    prev = None
    for k in range(count):
        prev = next_matrix(pol, k, prev)
        yield prev


class MetricStream:
    """Sequential generator of (Q_k, eigenvalues, eigenvectors).

    Q0 is factored once; the shipped policies only rescale or blend the
    spectrum, so eigenvectors are constant along the run and eigenvalue
    updates mirror the matrix updates entrywise.
    """

    def __init__(self, pol: MetricPolicy):
        self.policy = pol
        evals, evecs = np.linalg.eigh(pol.Q0)
        self._evals0 = evals
        self.evecs = evecs
        self._k = 0
        self._Q = None
        self._evals = None

    def advance(self):
        """Return (Q_k, evals_k, evecs) and move to k+1."""
        pol = self.policy
        k = self._k
        self._Q = next_matrix(pol, k, self._Q)
        if k == 0:
            self._evals = self._evals0
        elif pol.kind == "constant":
            pass
        elif pol.kind == "inflated":
            self._evals = (1.0 + pol.psi(k - 1)) * self._evals
        else:
            self._evals = (1.0 - SHRINK_BLEND) * self._evals + SHRINK_BLEND * pol.a
        self._k += 1
        return self._Q, self._evals, self.evecs


def validate_sequence(Qs, a: float, psi, tol: float = 1e-10) -> dict:
    """Report-only check of an observed matrix sequence.

    Per k: eigenvalue floor eigmin(Q_k) >= a - tol and semidefinite ordering
    eigmin((1+psi_k) Q_k - Q_{k+1}) >= -tol.  Also reports the observed bound
    b = max_k ||Q_k|| and checks it against zeta * ||Q_0|| with
    zeta = prod(1+psi_i) over the observed range.
    """
    Qs = [np.asarray(Q, dtype=float) for Q in Qs]
    if not Qs:
        return {"ok": True, "count": 0, "b": 0.0, "zeta": 1.0,
                "floor_ok": True, "ordering_ok": True, "b_bound_ok": True,
                "floor_margins": [], "ordering_margins": []}
    n = Qs[0].shape[0]
    for Q in Qs:
        if Q.shape != (n, n):
            raise ValueError("matrices must share one dimension")
    psi = np.asarray(psi, dtype=float)
    floor_margins = []
    ordering_margins = []
    norms = []
    for k, Q in enumerate(Qs):
        evals = np.linalg.eigvalsh(Q)
        floor_margins.append(float(evals[0] - a))
        norms.append(float(np.abs(evals).max()))
        if k + 1 < len(Qs):
            gap = (1.0 + psi[k]) * Q - Qs[k + 1]
            ordering_margins.append(float(np.linalg.eigvalsh(gap)[0]))
    b = max(norms)
    zeta = float(np.prod(1.0 + psi[: max(len(Qs) - 1, 0)]))
    q0_norm = norms[0]
    floor_ok = all(m >= -tol for m in floor_margins)
    ordering_ok = all(m >= -tol for m in ordering_margins)
    b_bound_ok = b <= zeta * q0_norm + tol
    return {
        "ok": floor_ok and ordering_ok and b_bound_ok,
        "count": len(Qs),
        "b": b,
        "zeta": zeta,
        "floor_ok": floor_ok,
        "ordering_ok": ordering_ok,
        "b_bound_ok": b_bound_ok,
        "floor_margins": floor_margins,
        "ordering_margins": ordering_margins,
    }
