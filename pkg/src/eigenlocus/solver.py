"""Two-coordinate ascent solver for the Wolfe dual of the squared-slack linear SVM.

The problem is

    maximize    1'psi - psi' Q psi / 2
    subject to  psi'y = 0,  psi >= 0

with ``Q = eps*I + (D_y X)(D_y X)^T`` and ``eps = 1/C``.  Because the slack
penalty is quadratic there is no upper bound on the multipliers, and with
``eps > 0`` the objective is strictly concave so the optimum is unique.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import as_labels, gram_matrix

log = logging.getLogger(__name__)

# hard-margin requests (C = inf) are realised with this diagonal floor
EPS_FLOOR = 1e-8
KKT_TOL = 1e-8


@dataclass(frozen=True)
class DualProblem:
    Q: np.ndarray
    y: np.ndarray
    C: float
    eps: float

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        y = as_labels(self.y)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError(f"Q must be square, got shape {Q.shape}")
        if Q.shape[0] != y.size:
            raise ValueError(f"Q is {Q.shape[0]}x{Q.shape[0]} but y has {y.size} labels")
        if not (np.any(y > 0) and np.any(y < 0)):
            raise ValueError("labels must contain both +1 and -1")
        if not self.C > 0:
            raise ValueError("C must be > 0")
        if self.eps < 0:
            raise ValueError("eps must be >= 0")
        if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(Q))):
            raise ValueError("Q is not symmetric")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_data(cls, X, y, C: float, eps: float | None = None) -> "DualProblem":
        """Build the problem for slack penalty ``C`` (``eps`` defaults to ``1/C``)."""
        if not C > 0:
            raise ValueError("C must be > 0")
        if eps is None:
            eps = 1.0 / C
        eps = max(float(eps), EPS_FLOOR)
        return cls(gram_matrix(X, y, eps), y, float(C), eps)

    @property
    def n(self) -> int:
        return self.y.size

    @classmethod
    def unregularized(cls, X, y) -> "DualProblem":
        """Problem with the bare Gram matrix (``eps = 0``), singular when N > d."""
        return cls(gram_matrix(X, y, 0.0), y, math.inf, 0.0)

    @property
    def penalty(self) -> float:
        """Slack penalty implied by the diagonal shift, ``1/eps``."""
        return 1.0 / self.eps if self.eps > 0 else math.inf

    def check_positive_definite(self) -> None:
        if self.eps <= 0:
            raise ValueError("eps must be > 0 for a positive definite Q (eps = 1/C)")
        try:
            np.linalg.cholesky(self.Q)
        except np.linalg.LinAlgError:
            raise ValueError(
                "Q is not positive definite; increase eps (eps = 1/C > 0)"
            ) from None


@dataclass(frozen=True)
class SolverOptions:
    # Stop early once the duality gap is below this; None disables the gap test.
    # A gap of 1e-8*|objective| still leaves ~1e-4 per-point KKT error, so the
    # default relies on the KKT violation alone.
    gap_tol: float | None = None
    kkt_tol: float = KKT_TOL
    max_iter: int = 1_000_000
    equality_tol: float | None = None  # default: 1e-10 * N
    check_every: int = 0  # iterations between duality-gap checks; 0 -> N

    def resolved_equality_tol(self, n: int) -> float:
        return self.equality_tol if self.equality_tol is not None else 1e-10 * n


@dataclass
class DualSolution:
    psi: np.ndarray
    iterations: int
    duality_gap: float
    objective: float
    converged: bool
    kkt_violation: float = math.inf
    offset: float = 0.0  # equality multiplier; equals tau0 at the optimum
    history: list[float] = field(default_factory=list, repr=False)


def objective_and_gradient(problem: DualProblem, psi) -> tuple[float, np.ndarray]:
    """Dual objective ``1'psi - psi'Q psi/2`` and its gradient ``1 - Q psi``."""
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (problem.n,):
        raise ValueError(f"psi must have length {problem.n}")
    Qpsi = problem.Q @ psi
    return float(psi.sum() - 0.5 * psi @ Qpsi), 1.0 - Qpsi


def _best_offset(margins: np.ndarray, y: np.ndarray) -> float:
    """Minimise ``sum(max(0, 1 - y_i (m_i + b))^2)`` over the scalar ``b``.

    The objective is convex and piecewise quadratic with breakpoints at
    ``b = y_i - m_i``; its derivative is nondecreasing, so the minimiser is
    found by locating the sign change between sorted breakpoints.
    """
    breaks = np.sort(y - margins)

    def deriv(b: float) -> tuple[float, float, float]:
        r = 1.0 - y * (margins + b)
        act = r > 0
        # d/db = -2 sum y_i r_i over active; returns slope pieces for a linear solve
        s0 = -2.0 * float(np.sum(y[act] * (1.0 - y[act] * margins[act])))
        s1 = 2.0 * float(np.count_nonzero(act))
        return s0 + s1 * b, s0, s1

    lo, hi = 0, breaks.size - 1
    if deriv(breaks[lo])[0] >= 0:
        candidate_interval = (-math.inf, breaks[lo])
    elif deriv(breaks[hi])[0] <= 0:
        candidate_interval = (breaks[hi], math.inf)
    else:
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if deriv(breaks[mid])[0] < 0:
                lo = mid
            else:
                hi = mid
        candidate_interval = (breaks[lo], breaks[hi])
    a, b = candidate_interval
    probe = a + 1.0 if b == math.inf else (b - 1.0 if a == -math.inf else 0.5 * (a + b))
    _, s0, s1 = deriv(probe)
    if s1 == 0.0:
        return probe
    return min(max(-s0 / s1, a), b)


def primal_objective(problem: DualProblem, psi) -> float:
    """Primal value of the feasible point built from ``psi``.

    The weight vector is the one ``psi`` induces; the offset and slacks are
    then chosen optimally, so the value bounds the primal optimum from above.
    Everything is computed from ``Q`` since ``x_i'tau = y_i ((Q - eps I) psi)_i``.
    """
    psi = np.asarray(psi, dtype=float)
    y = problem.y
    Kpsi = problem.Q @ psi - problem.eps * psi
    tau_sq = float(psi @ Kpsi)
    margins = y * Kpsi
    b = _best_offset(margins, y)
    xi = np.maximum(0.0, 1.0 - y * (margins + b))
    slack = float(xi @ xi)
    if math.isinf(problem.penalty):
        return 0.5 * tau_sq if slack == 0.0 else math.inf
    return 0.5 * tau_sq + 0.5 * problem.penalty * slack


def duality_gap(problem: DualProblem, psi, equality_tol: float | None = None) -> float:
    """Primal value of the feasible reconstruction minus the dual objective."""
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (problem.n,):
        raise ValueError(f"psi must have length {problem.n}")
    tol = equality_tol if equality_tol is not None else 1e-10 * problem.n
    if np.any(psi < 0):
        raise ValueError("psi must be nonnegative")
    if abs(float(psi @ problem.y)) > tol * max(1.0, float(psi.sum())):
        raise ValueError("psi violates psi'y = 0")
    dual, _ = objective_and_gradient(problem, psi)
    return primal_objective(problem, psi) - dual


def _violation(psi, G, y):
    """Maximal-violating-pair bounds for the minimisation form (``G = Q psi - 1``).

    Returns ``(m, M)``; ``m - M`` is the KKT violation and at the optimum
    both equal the decision offset.
    """
    v = -y * G
    has = psi > 0
    return float(np.max(v[(y > 0) | has])), float(np.min(v[(y < 0) | has]))


def solve_dual(problem: DualProblem, opts: SolverOptions | None = None,
               psi0=None, track_history: bool = False,
               allow_singular: bool = False, warn: bool = True) -> DualSolution:
    """Maximise the Wolfe dual by maximal-violating-pair coordinate ascent.

    Each step moves ``psi_i += y_i*d, psi_j -= y_j*d`` which preserves
    ``psi'y``; ``i`` is the maximal KKT violator and ``j`` is picked by
    second-order (largest guaranteed ascent) selection.  The 1-D step is
    exact and clipped at ``psi >= 0``, so the objective never decreases.

    ``allow_singular`` skips the positive-definiteness check; the dual may
    then be unbounded and the run ends at ``max_iter`` with ``converged``
    false.  ``warn=False`` silences the non-convergence warning for runs
    where that outcome is expected.
    """
    opts = opts or SolverOptions()
    if not allow_singular:
        problem.check_positive_definite()
    Q, y = problem.Q, problem.y
    # Q and psi'y = 0 are unchanged by negating every label; fixing the sign of
    # y[0] makes the iterates, and so psi, identical for both labelings
    sign = -1.0 if y[0] < 0 else 1.0
    y = sign * y
    n = problem.n
    diag = np.diag(Q).copy()
    eq_tol = opts.resolved_equality_tol(n)
    check_every = opts.check_every or max(n, 10)

    if psi0 is None:
        psi = np.zeros(n)
    else:
        psi = np.array(psi0, dtype=float)
        if psi.shape != (n,) or np.any(psi < 0) or abs(psi @ y) > eq_tol:
            raise ValueError("psi0 must be feasible")
    G = Q @ psi - 1.0
    pos = y > 0
    up = pos | (psi > 0)
    low = ~pos | (psi > 0)
    history = [float(psi.sum() - 0.5 * psi @ (G + 1.0))] if track_history else []
    converged = False

    it = 0
    while it < opts.max_iter:
        if it and it % check_every == 0:
            G = Q @ psi - 1.0  # refresh accumulated rounding
            if opts.gap_tol is not None and duality_gap(problem, psi, equality_tol=np.inf) <= opts.gap_tol:
                converged = True
                break

        v = -y * G
        vu = np.where(up, v, -np.inf)
        i = int(np.argmax(vu))
        m = vu[i]
        b = m - v
        cand = low & (b > 0)
        if not cand.any() or m - np.min(v[low]) <= opts.kkt_tol:
            converged = True
            break
        # second-order choice of j: largest guaranteed decrease b^2/a
        a = diag[i] + diag - 2.0 * y[i] * (y * Q[i])
        a = np.where(a > 0, a, 1e-12)
        j = int(np.argmin(np.where(cand, -(b * b) / a, np.inf)))

        lim_i = psi[i] if y[i] < 0 else math.inf
        lim_j = psi[j] if y[j] > 0 else math.inf
        step = min(b[j] / a[j], lim_i, lim_j)
        if step <= 0:
            break
        old_i, old_j = psi[i], psi[j]
        psi[i] = 0.0 if step == lim_i else old_i + y[i] * step
        psi[j] = 0.0 if step == lim_j else old_j - y[j] * step
        # Q is symmetric; rows are contiguous
        G += Q[i] * (psi[i] - old_i) + Q[j] * (psi[j] - old_j)
        for k in (i, j):
            up[k] = pos[k] or psi[k] > 0
            low[k] = (not pos[k]) or psi[k] > 0

        if track_history:
            new_obj = float(psi.sum() - 0.5 * psi @ (G + 1.0))
            if new_obj < history[-1] - 1e-12 * max(1.0, abs(new_obj)):
                raise AssertionError("dual objective decreased")
            history.append(new_obj)
        it += 1

    obj, _ = objective_and_gradient(problem, psi)
    gap = duality_gap(problem, psi, equality_tol=np.inf)
    G = Q @ psi - 1.0
    m, M = _violation(psi, G, y)
    if not converged:
        converged = m - M <= opts.kkt_tol or (opts.gap_tol is not None and gap <= opts.gap_tol)
    if not converged and warn:
        log.warning("dual solver stopped after %d iterations (gap %.3g, kkt %.3g)",
                    it, gap, m - M)
    return DualSolution(
        psi=psi,
        iterations=it,
        duality_gap=gap,
        objective=obj,
        converged=converged,
        kkt_violation=m - M,
        offset=sign * 0.5 * (m + M),
        history=history,
    )
