"""Trained linear classifier assembled from a Wolfe dual solution.

Given multipliers ``psi`` the weight vector is ``tau = sum_i y_i psi_i x_i``,
split into the class components ``tau1`` (label +1) and ``tau2`` (label -1)
so that ``tau = tau1 - tau2``.  Slacks follow from stationarity of the
squared-slack penalty, ``xi_i = psi_i / C``, and the offset ``tau0`` is the
average of the active margin equations over the extreme (support) points.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import LabeledDataset
from .geometry import LinearLocus
from .solver import EPS_FLOOR, DualProblem, DualSolution, SolverOptions, solve_dual

log = logging.getLogger(__name__)

MODEL_VERSION = 1
EXTREME_REL_THRESHOLD = 1e-6


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class EigenlocusModel:
    tau: np.ndarray
    tau1: np.ndarray
    tau2: np.ndarray
    tau0: float
    psi: np.ndarray
    xi: np.ndarray
    extreme_idx: np.ndarray  # sorted training indices with psi above threshold
    extreme_x: np.ndarray  # l x d coordinates of the extreme points
    extreme_y: np.ndarray
    C: float
    eps: float
    n: int
    d: int
    converged: bool = True
    duality_gap: float = 0.0
    iterations: int = 0

    @property
    def class1_extremes(self) -> np.ndarray:
        return self.extreme_idx[self.extreme_y > 0]

    @property
    def class2_extremes(self) -> np.ndarray:
        return self.extreme_idx[self.extreme_y < 0]

    @property
    def n_extremes(self) -> int:
        return int(self.extreme_idx.size)

    @property
    def sv_fraction(self) -> float:
        return self.n_extremes / self.n

    @property
    def tau_norm(self) -> float:
        return float(np.linalg.norm(self.tau))

    @property
    def extreme_mean(self) -> np.ndarray:
        return self.extreme_x.mean(axis=0)

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise ValueError(f"expected {self.d} features, got {X.shape[1]}")
        return X @ self.tau + self.tau0

    def predict(self, X) -> np.ndarray:
        """Labels in {+1, -1}; an exact zero score maps to +1."""
        return np.where(self.decision_function(X) >= 0, 1.0, -1.0)

    def test_statistic(self, X) -> np.ndarray:
        """The same discriminant written around the extreme-point mean.

        ``(x - mean_extreme)'tau + (1/l) sum y_i (1 - xi_i)``; equal to
        ``decision_function`` algebraically.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        ext_xi = self.xi[self.extreme_idx]
        label_term = float(np.mean(self.extreme_y * (1.0 - ext_xi)))
        return (X - self.extreme_mean) @ self.tau + label_term


def _components(psi_ext, y_ext, x_ext, d):
    pos = y_ext > 0
    tau1 = psi_ext[pos] @ x_ext[pos] if pos.any() else np.zeros(d)
    tau2 = psi_ext[~pos] @ x_ext[~pos] if (~pos).any() else np.zeros(d)
    return np.asarray(tau1, dtype=float), np.asarray(tau2, dtype=float)


def extreme_mask(psi, rel_threshold: float = EXTREME_REL_THRESHOLD) -> np.ndarray:
    psi = np.asarray(psi, dtype=float)
    top = float(psi.max(initial=0.0))
    if top <= 0.0:
        return np.zeros(psi.shape, dtype=bool)
    return psi > rel_threshold * top


def compute_tau0(data: LabeledDataset, psi, tau, xi, extremes=None) -> float:
    """Offset averaged over the extreme points only.

    ``tau0 = (1/l) sum_i y_i (1 - xi_i) - ((1/l) sum_i x_i)' tau`` with the
    sums over the ``l`` extreme points.
    """
    idx = np.flatnonzero(extreme_mask(psi)) if extremes is None else np.asarray(extremes)
    if idx.size == 0:
        raise ValueError("no extreme points: tau0 is undefined")
    y = data.y[idx]
    xi = np.asarray(xi, dtype=float)[idx]
    return float(np.mean(y * (1.0 - xi)) - data.X[idx].mean(axis=0) @ np.asarray(tau))


def model_from_dual(data: LabeledDataset, psi, C: float, eps: float,
                    solution: DualSolution | None = None) -> EigenlocusModel:
    psi = np.array(psi, dtype=float)
    if psi.shape != (data.n,):
        raise ValueError(f"psi must have length {data.n}")
    if np.any(psi < 0):
        raise ValueError("psi must be nonnegative")
    mask = extreme_mask(psi)
    psi[~mask] = 0.0
    idx = np.flatnonzero(mask)
    xi = eps * psi
    x_ext, y_ext = data.X[idx], data.y[idx]
    tau1, tau2 = _components(psi[idx], y_ext, x_ext, data.d)
    tau = tau1 - tau2
    tau0 = compute_tau0(data, psi, tau, xi, idx) if idx.size else 0.0
    return EigenlocusModel(
        tau=tau, tau1=tau1, tau2=tau2, tau0=tau0, psi=psi, xi=xi,
        extreme_idx=idx, extreme_x=x_ext.copy(), extreme_y=y_ext.copy(),
        C=float(C), eps=float(eps), n=data.n, d=data.d,
        converged=True if solution is None else solution.converged,
        duality_gap=0.0 if solution is None else solution.duality_gap,
        iterations=0 if solution is None else solution.iterations,
    )


def fit(data: LabeledDataset, C: float = 1.0, opts: SolverOptions | None = None,
        eps: float | None = None) -> EigenlocusModel:
    """Train on ``data`` with slack penalty ``C`` (``math.inf`` for hard margin).

    ``eps`` defaults to ``1/C``, floored at ``EPS_FLOOR`` so the Gram matrix
    stays positive definite.
    """
    if data.n < 2 or not data.has_both_classes:
        raise ValueError("training data needs at least one point of each class")
    if not C > 0:
        raise ValueError("C must be > 0")
    if eps is None:
        eps = 1.0 / C if math.isfinite(C) else EPS_FLOOR
    eps = max(eps, EPS_FLOOR)
    problem = DualProblem.from_data(data.X, data.y, C, eps)
    sol = solve_dual(problem, opts)
    if not sol.converged:
        log.warning("fit did not converge: duality gap %.3g after %d iterations",
                    sol.duality_gap, sol.iterations)
    return model_from_dual(data, sol.psi, C, problem.eps, sol)


@dataclass(frozen=True)
class DecisionOutput:
    score: float
    label: int
    decision_locus: float | None  # None when tau == 0
    on_boundary: bool = False
    degenerate: bool = False


def decide(model: EigenlocusModel, x, tol: float = 1e-10) -> DecisionOutput:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.d,):
        raise ValueError(f"expected a point of dimension {model.d}")
    score = float(x @ model.tau + model.tau0)
    alt = float(model.test_statistic(x)[0])
    if abs(score - alt) > tol * max(1.0, abs(score), float(np.abs(x) @ np.abs(model.tau))):
        raise AssertionError(f"test statistic {alt!r} disagrees with discriminant {score!r}")
    norm = model.tau_norm
    if norm == 0.0:
        return DecisionOutput(score, 1 if model.tau0 >= 0 else -1, None,
                              on_boundary=score == 0.0, degenerate=True)
    locus = float((x - model.extreme_mean) @ model.tau) / norm
    return DecisionOutput(score, 1 if score >= 0 else -1, locus, on_boundary=score == 0.0)


@dataclass(frozen=True)
class MarginGeometry:
    boundary: LinearLocus
    border_plus: LinearLocus
    border_minus: LinearLocus
    half_width: float
    full_width: float


def margin_geometry(model: EigenlocusModel) -> MarginGeometry:
    """Decision boundary ``D(x)=0`` and the borders ``D(x)=+1``, ``D(x)=-1``."""
    norm = model.tau_norm
    if norm == 0.0:
        raise ValueError("tau is zero: the decision regions have no finite width")
    t0 = model.tau0
    return MarginGeometry(
        boundary=LinearLocus(model.tau, -t0 / norm),
        border_plus=LinearLocus(model.tau, (1.0 - t0) / norm),
        border_minus=LinearLocus(model.tau, (-1.0 - t0) / norm),
        half_width=1.0 / norm,
        full_width=2.0 / norm,
    )


# --- model documents -------------------------------------------------------

def to_document(model: EigenlocusModel) -> dict:
    return {
        "version": MODEL_VERSION,
        "d": model.d,
        "N": model.n,
        "C": model.C if math.isfinite(model.C) else None,
        "eps": model.eps,
        "tau": model.tau.tolist(),
        "tau0": model.tau0,
        "converged": model.converged,
        "duality_gap": model.duality_gap,
        "iterations": model.iterations,
        "extremes": [
            {"index": int(i), "label": int(lab), "psi": float(model.psi[i]), "x": xv.tolist()}
            for i, lab, xv in zip(model.extreme_idx, model.extreme_y, model.extreme_x)
        ],
    }


def serialize(model: EigenlocusModel) -> str:
    # repr-based float output is the shortest string that round-trips exactly
    return json.dumps(to_document(model), indent=1)


_REQUIRED = ("version", "d", "N", "C", "eps", "tau", "tau0", "extremes")


def from_document(doc: dict) -> EigenlocusModel:
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    for key in _REQUIRED:
        if key not in doc:
            raise ModelFormatError(f"model document is missing field '{key}'")
    if doc["version"] != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {doc['version']!r} (expected {MODEL_VERSION})")
    d, n = int(doc["d"]), int(doc["N"])
    C = math.inf if doc["C"] is None else float(doc["C"])
    eps = float(doc["eps"])
    tau = np.asarray(doc["tau"], dtype=float)
    if tau.shape != (d,):
        raise ModelFormatError(f"field 'tau' must have {d} entries")
    idx, labels, psis, xs = [], [], [], []
    for k, e in enumerate(doc["extremes"]):
        for key in ("index", "label", "psi", "x"):
            if key not in e:
                raise ModelFormatError(f"extremes[{k}] is missing field '{key}'")
        if float(e["psi"]) < 0:
            raise ModelFormatError(f"extremes[{k}]: psi must be nonnegative, got {e['psi']}")
        if e["label"] not in (1, -1):
            raise ModelFormatError(f"extremes[{k}]: label must be +1 or -1")
        if len(e["x"]) != d or not 0 <= int(e["index"]) < n:
            raise ModelFormatError(f"extremes[{k}]: bad index or coordinates")
        idx.append(int(e["index"]))
        labels.append(float(e["label"]))
        psis.append(float(e["psi"]))
        xs.append([float(v) for v in e["x"]])
    idx_a = np.asarray(idx, dtype=np.int64)
    if np.any(np.diff(idx_a) <= 0):
        raise ModelFormatError("extreme indices must be strictly increasing")
    psi = np.zeros(n)
    psi[idx_a] = psis
    y_ext = np.asarray(labels)
    x_ext = np.asarray(xs, dtype=float).reshape(len(idx), d)
    # tau is taken as stored; consistency with the extremes is a diagnostics question
    tau1, tau2 = _components(psi[idx_a], y_ext, x_ext, d)
    return EigenlocusModel(
        tau=tau, tau1=tau1, tau2=tau2, tau0=float(doc["tau0"]), psi=psi, xi=eps * psi,
        extreme_idx=idx_a, extreme_x=x_ext, extreme_y=y_ext,
        C=C, eps=eps, n=n, d=d,
        converged=bool(doc.get("converged", True)),
        duality_gap=float(doc.get("duality_gap", 0.0)),
        iterations=int(doc.get("iterations", 0)),
    )


def deserialize(text: str) -> EigenlocusModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model document is not valid JSON: {exc}") from None
    return from_document(doc)
