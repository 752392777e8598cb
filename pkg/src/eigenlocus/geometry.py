"""Dense vector/matrix helpers and linear-locus geometry.

A linear locus is described by a normal axis ``v`` and a signed offset: a
point ``x`` lies on it when its scalar projection onto ``v`` equals the
offset.  The decision boundary and the two decision borders of a trained
model are all linear loci sharing the same axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

REL_TOL = 1e-9


def as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("matrix has non-finite entries")
    return X


def as_vector(v, name: str = "vector") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite components")
    return v


def as_labels(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError("labels must be 1-D")
    if not np.all((y == 1.0) | (y == -1.0)):
        raise ValueError("labels must be +1 or -1")
    return y


def gram_matrix(X, y, eps: float = 0.0) -> np.ndarray:
    """Return ``Q = eps*I + (D_y X)(D_y X)^T``, i.e. ``Q[i,j] = y_i y_j x_i.x_j + eps*delta_ij``."""
    X = as_matrix(X)
    y = as_labels(y)
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]} labels")
    if eps < 0:
        raise ValueError("eps must be >= 0")
    Xt = X * y[:, None]
    Q = Xt @ Xt.T
    # the product is symmetric in exact arithmetic; make it so in floating point
    Q = 0.5 * (Q + Q.T)
    Q[np.diag_indices_from(Q)] += eps
    return Q


@dataclass(frozen=True)
class InnerProductStats:
    dot: float
    norm_u: float
    norm_v: float
    cos_angle: float | None  # None when either operand has zero length
    distance: float

    @property
    def cos_defined(self) -> bool:
        return self.cos_angle is not None

    def law_of_cosines_residual(self) -> float:
        """|distance^2 - (|u|^2 + |v|^2 - 2 u.v)|, relative to the largest term."""
        rhs = self.norm_u**2 + self.norm_v**2 - 2.0 * self.dot
        scale = max(1.0, self.norm_u**2 + self.norm_v**2)
        return abs(self.distance**2 - rhs) / scale


def inner_product_stats(u, v) -> InnerProductStats:
    u = as_vector(u, "u")
    v = as_vector(v, "v")
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.size} vs {v.size}")
    dot = float(u @ v)
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    cos = None
    if nu > 0.0 and nv > 0.0:
        cos = max(-1.0, min(1.0, dot / (nu * nv)))
    dist = float(np.linalg.norm(u - v))
    return InnerProductStats(dot, nu, nv, cos, dist)


def scalar_projection(x, axis) -> float:
    """Signed length of ``x`` along ``axis`` (negative for obtuse angles)."""
    x = as_vector(x, "x")
    axis = as_vector(axis, "axis")
    if x.shape != axis.shape:
        raise ValueError(f"dimension mismatch: {x.size} vs {axis.size}")
    n = float(np.linalg.norm(axis))
    if n == 0.0:
        raise ValueError("axis has zero length")
    return float(x @ axis) / n


@dataclass(frozen=True)
class LinearLocus:
    """Points ``x`` with ``x.v/|v| == offset``.

    ``offset`` is the signed distance of the locus from the origin measured
    along ``normal_eigenaxis``.
    """

    normal_eigenaxis: np.ndarray
    offset: float

    def __post_init__(self):
        v = as_vector(self.normal_eigenaxis, "normal_eigenaxis")
        if np.linalg.norm(v) == 0.0:
            raise ValueError("normal_eigenaxis must be nonzero")
        object.__setattr__(self, "normal_eigenaxis", v)

    @classmethod
    def from_axis(cls, v) -> "LinearLocus":
        """Locus whose every point satisfies ``x.v = |v|^2``."""
        v = as_vector(v, "v")
        return cls(v, float(np.linalg.norm(v)))

    @property
    def unit_normal(self) -> np.ndarray:
        return self.normal_eigenaxis / np.linalg.norm(self.normal_eigenaxis)

    @property
    def distance_to_origin(self) -> float:
        return abs(self.offset)

    def signed_distance(self, x) -> float:
        return scalar_projection(x, self.normal_eigenaxis) - self.offset

    def contains(self, x, tol: float = REL_TOL) -> bool:
        return abs(self.signed_distance(x)) <= tol

    def same_locus(self, other: "LinearLocus", tol: float = REL_TOL) -> bool:
        """True when both describe the same point set (axis scaling ignored)."""
        u, w = self.unit_normal, other.unit_normal
        if u.shape != w.shape:
            return False
        if np.allclose(u, w, atol=tol):
            return math.isclose(self.offset, other.offset, abs_tol=tol)
        if np.allclose(u, -w, atol=tol):
            return math.isclose(self.offset, -other.offset, abs_tol=tol)
        return False


def locus_membership(locus: LinearLocus, x, tol: float = REL_TOL) -> bool:
    return locus.contains(x, tol)
