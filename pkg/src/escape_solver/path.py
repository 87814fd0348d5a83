"""Polyline objectives: lengths and exact gradients for open, closed and 3D paths."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Polyline:
    """Ordered visit points; `anchored` adds the origin->first leg, `closed` the return leg."""

    points: tuple
    anchored: bool = True
    closed: bool = False

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size and (pts.ndim != 2 or pts.shape[1] not in (2, 3)):
            raise ValueError("points must be an (n, 2) or (n, 3) array")
        if pts.size and not np.all(np.isfinite(pts)):
            raise ValueError("polyline has non-finite coordinates")
        if self.closed and not self.anchored:
            raise ValueError("a closed path is anchored by definition")
        object.__setattr__(self, "points", tuple(map(tuple, pts)))

    @property
    def dim(self) -> int:
        return len(self.points[0]) if self.points else 2

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float).reshape(len(self.points), -1)


@dataclass(frozen=True)
class LengthReport:
    total: float
    per_leg: tuple = field(default_factory=tuple)


def _legs(poly: Polyline) -> np.ndarray:
    pts = poly.as_array()
    if pts.shape[0] == 0:
        return np.zeros((0, 2))
    chain = [pts]
    if poly.anchored:
        chain.insert(0, np.zeros((1, pts.shape[1])))
    if poly.closed:
        chain.append(np.zeros((1, pts.shape[1])))
    return np.diff(np.vstack(chain), axis=0)


def length(poly: Polyline) -> LengthReport:
    """Total polyline length with per-leg breakdown (compensated summation)."""
    legs = _legs(poly)
    per = np.linalg.norm(legs, axis=1)
    total = 0.0
    comp = 0.0  # Kahan compensation so total == sum(per_leg) tightly
    for d in per:
        y = d - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return LengthReport(float(total), tuple(float(d) for d in per))


def grad_length(poly: Polyline) -> np.ndarray:
    """d(length)/d(point): one row per visit point.

    A zero-length leg contributes nothing (subgradient choice: keeps the solver
    stable when consecutive escape points merge).
    """
    legs = _legs(poly)
    d = np.linalg.norm(legs, axis=1)
    unit = np.where(d[:, None] > 0.0, legs / np.where(d[:, None] > 0.0, d[:, None], 1.0), 0.0)
    npts = len(poly.points)
    dim = poly.dim
    g = np.zeros((npts + (1 if poly.anchored else 0) + (1 if poly.closed else 0), dim))
    g[1:] += unit
    g[:-1] -= unit
    start = 1 if poly.anchored else 0
    return g[start:start + npts]


def points_length(points: np.ndarray, anchored: bool = True, closed: bool = False) -> float:
    """Fast length of a raw coordinate array (no report)."""
    pts = np.asarray(points, dtype=float)
    chain = [pts]
    if anchored:
        chain.insert(0, np.zeros((1, pts.shape[1])))
    if closed:
        chain.append(np.zeros((1, pts.shape[1])))
    legs = np.diff(np.vstack(chain), axis=0)
    return float(np.linalg.norm(legs, axis=1).sum())
