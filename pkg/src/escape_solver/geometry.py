"""Implicit boundary primitives, their residuals, gradients, projections and rigid motions.

A boundary is the zero set of a scalar field F.  Supported variants are lines
(unit-normal form), circles, single target points, straight segments, products
of sub-boundaries (a point satisfies the product if it lies on any factor), and
planes in 3D.  All values are immutable; every operation here is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

GRAD_FLOOR = 1e-8  # lower clamp for gradient norms when scaling residuals


class SingularGradientError(ValueError):
    """Gradient is not usable at this point (zero set touches it degenerately)."""


class ProjectionError(RuntimeError):
    """Projection iteration failed to reach the zero set."""

    def __init__(self, message: str, best_residual: float):
        super().__init__(message)
        self.best_residual = best_residual


class UnsupportedMotionError(ValueError):
    """Rigid motion applied to a variant that does not support it."""


def _vec(p) -> np.ndarray:
    a = np.asarray(p, dtype=float)
    if a.ndim != 1 or a.shape[0] not in (2, 3):
        raise ValueError(f"expected a 2D or 3D point, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("point has non-finite components")
    return a


@dataclass(frozen=True)
class RigidMotion:
    """Rotation by `angle` about `center`, followed by `translation`."""

    center: tuple[float, float] = (0.0, 0.0)
    angle: float = 0.0
    translation: tuple[float, float] = (0.0, 0.0)

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.angle), math.sin(self.angle)
        return np.array([[c, -s], [s, c]])

    def apply(self, p) -> np.ndarray:
        p = _vec(p)
        if p.shape[0] != 2:
            raise UnsupportedMotionError("rigid motions are 2D only")
        c = np.asarray(self.center, dtype=float)
        return c + self.matrix() @ (p - c) + np.asarray(self.translation, dtype=float)

    def inverse(self) -> "RigidMotion":
        rinv = RigidMotion(self.center, -self.angle).matrix()
        t = -(rinv @ np.asarray(self.translation, dtype=float))
        return RigidMotion(self.center, -self.angle, (t[0], t[1]))


@dataclass(frozen=True)
class Line:
    """x*cos(angle) + y*sin(angle) - offset = 0 (unit normal form)."""

    angle: float
    offset: float

    dim = 2

    def normal(self) -> np.ndarray:
        return np.array([math.cos(self.angle), math.sin(self.angle)])

    def tangent(self) -> np.ndarray:
        return np.array([-math.sin(self.angle), math.cos(self.angle)])


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float

    dim = 2

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("circle radius must be positive")


@dataclass(frozen=True)
class PointTarget:
    point: tuple[float, float]

    dim = 2


@dataclass(frozen=True)
class Segment:
    """Straight segment between `a` and `b`; residual is squared distance to it."""

    a: tuple[float, float]
    b: tuple[float, float]

    dim = 2

    def __post_init__(self):
        if math.dist(self.a, self.b) <= 0:
            raise ValueError("segment endpoints coincide")


@dataclass(frozen=True)
class Product:
    """Zero set is the union of the factors' zero sets."""

    factors: tuple

    def __post_init__(self):
        if len(self.factors) < 2:
            raise ValueError("product needs at least two factors")
        dims = {f.dim for f in self.factors}
        if len(dims) != 1:
            raise ValueError("product factors have mixed dimensions")

    @property
    def dim(self) -> int:
        return self.factors[0].dim


@dataclass(frozen=True)
class Plane3:
    """normal . p - offset = 0 with a unit normal."""

    normal: tuple[float, float, float]
    offset: float

    dim = 3

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError("plane normal must have unit norm")


BoundaryExpr = Line | Circle | PointTarget | Segment | Product | Plane3


def _check_dim(b, p: np.ndarray) -> None:
    if p.shape[0] != b.dim:
        raise ValueError(f"{type(b).__name__} is {b.dim}D but point is {p.shape[0]}D")


def eval_boundary(b: BoundaryExpr, p) -> float:
    """Residual F(p); zero exactly when p lies on the boundary."""
    p = _vec(p)
    _check_dim(b, p)
    return _eval(b, p)


def _eval(b, p: np.ndarray) -> float:
    if isinstance(b, Line):
        return float(p @ b.normal() - b.offset)
    if isinstance(b, Circle):
        d = p - np.asarray(b.center)
        return float(d @ d - b.radius**2)
    if isinstance(b, PointTarget):
        d = p - np.asarray(b.point)
        return float(d @ d)
    if isinstance(b, Segment):
        q = _project_segment(b, p)
        d = p - q
        return float(d @ d)
    if isinstance(b, Product):
        out = 1.0
        for f in b.factors:
            out *= _eval(f, p)
        return out
    if isinstance(b, Plane3):
        return float(p @ np.asarray(b.normal) - b.offset)
    raise TypeError(f"unknown boundary variant {type(b).__name__}")


def grad_boundary(b: BoundaryExpr, p) -> np.ndarray:
    """Gradient of the residual at p.

    Raises SingularGradientError where the gradient degenerates to zero on the
    zero set itself (a point target at its own point, a segment on the segment).
    """
    p = _vec(p)
    _check_dim(b, p)
    g = _grad(b, p)
    if isinstance(b, (PointTarget, Segment)) and np.linalg.norm(g) == 0.0:
        raise SingularGradientError(f"{type(b).__name__} gradient vanishes at {tuple(p)}")
    return g


def _grad(b, p: np.ndarray) -> np.ndarray:
    if isinstance(b, Line):
        return b.normal()
    if isinstance(b, Circle):
        return 2.0 * (p - np.asarray(b.center))
    if isinstance(b, PointTarget):
        return 2.0 * (p - np.asarray(b.point))
    if isinstance(b, Segment):
        return 2.0 * (p - _project_segment(b, p))
    if isinstance(b, Product):
        vals = [_eval(f, p) for f in b.factors]
        grads = [_grad(f, p) for f in b.factors]
        total = np.zeros_like(p)
        for j in range(len(b.factors)):
            rest = 1.0
            for l, v in enumerate(vals):
                if l != j:
                    rest *= v
            total += rest * grads[j]
        return total
    if isinstance(b, Plane3):
        return np.asarray(b.normal, dtype=float)
    raise TypeError(f"unknown boundary variant {type(b).__name__}")


def scaled_residual(b: BoundaryExpr, p) -> float:
    """|F| / max(||grad F||, floor): a first-order distance estimate to the zero set."""
    p = _vec(p)
    _check_dim(b, p)
    g = _grad(b, p)
    return abs(_eval(b, p)) / max(float(np.linalg.norm(g)), GRAD_FLOOR)


def _project_segment(b: Segment, p: np.ndarray) -> np.ndarray:
    a = np.asarray(b.a, dtype=float)
    d = np.asarray(b.b, dtype=float) - a
    t = float(np.clip((p - a) @ d / (d @ d), 0.0, 1.0))
    return a + t * d


def project(b: BoundaryExpr, p) -> np.ndarray:
    """Closest point of the zero set (closed form for every supported variant)."""
    p = _vec(p)
    _check_dim(b, p)
    return _project(b, p)


def _project(b, p: np.ndarray) -> np.ndarray:
    if isinstance(b, Line):
        n = b.normal()
        return p - (p @ n - b.offset) * n
    if isinstance(b, Circle):
        c = np.asarray(b.center, dtype=float)
        d = p - c
        r = float(np.linalg.norm(d))
        if r < 1e-12:
            # center itself: every circle point is equidistant; pick angle 0
            return c + np.array([b.radius, 0.0])
        return c + (b.radius / r) * d
    if isinstance(b, PointTarget):
        return np.asarray(b.point, dtype=float)
    if isinstance(b, Segment):
        return _project_segment(b, p)
    if isinstance(b, Product):
        best, best_d = None, np.inf
        for f in b.factors:
            q = _project(f, p)
            d = float(np.linalg.norm(q - p))
            if d < best_d:
                best, best_d = q, d
        return best
    if isinstance(b, Plane3):
        n = np.asarray(b.normal, dtype=float)
        return p - (p @ n - b.offset) * n
    raise TypeError(f"unknown boundary variant {type(b).__name__}")


def apply_motion(b: BoundaryExpr, m: RigidMotion) -> BoundaryExpr:
    """Boundary whose zero set is the rigid-motion image of b's zero set."""
    if b.dim != 2:
        raise UnsupportedMotionError("rigid motions are 2D only")
    if isinstance(b, Line):
        phi = b.angle + m.angle
        n_new = np.array([math.cos(phi), math.sin(phi)])
        c = np.asarray(m.center, dtype=float)
        t = np.asarray(m.translation, dtype=float)
        delta = b.offset + (c + t) @ n_new - c @ b.normal()
        return Line(phi, float(delta))
    if isinstance(b, Circle):
        c = m.apply(b.center)
        return Circle((c[0], c[1]), b.radius)
    if isinstance(b, PointTarget):
        q = m.apply(b.point)
        return PointTarget((q[0], q[1]))
    if isinstance(b, Segment):
        a, bb = m.apply(b.a), m.apply(b.b)
        return Segment((a[0], a[1]), (bb[0], bb[1]))
    if isinstance(b, Product):
        return Product(tuple(apply_motion(f, m) for f in b.factors))
    raise UnsupportedMotionError(f"cannot move {type(b).__name__}")


def translate(b: BoundaryExpr, offset) -> BoundaryExpr:
    """Pure translation (convenience wrapper around apply_motion)."""
    off = np.asarray(offset, dtype=float)
    return apply_motion(b, RigidMotion(translation=(off[0], off[1])))


def rotate_about(b: BoundaryExpr, angle: float, center=(0.0, 0.0)) -> BoundaryExpr:
    """Pure rotation about a pivot (convenience wrapper around apply_motion)."""
    c = np.asarray(center, dtype=float)
    return apply_motion(b, RigidMotion(center=(c[0], c[1]), angle=angle))


def scale_boundary(b: BoundaryExpr, s: float) -> BoundaryExpr:
    """Dilation about the origin by a positive factor."""
    if s <= 0:
        raise ValueError("scale factor must be positive")
    if isinstance(b, Line):
        return Line(b.angle, s * b.offset)
    if isinstance(b, Circle):
        return Circle((s * b.center[0], s * b.center[1]), s * b.radius)
    if isinstance(b, PointTarget):
        return PointTarget((s * b.point[0], s * b.point[1]))
    if isinstance(b, Segment):
        return Segment((s * b.a[0], s * b.a[1]), (s * b.b[0], s * b.b[1]))
    if isinstance(b, Product):
        return Product(tuple(scale_boundary(f, s) for f in b.factors))
    if isinstance(b, Plane3):
        return Plane3(b.normal, s * b.offset)
    raise TypeError(f"cannot scale {type(b).__name__}")
