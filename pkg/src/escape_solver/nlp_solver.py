"""Fixed-order continuous minimization of escape polylines.

Pipeline per start: seed each escape point at the nearest point of its
boundary, run quadratic-penalty continuation while a product branch is still
undecided, project exactly, then polish in reduced on-boundary coordinates
(one parameter per point on a line/circle/segment, two on a plane) with L-BFGS
followed by damped Newton on the exact sparse Hessian.  Coincident consecutive
points are genuine corners of many optima; such clusters get pinned to the
common point of their boundaries so the corner nonsmoothness cannot cap the
final accuracy.  The best feasible start wins; ties break to the
lexicographically smallest point sequence so reruns are bitwise stable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from . import geometry as geo
from .path import Polyline, length
from .scenario import Instance, build_zalgaller


class NonConvergenceError(RuntimeError):
    """No start produced a feasible local minimum; carries the best iterate."""

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class SolveOptions:
    feas_tol: float = 1e-8
    step_tol: float = 1e-10
    max_outer: int = 200
    multistart: int = 16
    seed: int = 0
    penalty_init: float = 10.0
    penalty_growth: float = 5.0
    branch_budget: int = 64
    polish_maxiter: int = 30000
    threads: int = 1

    def __post_init__(self):
        if min(self.feas_tol, self.step_tol, self.penalty_init) <= 0:
            raise ValueError("tolerances and penalties must be positive")
        if self.max_outer < 1 or self.multistart < 1 or self.branch_budget < 1:
            raise ValueError("iteration budgets must be positive")
        if self.penalty_growth <= 1.0:
            raise ValueError("penalty growth must exceed 1")


@dataclass(frozen=True)
class Solution:
    polyline: Polyline
    order: tuple
    length: float
    max_residual: float
    converged: bool
    branch_assignment: tuple | None = None
    residuals: tuple = ()
    instance_name: str = ""
    seed: int = 0
    iterations: int = 0

    def points(self) -> np.ndarray:
        return self.polyline.as_array()


# --------------------------------------------------------------------------
# vectorized residual program over an ordered boundary sequence

def _factor_eval(kind, prm, P):
    """Residual and gradient for a stacked batch of one primitive kind."""
    if kind == "line":
        n, d = prm
        return np.einsum("ij,ij->i", P, n) - d, n.copy()
    if kind == "circle":
        c, r = prm
        dvec = P - c
        return np.einsum("ij,ij->i", dvec, dvec) - r * r, 2.0 * dvec
    if kind == "point":
        (q,) = prm
        dvec = P - q
        return np.einsum("ij,ij->i", dvec, dvec), 2.0 * dvec
    if kind == "segment":
        a, b = prm
        ab = b - a
        t = np.clip(np.einsum("ij,ij->i", P - a, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
        proj = a + t[:, None] * ab
        dvec = P - proj
        return np.einsum("ij,ij->i", dvec, dvec), 2.0 * dvec
    if kind == "plane":
        n, d = prm
        return np.einsum("ij,ij->i", P, n) - d, n.copy()
    raise ValueError(kind)


def _pack_factor(kind, factors, dim):
    if kind == "line":
        n = np.array([[math.cos(f.angle), math.sin(f.angle)] for f in factors])
        return n, np.array([f.offset for f in factors])
    if kind == "circle":
        return (np.array([f.center for f in factors], dtype=float),
                np.array([f.radius for f in factors]))
    if kind == "point":
        return (np.array([f.point for f in factors], dtype=float),)
    if kind == "segment":
        return (np.array([f.a for f in factors], dtype=float),
                np.array([f.b for f in factors], dtype=float))
    if kind == "plane":
        return (np.array([f.normal for f in factors], dtype=float),
                np.array([f.offset for f in factors]))
    raise ValueError(kind)


def _kind_of(b) -> str:
    return {geo.Line: "line", geo.Circle: "circle", geo.PointTarget: "point",
            geo.Segment: "segment", geo.Plane3: "plane"}[type(b)]


class _ResidualProgram:
    """Batched F / grad-F for the ordered boundary list (products included)."""

    def __init__(self, boundaries, dim):
        self.n = len(boundaries)
        self.dim = dim
        self.simple: dict = {}
        self.groups: dict = {}
        for h, b in enumerate(boundaries):
            if isinstance(b, geo.Product):
                key = tuple(_kind_of(f) for f in b.factors)
                self.groups.setdefault(key, []).append((h, b))
            else:
                self.simple.setdefault(_kind_of(b), []).append((h, b))
        self._simple_c = {
            k: (np.array([h for h, _ in rows]), _pack_factor(k, [b for _, b in rows], dim))
            for k, rows in self.simple.items()
        }
        self._group_c = {}
        for key, rows in self.groups.items():
            idx = np.array([h for h, _ in rows])
            per_factor = [
                _pack_factor(kind, [b.factors[j] for _, b in rows], dim)
                for j, kind in enumerate(key)
            ]
            self._group_c[key] = (idx, per_factor)

    def residuals(self, P: np.ndarray):
        """Returns (F, G) with F shape (n,) and G shape (n, dim)."""
        F = np.zeros(self.n)
        G = np.zeros((self.n, self.dim))
        for kind, (idx, prm) in self._simple_c.items():
            f, g = _factor_eval(kind, prm, P[idx])
            F[idx] = f
            G[idx] = g
        for key, (idx, per_factor) in self._group_c.items():
            Psub = P[idx]
            fs, gs = [], []
            for j, kind in enumerate(key):
                f, g = _factor_eval(kind, per_factor[j], Psub)
                fs.append(f)
                gs.append(g)
            fs = np.stack(fs)                      # J x m
            prod = np.prod(fs, axis=0)
            F[idx] = prod
            total = np.zeros_like(Psub)
            for j in range(len(key)):
                rest = np.ones(len(idx))
                for l in range(len(key)):
                    if l != j:
                        rest = rest * fs[l]
                total += rest[:, None] * gs[j]
            G[idx] = total
        return F, G

    def scaled(self, P: np.ndarray) -> np.ndarray:
        F, G = self.residuals(P)
        return np.abs(F) / np.maximum(np.linalg.norm(G, axis=1), geo.GRAD_FLOOR)


# --------------------------------------------------------------------------
# reduced coordinates for branch-resolved boundaries

class _Reduced:
    """One low-dimensional parameter block per point, exactly on its boundary.

    Blocks of the same primitive kind are batched so the coordinate map and its
    chain rule are single numpy expressions per kind.
    """

    def __init__(self, boundaries, dim):
        self.dim = dim
        self.n = len(boundaries)
        rows = {"line": [], "circle": [], "point": [], "segment": [], "plane": []}
        objs = {k: [] for k in rows}
        for h, b in enumerate(boundaries):
            if isinstance(b, geo.Product):
                raise TypeError("cannot reduce a product; resolve branches first")
            k = _kind_of(b)
            rows[k].append(h)
            objs[k].append(b)
        self.rows = {k: np.array(v, dtype=int) for k, v in rows.items()}
        self.nvar = 0
        self.bounds = []
        self.cols = {}
        for k, ndof in (("line", 1), ("circle", 1), ("segment", 1), ("plane", 2)):
            m = len(rows[k])
            self.cols[k] = np.arange(self.nvar, self.nvar + m * ndof).reshape(m, ndof)
            self.nvar += m * ndof
            bound = (0.0, 1.0) if k == "segment" else (None, None)
            self.bounds.extend([bound] * (m * ndof))
        if objs["line"]:
            self.line_n = np.array([[math.cos(b.angle), math.sin(b.angle)] for b in objs["line"]])
            self.line_v = np.array([[-math.sin(b.angle), math.cos(b.angle)] for b in objs["line"]])
            self.line_d = np.array([b.offset for b in objs["line"]])
        if objs["circle"]:
            self.circ_c = np.array([b.center for b in objs["circle"]], dtype=float)
            self.circ_r = np.array([b.radius for b in objs["circle"]])
        if objs["point"]:
            self.point_q = np.array([b.point for b in objs["point"]], dtype=float)
        if objs["segment"]:
            self.seg_a = np.array([b.a for b in objs["segment"]], dtype=float)
            self.seg_d = (np.array([b.b for b in objs["segment"]], dtype=float) - self.seg_a)
        if objs["plane"]:
            n = np.array([b.normal for b in objs["plane"]], dtype=float)
            e1 = np.cross(n, [0.0, 0.0, 1.0])
            bad = np.linalg.norm(e1, axis=1) < 1e-9
            e1[bad] = np.cross(n[bad], [1.0, 0.0, 0.0])
            e1 /= np.linalg.norm(e1, axis=1)[:, None]
            self.plane_n, self.plane_e1 = n, e1
            self.plane_e2 = np.cross(n, e1)
            self.plane_d = np.array([b.offset for b in objs["plane"]])

    def init_vars(self, P: np.ndarray) -> np.ndarray:
        t = np.zeros(self.nvar)
        if len(self.rows["line"]):
            p = P[self.rows["line"]]
            t[self.cols["line"][:, 0]] = np.einsum("ij,ij->i", p, self.line_v)
        if len(self.rows["circle"]):
            dv = P[self.rows["circle"]] - self.circ_c
            t[self.cols["circle"][:, 0]] = np.arctan2(dv[:, 1], dv[:, 0])
        if len(self.rows["segment"]):
            p = P[self.rows["segment"]] - self.seg_a
            t[self.cols["segment"][:, 0]] = np.clip(
                np.einsum("ij,ij->i", p, self.seg_d)
                / np.einsum("ij,ij->i", self.seg_d, self.seg_d), 0.0, 1.0)
        if len(self.rows["plane"]):
            p = P[self.rows["plane"]]
            t[self.cols["plane"][:, 0]] = np.einsum("ij,ij->i", p, self.plane_e1)
            t[self.cols["plane"][:, 1]] = np.einsum("ij,ij->i", p, self.plane_e2)
        return t

    def points(self, t: np.ndarray) -> np.ndarray:
        P = np.zeros((self.n, self.dim))
        if len(self.rows["line"]):
            tv = t[self.cols["line"][:, 0]]
            P[self.rows["line"]] = self.line_d[:, None] * self.line_n + tv[:, None] * self.line_v
        if len(self.rows["circle"]):
            a = t[self.cols["circle"][:, 0]]
            P[self.rows["circle"]] = self.circ_c + self.circ_r[:, None] * np.stack(
                [np.cos(a), np.sin(a)], axis=1)
        if len(self.rows["point"]):
            P[self.rows["point"]] = self.point_q
        if len(self.rows["segment"]):
            tv = np.clip(t[self.cols["segment"][:, 0]], 0.0, 1.0)
            P[self.rows["segment"]] = self.seg_a + tv[:, None] * self.seg_d
        if len(self.rows["plane"]):
            s, u = t[self.cols["plane"][:, 0]], t[self.cols["plane"][:, 1]]
            P[self.rows["plane"]] = (self.plane_d[:, None] * self.plane_n
                                     + s[:, None] * self.plane_e1 + u[:, None] * self.plane_e2)
        return P

    def chain(self, t: np.ndarray, Gp: np.ndarray) -> np.ndarray:
        """Pull a per-point gradient back to the reduced variables."""
        g = np.zeros(self.nvar)
        if len(self.rows["line"]):
            g[self.cols["line"][:, 0]] = np.einsum(
                "ij,ij->i", Gp[self.rows["line"]], self.line_v)
        if len(self.rows["circle"]):
            a = t[self.cols["circle"][:, 0]]
            dp = self.circ_r[:, None] * np.stack([-np.sin(a), np.cos(a)], axis=1)
            g[self.cols["circle"][:, 0]] = np.einsum("ij,ij->i", Gp[self.rows["circle"]], dp)
        if len(self.rows["segment"]):
            g[self.cols["segment"][:, 0]] = np.einsum(
                "ij,ij->i", Gp[self.rows["segment"]], self.seg_d)
        if len(self.rows["plane"]):
            gp = Gp[self.rows["plane"]]
            g[self.cols["plane"][:, 0]] = np.einsum("ij,ij->i", gp, self.plane_e1)
            g[self.cols["plane"][:, 1]] = np.einsum("ij,ij->i", gp, self.plane_e2)
        return g


def _length_grad(P: np.ndarray, anchored: bool, closed: bool):
    chain = [P]
    if anchored:
        chain.insert(0, np.zeros((1, P.shape[1])))
    if closed:
        chain.append(np.zeros((1, P.shape[1])))
    arr = np.vstack(chain)
    legs = np.diff(arr, axis=0)
    d = np.linalg.norm(legs, axis=1)
    safe = np.where(d > 0.0, d, 1.0)
    u = legs / safe[:, None]
    u[d == 0.0] = 0.0
    g = np.zeros_like(arr)
    g[1:] += u
    g[:-1] -= u
    start = 1 if anchored else 0
    return float(d.sum()), g[start:start + P.shape[0]]


# --------------------------------------------------------------------------
# seeding, branch resolution, polish

def _seed_projection(b, q, fallback):
    if isinstance(b, geo.Circle) and np.linalg.norm(np.asarray(q) - np.asarray(b.center)) < 1e-9:
        q = fallback
    if isinstance(b, geo.Product):
        best, bd = None, np.inf
        for f in b.factors:
            p = _seed_projection(f, q, fallback)
            dd = float(np.linalg.norm(p - np.asarray(q, float)))
            if dd < bd:
                best, bd = p, dd
        return best
    return geo.project(b, q)


def _build_seeds(inst: Instance, ordered, opts: SolveOptions, initial_points):
    """Seed matrix per start: (multistart, K, dim)."""
    K = len(ordered.boundaries)
    dim = inst.dimension
    rng = np.random.default_rng(opts.seed)
    noise = rng.normal(size=(opts.multistart, K, dim))
    anchor0 = np.zeros(dim)
    if initial_points is not None:
        base = np.asarray(initial_points, dtype=float).copy()
    elif inst.seed_points is not None:
        base = np.array([inst.seed_points[h] for h in ordered.indices], dtype=float)
    else:
        # nearest boundary point seen from the anchor: covariant under rigid
        # motions and scaling of the whole scenario, and it starts every point
        # on the near side the optima hug
        base = np.array([_seed_projection(b, anchor0, anchor0)
                         for b in ordered.boundaries])
    seeds = np.zeros((opts.multistart, K, dim))
    for k in range(opts.multistart):
        mag = 0.1 * k / opts.multistart
        raw = base + mag * noise[k]
        for j, b in enumerate(ordered.boundaries):
            seeds[k, j] = _seed_projection(b, raw[j], anchor0)
    return seeds


class _Ordered:
    """Boundaries of an instance rearranged into visiting order, anchor-recentred."""

    def __init__(self, inst: Instance, order):
        perm = tuple(getattr(order, "perm", order))
        if sorted(perm) != list(range(inst.size)):
            raise ValueError("order is not a permutation of the boundary indices")
        self.indices = perm
        shift = None
        if inst.start_anchor is not None and any(abs(c) > 0 for c in inst.start_anchor):
            shift = tuple(-c for c in inst.start_anchor)
        bnds = []
        for h in perm:
            b = inst.boundaries[h]
            if shift is not None:
                b = geo.translate(b, shift)
            bnds.append(b)
        self.boundaries = tuple(bnds)


def _choose_nearest_branch(b, p):
    if not isinstance(b, geo.Product):
        return None
    best, bd = 0, np.inf
    for j, f in enumerate(b.factors):
        r = geo.scaled_residual(f, p)
        if r < bd:
            best, bd = j, r
    return best


def _apply_branches(boundaries, assignment):
    out = []
    for b, a in zip(boundaries, assignment):
        out.append(b.factors[a] if isinstance(b, geo.Product) and a is not None else b)
    return tuple(out)


def _polish(boundaries, P0, anchored, closed, opts: SolveOptions, newton: bool = True):
    red = _Reduced(boundaries, P0.shape[1])
    t0 = red.init_vars(P0)
    if red.nvar == 0:
        P = red.points(t0)
        L, _ = _length_grad(P, anchored, closed)
        return P, L

    def obj(t):
        P = red.points(t)
        L, Gp = _length_grad(P, anchored, closed)
        return L, red.chain(t, Gp)

    bounds = red.bounds if any(b != (None, None) for b in red.bounds) else None
    if t0.size and (not newton or bounds is not None or P0.shape[0] < 2):
        res = minimize(obj, t0, jac=True, method="L-BFGS-B", bounds=bounds,
                       options=dict(maxiter=opts.polish_maxiter, ftol=1e-18,
                                    gtol=1e-13, maxcor=40))
        t = res.x
    else:
        # warm path (post-merge): quasi-Newton briefly, then damped Newton with
        # the exact sparse Hessian (the chain objective is too ill-conditioned
        # for a limited-memory method alone)
        res = minimize(obj, t0, jac=True, method="L-BFGS-B",
                       options=dict(maxiter=min(2000, opts.polish_maxiter),
                                    ftol=1e-18, gtol=1e-11, maxcor=40))
        t = _newton_refine(red, res.x, anchored, closed)
    P = red.points(t)
    L, _ = _length_grad(P, anchored, closed)
    return P, L


def _point_jacobians(red: _Reduced, t: np.ndarray):
    """Per-point jacobian blocks dP_i/dt (dim x ndof_i) and circle curvature data."""
    D = np.zeros((red.n, red.dim, 2))
    ndof = np.zeros(red.n, dtype=int)
    curv = np.zeros((red.n, red.dim))  # d2p/dt2 for single-dof blocks (circles)
    if len(red.rows["line"]):
        D[red.rows["line"], :, 0] = red.line_v
        ndof[red.rows["line"]] = 1
    if len(red.rows["circle"]):
        a = t[red.cols["circle"][:, 0]]
        D[red.rows["circle"], :, 0] = red.circ_r[:, None] * np.stack(
            [-np.sin(a), np.cos(a)], axis=1)
        curv[red.rows["circle"]] = -red.circ_r[:, None] * np.stack(
            [np.cos(a), np.sin(a)], axis=1)
        ndof[red.rows["circle"]] = 1
    if len(red.rows["segment"]):
        D[red.rows["segment"], :, 0] = red.seg_d
        ndof[red.rows["segment"]] = 1
    if len(red.rows["plane"]):
        D[red.rows["plane"], :, 0] = red.plane_e1
        D[red.rows["plane"], :, 1] = red.plane_e2
        ndof[red.rows["plane"]] = 2
    offsets = np.zeros(red.n, dtype=int)
    for k in ("line", "circle", "segment", "plane"):
        if len(red.rows[k]):
            offsets[red.rows[k]] = red.cols[k][:, 0]
    return D, ndof, offsets, curv


def _assemble_hessian(red: _Reduced, t, P, Gp, D, ndof, offs, curv,
                      anchored: bool, closed: bool):
    """Exact sparse Hessian of the reduced objective (vectorized over legs)."""
    from scipy.sparse import coo_matrix

    if ndof.max(initial=0) > 1:
        return _assemble_hessian_blocks(red, P, Gp, D, ndof, offs, curv,
                                        anchored, closed)
    # single-dof fast path: every Hessian block is a scalar
    K, dim = P.shape
    ia = np.arange(-1 if anchored else 0, K - 1)
    ib = ia + 1
    if closed:
        ia = np.append(ia, K - 1)
        ib = np.append(ib, -1)
    Pext = np.vstack([P, np.zeros((1, dim))])      # index -1 = fixed origin
    Dext = np.vstack([D[:, :, 0], np.zeros((1, dim))])
    next_ = np.append(ndof, 0)
    offs_ext = np.append(offs, 0)
    diff = Pext[ib] - Pext[ia]
    d = np.linalg.norm(diff, axis=1)
    ok = d > 1e-14
    dsafe = np.where(ok, d, 1.0)
    u = diff / dsafe[:, None]
    Da, Db = Dext[ia], Dext[ib]
    dau = np.einsum("ij,ij->i", Da, u)
    dbu = np.einsum("ij,ij->i", Db, u)
    haa = (np.einsum("ij,ij->i", Da, Da) - dau**2) / dsafe
    hbb = (np.einsum("ij,ij->i", Db, Db) - dbu**2) / dsafe
    hab = -(np.einsum("ij,ij->i", Da, Db) - dau * dbu) / dsafe
    ma = ok & (next_[ia] > 0)
    mb = ok & (next_[ib] > 0)
    mab = ma & mb
    rows = np.concatenate([offs_ext[ia][ma], offs_ext[ib][mb],
                           offs_ext[ia][mab], offs_ext[ib][mab]])
    cols = np.concatenate([offs_ext[ia][ma], offs_ext[ib][mb],
                           offs_ext[ib][mab], offs_ext[ia][mab]])
    vals = np.concatenate([haa[ma], hbb[mb], hab[mab], hab[mab]])
    if len(red.rows["circle"]):
        cg = np.einsum("ij,ij->i", Gp[red.rows["circle"]], curv[red.rows["circle"]])
        rows = np.concatenate([rows, offs[red.rows["circle"]]])
        cols = np.concatenate([cols, offs[red.rows["circle"]]])
        vals = np.concatenate([vals, cg])
    return coo_matrix((vals, (rows, cols)), shape=(red.nvar, red.nvar)).tocsc()


def _assemble_hessian_blocks(red: _Reduced, P, Gp, D, ndof, offs, curv,
                             anchored: bool, closed: bool):
    """General (small-block) assembly used when two-dof blocks are present."""
    from scipy.sparse import coo_matrix

    rows, cols, vals = [], [], []

    def add_block(i, j, block):
        for a in range(ndof[i]):
            for b in range(ndof[j]):
                rows.append(offs[i] + a)
                cols.append(offs[j] + b)
                vals.append(block[a, b])

    legs = []
    if anchored:
        legs.append((-1, 0))
    legs.extend((i, i + 1) for i in range(red.n - 1))
    if closed:
        legs.append((red.n - 1, -1))
    for ia, ib in legs:
        pa = np.zeros(red.dim) if ia < 0 else P[ia]
        pb = np.zeros(red.dim) if ib < 0 else P[ib]
        diff = pb - pa
        d = float(np.linalg.norm(diff))
        if d <= 1e-14:
            continue
        u = diff / d
        M = (np.eye(red.dim) - np.outer(u, u)) / d
        if ia >= 0 and ndof[ia]:
            Da = D[ia][:, :ndof[ia]]
            add_block(ia, ia, Da.T @ M @ Da)
        if ib >= 0 and ndof[ib]:
            Db = D[ib][:, :ndof[ib]]
            add_block(ib, ib, Db.T @ M @ Db)
        if ia >= 0 and ib >= 0 and ndof[ia] and ndof[ib]:
            Da, Db = D[ia][:, :ndof[ia]], D[ib][:, :ndof[ib]]
            cross = -(Da.T @ M @ Db)
            add_block(ia, ib, cross)
            add_block(ib, ia, cross.T)
    if len(red.rows["circle"]):
        cg = np.einsum("ij,ij->i", Gp[red.rows["circle"]], curv[red.rows["circle"]])
        for r, val in zip(red.rows["circle"], cg):
            rows.append(offs[r]); cols.append(offs[r]); vals.append(val)
    return coo_matrix((vals, (rows, cols)), shape=(red.nvar, red.nvar)).tocsc()


def _newton_refine(red: _Reduced, t: np.ndarray, anchored: bool, closed: bool,
                   maxiter: int = 40) -> np.ndarray:
    """Damped Newton on the reduced coordinates with an exact sparse Hessian."""
    from scipy.sparse import identity
    from scipy.sparse.linalg import splu

    lam = 0.0
    L_cur = None
    for _ in range(maxiter):
        P = red.points(t)
        L_cur, Gp = _length_grad(P, anchored, closed)
        g = red.chain(t, Gp)
        if np.max(np.abs(g)) < 1e-13:
            break
        D, ndof, offs, curv = _point_jacobians(red, t)
        H = _assemble_hessian(red, t, P, Gp, D, ndof, offs, curv, anchored, closed)
        step = None
        for _ in range(8):
            try:
                lu = splu(H + lam * identity(red.nvar, format="csc"),
                          diag_pivot_thresh=0.0)
                cand = lu.solve(-g)
                if np.all(np.isfinite(cand)):
                    step = cand
                    break
            except RuntimeError:
                pass
            lam = max(lam * 10.0, 1e-10)
        if step is None:
            break
        alpha = 1.0
        improved = False
        for _ in range(25):
            t_new = t + alpha * step
            L_new, _ = _length_grad(red.points(t_new), anchored, closed)
            if L_new <= L_cur + 1e-15:
                t, improved = t_new, True
                lam = lam / 4.0 if lam > 1e-12 else 0.0
                break
            alpha *= 0.5
        if not improved:
            lam = max(lam * 10.0, 1e-8)
            if lam > 1e4:
                break
    return t


def _common_point(boundaries, p0, tol=1e-13, iters=60):
    """Gauss-Newton for a point on every listed boundary, started at p0."""
    p = np.asarray(p0, dtype=float).copy()
    for _ in range(iters):
        R = np.array([geo._eval(b, p) for b in boundaries])
        J = np.array([geo._grad(b, p) for b in boundaries])
        JtJ = J.T @ J
        if np.linalg.det(JtJ) < 1e-18:
            JtJ = JtJ + 1e-12 * np.eye(len(p))
        step = np.linalg.solve(JtJ, J.T @ R)
        p = p - step
        if np.linalg.norm(step) < tol:
            break
    if max(geo.scaled_residual(b, p) for b in boundaries) > 1e-10:
        return None
    return p


def _merge_kinks(bnds, P, anchored, closed, opts: SolveOptions):
    """Pin clusters of coincident consecutive points to the exact common point
    of their boundaries and re-polish; removes the corner nonsmoothness that
    otherwise caps the achievable precision."""
    if P.shape[1] != 2:
        return tuple(bnds), P
    bnds = list(bnds)
    for _ in range(3):
        legs = np.linalg.norm(np.diff(P, axis=0), axis=1)
        tiny = np.flatnonzero(legs < 1e-6)
        merged_any = False
        # a first/last point sitting on the anchor is the same kind of corner
        ends = ([0] if anchored else []) + ([len(P) - 1] if closed else [])
        for e in ends:
            if (np.linalg.norm(P[e]) < 1e-6
                    and not isinstance(bnds[e], geo.PointTarget)
                    and geo.scaled_residual(bnds[e], np.zeros(2)) < 1e-8):
                q = geo.project(bnds[e], np.zeros(2))
                bnds[e] = geo.PointTarget(tuple(q))
                P[e] = q
                merged_any = True
        if tiny.size == 0:
            if not merged_any:
                return tuple(bnds), P
            P, _ = _polish(tuple(bnds), P, anchored, closed, opts)
            continue
        i = 0
        runs = []
        while i < tiny.size:
            j = i
            while j + 1 < tiny.size and tiny[j + 1] == tiny[j] + 1:
                j += 1
            runs.append(list(range(tiny[i], tiny[j] + 2)))  # point indices
            i = j + 1
        for run in runs:
            group = [bnds[r] for r in run]
            if all(isinstance(b, geo.PointTarget) for b in group):
                continue
            q = _common_point(group, P[run].mean(axis=0))
            if q is None:
                continue
            for r in run:
                bnds[r] = geo.PointTarget(tuple(q))
                P[r] = q
            merged_any = True
        if not merged_any:
            return tuple(bnds), P
        P, _ = _polish(tuple(bnds), P, anchored, closed, opts)
    return tuple(bnds), P


def _penalty_phase(program: _ResidualProgram, P0, anchored, closed, opts: SolveOptions):
    """Quadratic penalty continuation on raw coordinates until near-feasible."""
    P = P0.copy()
    mu = opts.penalty_init
    stages = 0
    while stages < opts.max_outer:
        scale = np.maximum(np.linalg.norm(program.residuals(P)[1], axis=1), geo.GRAD_FLOOR)
        w = mu / scale**2

        def obj(x):
            Q = x.reshape(P.shape)
            L, Gl = _length_grad(Q, anchored, closed)
            F, Gf = program.residuals(Q)
            pen = float(np.sum(w * F * F))
            Gp = Gl + (2.0 * w * F)[:, None] * Gf
            return L + pen, Gp.ravel()

        res = minimize(obj, P.ravel(), jac=True, method="L-BFGS-B",
                       options=dict(maxiter=250, ftol=1e-14, gtol=1e-10, maxcor=20))
        P = res.x.reshape(P.shape)
        stages += 1
        if program.scaled(P).max() <= math.sqrt(opts.feas_tol) or mu > 1e9:
            break
        mu *= opts.penalty_growth
    return P


def resolve_branches(inst: Instance, points, opts: SolveOptions | None = None, order=None):
    """Factor choice per point for product boundaries.

    Nearest factor by scaled residual; when the total number of assignments is
    within the branch budget, every assignment is solved and the shortest
    feasible one wins.
    """
    opts = opts or SolveOptions()
    ordered = _Ordered(inst, order if order is not None else range(inst.size))
    P = np.asarray(points, dtype=float)
    combos = 1
    for b in ordered.boundaries:
        if isinstance(b, geo.Product):
            combos *= len(b.factors)
            if combos > opts.branch_budget:
                break
    if 1 < combos <= opts.branch_budget:
        choices = [range(len(b.factors)) if isinstance(b, geo.Product) else (None,)
                   for b in ordered.boundaries]
        best, best_len = None, np.inf
        for assign in itertools.product(*choices):
            bnds = _apply_branches(ordered.boundaries, assign)
            Pa = np.array([geo.project(b, p) for b, p in zip(bnds, P)])
            Pa, L = _polish(bnds, Pa, inst.anchored, inst.closed, opts)
            if L < best_len:
                best, best_len = assign, L
        return tuple(best)
    return tuple(_choose_nearest_branch(b, p) for b, p in zip(ordered.boundaries, P))


def solve_fixed_order(inst: Instance, order, opts: SolveOptions | None = None, *,
                      branch_assignment=None, initial_points=None) -> Solution:
    """Best-of-multistart local minimum with every point on its assigned boundary."""
    opts = opts or SolveOptions()
    ordered = _Ordered(inst, order)
    perm = ordered.indices
    program = _ResidualProgram(ordered.boundaries, inst.dimension)
    has_products = any(isinstance(b, geo.Product) for b in ordered.boundaries)
    seeds = _build_seeds(inst, ordered, opts, initial_points)

    def run_start(k: int):
        P = seeds[k]
        assign = branch_assignment
        if has_products and assign is None:
            if inst.seed_points is None and initial_points is None:
                P = _penalty_phase(program, P, inst.anchored, inst.closed, opts)
            assign = tuple(_choose_nearest_branch(b, p)
                           for b, p in zip(ordered.boundaries, P))
        bnds = _apply_branches(ordered.boundaries, assign) if assign else ordered.boundaries
        P = np.array([geo.project(b, p) for b, p in zip(bnds, P)])
        P, L = _polish(bnds, P, inst.anchored, inst.closed, opts, newton=False)
        if has_products and branch_assignment is None:
            # branch stabilisation: re-pick nearest factors, re-polish if changed
            for _ in range(3):
                new_assign = tuple(_choose_nearest_branch(b, p)
                                   for b, p in zip(ordered.boundaries, P))
                if new_assign == assign:
                    break
                assign = new_assign
                bnds = _apply_branches(ordered.boundaries, assign)
                P = np.array([geo.project(b, p) for b, p in zip(bnds, P)])
                P, L = _polish(bnds, P, inst.anchored, inst.closed, opts)
        P_pre, L_pre = P, L
        bnds_eff, P = _merge_kinks(bnds, P.copy(), inst.anchored, inst.closed, opts)
        P, L = _polish(bnds_eff, P, inst.anchored, inst.closed, opts)
        if L > L_pre + 1e-12:  # a merge guessed wrong; keep the unmerged result
            P, L = P_pre, L_pre
        resid = float(program.scaled(P).max())
        feasible = resid <= opts.feas_tol and np.all(np.isfinite(P))
        return P, L, resid, feasible, assign

    if opts.threads > 1 and opts.multistart > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=opts.threads) as pool:
            results = list(pool.map(run_start, range(opts.multistart)))
    else:
        results = [run_start(k) for k in range(opts.multistart)]

    best = None
    best_key = None
    for P, L, resid, feasible, assign in results:  # ordered reduction by start index
        key = (not feasible, round(L, 12), tuple(np.round(P.ravel(), 12)))
        if best_key is None or key < best_key:
            best_key = key
            best = (P, L, resid, feasible, assign)

    P, L, resid, feasible, assign = best
    per_point = tuple(float(r) for r in program.scaled(P))
    poly = Polyline(tuple(map(tuple, P)), anchored=inst.anchored, closed=inst.closed)
    sol = Solution(
        polyline=poly, order=tuple(perm), length=float(length(poly).total),
        max_residual=resid, converged=bool(feasible),
        branch_assignment=assign if assign and any(a is not None for a in assign) else None,
        residuals=per_point, instance_name=inst.name, seed=opts.seed,
    )
    if not feasible:
        raise NonConvergenceError(
            f"no start reached feasibility (best residual {resid:.3e})", best=sol)
    return sol


def solve_branch_strategies(inst: Instance, opts: SolveOptions | None = None,
                            order=None) -> list[Solution]:
    """One solution per uniform factor choice of a product family.

    Each strategy starts from the nearest point of its own factor (seen from the
    anchor), which is how the qualitatively different optima of a union-of-sets
    boundary are told apart.
    """
    opts = opts or SolveOptions()
    order = order if order is not None else (inst.order_hint or range(inst.size))
    ordered = _Ordered(inst, order)
    counts = {len(b.factors) for b in ordered.boundaries if isinstance(b, geo.Product)}
    if len(counts) != 1:
        raise ValueError("instance is not a uniform product family")
    nfac = counts.pop()
    anchor0 = np.zeros(inst.dimension)
    out = []
    for j in range(nfac):
        seeds = np.array([
            _seed_projection(b.factors[j] if isinstance(b, geo.Product) else b,
                             anchor0, anchor0)
            for b in ordered.boundaries])
        out.append(solve_fixed_order(inst, order, opts,
                                     branch_assignment=(j,) * inst.size,
                                     initial_points=seeds))
    return out


def solve_self_referential(instance_builder, order, opts: SolveOptions | None = None,
                           gamma0: float = 0.0, n: int | None = None) -> Solution:
    """Fixed-point loop for families whose sweep depends on the first point.

    instance_builder(gamma) must return the family for that angle estimate; the
    estimate is refreshed from the solved first point's ratio arctan until it
    moves less than 1e-10 (or 100 iterations, which raises).
    """
    opts = opts or SolveOptions()
    if instance_builder is None:
        if n is None:
            raise ValueError("need either a builder or an orientation count")
        instance_builder = lambda g: build_zalgaller(n, g)
    gamma = float(gamma0)
    warm = None
    sol = None
    for it in range(1, 101):
        inst = instance_builder(gamma)
        iter_opts = opts if warm is None else replace(opts, multistart=1)
        sol = solve_fixed_order(inst, order if order is not None else range(inst.size),
                                iter_opts, initial_points=warm)
        warm = sol.points()
        x0, y0 = sol.points()[0][:2]
        g_new = math.atan(y0 / x0) if x0 != 0.0 else math.copysign(math.pi / 2.0, y0)
        delta = abs(g_new - gamma)
        gamma = g_new
        if delta < 1e-10:
            return replace(sol, iterations=it)
    raise NonConvergenceError(
        f"angle estimate still moving after 100 iterations (last delta {delta:.2e})",
        best=replace(sol, iterations=100))
