"""Serialization: SVG figures, CSV tables, and the order-model text format.

Every emitter is deterministic byte-for-byte for identical inputs; numbers are
printed with 17 significant digits so binary64 values survive a round trip.
"""

from __future__ import annotations

import io
import math
import re

import numpy as np

from . import geometry as geo
from .analysis import ConvergenceReport, WormBound
from .nlp_solver import Solution
from .order_search import MtzModel
from .scenario import Instance

_F = "{:.17g}"


def _fmt(x: float) -> str:
    return _F.format(float(x))


# --------------------------------------------------------------------------
# CSV (RFC 4180)

def _csv_field(v) -> str:
    s = _fmt(v) if isinstance(v, float) else str(v)
    if any(ch in s for ch in ',"\r\n'):
        s = '"' + s.replace('"', '""') + '"'
    return s


def _csv_rows(rows) -> str:
    return "\r\n".join(",".join(_csv_field(v) for v in row) for row in rows) + "\r\n"


def to_csv(obj) -> str:
    """Solution -> one row per escape point; reports -> one row per entry."""
    if isinstance(obj, Solution):
        dim3 = obj.polyline.dim == 3
        head = ["order_index", "boundary_index", "x", "y"] + (["z"] if dim3 else []) \
            + ["residual"]
        rows = [head]
        pts = obj.points()
        res = obj.residuals if obj.residuals else (float(obj.max_residual),) * len(obj.order)
        for pos, h in enumerate(obj.order):
            coords = [float(c) for c in pts[pos]]
            rows.append([pos, h, *coords, float(res[pos])])
        return _csv_rows(rows)
    if isinstance(obj, ConvergenceReport):
        rows = [["n", "length", "max_residual", "seconds"]]
        rows += [[n, float(L), float(r), float(t)] for (n, L, r, t) in obj.entries]
        return _csv_rows(rows)
    if isinstance(obj, WormBound):
        rows = [["scenario", "area", "escape_length", "ratio"],
                [obj.scenario, obj.area, obj.escape_length, obj.ratio]]
        return _csv_rows(rows)
    if isinstance(obj, (list, tuple)):  # generic (value, length) sweep table
        rows = [["value", "length"]] + [[float(a), float(b)] for a, b in obj]
        return _csv_rows(rows)
    raise TypeError(f"cannot serialize {type(obj).__name__} to CSV")


def parse_csv(text: str) -> list:
    """Minimal RFC-4180 reader returning rows of strings."""
    rows, fieldbuf, row, quoted = [], [], [], False
    i = 0
    while i < len(text):
        ch = text[i]
        if quoted:
            if ch == '"':
                if i + 1 < len(text) and text[i + 1] == '"':
                    fieldbuf.append('"')
                    i += 1
                else:
                    quoted = False
            else:
                fieldbuf.append(ch)
        elif ch == '"':
            quoted = True
        elif ch == ",":
            row.append("".join(fieldbuf))
            fieldbuf = []
        elif ch == "\r" and i + 1 < len(text) and text[i + 1] == "\n":
            row.append("".join(fieldbuf))
            rows.append(row)
            fieldbuf, row = [], []
            i += 1
        elif ch == "\n":
            row.append("".join(fieldbuf))
            rows.append(row)
            fieldbuf, row = [], []
        else:
            fieldbuf.append(ch)
        i += 1
    if fieldbuf or row:
        row.append("".join(fieldbuf))
        rows.append(row)
    return rows


# --------------------------------------------------------------------------
# SVG

_STYLE = {
    "boundary": 'fill="none" stroke="#cc0000" stroke-width="0.01"',
    "path": 'fill="none" stroke="#000000" stroke-width="0.015"',
    "start": 'fill="#000000"',
    "escape": 'fill="#cc0000"',
}


def _svg_bounds(inst: Instance, pts: np.ndarray, anchor: np.ndarray):
    xs, ys = [anchor[0]], [anchor[1]]
    if pts.size:
        xs += list(pts[:, 0])
        ys += list(pts[:, 1])
    for b in inst.boundaries:
        for f in (b.factors if isinstance(b, geo.Product) else (b,)):
            if isinstance(f, geo.Circle):
                xs += [f.center[0] - f.radius, f.center[0] + f.radius]
                ys += [f.center[1] - f.radius, f.center[1] + f.radius]
            elif isinstance(f, geo.PointTarget):
                xs.append(f.point[0]); ys.append(f.point[1])
            elif isinstance(f, geo.Segment):
                xs += [f.a[0], f.b[0]]; ys += [f.a[1], f.b[1]]
            elif isinstance(f, geo.Line):
                q = f.offset * f.normal()
                xs.append(q[0]); ys.append(q[1])
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    span = max(x1 - x0, y1 - y0, 1e-6)
    pad = 0.05 * span
    return x0 - pad, y0 - pad, (x1 - x0) + 2 * pad, (y1 - y0) + 2 * pad


def _svg_boundary(f, bounds) -> list:
    x0, y0, w, h = bounds
    out = []
    if isinstance(f, geo.Product):
        for sub in f.factors:
            out += _svg_boundary(sub, bounds)
        return out
    if isinstance(f, geo.Circle):
        out.append(f'<circle cx="{_fmt(f.center[0])}" cy="{_fmt(f.center[1])}" '
                   f'r="{_fmt(f.radius)}" {_STYLE["boundary"]}/>')
    elif isinstance(f, geo.PointTarget):
        out.append(f'<circle cx="{_fmt(f.point[0])}" cy="{_fmt(f.point[1])}" '
                   f'r="0.02" {_STYLE["escape"]}/>')
    elif isinstance(f, geo.Segment):
        out.append(f'<line x1="{_fmt(f.a[0])}" y1="{_fmt(f.a[1])}" '
                   f'x2="{_fmt(f.b[0])}" y2="{_fmt(f.b[1])}" {_STYLE["boundary"]}/>')
    elif isinstance(f, geo.Line):
        # clip the infinite line against the canvas diagonal extent
        n, v = f.normal(), f.tangent()
        mid = f.offset * n
        ext = math.hypot(w, h)
        a, b = mid - ext * v, mid + ext * v
        out.append(f'<line x1="{_fmt(a[0])}" y1="{_fmt(a[1])}" '
                   f'x2="{_fmt(b[0])}" y2="{_fmt(b[1])}" {_STYLE["boundary"]}/>')
    return out


def to_svg(solution: Solution | None, inst: Instance) -> str:
    """SVG 1.1 scene: red boundaries, black escape polyline, red escape points."""
    if solution is not None and not solution.converged:
        raise ValueError("refusing to draw a non-converged solution")
    anchor = np.asarray(inst.start_anchor[:2] if inst.start_anchor else (0.0, 0.0))
    pts = solution.points() if solution is not None else np.zeros((0, 2))
    pts2 = pts[:, :2] + anchor if pts.size else pts.reshape(0, 2)
    x0, y0, w, h = _svg_bounds(inst, pts2, anchor)
    buf = io.StringIO()
    buf.write('<?xml version="1.0" encoding="UTF-8"?>\n')
    buf.write(f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
              f'width="600" height="{_fmt(600 * h / w)}" '
              f'viewBox="{_fmt(x0)} {_fmt(y0)} {_fmt(w)} {_fmt(h)}">\n')
    # flip y so the geometry reads with y pointing up
    buf.write(f'<g transform="translate(0 {_fmt(2 * y0 + h)}) scale(1 -1)">\n')
    for b in inst.boundaries:
        for ln in _svg_boundary(b, (x0, y0, w, h)):
            buf.write(ln + "\n")
    if pts2.shape[0]:
        coords = " ".join(f"{_fmt(p[0])},{_fmt(p[1])}" for p in pts2)
        chain = (f"{_fmt(anchor[0])},{_fmt(anchor[1])} " if inst.anchored else "") + coords
        if inst.closed:
            chain += f" {_fmt(anchor[0])},{_fmt(anchor[1])}"
        buf.write(f'<polyline points="{chain}" {_STYLE["path"]}/>\n')
        for p in pts2:
            buf.write(f'<circle cx="{_fmt(p[0])}" cy="{_fmt(p[1])}" r="0.012" '
                      f'{_STYLE["escape"]}/>\n')
    if inst.anchored:
        buf.write(f'<circle cx="{_fmt(anchor[0])}" cy="{_fmt(anchor[1])}" r="0.018" '
                  f'{_STYLE["start"]}/>\n')
    buf.write("</g>\n</svg>\n")
    return buf.getvalue()


# --------------------------------------------------------------------------
# order-model text (documented in docs/mtz-format.md)

def _boundary_terms(b) -> str:
    if isinstance(b, geo.Line):
        return f"line {_fmt(b.angle)} {_fmt(b.offset)}"
    if isinstance(b, geo.Circle):
        return f"circle {_fmt(b.center[0])} {_fmt(b.center[1])} {_fmt(b.radius)}"
    if isinstance(b, geo.PointTarget):
        return f"point {_fmt(b.point[0])} {_fmt(b.point[1])}"
    if isinstance(b, geo.Segment):
        return (f"segment {_fmt(b.a[0])} {_fmt(b.a[1])} {_fmt(b.b[0])} {_fmt(b.b[1])}")
    if isinstance(b, geo.Plane3):
        return (f"plane {_fmt(b.normal[0])} {_fmt(b.normal[1])} {_fmt(b.normal[2])} "
                f"{_fmt(b.offset)}")
    if isinstance(b, geo.Product):
        return "product " + " | ".join(_boundary_terms(f) for f in b.factors)
    raise TypeError(type(b).__name__)


def to_mtz_text(model: MtzModel, inst: Instance | None = None) -> str:
    """Emit the populated order model; refuses structurally invalid models."""
    model.validate()
    k = model.size
    buf = io.StringIO()
    buf.write(f"MTZ K={k} anchored={int(model.anchored)}\n")
    buf.write("VARS\n")
    for i in range(k):
        for j in range(k):
            buf.write(f"b[{i}][{j}] binary\n")
    for i in range(k):
        buf.write(f"u[{i}] in [0,{k - 1}]\n")
    for i in range(k):
        buf.write(f"x[{i}] free\ny[{i}] free\n")
    for i in range(k):
        for j in range(k):
            buf.write(f"c[{i}][{j}] >= 0\n")
    buf.write("OBJ\n")
    buf.write("c[0][0] + sum_ij b[i][j]*c[i][j]\n")
    buf.write("QCONS\n")
    buf.write("c[i][j]^2 = (x[i]-x[j])^2 + (y[i]-y[j])^2 for all i,j\n")
    for i, b in enumerate(model.boundaries):
        buf.write(f"on[{i}] {_boundary_terms(b)}\n")
    buf.write("LCONS\n")
    buf.write("sum_j b[i][j] = 1 for all i\n")
    buf.write("sum_i b[i][j] = 1 for all j\n")
    buf.write("b[i][i] = 0 for all i\n")
    buf.write(f"u[i] - u[j] + 1 <= {k}*(1 - b[i][j]) for i,j >= 1\n")
    buf.write("SOLUTION\n")
    for i, row in enumerate(model.b):
        buf.write("b " + " ".join(str(int(v)) for v in row) + "\n")
    buf.write("u " + " ".join(_fmt(v) for v in model.u) + "\n")
    for i, p in enumerate(model.points):
        buf.write("p " + " ".join(_fmt(c) for c in p) + "\n")
    for row in model.c:
        buf.write("c " + " ".join(_fmt(v) for v in row) + "\n")
    buf.write(f"OBJVALUE {_fmt(model.objective)}\n")
    return buf.getvalue()


_BND_PARSERS = {
    "line": lambda t: geo.Line(float(t[0]), float(t[1])),
    "circle": lambda t: geo.Circle((float(t[0]), float(t[1])), float(t[2])),
    "point": lambda t: geo.PointTarget((float(t[0]), float(t[1]))),
    "segment": lambda t: geo.Segment((float(t[0]), float(t[1])),
                                     (float(t[2]), float(t[3]))),
    "plane": lambda t: geo.Plane3((float(t[0]), float(t[1]), float(t[2])), float(t[3])),
}


def _parse_boundary(spec: str):
    kind, *rest = spec.split()
    if kind == "product":
        parts = spec[len("product"):].split("|")
        return geo.Product(tuple(_parse_boundary(p.strip()) for p in parts))
    return _BND_PARSERS[kind](rest)


def parse_mtz_text(text: str) -> dict:
    """Read back an emitted model file (header, boundaries, embedded solution)."""
    lines = text.splitlines()
    m = re.match(r"MTZ K=(\d+) anchored=([01])", lines[0])
    if not m:
        raise ValueError("not an order-model file")
    k = int(m.group(1))
    anchored = bool(int(m.group(2)))
    bounds, brows, u, pts, crows, objval = [], [], None, [], [], None
    for ln in lines[1:]:
        if ln.startswith("on["):
            bounds.append(_parse_boundary(ln.split("]", 1)[1].strip()))
        elif ln.startswith("b ") and len(brows) < k:
            brows.append([int(v) for v in ln.split()[1:]])
        elif ln.startswith("u "):
            u = [float(v) for v in ln.split()[1:]]
        elif ln.startswith("p "):
            pts.append([float(v) for v in ln.split()[1:]])
        elif ln.startswith("c ") and len(crows) < k:
            crows.append([float(v) for v in ln.split()[1:]])
        elif ln.startswith("OBJVALUE"):
            objval = float(ln.split()[1])
    if u is None or objval is None or len(brows) != k:
        raise ValueError("model file is missing solution sections")
    return {"k": k, "anchored": anchored, "boundaries": tuple(bounds),
            "b": np.array(brows), "u": np.array(u), "points": np.array(pts),
            "c": np.array(crows), "objective": objval}


def check_mtz_solution(text: str, feas_tol: float = 1e-6, obj_tol: float = 1e-9) -> dict:
    """Bundled checker: validate the embedded solution of a model file.

    Verifies assignment structure, auxiliary bounds, subtour inequalities,
    distance consistency, boundary residuals, and recomputes the objective.
    """
    data = parse_mtz_text(text)
    k, B, u = data["k"], data["b"], data["u"]
    pts, C = data["points"], data["c"]
    problems = []
    if not (B.sum(axis=0) == 1).all() or not (B.sum(axis=1) == 1).all():
        problems.append("assignment rows/columns broken")
    if np.trace(B) != 0:
        problems.append("self loop present")
    if (u < -1e-9).any() or (u > k - 1 + 1e-9).any():
        problems.append("auxiliaries out of range")
    for i in range(1, k):
        for j in range(1, k):
            if i != j and u[i] - u[j] + 1 > k * (1 - B[i, j]) + 1e-9:
                problems.append(f"subtour inequality broken at ({i},{j})")
    diff = pts[:, None, :] - pts[None, :, :]
    dmat = np.linalg.norm(diff, axis=2)
    if np.max(np.abs(dmat - C)) > feas_tol:
        problems.append("distance terms do not match the points")
    for i, b in enumerate(data["boundaries"]):
        r = geo.scaled_residual(b, pts[i])
        if r > feas_tol:
            problems.append(f"point {i} off its boundary by {r:.2e}")
    anchor0 = float(np.linalg.norm(pts[0])) if data["anchored"] else 0.0
    recomputed = anchor0 + float((B * C).sum())
    if abs(recomputed - data["objective"]) > obj_tol:
        problems.append(
            f"objective mismatch: stated {data['objective']!r}, recomputed {recomputed!r}")
    return {"feasible": not problems, "problems": problems,
            "objective": recomputed, "stated_objective": data["objective"]}
