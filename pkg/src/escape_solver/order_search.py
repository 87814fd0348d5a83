"""Search over boundary visiting orders (and curve partitions for opaque sets).

Exhaustive enumeration, Held-Karp dynamic programming, first-improvement 2-opt
and depth-first branch-and-bound with a spanning-tree bound all operate on
positions frozen from a preliminary continuous solve; accepted orders are then
re-solved continuously.  A master alternating loop couples the two stages.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np

from .nlp_solver import NonConvergenceError, SolveOptions, Solution, solve_fixed_order
from .scenario import Instance


@dataclass(frozen=True)
class OrderPlan:
    perm: tuple

    def __post_init__(self):
        perm = tuple(int(i) for i in self.perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError("order is not a permutation")
        object.__setattr__(self, "perm", perm)

    def __len__(self) -> int:
        return len(self.perm)


class SizeGuardError(ValueError):
    """Problem too large for the requested exact search."""


@dataclass(frozen=True)
class MtzModel:
    """Cycle-based order model: binary successor matrix, position auxiliaries,
    pairwise distance terms, and the anchored objective value."""

    b: tuple            # K x K 0/1 rows
    u: tuple            # K reals in [0, K-1]
    c: tuple            # K x K distances
    points: tuple       # K solved points (x, y[, z])
    boundaries: tuple   # boundary expressions, model index order
    objective: float
    anchored: bool = True

    @property
    def size(self) -> int:
        return len(self.u)

    def validate(self) -> None:
        k = self.size
        B = np.asarray(self.b)
        if B.shape != (k, k) or not np.isin(B, (0, 1)).all():
            raise ValueError("b must be a 0/1 matrix")
        if not (B.sum(axis=0) == 1).all() or not (B.sum(axis=1) == 1).all():
            raise ValueError("b rows/columns must each sum to one")
        if np.trace(B) != 0:
            raise ValueError("b has a self loop")
        u = np.asarray(self.u)
        if (u < -1e-9).any() or (u > k - 1 + 1e-9).any():
            raise ValueError("u out of [0, K-1]")
        # subtour elimination over the non-depot nodes, coefficient = node count
        for i in range(1, k):
            for j in range(1, k):
                if i != j and u[i] - u[j] + 1 > k * (1 - B[i, j]) + 1e-9:
                    raise ValueError(f"subtour constraint violated at ({i},{j})")


@dataclass(frozen=True)
class PartitionPlan:
    subsets: tuple                 # disjoint index tuples covering the instance
    orders: tuple                  # per-subset visiting orders (local indices)
    degenerate: bool = False

    def __post_init__(self):
        flat = sorted(i for s in self.subsets for i in s)
        if not self.subsets or any(len(s) == 0 for s in self.subsets):
            raise ValueError("subsets must be nonempty")
        if flat != list(range(len(flat))):
            raise ValueError("subsets must partition the index range")


def _frozen_geometry(inst: Instance, sol: Solution):
    """Distance matrix (and anchor legs) in boundary-index space for solved points."""
    pts = np.zeros((inst.size, inst.dimension))
    arr = sol.points()
    for pos, h in enumerate(sol.order):
        pts[h] = arr[pos]
    diff = pts[:, None, :] - pts[None, :, :]
    dmat = np.linalg.norm(diff, axis=2)
    anchor = np.linalg.norm(pts, axis=1) if inst.anchored else np.zeros(inst.size)
    return pts, dmat, anchor


def _order_cost(order, dmat, anchor, closed=False) -> float:
    total = anchor[order[0]]
    for a, b in zip(order, order[1:]):
        total += dmat[a, b]
    if closed:
        total += anchor[order[-1]]
    return float(total)


def exhaustive(inst: Instance, opts: SolveOptions | None = None) -> Solution:
    """Continuous solve of every visiting order; global over the order space."""
    opts = opts or SolveOptions()
    if inst.size > 9:
        raise SizeGuardError(f"{inst.size}! orders is beyond the exhaustive guard (K <= 9)")
    best = None
    for perm in itertools.permutations(range(inst.size)):
        try:
            sol = solve_fixed_order(inst, perm, opts)
        except NonConvergenceError:
            continue
        if best is None or sol.length < best.length - 1e-15:
            best = sol
    if best is None:
        raise NonConvergenceError("no order produced a feasible solution")
    return best


def _held_karp_order(dmat, anchor, free_start: bool):
    """Exact open-path order for fixed positions via subset DP."""
    k = dmat.shape[0]
    full = (1 << k) - 1
    C = {}
    for j in range(k):
        C[(1 << j, j)] = (0.0 if free_start else float(anchor[j]), None)
    for mask in range(1, full + 1):
        for j in range(k):
            if not mask & (1 << j) or (mask, j) not in C:
                continue
            base, _ = C[(mask, j)]
            for v in range(k):
                if mask & (1 << v):
                    continue
                nm = mask | (1 << v)
                cand = base + dmat[j, v]
                if (nm, v) not in C or cand < C[(nm, v)][0] - 1e-15:
                    C[(nm, v)] = (cand, j)
    end = min(range(k), key=lambda j: C[(full, j)][0])
    order = [end]
    mask = full
    while C[(mask, order[-1])][1] is not None:
        prev = C[(mask, order[-1])][1]
        mask ^= 1 << order[-1]
        order.append(prev)
    return tuple(reversed(order)), C[(full, end)][0]


def held_karp(inst: Instance, opts: SolveOptions | None = None,
              base_order=None) -> Solution:
    """Optimal order for positions frozen from a preliminary solve, then re-solved."""
    opts = opts or SolveOptions()
    if inst.size > 20:
        raise SizeGuardError("subset DP needs K <= 20")
    base = solve_fixed_order(inst, base_order if base_order is not None
                             else (inst.order_hint or range(inst.size)), opts)
    _, dmat, anchor = _frozen_geometry(inst, base)
    order, _ = _held_karp_order(dmat, anchor, free_start=not inst.anchored)
    sol = solve_fixed_order(inst, order, opts)
    return sol if sol.length <= base.length else base


def two_opt(inst: Instance, start_order, opts: SolveOptions | None = None) -> Solution:
    """First-improvement 2-opt on the order, re-solving after each accepted move."""
    opts = opts or SolveOptions()
    order = tuple(getattr(start_order, "perm", start_order))
    sol = solve_fixed_order(inst, order, opts)
    for _ in range(opts.max_outer):
        _, dmat, anchor = _frozen_geometry(inst, sol)
        order = sol.order
        cost = _order_cost(order, dmat, anchor, inst.closed)
        improved = None
        k = len(order)
        for i in range(k - 1):
            for j in range(i + 1, k):
                cand = order[:i] + order[i:j + 1][::-1] + order[j + 1:]
                if _order_cost(cand, dmat, anchor, inst.closed) < cost - 1e-12:
                    improved = cand
                    break
            if improved:
                break
        if improved is None:
            break
        new_sol = solve_fixed_order(inst, improved, opts)
        if new_sol.length >= sol.length - 1e-15:
            break
        sol = new_sol
    return sol


def _mst_weight(dmat, nodes) -> float:
    """Prim's spanning-tree weight over a node subset (order lower bound)."""
    nodes = list(nodes)
    if len(nodes) <= 1:
        return 0.0
    in_tree = {nodes[0]}
    rest = set(nodes[1:])
    key = {v: dmat[nodes[0], v] for v in rest}
    total = 0.0
    while rest:
        v = min(rest, key=lambda x: key[x])
        total += key[v]
        rest.remove(v)
        in_tree.add(v)
        for w in rest:
            if dmat[v, w] < key[w]:
                key[w] = dmat[v, w]
    return total


def mtz_branch_and_bound(inst: Instance, opts: SolveOptions | None = None) -> tuple:
    """Depth-first order search with a spanning-tree bound on frozen positions.

    Returns (solution, model): the re-solved best order and the populated
    order-model for export.
    """
    opts = opts or SolveOptions()
    if inst.size > 12:
        raise SizeGuardError("branch and bound guard is K <= 12")
    base = solve_fixed_order(inst, inst.order_hint or range(inst.size), opts)
    _, dmat, anchor = _frozen_geometry(inst, base)
    k = inst.size

    best_order = base.order
    best_cost = _order_cost(base.order, dmat, anchor, inst.closed)

    def dfs(prefix, used, cost):
        nonlocal best_order, best_cost
        if len(prefix) == k:
            total = cost + (anchor[prefix[-1]] if inst.closed else 0.0)
            if total < best_cost - 1e-15:
                best_cost, best_order = total, tuple(prefix)
            return
        remaining = [v for v in range(k) if v not in used]
        bound_nodes = remaining + ([prefix[-1]] if prefix else [])
        if cost + _mst_weight(dmat, bound_nodes) >= best_cost - 1e-12:
            return
        for v in remaining:
            step = dmat[prefix[-1], v] if prefix else anchor[v]
            prefix.append(v)
            used.add(v)
            dfs(prefix, used, cost + step)
            prefix.pop()
            used.remove(v)

    dfs([], set(), 0.0)
    sol = solve_fixed_order(inst, best_order, opts)
    if sol.length > base.length:
        sol = base
    model = build_mtz_model(inst, sol)
    model.validate()
    return sol, model


def build_mtz_model(inst: Instance, sol: Solution) -> MtzModel:
    """Populate the cycle model (successor matrix, positions, distances) from a solution."""
    k = inst.size
    pts, dmat, anchor = _frozen_geometry(inst, sol)
    B = np.zeros((k, k), dtype=int)
    cycle = list(sol.order)
    for a, b in zip(cycle, cycle[1:] + cycle[:1]):
        B[a, b] = 1
    # positions measured along the cycle starting from node 0 (the depot)
    start = cycle.index(0)
    rotated = cycle[start:] + cycle[:start]
    u = np.zeros(k)
    for pos, node in enumerate(rotated):
        u[node] = pos
    objective = float(anchor[0] + sum(dmat[a, b] for a, b in zip(cycle, cycle[1:] + cycle[:1])))
    return MtzModel(
        b=tuple(map(tuple, B)), u=tuple(map(float, u)), c=tuple(map(tuple, dmat)),
        points=tuple(map(tuple, pts)), boundaries=inst.boundaries,
        objective=objective, anchored=inst.anchored)


def solve_alternating(inst: Instance, opts: SolveOptions | None = None) -> Solution:
    """Block-coordinate master loop: positions at fixed order, then order at
    fixed positions, until neither side improves."""
    opts = opts or SolveOptions()
    order = tuple(inst.order_hint) if inst.order_hint is not None else tuple(range(inst.size))
    sol = solve_fixed_order(inst, order, opts)
    rounds = 1
    for _ in range(opts.max_outer):
        _, dmat, anchor = _frozen_geometry(inst, sol)
        if inst.size <= 20:
            new_order, _ = _held_karp_order(dmat, anchor, free_start=not inst.anchored)
        else:
            new_order = _two_opt_order(sol.order, dmat, anchor, inst.closed)
        if tuple(new_order) == sol.order:
            break
        if _order_cost(new_order, dmat, anchor, inst.closed) >= \
           _order_cost(sol.order, dmat, anchor, inst.closed) - 1e-12:
            break
        new_sol = solve_fixed_order(inst, new_order, opts)
        rounds += 1
        if new_sol.length >= sol.length - max(opts.step_tol * sol.length, 1e-14):
            break
        sol = new_sol
    return replace(sol, iterations=rounds)


def _two_opt_order(order, dmat, anchor, closed):
    order = tuple(order)
    cost = _order_cost(order, dmat, anchor, closed)
    improved = True
    while improved:
        improved = False
        k = len(order)
        for i in range(k - 1):
            for j in range(i + 1, k):
                cand = order[:i] + order[i:j + 1][::-1] + order[j + 1:]
                c = _order_cost(cand, dmat, anchor, closed)
                if c < cost - 1e-12:
                    order, cost = cand, c
                    improved = True
                    break
            if improved:
                break
    return order


# --------------------------------------------------------------------------
# opaque-set partitions

def _sub_instance(inst: Instance, subset) -> Instance:
    idx = tuple(subset)
    return replace(
        inst,
        boundaries=tuple(inst.boundaries[i] for i in idx),
        angles=tuple(inst.angles[i] for i in idx),
        start_index=tuple(inst.start_index[i] for i in idx),
        orient_index=tuple(inst.orient_index[i] for i in idx),
        order_hint=None, seed_points=(
            tuple(inst.seed_points[i] for i in idx) if inst.seed_points else None),
    )


def _partitions_into(items, p):
    """All set partitions of `items` into exactly p nonempty blocks."""
    items = list(items)
    if p == 1:
        yield [items]
        return
    if len(items) == p:
        yield [[i] for i in items]
        return
    head, rest = items[0], items[1:]
    for part in _partitions_into(rest, p - 1):
        yield [[head]] + part
    for part in _partitions_into(rest, p):
        for i in range(len(part)):
            yield part[:i] + [[head] + part[i]] + part[i + 1:]


def _solve_subset(inst, subset, opts, cache):
    key = tuple(sorted(subset))
    if key not in cache:
        sub = _sub_instance(inst, key)
        if sub.size == 1:
            sol = solve_fixed_order(sub, (0,), opts)
        else:
            sol = solve_alternating(sub, opts)
        cache[key] = sol
    return cache[key]


def partition_search(inst: Instance, p: int, opts: SolveOptions | None = None):
    """Split an opaque family into p curves; minimizes the summed curve lengths.

    Exhaustive over set partitions up to 10 boundaries, seeded local moves
    (relocate + swap, 200 stale moves) beyond.  Returns (plan, solutions, total).
    """
    opts = opts or SolveOptions()
    if inst.mode != "opaque":
        raise ValueError("partition search applies to opaque families")
    if p < 1 or p > inst.size:
        raise ValueError("need 1 <= p <= number of boundaries")
    cache: dict = {}

    def total_of(blocks):
        sols = [_solve_subset(inst, blk, opts, cache) for blk in blocks]
        return sum(s.length for s in sols), sols

    if inst.size <= 10:
        best_blocks, best_total, best_sols = None, np.inf, None
        for blocks in _partitions_into(range(inst.size), p):
            total, sols = total_of([tuple(b) for b in blocks])
            if total < best_total - 1e-15:
                best_blocks, best_total, best_sols = blocks, total, sols
    else:
        rng = np.random.default_rng(opts.seed)
        blocks = [list(chunk) for chunk in np.array_split(np.arange(inst.size), p)]
        best_blocks = [list(b) for b in blocks]
        best_total, best_sols = total_of([tuple(b) for b in blocks])
        stale = 0
        while stale < 200:
            cand = [list(b) for b in best_blocks]
            if rng.random() < 0.5 and inst.size > p:
                donors = [i for i, b in enumerate(cand) if len(b) > 1]
                src = int(rng.choice(donors))
                dst = int(rng.integers(p))
                item = cand[src].pop(int(rng.integers(len(cand[src]))))
                cand[dst].append(item)
            else:
                a, b = rng.integers(p), rng.integers(p)
                if a == b or not cand[a] or not cand[b]:
                    stale += 1
                    continue
                ia, ib = int(rng.integers(len(cand[a]))), int(rng.integers(len(cand[b])))
                cand[a][ia], cand[b][ib] = cand[b][ib], cand[a][ia]
            if any(not b for b in cand):
                stale += 1
                continue
            total, sols = total_of([tuple(sorted(b)) for b in cand])
            if total < best_total - 1e-12:
                best_blocks, best_total, best_sols = cand, total, sols
                stale = 0
            else:
                stale += 1

    blocks = [tuple(sorted(b)) for b in best_blocks]
    degenerate = p == inst.size or any(s.length <= 1e-12 for s in best_sols)
    plan = PartitionPlan(
        subsets=tuple(blocks),
        orders=tuple(s.order for s in best_sols),
        degenerate=degenerate)
    return plan, best_sols, float(best_total)
