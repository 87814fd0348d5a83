import math

import numpy as np
import pytest

from escape_solver import geometry as geo
from escape_solver.nlp_solver import SolveOptions, solve_fixed_order
from escape_solver.order_search import (MtzModel, OrderPlan, PartitionPlan,
                                        SizeGuardError, build_mtz_model, exhaustive,
                                        held_karp, mtz_branch_and_bound,
                                        partition_search, solve_alternating, two_opt)
from escape_solver.scenario import Instance, build, load_config, make_scenario

OPTS = SolveOptions(multistart=1)


def _points_instance(pts, mode="escape_open"):
    pts = [tuple(map(float, p)) for p in pts]
    return Instance(name="pts", boundaries=tuple(geo.PointTarget(p) for p in pts),
                    mode=mode, dimension=2, start_anchor=None if mode == "opaque" else (0.0, 0.0),
                    angles=(0.0,) * len(pts), start_index=(0,) * len(pts),
                    orient_index=tuple(range(len(pts))))


def _lines_instance(lines, mode="opaque"):
    return Instance(name="lines", boundaries=tuple(lines), mode=mode, dimension=2,
                    start_anchor=None if mode == "opaque" else (0.0, 0.0),
                    angles=tuple(ln.angle for ln in lines),
                    start_index=(0,) * len(lines),
                    orient_index=tuple(range(len(lines))))


def test_order_plan_validates_bijection():
    OrderPlan((2, 0, 1))
    with pytest.raises(ValueError):
        OrderPlan((0, 0, 1))


def test_exhaustive_trivial_and_collinear():
    single = _points_instance([(0.5, 0.5)])
    assert exhaustive(single, OPTS).length == pytest.approx(math.sqrt(0.5))
    collinear = _points_instance([(1, 0), (2, 0), (3, 0)])
    sol = exhaustive(collinear, OPTS)
    assert sol.order == (0, 1, 2)
    assert sol.length == pytest.approx(3.0, abs=1e-12)


def test_exhaustive_size_guard():
    with pytest.raises(SizeGuardError):
        exhaustive(_points_instance([(i, 0) for i in range(10)]), OPTS)


def test_held_karp_small_cases():
    inst = _points_instance([(0, 1), (2, 0), (0.5, 0.5)])
    assert held_karp(inst, OPTS).length == exhaustive(inst, OPTS).length
    two = _points_instance([(3, 0), (0, 1)])
    sol = held_karp(two, OPTS)
    assert sol.length == pytest.approx(1 + math.hypot(3, -1), abs=1e-12)


def test_held_karp_matches_exhaustive_random():
    rng = np.random.default_rng(9)
    inst = _points_instance(rng.uniform(-1, 1, (7, 2)))
    assert held_karp(inst, OPTS).length == exhaustive(inst, OPTS).length


def test_held_karp_bounds_exhaustive_on_line_family():
    # with movable points the frozen-position DP is an upper bound: repositioning
    # interacts with the order, which only the exhaustive joint search sees
    inst = build(make_scenario("halfplane_unit", 5))
    dp = held_karp(inst, OPTS).length
    joint = exhaustive(inst, OPTS).length
    assert dp >= joint - 1e-12


def test_two_opt_keeps_optimal_and_repairs_reversed():
    collinear = [(1, 0), (2, 0), (3, 0)]
    inst = _points_instance(collinear)
    sol = two_opt(inst, (0, 1, 2), OPTS)
    assert sol.order == (0, 1, 2)
    rev = two_opt(inst, (2, 1, 0), OPTS)
    assert rev.order == (0, 1, 2)
    assert rev.length == pytest.approx(3.0, abs=1e-12)


def test_two_opt_upper_bounds_dp():
    rng = np.random.default_rng(10)
    inst = _points_instance(rng.uniform(-1, 1, (8, 2)))
    t = two_opt(inst, tuple(range(8)), OPTS)
    h = held_karp(inst, OPTS)
    assert t.length >= h.length - 1e-12


def test_branch_and_bound_agrees_and_models():
    rng = np.random.default_rng(11)
    for _ in range(5):
        k = int(rng.integers(3, 8))
        inst = _points_instance(rng.uniform(-1, 1, (k, 2)))
        sb, model = mtz_branch_and_bound(inst, OPTS)
        se = exhaustive(inst, OPTS)
        assert sb.length == se.length
        model.validate()
    with pytest.raises(SizeGuardError):
        mtz_branch_and_bound(_points_instance([(i, 0) for i in range(13)]), OPTS)


def test_model_counts_for_k5():
    rng = np.random.default_rng(12)
    inst = _points_instance(rng.uniform(-1, 1, (5, 2)))
    _, model = mtz_branch_and_bound(inst, OPTS)
    assert len(model.b) == 5 and all(len(r) == 5 for r in model.b)
    assert len(model.u) == 5
    assert all(0.0 <= u <= 4.0 for u in model.u)


def test_model_invariants_rejected_when_broken():
    rng = np.random.default_rng(13)
    inst = _points_instance(rng.uniform(-1, 1, (4, 2)))
    sol = exhaustive(inst, OPTS)
    model = build_mtz_model(inst, sol)
    bad_b = [list(r) for r in model.b]
    bad_b[0][0] = 1
    broken = MtzModel(b=tuple(map(tuple, bad_b)), u=model.u, c=model.c,
                      points=model.points, boundaries=model.boundaries,
                      objective=model.objective)
    with pytest.raises(ValueError):
        broken.validate()


def test_alternating_with_hint_matches_fixed_order():
    inst = build(make_scenario("halfplane_unit", 12))
    a = solve_alternating(inst, OPTS)
    b = solve_fixed_order(inst, inst.order_hint, OPTS)
    assert a.length == pytest.approx(b.length, abs=1e-12)


def test_alternating_recovers_strip_hint_order():
    hinted = build(make_scenario("strip_middle", 8))
    with_hint = solve_fixed_order(hinted, hinted.order_hint, OPTS)
    blind = load_config({"name": "strip_middle", "N": 8, "order": "search"})
    sol = solve_alternating(build(blind), OPTS)
    assert sol.length == pytest.approx(with_hint.length, abs=1e-6)


def test_alternating_reaches_fixpoint_quickly():
    inst = build(make_scenario("point_unit", 6))
    sol = solve_alternating(inst, OPTS)
    assert sol.iterations <= 5


def test_alternating_never_worse_than_start():
    rng = np.random.default_rng(14)
    inst = _points_instance(rng.uniform(-1, 1, (6, 2)))
    start = solve_fixed_order(inst, tuple(range(6)), OPTS)
    alt = solve_alternating(inst, OPTS)
    assert alt.length <= start.length + 1e-12


def test_partition_single_curve_reduces_to_plain_search():
    lines = [geo.Line(0.0, 1.0), geo.Line(math.pi / 2, 1.0), geo.Line(math.pi, 1.0)]
    inst = _lines_instance(lines)
    plan, sols, total = partition_search(inst, 1, OPTS)
    assert plan.subsets == ((0, 1, 2),)
    direct = solve_alternating(inst, OPTS)
    assert total == pytest.approx(direct.length, abs=1e-9)


def test_partition_full_split_is_degenerate():
    lines = [geo.Line(0.0, 1.0), geo.Line(math.pi / 2, 1.0), geo.Line(math.pi, 1.0)]
    inst = _lines_instance(lines)
    plan, sols, total = partition_search(inst, 3, OPTS)
    assert plan.degenerate
    assert total == pytest.approx(0.0, abs=1e-9)


def test_partition_two_lines_through_origin():
    inst = build(make_scenario("opaque_square", 2, 1))
    plan, sols, total = partition_search(inst, 1, OPTS)
    # both family members are the same line through the grid point
    assert total == pytest.approx(0.0, abs=1e-9)


def test_partition_prefers_natural_grouping():
    # two tight clusters far apart: p=2 should split them cleanly
    pts = [(0, 0.1), (0, 0.2), (5, 0.1), (5, 0.2)]
    inst = _points_instance(pts, mode="opaque")
    plan, sols, total = partition_search(inst, 2, OPTS)
    assert sorted(map(sorted, plan.subsets)) == [[0, 1], [2, 3]]
    assert total == pytest.approx(0.2, abs=1e-9)


def test_partition_validation():
    inst = _points_instance([(1, 0)], mode="opaque")
    with pytest.raises(ValueError):
        partition_search(inst, 2, OPTS)
    escape = build(make_scenario("halfplane_unit", 4))
    with pytest.raises(ValueError):
        partition_search(escape, 1, OPTS)
    with pytest.raises(ValueError):
        PartitionPlan(subsets=((0,), ()), orders=((0,), ()))
