import xml.etree.ElementTree as ET

import numpy as np
import pytest

from escape_solver import geometry as geo
from escape_solver.analysis import convergence_study
from escape_solver.export import (check_mtz_solution, parse_csv, parse_mtz_text,
                                  to_csv, to_mtz_text, to_svg)
from escape_solver.nlp_solver import SolveOptions, solve_fixed_order
from escape_solver.order_search import MtzModel, build_mtz_model, exhaustive
from escape_solver.scenario import Instance, build, make_scenario

OPTS = SolveOptions(multistart=1)


def _points_instance(pts):
    pts = [tuple(map(float, p)) for p in pts]
    return Instance(name="pts", boundaries=tuple(geo.PointTarget(p) for p in pts),
                    mode="escape_open", dimension=2, start_anchor=(0.0, 0.0),
                    angles=(0.0,) * len(pts), start_index=(0,) * len(pts),
                    orient_index=tuple(range(len(pts))))


def _tiny_solution():
    inst = _points_instance([(0.1234567890123456, 0.7)])
    return inst, solve_fixed_order(inst, (0,), OPTS)


def test_csv_single_point_two_lines():
    _, sol = _tiny_solution()
    text = to_csv(sol)
    lines = text.strip("\r\n").split("\r\n")
    assert len(lines) == 2
    assert lines[0] == "order_index,boundary_index,x,y,residual"


def test_csv_roundtrip_exact():
    _, sol = _tiny_solution()
    rows = parse_csv(to_csv(sol))
    assert float(rows[1][2]) == sol.points()[0][0]
    assert float(rows[1][3]) == sol.points()[0][1]


def test_csv_convergence_report_rows():
    rep = convergence_study("point_unit", [2, 4, 8, 16, 32], opts=OPTS)
    lines = to_csv(rep).strip("\r\n").split("\r\n")
    assert len(lines) == 6


def test_csv_quoting():
    text = to_csv([(1.0, 2.0)])
    assert text.startswith("value,length\r\n")


def test_emitters_are_deterministic():
    inst = build(make_scenario("circle_exterior", 8))
    sol = solve_fixed_order(inst, inst.order_hint, OPTS)
    assert to_csv(sol) == to_csv(sol)
    assert to_svg(sol, inst) == to_svg(sol, inst)
    sol2 = solve_fixed_order(inst, inst.order_hint, OPTS)
    assert to_svg(sol, inst).encode() == to_svg(sol2, inst).encode()


def test_svg_structure_point_ring():
    inst = build(make_scenario("point_unit", 12))
    sol = solve_fixed_order(inst, inst.order_hint, OPTS)
    svg = to_svg(sol, inst)
    ET.fromstring(svg)  # valid XML
    assert svg.count('fill="#cc0000"') >= 12   # targets + escape dots in red
    assert '<polyline' in svg and '#000000' in svg


def test_svg_boundaries_only_without_solution():
    inst = build(make_scenario("halfplane_unit", 6))
    svg = to_svg(None, inst)
    assert '<polyline' not in svg
    assert svg.count('<line') == 6


def test_svg_polyline_vertex_count_matches_family():
    inst = build(make_scenario("halfplane_unit", 720))
    sol = solve_fixed_order(inst, inst.order_hint, OPTS)
    svg = to_svg(sol, inst)
    poly = next(ln for ln in svg.splitlines() if ln.startswith("<polyline"))
    pairs = poly.split('points="')[1].split('"')[0].split()
    assert len(pairs) == 721  # anchor + one vertex per family member


def test_csv_three_dimensional_solution():
    inst = build(make_scenario("plane3d", 2, 2))
    sol = solve_fixed_order(inst, tuple(range(inst.size)), OPTS)
    text = to_csv(sol)
    assert text.splitlines()[0] == "order_index,boundary_index,x,y,z,residual"
    assert len(parse_csv(text)) == inst.size + 1


def test_csv_worm_bound_row():
    from escape_solver.analysis import worm_upper_bound

    inst = build(make_scenario("circle_wf2", 3, 2))
    sol = solve_fixed_order(inst, range(inst.size), OPTS)
    text = to_csv(worm_upper_bound(3.14159, sol))
    rows = parse_csv(text)
    assert rows[0] == ["scenario", "area", "escape_length", "ratio"]
    assert float(rows[1][3]) == pytest.approx(3.14159 / sol.length**2)


def test_mtz_text_declaration_counts():
    rng = np.random.default_rng(0)
    inst = _points_instance(rng.uniform(-1, 1, (3, 2)))
    sol = exhaustive(inst, OPTS)
    text = to_mtz_text(build_mtz_model(inst, sol), inst)
    assert text.count("] binary") == 9
    assert sum(1 for ln in text.splitlines()
               if ln.startswith("u[") and " in " in ln) == 3


def test_mtz_checker_validates_and_rejects():
    rng = np.random.default_rng(1)
    inst = _points_instance(rng.uniform(-1, 1, (4, 2)))
    sol = exhaustive(inst, OPTS)
    model = build_mtz_model(inst, sol)
    text = to_mtz_text(model, inst)
    report = check_mtz_solution(text)
    assert report["feasible"], report["problems"]
    assert abs(report["objective"] - report["stated_objective"]) <= 1e-9
    # corrupt one binary entry: assignment structure breaks
    bad = text.replace("b 1", "b 0", 1)
    assert not check_mtz_solution(bad)["feasible"]
    # corrupt the objective: mismatch flagged
    bad2 = text.replace("OBJVALUE", "OBJVALUE 99.0 #", 1)
    assert not check_mtz_solution(bad2)["feasible"]


def test_mtz_roundtrip_boundaries():
    inst = build(make_scenario("circle_exterior", 4))
    sol = solve_fixed_order(inst, inst.order_hint, OPTS)
    model = build_mtz_model(inst, sol)
    data = parse_mtz_text(to_mtz_text(model, inst))
    assert len(data["boundaries"]) == 4
    assert all(isinstance(b, geo.Circle) for b in data["boundaries"])
    assert data["boundaries"][0].radius == 0.5


def test_mtz_refuses_invalid_model():
    rng = np.random.default_rng(2)
    inst = _points_instance(rng.uniform(-1, 1, (3, 2)))
    sol = exhaustive(inst, OPTS)
    model = build_mtz_model(inst, sol)
    bad_b = [list(r) for r in model.b]
    bad_b[0] = [0, 0, 0]
    broken = MtzModel(b=tuple(map(tuple, bad_b)), u=model.u, c=model.c,
                      points=model.points, boundaries=model.boundaries,
                      objective=model.objective)
    with pytest.raises(ValueError):
        to_mtz_text(broken, inst)
