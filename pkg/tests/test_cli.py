import json
import math

import pytest

from escape_solver.cli import main


def test_solve_writes_artifacts_and_summary(tmp_path, capsys):
    rc = main(["solve", "point_unit", "--n", "6", "--out", str(tmp_path),
               "--multistart", "1"])
    assert rc == 0
    out = capsys.readouterr().out.strip()
    fields = [f.strip() for f in out.split(",")]
    assert fields[0] == "point_unit" and fields[1] == "6" and fields[3] == "hint"
    assert len(fields) == 7
    assert (tmp_path / "point_unit_n6_m1.csv").exists()
    assert (tmp_path / "point_unit_n6_m1.svg").exists()
    meta = json.loads((tmp_path / "point_unit_n6_m1.meta.json").read_text())
    assert meta["seed"] == 0 and meta["converged"]


def test_solve_unknown_scenario_exits_2(tmp_path, capsys):
    assert main(["solve", "not_a_scenario", "--out", str(tmp_path)]) == 2


def test_solve_bad_format_exits_2(tmp_path):
    assert main(["solve", "point_unit", "--n", "4", "--out", str(tmp_path),
                 "--format", "png"]) == 2


def test_solve_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"name": "halfplane_unit", "N": 6}))
    rc = main(["solve", str(cfg), "--out", str(tmp_path), "--multistart", "1"])
    assert rc == 0
    assert (tmp_path / "halfplane_unit_n6_m1.csv").exists()


def test_solve_strategy_exhaustive(tmp_path, capsys):
    rc = main(["solve", "point_unit", "--n", "5", "--strategy", "exhaustive",
               "--out", str(tmp_path), "--multistart", "1"])
    assert rc == 0
    assert "exhaustive" in capsys.readouterr().out


def test_solve_closed_flag(tmp_path, capsys):
    rc = main(["solve", "point_unit", "--n", "8", "--closed",
               "--out", str(tmp_path), "--multistart", "1"])
    assert rc == 0
    length = float(capsys.readouterr().out.split(",")[4])
    # a return leg of one radius on top of the open tour
    assert length > 2.0


def test_identical_runs_identical_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["solve", "circle_exterior", "--n", "8", "--out", str(out),
                     "--multistart", "2", "--seed", "3"]) == 0
    name = "circle_exterior_n8_m1.svg"
    assert (a / name).read_bytes() == (b / name).read_bytes()


def test_solve_single_orientation(tmp_path, capsys):
    rc = main(["solve", "point_unit", "--n", "1", "--out", str(tmp_path),
               "--multistart", "1"])
    assert rc == 0
    assert float(capsys.readouterr().out.split(",")[4]) == 1.0


def test_sweep_theta(tmp_path, capsys):
    rc = main(["sweep", "bisector_angle", "--param", "theta",
               "--values", f"{math.pi/6},{math.pi/3}", "--n", "8",
               "--out", str(tmp_path), "--multistart", "1", "--format", "csv"])
    assert rc == 0
    sweep = (tmp_path / "sweep_bisector_angle_theta.csv").read_text()
    assert sweep.startswith("value,length")
    assert len(sweep.strip().splitlines()) == 3


def test_sweep_writes_figures_on_request(tmp_path):
    rc = main(["sweep", "bisector_angle", "--param", "theta",
               "--values", f"{math.pi/6},{math.pi/3},{2*math.pi/3},{5*math.pi/6}",
               "--n", "8", "--out", str(tmp_path), "--multistart", "1",
               "--format", "svg,csv"])
    assert rc == 0
    assert len(list(tmp_path.glob("bisector_angle_theta*.svg"))) == 4


def test_sweep_n_ladder(tmp_path, capsys):
    rc = main(["sweep", "point_unit", "--param", "N", "--values", "4,8",
               "--out", str(tmp_path), "--multistart", "1", "--format", "csv"])
    assert rc == 0
    rows = (tmp_path / "sweep_point_unit_N.csv").read_text().strip().splitlines()
    lens = [float(r.split(",")[1]) for r in rows[1:]]
    assert lens[1] > lens[0]


def test_verify_only_subset(capsys):
    rc = main(["verify", "--only", "mtz_export"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "PASS" in out and "mtz_export" in out


def test_verify_unknown_filter_exits_2(capsys):
    assert main(["verify", "--only", "no_such_check"]) == 2


def test_verify_detects_corrupted_catalog(monkeypatch, capsys):
    # fault injection: a wrong target distance must turn the check red
    from escape_solver import scenario

    def corrupted(n, m, p):
        spec = scenario.CATALOG["__orig_point_unit"](n, m, p)
        return scenario.replace(spec, base_boundary=scenario.PointTarget((1.05, 0.0)))

    monkeypatch.setitem(scenario.CATALOG, "__orig_point_unit",
                        scenario.CATALOG["point_unit"])
    monkeypatch.setitem(scenario.CATALOG, "point_unit", corrupted)
    rc = main(["verify", "--only", "point_unit"])
    assert rc == 1
    assert "FAIL" in capsys.readouterr().out


def test_sweep_n_matches_convergence_study(tmp_path):
    from escape_solver.analysis import convergence_study
    from escape_solver.nlp_solver import SolveOptions

    rc = main(["sweep", "point_unit", "--param", "N", "--values", "4,8,16",
               "--out", str(tmp_path), "--multistart", "4", "--format", "csv"])
    assert rc == 0
    rows = (tmp_path / "sweep_point_unit_N.csv").read_text().strip().splitlines()
    swept = [float(r.split(",")[1]) for r in rows[1:]]
    rep = convergence_study("point_unit", [4, 8, 16],
                            opts=SolveOptions(multistart=4))
    assert swept == pytest.approx(list(rep.lengths()), abs=1e-12)


def test_solve_self_referential_scenario(tmp_path, capsys):
    rc = main(["solve", "zalgaller_class2", "--n", "45", "--out", str(tmp_path),
               "--multistart", "1", "--format", "csv"])
    assert rc == 0
    fields = capsys.readouterr().out.split(",")
    assert fields[0] == "zalgaller_class2"
    assert float(fields[4]) > 2.0
