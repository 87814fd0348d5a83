"""Command line front end: solve catalog scenarios, run parameter sweeps, and
execute the verification suite.

Exit codes: solve/sweep return 0 on convergence, 2 for invalid configuration,
3 for non-convergence; verify returns 0 only when every check passes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from .export import to_csv, to_mtz_text, to_svg
from .nlp_solver import NonConvergenceError, SolveOptions, solve_fixed_order, \
    solve_self_referential
from .order_search import (build_mtz_model, exhaustive, held_karp,
                           mtz_branch_and_bound, solve_alternating, two_opt)
from .scenario import CATALOG, load_config, make_scenario, build
from .verify import run_checks

STRATEGIES = ("hint", "exhaustive", "heldkarp", "twoopt", "mtz", "alternating")


def _make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="escape-solver",
                                 description="shortest escape-path solver")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("scenario", help="catalog name or JSON config path")
        p.add_argument("--n", type=int, default=90, help="orientation count")
        p.add_argument("--m", type=int, default=1, help="start count")
        p.add_argument("--theta", type=float, default=None, help="scenario angle parameter")
        p.add_argument("--strategy", choices=STRATEGIES, default=None,
                       help="order strategy (default: hint when the catalog has one)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--closed", action="store_true", help="path returns to the start")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--format", default="svg,csv", dest="formats",
                       help="comma list of svg,csv,mtz")
        p.add_argument("--multistart", type=int, default=4)

    ps = sub.add_parser("solve", help="solve one scenario and write artifacts")
    add_common(ps)

    pv = sub.add_parser("verify", help="run the verification suite")
    pv.add_argument("--only", default=None, help="substring filter on check names")

    pw = sub.add_parser("sweep", help="solve across one swept parameter")
    add_common(pw)
    pw.add_argument("--param", choices=("theta", "N", "M"), required=True)
    pw.add_argument("--values", required=True, help="comma-separated numbers")
    return ap


def _load_spec(args):
    params = {}
    if args.theta is not None:
        params["theta"] = args.theta
    if args.closed:
        params["mode"] = "escape_closed"
    if args.scenario.endswith(".json") or os.path.sep in args.scenario:
        spec = load_config(args.scenario)
    else:
        if args.scenario not in CATALOG:
            raise ValueError(f"unknown scenario {args.scenario!r}")
        spec = make_scenario(args.scenario, args.n, args.m, **params)
    return spec


def _solve_with_strategy(spec, strategy, opts):
    if spec.params.get("self_referential"):
        return solve_self_referential(None, None, opts, n=spec.n_orientations), None
    inst = build(spec)
    if strategy is None:
        strategy = "hint" if inst.order_hint is not None else "alternating"
    if strategy == "hint":
        return solve_fixed_order(inst, inst.order_hint or range(inst.size), opts), inst
    if strategy == "exhaustive":
        return exhaustive(inst, opts), inst
    if strategy == "heldkarp":
        return held_karp(inst, opts), inst
    if strategy == "twoopt":
        return two_opt(inst, inst.order_hint or range(inst.size), opts), inst
    if strategy == "mtz":
        sol, _model = mtz_branch_and_bound(inst, opts)
        return sol, inst
    if strategy == "alternating":
        return solve_alternating(inst, opts), inst
    raise ValueError(f"unknown strategy {strategy!r}")


def _artifacts(sol, inst, spec, args, outdir: Path, stem: str):
    formats = {f.strip() for f in args.formats.split(",") if f.strip()}
    unknown = formats - {"svg", "csv", "mtz"}
    if unknown:
        raise ValueError(f"unknown formats: {sorted(unknown)}")
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        (outdir / f"{stem}.csv").write_text(to_csv(sol), encoding="utf-8")
        written.append(f"{stem}.csv")
    if "svg" in formats and inst is not None:
        svg = to_svg(sol, inst)
        svg = svg.replace("<svg ", f"<!-- scenario={spec.name} seed={args.seed} -->\n<svg ", 1)
        (outdir / f"{stem}.svg").write_text(svg, encoding="utf-8")
        written.append(f"{stem}.svg")
    if "mtz" in formats and inst is not None:
        model = build_mtz_model(inst, sol)
        (outdir / f"{stem}.mtz").write_text(to_mtz_text(model, inst), encoding="utf-8")
        written.append(f"{stem}.mtz")
    meta = {"scenario": spec.name, "n": spec.n_orientations, "m": spec.n_starts,
            "seed": args.seed, "length": sol.length, "max_residual": sol.max_residual,
            "converged": sol.converged, "order": list(sol.order)}
    (outdir / f"{stem}.meta.json").write_text(json.dumps(meta, indent=1), encoding="utf-8")
    return written


def _opts_from_args(args) -> SolveOptions:
    threads = int(os.environ.get("ESCAPE_SOLVER_THREADS", "1"))
    return SolveOptions(seed=args.seed, multistart=args.multistart,
                        threads=max(1, threads))


def cmd_solve(args) -> int:
    try:
        spec = _load_spec(args)
        opts = _opts_from_args(args)
        unknown = {f.strip() for f in args.formats.split(",") if f.strip()} - {"svg", "csv", "mtz"}
        if unknown:
            raise ValueError(f"unknown formats: {sorted(unknown)}")
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    try:
        sol, inst = _solve_with_strategy(spec, args.strategy, opts)
    except NonConvergenceError as e:
        print(f"non-convergence: {e}", file=sys.stderr)
        return 3
    secs = time.perf_counter() - t0
    stem = f"{spec.name}_n{spec.n_orientations}_m{spec.n_starts}"
    _artifacts(sol, inst, spec, args, Path(args.out), stem)
    strategy = args.strategy or ("hint" if spec.order_hint is not None else "alternating")
    print(f"{spec.name}, {spec.n_orientations}, {spec.n_starts}, {strategy}, "
          f"{sol.length:.9f}, {sol.max_residual:.3e}, {secs:.2f}")
    return 0 if sol.converged else 3


def cmd_verify(args) -> int:
    try:
        ok = run_checks(only=args.only)
    except KeyError as e:
        print(str(e), file=sys.stderr)
        return 2
    return 0 if ok else 1


def cmd_sweep(args) -> int:
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
        if not values:
            raise ValueError("empty value list")
        opts = _opts_from_args(args)
    except ValueError as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return 2
    rows = []
    outdir = Path(args.out)
    for v in values:
        try:
            if args.param == "theta":
                spec = make_scenario(args.scenario, args.n, args.m, theta=v,
                                     **({"mode": "escape_closed"} if args.closed else {}))
            elif args.param == "N":
                spec = make_scenario(args.scenario, int(v), args.m,
                                     **({"mode": "escape_closed"} if args.closed else {}))
            else:
                spec = make_scenario(args.scenario, args.n, int(v),
                                     **({"mode": "escape_closed"} if args.closed else {}))
        except (ValueError, KeyError) as e:
            print(f"invalid configuration: {e}", file=sys.stderr)
            return 2
        try:
            sol, inst = _solve_with_strategy(spec, args.strategy, opts)
        except NonConvergenceError as e:
            print(f"non-convergence at {args.param}={v}: {e}", file=sys.stderr)
            return 3
        rows.append((v, sol.length))
        if "svg" in args.formats and inst is not None:
            stem = f"{spec.name}_{args.param}{v:g}_n{spec.n_orientations}"
            _artifacts(sol, inst, spec, args, outdir, stem)
        print(f"{spec.name}, {args.param}={v:g}, length={sol.length:.9f}")
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / f"sweep_{args.scenario}_{args.param}.csv").write_text(
        to_csv(rows), encoding="utf-8")
    return 0


def main(argv=None) -> int:
    args = _make_parser().parse_args(argv)
    if args.command == "solve":
        return cmd_solve(args)
    if args.command == "verify":
        return cmd_verify(args)
    return cmd_sweep(args)


if __name__ == "__main__":
    raise SystemExit(main())
