"""Command-line interface.

    mavmpc simulate  --scenario S --out traj.csv --diag diag.csv
                     [--est est.csv] [--seed N] [--duration S] [--figures DIR]
    mavmpc gradcheck --scenario S [--n-probes K] [--seed N]
    mavmpc solve     --scenario S --state px,py,pz,vx,vy,vz,roll,pitch
                     [--reference I]
    mavmpc report    --traj traj.csv --diag diag.csv --out-dir DIR
                     [--scenario S]

A scenario is a YAML file path or a bundled name (``cylinder``,
``hover_drain``).  Commands exit 0 on success; on failure they print one
``error: ...`` line to stderr and exit 1.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from typing import Optional, Sequence

import numpy as np

from .gradcheck import audit_scenario
from .harness import export_csv, run_closed_loop
from .ocp import ShootingProblem
from .panoc import BoxSet, solve as panoc_solve
from .scenario import load_scenario


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mavmpc",
        description="Nonlinear MPC obstacle-avoidance toolkit: closed-loop "
                    "simulation, gradient audit, single solves and reports.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a closed-loop scenario")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--out", required=True, help="trajectory CSV path")
    sim.add_argument("--diag", required=True, help="diagnostics CSV path")
    sim.add_argument("--est", help="optional estimator-trace CSV path")
    sim.add_argument("--seed", type=int, help="override the scenario seed")
    sim.add_argument("--duration", type=float, help="override duration [s]")
    sim.add_argument("--figures", help="also render figures into this directory")

    gc = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    gc.add_argument("--scenario", required=True)
    gc.add_argument("--n-probes", type=int, default=100)
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("--horizons", default="1,5,40",
                    help="comma-separated horizon lengths")

    sol = sub.add_parser("solve", help="one horizon solve from a given state")
    sol.add_argument("--scenario", required=True)
    sol.add_argument("--state", required=True,
                     help="comma-separated px,py,pz,vx,vy,vz,roll,pitch")
    sol.add_argument("--reference", type=int, default=0,
                     help="waypoint index to track")

    rep = sub.add_parser("report", help="render figures from exported CSVs")
    rep.add_argument("--traj", required=True)
    rep.add_argument("--diag", required=True)
    rep.add_argument("--out-dir", required=True)
    rep.add_argument("--scenario", help="scenario for obstacle/waypoint overlays")

    return parser


def _cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.duration is not None:
        overrides["duration"] = args.duration
    if overrides:
        scenario = dataclasses.replace(scenario, **overrides)
    t0 = time.perf_counter()
    log = run_closed_loop(scenario)
    export_csv(log, args.out, args.diag, args.est)
    wall = time.perf_counter() - t0
    conv = float(np.mean([s == "converged" for s in log.status])) if len(log) else 0.0
    print(f"simulated {scenario.name}: {len(log)} ticks in {wall:.1f} s, "
          f"{100 * conv:.1f}% converged, "
          f"mean solve {1e3 * float(np.mean(log.solve_time_s)):.2f} ms")
    print(f"wrote {args.out} and {args.diag}" + (f" and {args.est}" if args.est else ""))
    if args.figures:
        from .report import render_figures
        paths = render_figures(args.out, args.diag, args.figures, scenario)
        print("figures: " + ", ".join(str(p) for p in paths))
    return 0


def _cmd_gradcheck(args) -> int:
    scenario = load_scenario(args.scenario)
    horizons = tuple(int(h) for h in args.horizons.split(","))
    results = audit_scenario(scenario, horizons=horizons,
                             n_probes=args.n_probes, seed=args.seed)
    for res in results:
        print(f"N={res.horizon} probes={res.probes} max_rel_err={res.max_rel_err:.3e}")
    overall = max(r.max_rel_err for r in results)
    print(f"max relative error: {overall:.3e}")
    return 0


def _cmd_solve(args) -> int:
    scenario = load_scenario(args.scenario)
    state = np.array([float(v) for v in args.state.split(",")])
    if state.shape != (8,):
        raise ValueError("--state needs 8 comma-separated values")
    if not (0 <= args.reference < len(scenario.schedule.waypoints)):
        raise ValueError("--reference index out of range")
    cfg = scenario.ocp_for_reference(args.reference)
    problem = ShootingProblem(cfg, state)
    lower, upper = cfg.input_box()
    hover = np.tile([scenario.params.g, 0.0, 0.0], cfg.horizon)
    u_star, diag = panoc_solve(problem, BoxSet(lower, upper), hover, scenario.solver)
    print(f"status={diag.status.value} iterations={diag.iterations} "
          f"res_norm={diag.res_norm:.3e} res_inf={diag.res_norm_inf:.3e} "
          f"cost={diag.final_cost:.6g} solve_time_s={diag.solve_time_s:.4f}")
    print("k,Td,roll_d,pitch_d")
    for k in range(cfg.horizon):
        t, r, p = u_star[3 * k:3 * k + 3]
        print(f"{k},{t:.9g},{r:.9g},{p:.9g}")
    return 0


def _cmd_report(args) -> int:
    from .report import render_figures
    scenario = load_scenario(args.scenario) if args.scenario else None
    paths = render_figures(args.traj, args.diag, args.out_dir, scenario)
    print("figures: " + ", ".join(str(p) for p in paths))
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "gradcheck": _cmd_gradcheck,
    "solve": _cmd_solve,
    "report": _cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:  # surfaced as one machine-readable line
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
