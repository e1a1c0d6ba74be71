"""Command-line front end.

Subcommands: ``simulate``, ``analyze``, ``figure1`` and ``check``. Agents are
labeled ``x_1..x_n`` in all output. Exit codes: 0 success, 2 config error,
3 numerical failure, 4 connectivity-horizon error.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analysis import (
    check_cut_balance,
    contraction_audit,
    moreau_edge_set,
    persistent_connectivity_report,
    rescaling_sequence,
    slow_divergence_check,
)
from .config import ConfigError, RunConfig, load_config
from .dynamics import Trajectory, detect_consensus, simulate
from .errors import ConnectivityHorizonError, NumericalFailure
from .scenarios import RhoSequence, ScenarioSpec

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_HORIZON = 0, 2, 3, 4

FIGURE1_RHOS = (
    RhoSequence("constant", value=1.0),
    RhoSequence("power", exponent=0.2),
    RhoSequence("power", exponent=0.4),
)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_rows(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_trajectory_csv(path: Path, traj: Trajectory) -> None:
    header = ["t", *(f"x_{i + 1}" for i in range(traj.n)), "diameter"]
    data = np.column_stack((traj.times, traj.states, traj.diameters()))
    write_rows(path, header, data)


def _label(i: int) -> str:
    return f"x_{i + 1}"


def _edge(e) -> str:
    j, i = e
    return f"{_label(j)}->{_label(i)}"


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.periods is not None:
        if args.periods < 1:
            raise ConfigError("--periods must be >= 1")
        cfg = replace(cfg, scenario=replace(cfg.scenario, periods=args.periods))
    if args.tolerance is not None:
        if not args.tolerance > 0:
            raise ConfigError("--tolerance must be positive")
        cfg = replace(cfg, solver=replace(cfg.solver, step_tolerance=args.tolerance))
    return cfg


def _run(cfg: RunConfig, extra_times=()) -> Trajectory:
    sys_ = cfg.scenario.build()
    t0, t1 = cfg.scenario.horizon()
    return simulate(sys_, cfg.scenario.initial_state(), t0, t1, cfg.solver, extra_times)


# ---------------------------------------------------------------- commands


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    traj = _run(cfg)
    path = out / "trajectory.csv"
    write_trajectory_csv(path, traj)
    d = traj.diameters()
    tol = 1e-6 * d[0] if d[0] > 0 else 1e-12
    res = detect_consensus(traj, tol)
    print(f"scenario: {cfg.scenario.name} (n={traj.n}), t in [{_fmt(traj.times[0])}, {_fmt(traj.t_end)}]")
    print(f"samples: {len(traj)} -> {path}")
    print(f"initial diameter: {_fmt(d[0])}")
    print(f"final diameter: {_fmt(d[-1])}")
    if res.reached:
        print(f"consensus: reached (diameter <= {tol:.3g} at t={_fmt(res.time)})")
    else:
        print(f"consensus: not reached within the horizon (tolerance {tol:.3g})")
    return EXIT_OK


def _assumption_lines(cfg: RunConfig, horizon: float, rmax_seq=None) -> list[str]:
    sys_ = cfg.scenario.build()
    n = sys_.n
    lines = ["assumption checks (heuristic, finite horizon):"]
    cb = check_cut_balance(sys_, horizon)
    witness = "{" + ", ".join(_label(i) for i in cb.witness_cut) + "}" if cb.witness_cut else "-"
    lines.append(
        f"  cut balance: {cb.verdict}; K_estimate={_fmt(cb.K_estimate)} "
        f"(first half {_fmt(cb.K_first_half)}, second half {_fmt(cb.K_second_half)}); "
        f"witness cut {witness} at t={_fmt(cb.witness_time)}"
    )
    if rmax_seq is not None:
        finite = [r for r in rmax_seq if math.isfinite(r)]
        if len(finite) == len(rmax_seq):
            sd = slow_divergence_check(rmax_seq, n)
            lines.append(
                f"  slow divergence: {sd.verdict}; tail exponent alpha={sd.alpha + 0.0:.6g}; "
                f"partial sum {_fmt(sd.partial_sums[-1])} over {len(rmax_seq)} terms"
            )
        else:
            lines.append("  slow divergence: not evaluated (infinite ratio)")
    pc = persistent_connectivity_report(sys_, horizon)
    cands = ", ".join(sorted(_edge(e) for e in pc.candidates)) or "none"
    verdict = "persistent-candidate" if pc.strongly_connected else "not persistent"
    lines.append(f"  persistent connectivity: {verdict}; divergence candidates: {cands}")
    moreau = cfg.analysis.get("moreau", {})
    T = float(moreau.get("T", sys_.period or 1.0))
    delta = float(moreau.get("delta", 0.1))
    t_m = sys_.domain_start
    if horizon - T > t_m:
        mr = moreau_edge_set(sys_, t_m, T, delta)
        root = "none" if mr.root is None else _label(mr.root)
        lines.append(
            f"  Moreau window [t, t+{T:g}] at t={_fmt(t_m)}, delta={delta:g}: "
            f"{len(mr.edges)} edges, spanning tree {'yes' if mr.spanning_tree else 'no'} (root {root})"
        )
    return lines


def _horizon_message(exc: ConnectivityHorizonError) -> str:
    cut = "{" + ", ".join(_label(i) for i in exc.cut) + "}"
    return f"connectivity horizon exceeded: cut {cut} starves (horizon {_fmt(exc.horizon)}): {exc}"


def cmd_analyze(cfg: RunConfig, out: Path) -> int:
    sys_ = cfg.scenario.build()
    P = int(cfg.analysis.get("periods", cfg.scenario.periods))
    resc = rescaling_sequence(sys_, P)
    extra = np.concatenate([np.asarray(s) for s in resc.intermediates])
    traj = simulate(sys_, cfg.scenario.initial_state(), float(resc.t[0]), float(resc.t[-1]), cfg.solver, extra)
    audit = contraction_audit(traj, resc)
    lines = [f"scenario: {cfg.scenario.name} (n={sys_.n}), {P} rescaled periods", ""]
    lines.append("rescaling sequence (t_p, intermediates, r(t_p)):")
    for p in range(resc.periods + 1):
        inter = ""
        if p < resc.periods and len(resc.intermediates[p]) > 2:
            inter = " [" + ", ".join(_fmt(s) for s in resc.intermediates[p][1:-1]) + "]"
        lines.append(f"  p={p:3d} t_p={_fmt(resc.t[p])} r={_fmt(resc.rmax_at[p])}{inter}")
    lines += ["", "contraction audit (measured D(t_p+1)/D(t_p) vs bound at r(t_p+1)):"]
    for a in audit.periods:
        flag = "vacuous" if a.vacuous else ("ok" if a.measured <= a.bound + audit.tolerance else "VIOLATED")
        lines.append(f"  p={a.p:3d} measured={_fmt(a.measured)} bound={_fmt(a.bound)} {flag}")
    lines.append(f"  overall: {'ok' if audit.ok else 'VIOLATED'}; worst slack {_fmt(audit.worst_slack)}")
    lines.append("")
    lines += _assumption_lines(cfg, float(resc.t[-1]), [float(r) for r in resc.rmax_at])
    text = "\n".join(lines) + "\n"
    out.mkdir(parents=True, exist_ok=True)
    (out / "analysis.txt").write_text(text, encoding="utf-8", newline="\n")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_check(cfg: RunConfig, out: Path) -> int:
    sys_ = cfg.scenario.build()
    _, horizon = cfg.scenario.horizon()
    rmax = None
    note = None
    try:
        resc = rescaling_sequence(sys_, cfg.scenario.periods)
        rmax = [float(r) for r in resc.rmax_at]
    except ConnectivityHorizonError as exc:
        note = "  rescaling: " + _horizon_message(exc)
    lines = [f"scenario: {cfg.scenario.name} (n={sys_.n}), horizon t={_fmt(horizon)}"]
    lines += _assumption_lines(cfg, horizon, rmax)
    if note:
        lines.append(note)
    text = "\n".join(lines) + "\n"
    out.mkdir(parents=True, exist_ok=True)
    (out / "checks.txt").write_text(text, encoding="utf-8", newline="\n")
    sys.stdout.write(text)
    return EXIT_OK


def figure1_runs(periods: int = 400, solver=None, m: int = 5) -> dict[str, Trajectory]:
    """The three odd-chain runs, keyed by the rho label."""
    specs = [ScenarioSpec("odd_chain", rho=rho, m=m, periods=periods) for rho in FIGURE1_RHOS]
    cfgs = [RunConfig(scenario=s, solver=solver) if solver else RunConfig(scenario=s) for s in specs]
    with ThreadPoolExecutor(max_workers=3) as pool:
        trajs = list(pool.map(_run, cfgs))
    return {s.rho.label(): t for s, t in zip(specs, trajs)}


def cmd_figure1(periods: int, out: Path, solver=None) -> int:
    runs = figure1_runs(periods, solver)
    for label, traj in runs.items():
        d = traj.diameters()
        with np.errstate(divide="ignore"):
            logd = np.log10(d)
        path = out / f"figure1_{label}.csv"
        write_rows(path, ["t", "diameter", "log10_diameter"], np.column_stack((traj.times, d, logd)))
        print(f"rho={label}: final diameter {_fmt(d[-1])} -> {path}")
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tvconsensus", description="Time-varying consensus experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_config in (("simulate", True), ("analyze", True), ("check", True), ("figure1", False)):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, required=needs_config, help="JSON run configuration")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--periods", type=int, default=None, help="override scenario.periods")
        p.add_argument("--tolerance", type=float, default=None, help="override solver.tolerance")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "figure1":
            solver = None
            if args.config is not None:
                solver = _apply_overrides(load_config(args.config), args).solver
            elif args.tolerance is not None:
                from .dynamics import SolverConfig

                solver = SolverConfig(step_tolerance=args.tolerance)
            return cmd_figure1(args.periods or 400, args.out, solver)
        cfg = _apply_overrides(load_config(args.config), args)
        return {"simulate": cmd_simulate, "analyze": cmd_analyze, "check": cmd_check}[args.command](cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ConnectivityHorizonError as exc:
        print(_horizon_message(exc), file=sys.stderr)
        return EXIT_HORIZON


if __name__ == "__main__":
    sys.exit(main())
