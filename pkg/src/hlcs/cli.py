"""Command-line front end: ``hlcs <command> --config <path> [options]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, dump_json, parse_config
from .control_sets import control_sets_for, describe, raster_csv
from .errors import HlcsError, ParseError, UsageError
from .flows import ControlSchedule, State, Trajectory, fmt17, rk4_integrate, simulate_any
from .oracle import (GridWindow, approx_control_sets, build_reach_graph, compare, components_csv,
                     coverage)
from .planner import steer
from .plot import render_svg
from .system import PARAM_NAMES, CaseTag, classify_case, larc, larc_value, normal_form

COMMANDS = ("classify", "larc", "simulate", "control-set", "reach", "plan", "plot")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hlcs", description="Singular linear control systems on the Heisenberg plane.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="flat JSON config file")
    ap.add_argument("--schedule", help="CSV with 'duration,omega' rows (simulate, plot)")
    ap.add_argument("--out", default=".", help="output directory (default: current directory)")
    ap.add_argument("--grid-h", type=float, help="grid cell size, overrides grid_h")
    ap.add_argument("--window", help="smin,smax,tmin,tmax, overrides the config window")
    ap.add_argument("--integrator", choices=("exact", "rk4"), default="exact", help="simulate only")
    return ap


def _read(path: str, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {what} {path!r}: {exc.strerror}") from None
    except UnicodeDecodeError:
        raise ParseError(f"{what} {path!r} is not UTF-8 text") from None


def _window(cfg: RunConfig, args) -> GridWindow:
    w = cfg.grid
    s_min, s_max, t_min, t_max, h = w.s_min, w.s_max, w.t_min, w.t_max, w.h
    if args.window is not None:
        parts = args.window.split(",")
        try:
            s_min, s_max, t_min, t_max = (float(x) for x in parts)
        except ValueError:
            raise UsageError("--window needs four comma-separated numbers smin,smax,tmin,tmax") from None
    if args.grid_h is not None:
        h = args.grid_h
    try:
        return GridWindow(s_min, s_max, t_min, t_max, h)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _schedule(args, required: bool) -> ControlSchedule | None:
    if args.schedule is None:
        if required:
            raise UsageError("this command needs --schedule")
        return None
    try:
        return ControlSchedule.from_csv(_read(args.schedule, "schedule"))
    except HlcsError:
        raise
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def _params_line(p) -> str:
    names = ["lambda" if n == "lam" else n for n in PARAM_NAMES]
    return " ".join(f"{n}={fmt17(v)}" for n, v in zip(names, p.as_tuple()))


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


def cmd_classify(cfg, args, out) -> str:
    p = cfg.params
    tag = classify_case(p)
    lines = [str(tag)]
    if tag is CaseTag.NON_SINGULAR:
        lines.append("normal_form: none (non-singular systems are out of scope)")
        return "\n".join(lines) + "\n"
    if not larc(p):
        lines.append("normal_form: none (rank condition fails)")
        return "\n".join(lines) + "\n"
    nf = normal_form(p, cfg.range)
    f = nf.conj
    lines += [
        f"normal_form_case: {nf.tag}",
        f"normal_form: {_params_line(nf.params)}",
        f"conjugation: S = {fmt17(f.k)} s; T = {fmt17(f.m)} t + {fmt17(f.q)} s + {fmt17(f.r)} s^2",
        f"time_reversed: {'true' if nf.time_reversed else 'false'}",
    ]
    return "\n".join(lines) + "\n"


def cmd_larc(cfg, args, out) -> str:
    val = larc_value(cfg.params)
    return f"{'true' if val != 0 else 'false'}\nvalue: {fmt17(float(val))}\n"


def cmd_simulate(cfg, args, out) -> str:
    sched = _schedule(args, required=True)
    v0 = cfg.start or State(0.0, 0.0)
    if args.integrator == "rk4":
        traj = rk4_integrate(cfg.params, v0, sched)
    else:
        traj = simulate_any(cfg.params, v0, sched, cfg.sample_step)
    path = _write(out, "trajectory.csv", traj.to_csv())
    end = traj.final
    return f"final: {fmt17(end.s)},{fmt17(end.t)}\nwrote: {path}\n"


def _grid_axes(win: GridWindow):
    return win.s_centers(), win.t_centers()


def cmd_control_set(cfg, args, out) -> str:
    descs = control_sets_for(cfg.params, cfg.range)
    text = dump_json([describe(d) for d in descs]) + "\n"
    _write(out, "control_set.json", text)
    win = _window(cfg, args)
    s_vals, t_vals = _grid_axes(win)
    _write(out, "raster.csv", "".join(raster_csv(d, s_vals, t_vals) for d in descs))
    return text


def cmd_reach(cfg, args, out) -> str:
    p, W = cfg.params, cfg.range
    win = _window(cfg, args)
    tag = classify_case(p)
    descs = control_sets_for(p, W)
    g = build_reach_graph(tag, p, W, win, dt=cfg.time_quantum, n_controls=cfg.controls)
    sets = approx_control_sets(g)
    _write(out, "edges.csv", g.edges_csv())
    _write(out, "components.csv", components_csv(sets))
    return (f"cells: {win.n_cells}\nedges: {len(g.edges)}\ncomponents: {len(sets)}\n"
            f"agreement: {compare(descs, sets, win):.6f}\ncoverage: {coverage(sets, win):.6f}\n")


def cmd_plan(cfg, args, out) -> str:
    if cfg.start is None or cfg.goal is None:
        raise ParseError("plan needs start_s, start_t, goal_s and goal_t in the config")
    res = steer(cfg.params, cfg.range, cfg.start, cfg.goal)
    _write(out, "schedule.csv", res.schedule.to_csv())
    return (f"construction: {res.construction}\nsegments: {len(res.schedule)}\n"
            f"endpoint_error: {res.endpoint_error:.3e}\n")


def cmd_plot(cfg, args, out) -> str:
    p, W = cfg.params, cfg.range
    win = _window(cfg, args)
    descs = control_sets_for(p, W)
    trajectories: list[Trajectory] = []
    sched = _schedule(args, required=False)
    v0 = cfg.start or State(0.0, 0.0)
    if sched is None and cfg.start is not None and cfg.goal is not None:
        sched = steer(p, W, cfg.start, cfg.goal).schedule
    if sched is not None and len(sched):
        step = cfg.sample_step or max(sched.total_duration / 400, 1e-3)
        trajectories.append(simulate_any(p, v0, sched, step))
    orbit_points = [cfg.goal] if cfg.goal is not None else []
    with np.errstate(all="ignore"):
        svg = render_svg(p, W, win, descs, orbit_points=orbit_points, trajectories=trajectories)
    path = _write(out, "plot.svg", svg)
    return f"wrote: {path}\n"


HANDLERS = {
    "classify": cmd_classify,
    "larc": cmd_larc,
    "simulate": cmd_simulate,
    "control-set": cmd_control_set,
    "reach": cmd_reach,
    "plan": cmd_plan,
    "plot": cmd_plot,
}


def run(argv: list[str] | None = None, stdout=None) -> int:
    """Run one command; returns the exit status. Errors go to stderr as one line."""
    stdout = stdout or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        cfg = parse_config(_read(args.config, "config"))
        text = HANDLERS[args.command](cfg, args, Path(args.out))
    except HlcsError as exc:
        msg = " ".join(str(exc).split())
        print(f"error: {exc.code}: {msg}", file=sys.stderr)
        return exc.exit_status
    stdout.write(text)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
