"""Run configuration: a flat JSON document of system, range and grid keys."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import ParseError
from .flows import State, fmt17
from .oracle import GridWindow
from .system import ControlRange, SystemParams

REQUIRED_KEYS = ("a", "b", "c", "alpha", "beta", "gamma", "lambda", "omega_minus", "omega_plus")
WINDOW_KEYS = ("s_min", "s_max", "t_min", "t_max", "grid_h")
OPTIONAL_KEYS = WINDOW_KEYS + ("dt", "n_controls", "start_s", "start_t", "goal_s", "goal_t", "sample_step")


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    range: ControlRange
    window: GridWindow | None = None
    dt: float | None = None
    n_controls: int | None = None
    start: State | None = None
    goal: State | None = None
    sample_step: float | None = None

    @property
    def grid(self) -> GridWindow:
        return self.window if self.window is not None else GridWindow()

    @property
    def time_quantum(self) -> float:
        return 0.1 if self.dt is None else self.dt

    @property
    def controls(self) -> int:
        return 5 if self.n_controls is None else self.n_controls


def _number(doc: dict, key: str) -> float:
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ParseError(f"key {key!r} must be a number, got {json.dumps(val)}")
    val = float(val)
    if not math.isfinite(val):
        raise ParseError(f"key {key!r} must be finite")
    return val


def _pair(doc: dict, ks: str, kt: str) -> State | None:
    present = [k in doc for k in (ks, kt)]
    if not any(present):
        return None
    if not all(present):
        missing = kt if present[0] else ks
        raise ParseError(f"missing key {missing!r} (needed together with the other coordinate)")
    return State(_number(doc, ks), _number(doc, kt))


def parse_config(text: str) -> RunConfig:
    """Validate a JSON config. Malformed input raises ParseError naming the problem."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError("config must be a JSON object")
    for key in REQUIRED_KEYS:
        if key not in doc:
            raise ParseError(f"missing key {key!r}")
    unknown = sorted(set(doc) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS))
    if unknown:
        raise ParseError(f"unknown key {unknown[0]!r}")

    vals = {k: _number(doc, k) for k in REQUIRED_KEYS}
    params = SystemParams(vals["a"], vals["b"], vals["c"], vals["alpha"], vals["beta"],
                          vals["gamma"], vals["lambda"])
    W = ControlRange(vals["omega_minus"], vals["omega_plus"])

    window = None
    if any(k in doc for k in WINDOW_KEYS):
        base = GridWindow()
        win = {k: _number(doc, k) if k in doc else getattr(base, "h" if k == "grid_h" else k)
               for k in WINDOW_KEYS}
        try:
            window = GridWindow(win["s_min"], win["s_max"], win["t_min"], win["t_max"], win["grid_h"])
        except ValueError as exc:
            raise ParseError(str(exc)) from None

    dt = _number(doc, "dt") if "dt" in doc else None
    if dt is not None and dt <= 0:
        raise ParseError("key 'dt' must be positive")
    n_controls = None
    if "n_controls" in doc:
        n = _number(doc, "n_controls")
        if n != int(n) or n < 3:
            raise ParseError("key 'n_controls' must be an integer >= 3")
        n_controls = int(n)
    sample_step = _number(doc, "sample_step") if "sample_step" in doc else None
    if sample_step is not None and sample_step <= 0:
        raise ParseError("key 'sample_step' must be positive")
    return RunConfig(params, W, window, dt, n_controls,
                     _pair(doc, "start_s", "start_t"), _pair(doc, "goal_s", "goal_t"), sample_step)


def config_items(cfg: RunConfig) -> list[tuple[str, float]]:
    """Keys in canonical order; optional keys only when set."""
    p = cfg.params
    items = [("a", p.a), ("b", p.b), ("c", p.c), ("alpha", p.alpha), ("beta", p.beta),
             ("gamma", p.gamma), ("lambda", p.lam),
             ("omega_minus", cfg.range.omega_minus), ("omega_plus", cfg.range.omega_plus)]
    if cfg.window is not None:
        w = cfg.window
        items += [("s_min", w.s_min), ("s_max", w.s_max), ("t_min", w.t_min), ("t_max", w.t_max),
                  ("grid_h", w.h)]
    if cfg.dt is not None:
        items.append(("dt", cfg.dt))
    if cfg.n_controls is not None:
        items.append(("n_controls", cfg.n_controls))
    if cfg.start is not None:
        items += [("start_s", cfg.start.s), ("start_t", cfg.start.t)]
    if cfg.goal is not None:
        items += [("goal_s", cfg.goal.s), ("goal_t", cfg.goal.t)]
    if cfg.sample_step is not None:
        items.append(("sample_step", cfg.sample_step))
    return items


def serialize_config(cfg: RunConfig) -> str:
    return dump_json(dict(config_items(cfg)))


def dump_json(obj, indent: int = 0) -> str:
    """Deterministic JSON: insertion-ordered keys, floats with 17 significant digits."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        body = ",\n".join(f"{pad}{json.dumps(str(k))}: {dump_json(v, indent + 1)}" for k, v in obj.items())
        return "{\n" + body + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        body = ",\n".join(pad + dump_json(v, indent + 1) for v in obj)
        return "[\n" + body + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError("JSON output cannot hold non-finite numbers")
        return fmt17(obj)
    return json.dumps(str(obj))
