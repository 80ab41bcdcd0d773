"""SVG phase portraits: control-set shading, asymptote lines, extremal curves, orbits."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .control_sets import ControlSetDescription, ControlSetKind, upper_curve, verdicts
from .flows import Trajectory, flow_any
from .oracle import GridWindow
from .system import ControlRange, SystemParams

MAX_SHADE_CELLS = 200
CURVE_SAMPLES = 400


@dataclass
class Figure:
    """Accumulates SVG elements in window coordinates."""

    window: GridWindow
    width: int = 600
    height: int = 600
    margin: int = 40
    elements: list[str] = field(default_factory=list)

    def x(self, s):
        w = self.window
        return self.margin + (np.asarray(s, dtype=float) - w.s_min) / (w.s_max - w.s_min) * self.width

    def y(self, t):
        w = self.window
        return self.margin + (w.t_max - np.asarray(t, dtype=float)) / (w.t_max - w.t_min) * self.height

    def rect(self, s0, t0, s1, t1, style: str) -> None:
        x0, x1 = self.x(s0), self.x(s1)
        y0, y1 = self.y(t1), self.y(t0)
        self.elements.append(f'<rect x="{x0:.3f}" y="{y0:.3f}" width="{x1 - x0:.3f}" '
                             f'height="{y1 - y0:.3f}" {style}/>')

    def polyline(self, s, t, style: str) -> None:
        """Draw the finite runs of the curve; non-finite samples split it."""
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        ok = np.isfinite(s) & np.isfinite(t) & (np.abs(s) < 1e6) & (np.abs(t) < 1e6)
        runs = np.split(np.arange(len(s)), np.flatnonzero(np.diff(ok.astype(int))) + 1)
        for run in runs:
            if len(run) < 2 or not ok[run[0]]:
                continue
            pts = " ".join(f"{x:.3f},{y:.3f}" for x, y in zip(self.x(s[run]), self.y(t[run])))
            self.elements.append(f'<polyline points="{pts}" {style} clip-path="url(#window)"/>')

    def render(self) -> str:
        W, H, m = self.width, self.height, self.margin
        w = self.window
        head = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W + 2 * m}" height="{H + 2 * m}" '
            f'viewBox="0 0 {W + 2 * m} {H + 2 * m}">',
            f'<defs><clipPath id="window"><rect x="{m}" y="{m}" width="{W}" height="{H}"/></clipPath></defs>',
            f'<rect x="{m}" y="{m}" width="{W}" height="{H}" fill="white" stroke="black"/>',
        ]
        axes = []
        if w.s_min < 0 < w.s_max:
            axes.append(f'<line x1="{self.x(0):.3f}" y1="{m}" x2="{self.x(0):.3f}" y2="{m + H}" '
                        'stroke="#999999" stroke-width="0.5"/>')
        if w.t_min < 0 < w.t_max:
            axes.append(f'<line x1="{m}" y1="{self.y(0):.3f}" x2="{m + W}" y2="{self.y(0):.3f}" '
                        'stroke="#999999" stroke-width="0.5"/>')
        labels = [
            f'<text x="{m}" y="{m + H + 16}" font-size="11">s = {w.s_min:g}</text>',
            f'<text x="{m + W}" y="{m + H + 16}" font-size="11" text-anchor="end">s = {w.s_max:g}</text>',
            f'<text x="{m - 4}" y="{m + H}" font-size="11" text-anchor="end">{w.t_min:g}</text>',
            f'<text x="{m - 4}" y="{m + 10}" font-size="11" text-anchor="end">{w.t_max:g}</text>',
        ]
        return "\n".join(head + self.elements + axes + labels + ["</svg>"]) + "\n"


def _shade(fig: Figure, desc: ControlSetDescription) -> None:
    """Row-run rectangles over cells whose center is inside (or on the boundary of) the set."""
    w = fig.window
    n_s = min(MAX_SHADE_CELLS, w.shape[1])
    n_t = min(MAX_SHADE_CELLS, w.shape[0])
    ds = (w.s_max - w.s_min) / n_s
    dt = (w.t_max - w.t_min) / n_t
    s_c = w.s_min + (np.arange(n_s) + 0.5) * ds
    t_c = w.t_min + (np.arange(n_t) + 0.5) * dt
    S, T = np.meshgrid(s_c, t_c)
    codes = verdicts(desc, S, T)
    for j in range(n_t):
        row = np.concatenate([[False], codes[j] >= 0, [False]])
        edges = np.flatnonzero(np.diff(row.astype(int)))
        for a, b in zip(edges[::2], edges[1::2]):
            fig.rect(w.s_min + a * ds, w.t_min + j * dt, w.s_min + b * ds, w.t_min + (j + 1) * dt,
                     'fill="#cfe3f7" stroke="none"')


def _chart_box(desc: ControlSetDescription, w: GridWindow):
    """Bounding box of the window in chart coordinates."""
    s, t = np.meshgrid(np.linspace(w.s_min, w.s_max, 41), np.linspace(w.t_min, w.t_max, 41))
    S, T = desc.chart.forward(s, t)
    return float(S.min()), float(S.max()), float(T.min()), float(T.max())


def _chart_curve(fig: Figure, desc: ControlSetDescription, S, T, style: str) -> None:
    s, t = desc.chart.inverse(np.asarray(S, dtype=float), np.asarray(T, dtype=float))
    fig.polyline(s, t, style)


def _region_curves(fig: Figure, desc: ControlSetDescription) -> None:
    p, W = desc.params, desc.range
    S0, S1, T0, T1 = _chart_box(desc, fig.window)
    S = np.linspace(S0, S1, CURVE_SAMPLES)
    kind = desc.kind
    if kind in (ControlSetKind.STRIP, ControlSetKind.COMPLEMENT):
        # asymptote lines F_omega = 0 of both extreme controls
        for omega, color in ((W.omega_minus, "#c0392b"), (W.omega_plus, "#27ae60")):
            T = -omega * (p.lam * (p.c + p.a * S) + p.a * omega) / p.lam ** 2
            _chart_curve(fig, desc, S, T, f'fill="none" stroke="{color}" stroke-width="1.2"')
    if kind is ControlSetKind.COMPLEMENT:
        s_a = -p.c / p.a
        for lo, hi in ((min(S0, s_a), s_a), (s_a, max(S1, s_a))):
            Sc = np.linspace(lo, hi, CURVE_SAMPLES)
            _chart_curve(fig, desc, Sc, upper_curve(p, W, Sc),
                         'fill="none" stroke="#8e44ad" stroke-width="1.2"')
    if kind is ControlSetKind.OMEGA_BAND:
        T = np.linspace(T0, T1, CURVE_SAMPLES)
        for omega in (W.omega_minus, W.omega_plus):
            _chart_curve(fig, desc, np.full_like(T, omega), T,
                         'fill="none" stroke="#2c3e50" stroke-width="1.2" stroke-dasharray="4,3"')
    if kind is ControlSetKind.SINGLETONS:
        T = np.linspace(T0, T1, CURVE_SAMPLES)
        _chart_curve(fig, desc, np.zeros_like(T), T, 'fill="none" stroke="#1f4e79" stroke-width="2"')


def _orbit(p: SystemParams, v, omega: float, span: float, n: int = 200):
    taus = np.linspace(-span, span, 2 * n + 1)
    pts = np.full((len(taus), 2), np.nan)
    for i, tau in enumerate(taus):
        try:
            pts[i] = flow_any(p, v, omega, float(tau))
        except (OverflowError, FloatingPointError, ValueError):
            continue
    return pts[:, 0], pts[:, 1]


def render_svg(p: SystemParams, W: ControlRange, window: GridWindow,
               descs: list[ControlSetDescription], *, orbit_points=(),
               trajectories: list[Trajectory] = ()) -> str:
    """Phase portrait of the window.

    orbit_points: states whose constant-control orbits with controls +-eps/2
    are drawn (the parabolas used by the zero-drift planner).
    """
    fig = Figure(window)
    for d in descs:
        _shade(fig, d)
    for d in descs:
        _region_curves(fig, d)
    eps = min(W.omega_plus, -W.omega_minus)
    if p.a != 0 and p.gamma != 0:
        eps = min(eps, abs(p.gamma) / (2 * abs(p.a)))
    span = 2 * max(window.s_max - window.s_min, window.t_max - window.t_min) / max(abs(p.b) * eps, 1e-9)
    with np.errstate(all="ignore"):
        for v in orbit_points:
            for omega, color in ((eps / 2, "#e67e22"), (-eps / 2, "#16a085")):
                s, t = _orbit(p, v, omega, span)
                fig.polyline(s, t, f'fill="none" stroke="{color}" stroke-width="1" stroke-dasharray="2,2"')
    for traj in trajectories:
        fig.polyline(traj.states[:, 0], traj.states[:, 1], 'fill="none" stroke="black" stroke-width="1.5"')
        s0, t0 = traj.states[0]
        s1, t1 = traj.states[-1]
        fig.elements.append(f'<circle cx="{float(fig.x(s0)):.3f}" cy="{float(fig.y(t0)):.3f}" r="3" fill="black"/>')
        fig.elements.append(f'<circle cx="{float(fig.x(s1)):.3f}" cy="{float(fig.y(t1)):.3f}" r="3" '
                            'fill="white" stroke="black"/>')
    return fig.render()
