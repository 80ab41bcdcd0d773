"""Analytic control-set descriptions and membership predicates.

Regions are stated in the normalized chart of their case and carry the
polynomial chart map, so a description built for a normal form answers
membership queries in the original coordinates after ``pullback_region``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from ._numerics import phi2
from .errors import LarcViolated, UnsupportedCase
from .flows import F_omega, fmt17
from .system import IDENTITY_MAP, CaseTag, ControlRange, PolyMap2, SystemParams, larc, normal_form


class ControlSetKind(enum.Enum):
    WHOLE_PLANE = "WholePlane"
    STRIP = "HorizontalStripClosure"
    COMPLEMENT = "ComplementOfCpCm"
    OMEGA_BAND = "OmegaBand"
    SINGLETONS = "SingletonFamily"


class Topology(enum.Enum):
    OPEN = "open"
    CLOSED = "closed"
    UNKNOWN = "unknown"


class Verdict(enum.Enum):
    INSIDE = "Inside"
    BOUNDARY = "Boundary"
    OUTSIDE = "Outside"

    @property
    def code(self) -> int:
        return {"Inside": 1, "Boundary": 0, "Outside": -1}[self.value]


DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class ControlSetDescription:
    kind: ControlSetKind
    params: SystemParams
    range: ControlRange
    topology: Topology
    chart: PolyMap2 = IDENTITY_MAP

    def strip_bounds(self) -> tuple[float, float]:
        k = -self.params.c / self.params.lam
        lo, hi = sorted((k * self.range.omega_minus, k * self.range.omega_plus))
        return lo, hi

    def closure_text(self) -> str:
        W = self.range
        if self.kind is ControlSetKind.WHOLE_PLANE:
            return "R^2"
        if self.kind is ControlSetKind.STRIP:
            lo, hi = self.strip_bounds()
            return f"R x [{fmt17(lo)}, {fmt17(hi)}]"
        if self.kind is ControlSetKind.COMPLEMENT:
            return "R^2 \\ (C+ u C-)"
        if self.kind is ControlSetKind.OMEGA_BAND:
            return f"[{fmt17(W.omega_minus)}, {fmt17(W.omega_plus)}] x R"
        return "{(0, t) : t in R}"


@dataclass(frozen=True)
class RegionSample:
    state: tuple[float, float]
    verdict: Verdict
    tolerance: float


# -- contracting-case regions ---------------------------------------------

def cminus_member(p: SystemParams, W: ControlRange, v) -> bool:
    """Below both asymptote lines."""
    return F_omega(p, W.omega_minus, v) < 0 and F_omega(p, W.omega_plus, v) < 0


def upper_curve(p: SystemParams, W: ControlRange, s):
    """Height of the boundary of C+ above s: the omega^+ curve right of v_a, omega^- left."""
    s = np.asarray(s, dtype=float)
    s_a = -p.c / p.a
    omega = np.where(s >= s_a, W.omega_plus, W.omega_minus)
    tau = (s - s_a) / omega
    return p.a * omega ** 2 * tau * tau * phi2(p.lam * tau)


def cplus_member(p: SystemParams, W: ControlRange, v) -> bool:
    """Strictly above one of the two curves leaving v_a."""
    s, t = float(v[0]), float(v[1])
    s_a = -p.c / p.a
    for omega in (W.omega_minus, W.omega_plus):
        tau = (s - s_a) / omega
        if tau >= 0 and t > p.a * omega ** 2 * tau * tau * float(phi2(p.lam * tau)):
            return True
    return False


def band_member(omega1: float, omega2: float, p: SystemParams, v) -> bool:
    """Strictly between the omega1 and omega2 asymptotes."""
    return F_omega(p, omega1, v) * F_omega(p, omega2, v) < 0


# -- descriptions ----------------------------------------------------------

def _require_larc(p: SystemParams) -> None:
    if not larc(p):
        raise LarcViolated("system does not satisfy the Lie algebra rank condition")


def control_sets(tag: CaseTag, p: SystemParams, W: ControlRange,
                 time_reversed: bool = False) -> list[ControlSetDescription]:
    """Control sets of a normalized system.

    ``time_reversed`` marks a chart obtained by reversing time, which turns
    the closed sets of the chart into open ones of the original system.
    """
    closed = Topology.OPEN if time_reversed else Topology.CLOSED

    def desc(kind, topology=closed):
        return [ControlSetDescription(kind, p, W, topology)]

    if tag in (CaseTag.NON_SINGULAR, CaseTag.REDUCIBLE):
        raise UnsupportedCase(f"control sets of {tag} systems need a normal form first")
    if tag is CaseTag.QUADRATIC:
        return desc(ControlSetKind.SINGLETONS, Topology.CLOSED)
    _require_larc(p)
    if tag is CaseTag.FLAT:
        return desc(ControlSetKind.WHOLE_PLANE, Topology.CLOSED)
    if tag is CaseTag.CONTRACTING:
        if p.lam >= 0 or p.b != 1 or p.gamma != 0 or p.a < 0:
            raise ValueError("contracting descriptions need the normal form (lam < 0, b = 1, gamma = 0, a >= 0)")
        return desc(ControlSetKind.STRIP if p.a == 0 else ControlSetKind.COMPLEMENT)
    if p.beta >= 0 or p.c != 0:
        raise ValueError("band descriptions need the normal form (beta < 0, c = 0)")
    if p.gamma != 0:
        return desc(ControlSetKind.OMEGA_BAND)
    return desc(ControlSetKind.SINGLETONS, Topology.CLOSED)


def pullback_region(desc: ControlSetDescription, f: PolyMap2) -> ControlSetDescription:
    """Description whose membership at v equals that of desc at f(v)."""
    return replace(desc, chart=f.then(desc.chart))


def control_sets_for(p: SystemParams, W: ControlRange) -> list[ControlSetDescription]:
    """Normalize, describe, and pull the descriptions back to p's coordinates."""
    nf = normal_form(p, W)
    descs = control_sets(nf.tag, nf.params, W, nf.time_reversed)
    return [pullback_region(d, nf.conj) for d in descs]


def margin(desc: ControlSetDescription, s, t) -> np.ndarray:
    """Signed margin in chart units: positive inside, negative outside."""
    S, T = desc.chart.forward(s, t)
    p, W = desc.params, desc.range
    kind = desc.kind
    if kind is ControlSetKind.WHOLE_PLANE:
        return np.full(np.shape(S), np.inf)
    if kind is ControlSetKind.STRIP:
        lo, hi = desc.strip_bounds()
        return np.minimum(T - lo, hi - T)
    if kind is ControlSetKind.OMEGA_BAND:
        return np.minimum(S - W.omega_minus, W.omega_plus - S)
    if kind is ControlSetKind.SINGLETONS:
        return -np.abs(S)
    lam2 = p.lam ** 2
    below = np.maximum(F_omega(p, W.omega_minus, (S, T)), F_omega(p, W.omega_plus, (S, T))) / lam2
    above = upper_curve(p, W, S) - T
    return np.minimum(below, above)


def verdicts(desc: ControlSetDescription, s, t, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Vectorized verdict codes: 1 inside, 0 boundary, -1 outside."""
    d = margin(desc, s, t)
    if desc.kind is ControlSetKind.SINGLETONS:
        # the family is the line itself; the tolerance gives it thickness
        return np.where(-d <= tol, 1, -1)
    return np.where(d > tol, 1, np.where(d < -tol, -1, 0))


def membership(desc: ControlSetDescription, v, tol: float = DEFAULT_TOL) -> RegionSample:
    code = int(verdicts(desc, v[0], v[1], tol))
    verdict = {1: Verdict.INSIDE, 0: Verdict.BOUNDARY, -1: Verdict.OUTSIDE}[code]
    return RegionSample((float(v[0]), float(v[1])), verdict, tol)


def belongs(desc: ControlSetDescription, v, *, closure: bool = False, tol: float = DEFAULT_TOL) -> bool:
    """Membership in the set (default) or in its closure.

    Boundary points belong to the closure, and to the set itself only when
    the set is closed.
    """
    verdict = membership(desc, v, tol).verdict
    if verdict is Verdict.BOUNDARY:
        return closure or desc.topology is Topology.CLOSED
    return verdict is Verdict.INSIDE


def rasterize(desc: ControlSetDescription, s_vals, t_vals, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Verdict codes on the grid s_vals x t_vals, indexed [i_t, i_s]."""
    S, T = np.meshgrid(np.asarray(s_vals, dtype=float), np.asarray(t_vals, dtype=float))
    return verdicts(desc, S, T, tol)


def raster_csv(desc: ControlSetDescription, s_vals, t_vals, tol: float = DEFAULT_TOL) -> str:
    codes = rasterize(desc, s_vals, t_vals, tol)
    lines = ["s,t,verdict"]
    for j, t in enumerate(t_vals):
        for i, s in enumerate(s_vals):
            lines.append(f"{fmt17(s)},{fmt17(t)},{codes[j, i]}")
    return "\n".join(lines) + "\n"


def describe(desc: ControlSetDescription) -> dict:
    f = desc.chart
    return {
        "kind": desc.kind.value,
        "closure": desc.closure_text(),
        "topology": desc.topology.value,
        "chart": {"k": f.k, "m": f.m, "q": f.q, "r": f.r},
        "chart_params": dict(zip(("a", "b", "c", "alpha", "beta", "gamma", "lambda"), desc.params.as_tuple())),
        "omega_minus": desc.range.omega_minus,
        "omega_plus": desc.range.omega_plus,
    }
