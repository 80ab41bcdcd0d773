"""Constructive steering inside control sets.

Each builder follows a concatenation argument: it reaches an auxiliary curve
(a parabola, a horizontal fiber, an asymptote line, a vertical fiber), moves
along it, and leaves towards the target. Segment times come from closed forms
or bracketed root solves. Every schedule is replayed by exact simulation and
the replay error is reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from ._numerics import quadratic_roots
from .control_sets import (ControlSetKind, Verdict, control_sets, membership)
from .errors import LarcViolated, NotInControlSet, PreconditionViolated
from .flows import ControlSchedule, F_omega, State, segment_arrays, simulate, simulate_any
from .system import CaseTag, ControlRange, PolyMap2, SystemParams, classify_case, normal_form, transform_params

ROOT_XTOL = 1e-12


@dataclass(frozen=True)
class SteeringResult:
    schedule: ControlSchedule
    endpoint_error: float
    construction: str
    endpoint: State


def _flow(tag, p, v, omega, tau) -> State:
    s, t = segment_arrays(tag, p, v[0], v[1], omega, tau)
    return State(float(s), float(t))


def _certify(tag, p, v0, v1, schedule: ControlSchedule, construction: str) -> SteeringResult:
    end = simulate(tag, p, v0, schedule).final
    err = math.hypot(end.s - v1[0], end.t - v1[1])
    return SteeringResult(schedule, err, construction, end)


def _same(v0, v1) -> bool:
    return float(v0[0]) == float(v1[0]) and float(v0[1]) == float(v1[1])


def _root(fn, lo: float, hi: float) -> float:
    scale = max(1.0, abs(lo), abs(hi))
    return brentq(fn, lo, hi, xtol=ROOT_XTOL * scale, rtol=4 * np.finfo(float).eps, maxiter=500)


# -- zero drift along s: parabolic trajectories -----------------------------

def _parabola(p: SystemParams, v, omega: float):
    """Coefficients (L, Q) of the orbit through v: t = t_v + L (s - s_v) + Q (s - s_v)^2."""
    kappa = p.a * omega + p.gamma
    L = (v[0] * kappa + p.c * omega) / (p.b * omega)
    Q = kappa / (2 * p.b * omega)
    return L, Q


def _parabola_height(p, v, omega, s) -> float:
    L, Q = _parabola(p, v, omega)
    d = s - v[0]
    return v[1] + L * d + Q * d * d


def _hit_parabola(p: SystemParams, v0, omega: float, v1, omega1: float) -> float:
    """Smallest positive time at which the omega orbit of v0 meets the omega1 orbit of v1."""
    b = p.b
    kappa = p.a * omega + p.gamma
    L, Q = _parabola(p, v1, omega1)
    D0 = v0[0] - v1[0]
    c0 = v0[1] - v1[1] - L * D0 - Q * D0 * D0
    c1 = (v0[0] * kappa + p.c * omega) - L * b * omega - 2 * Q * D0 * b * omega
    c2 = 0.5 * b * omega * kappa - Q * b * b * omega * omega
    roots = [r for r in quadratic_roots(c2, c1, c0) if r > 0]
    if not roots:
        raise PreconditionViolated("orbit does not meet the target parabola in positive time")
    return min(roots)


def _flat_direct(p, W, v0, v1):
    """One segment when v1 lies on a forward orbit of v0, or a coast with omega = 0."""
    ds = v1[0] - v0[0]
    if ds == 0:
        if v0[0] != 0 and p.gamma != 0:
            tau = (v1[1] - v0[1]) / (p.gamma * v0[0])
            if tau > 0:
                return ControlSchedule.of((tau, 0.0))
        return None
    # along an orbit t - t0 is affine in 1/omega once s1 - s0 is fixed
    rest = v1[1] - v0[1] - (p.a * v0[0] + p.c) * ds / p.b - p.a * ds * ds / (2 * p.b)
    num = p.gamma * (v0[0] * ds + 0.5 * ds * ds) / p.b
    if rest == 0:
        return None
    omega = num / rest
    if omega == 0 or not (W.omega_minus <= omega <= W.omega_plus):
        return None
    tau = ds / (p.b * omega)
    if tau <= 0:
        return None
    return ControlSchedule.of((tau, omega))


def _steer_flat_chart(p: SystemParams, W: ControlRange, v0, v1):
    direct = _flat_direct(p, W, v0, v1)
    if direct is not None:
        return direct, "direct"

    tag = CaseTag.FLAT
    eps = min(W.omega_plus, -W.omega_minus)
    if p.a != 0:
        eps = min(eps, p.gamma / (2 * abs(p.a)))
    w0, w1 = -eps / 2, eps / 2
    prefix: list[tuple[float, float]] = []
    start = State(*v0)

    if not start.t > _parabola_height(p, v1, w1, start.s):
        # outside the w1 parabola: move right of s = 0, then rise with omega = 0
        if start.s <= 0:
            tau = (1.0 - start.s) / (p.b * w1)
            prefix.append((tau, w1))
            start = _flow(tag, p, start, w1, tau)
        rise = _parabola_height(p, v1, w1, start.s) + 1.0 - start.t
        if rise > 0:
            tau = rise / (p.gamma * start.s)
            prefix.append((tau, 0.0))
            start = _flow(tag, p, start, 0.0, tau)
        label = "escape"
    else:
        label = "inside"

    tau0 = _hit_parabola(p, start, w0, v1, w1)
    mid = _flow(tag, p, start, w0, tau0)
    if mid.s <= v1[0]:
        tau1 = (v1[0] - mid.s) / (p.b * w1)
        return ControlSchedule.of(*prefix, (tau0, w0), (tau1, w1)), label + "-left"
    tau0 = _hit_parabola(p, start, w1, v1, w0)
    mid = _flow(tag, p, start, w1, tau0)
    tau1 = (v1[0] - mid.s) / (p.b * w0)
    return ControlSchedule.of(*prefix, (tau0, w1), (tau1, w0)), label + "-right"


def steer_flat(p: SystemParams, W: ControlRange, v0, v1) -> SteeringResult:
    """Steer in a system without drift along s (beta = lambda = 0, alpha = 0)."""
    if classify_case(p) is not CaseTag.FLAT:
        raise PreconditionViolated("steer_flat needs beta = lambda = alpha = 0")
    if p.b * p.gamma == 0:
        raise LarcViolated("flat systems need b gamma != 0")
    if _same(v0, v1):
        return _certify(CaseTag.FLAT, p, v0, v1, ControlSchedule(), "trivial")
    # the symmetry (s, t) -> (sign b s, sign(b gamma) t) makes b > 0 and gamma > 0
    f = PolyMap2(k=math.copysign(1.0, p.b), m=math.copysign(1.0, p.b * p.gamma))
    q = transform_params(p, f)
    a = State(*(float(x) for x in f.forward(*v0)))
    b = State(*(float(x) for x in f.forward(*v1)))
    schedule, label = _steer_flat_chart(q, W, a, b)
    return _certify(CaseTag.FLAT, p, v0, v1, schedule, label)


# -- contracting, a = 0: horizontal fibers ---------------------------------

def _require_contracting_nf(p: SystemParams) -> None:
    if classify_case(p) is not CaseTag.CONTRACTING or p.lam >= 0 or p.b != 1 or p.gamma != 0:
        raise PreconditionViolated("needs the contracting normal form (lam < 0, b = 1, gamma = 0)")


def _strip_fiber_time(p, W, t_from, t_to):
    """(tau, omega) moving t from t_from to t_to exactly with an extreme control."""
    if t_to == t_from:
        return 0.0, 0.0
    for omega in (W.omega_minus, W.omega_plus):
        t_star = -p.c * omega / p.lam
        if (t_star - t_to) * (t_to - t_from) > 0:
            return math.log((t_to - t_star) / (t_from - t_star)) / p.lam, omega
    raise NotInControlSet("fiber height outside the strip interior")


def steer_strip(p: SystemParams, W: ControlRange, v0, v1) -> SteeringResult:
    """Steer inside the horizontal strip using the fibers t = -(c/lam) omega."""
    _require_contracting_nf(p)
    if p.a != 0:
        raise PreconditionViolated("steer_strip needs a = 0")
    tag = CaseTag.CONTRACTING
    desc = control_sets(tag, p, W)[0]
    for v in (v0, v1):
        if membership(desc, v, 0.0).verdict is not Verdict.INSIDE:
            raise NotInControlSet(f"state {tuple(v)} is not in the strip interior")
    if _same(v0, v1):
        return _certify(tag, p, v0, v1, ControlSchedule(), "trivial")

    def fiber_omega(t):
        return -p.lam * t / p.c

    candidates = [fiber_omega(v0[1]), fiber_omega(v1[1]), W.omega_plus / 2, W.omega_minus / 2,
                  0.9 * W.omega_plus, 0.9 * W.omega_minus]
    plans = []
    for omega in candidates:
        if omega == 0 or not (W.omega_minus < omega < W.omega_plus):
            continue
        t_f = -p.c * omega / p.lam
        tau0, w0 = _strip_fiber_time(p, W, v0[1], t_f)
        tau2, w2 = _strip_fiber_time(p, W, t_f, v1[1])
        s_in = v0[0] + w0 * tau0
        s_out = v1[0] - w2 * tau2
        tau1 = (s_out - s_in) / omega
        if tau1 >= 0:
            plans.append(ControlSchedule.of((tau0, w0), (tau1, omega), (tau2, w2)))
    if plans:
        return _certify(tag, p, v0, v1, min(plans, key=lambda c: c.total_duration), "fiber")

    # travel direction disagrees with both fibers: use one of each sign
    wa, wb = W.omega_plus / 2, W.omega_minus / 2
    ta, tb = -p.c * wa / p.lam, -p.c * wb / p.lam
    tau0, w0 = _strip_fiber_time(p, W, v0[1], ta)
    tau_ab, w_ab = _strip_fiber_time(p, W, ta, tb)
    tau2, w2 = _strip_fiber_time(p, W, tb, v1[1])
    gap = v1[0] - (v0[0] + w0 * tau0 + w_ab * tau_ab + w2 * tau2)
    xa, xb = (gap / wa, 0.0) if gap >= 0 else (0.0, gap / wb)
    sched = ControlSchedule.of((tau0, w0), (xa, wa), (tau_ab, w_ab), (xb, wb), (tau2, w2))
    return _certify(tag, p, v0, v1, sched, "two-fiber")


# -- contracting, a > 0: the band between the asymptotes -------------------

def _orbit_height(p, v, omega, s):
    """t on the omega orbit through v above abscissa s (b = 1 so tau = ds/omega)."""
    tau = (s - v[0]) / omega
    _, t = segment_arrays(CaseTag.CONTRACTING, p, v[0], v[1], omega, tau)
    return float(t)


def _find_crossing(fn, start: float, direction: float) -> float:
    """Root of fn beyond start, scanning outward in geometric steps."""
    f_prev = fn(start)
    prev = start
    step = 0.5
    for _ in range(80):
        x = start + direction * step
        fx = fn(x)
        if not math.isfinite(fx):
            fx = math.copysign(1e300, fx) if not math.isnan(fx) else -f_prev
        if fx == 0:
            return x
        if (fx > 0) != (f_prev > 0):
            lo, hi = sorted((prev, x))
            return _root(lambda y: max(-1e300, min(1e300, fn(y))), lo, hi)
        prev, f_prev = x, fx
        step *= 2
    raise PreconditionViolated("no crossing found while scanning")


def _orbit_halves(p, W, v1, v2, w1, w2):
    """Schedules v1 -> v2 and v2 -> v1 through the two orbit crossings.

    v1 sits in the right wedge (F_w1 > 0 > F_w2), v2 in the left one.
    """
    if not (F_omega(p, w1, v1) > 0 > F_omega(p, w2, v1) and F_omega(p, w1, v2) < 0 < F_omega(p, w2, v2)):
        raise PreconditionViolated("states do not have the sign pattern F_w1(v1) > 0 > F_w2(v1), "
                                   "F_w1(v2) < 0 < F_w2(v2)")

    def gap(s):
        return _orbit_height(p, v1, w1, s) - _orbit_height(p, v2, w2, s)

    s_low = _find_crossing(gap, min(v1[0], v2[0]), -1.0)
    s_high = _find_crossing(gap, max(v1[0], v2[0]), 1.0)
    tau1, tau2 = (s_low - v1[0]) / w1, (s_low - v2[0]) / w2
    rho1, rho2 = (s_high - v1[0]) / w1, (s_high - v2[0]) / w2
    there = ControlSchedule.of((tau1, w1), (-tau2, w2))
    back = ControlSchedule.of((rho2, w2), (-rho1, w1))
    return there, back


def closed_orbit(p: SystemParams, W: ControlRange, v1, v2,
                 omega1: float | None = None, omega2: float | None = None) -> SteeringResult:
    """Loop v1 -> v2 -> v1 built from the omega1 and omega2 orbits of both points."""
    _require_contracting_nf(p)
    if p.a <= 0:
        raise PreconditionViolated("closed_orbit needs a > 0")
    w1 = W.omega_minus if omega1 is None else omega1
    w2 = W.omega_plus if omega2 is None else omega2
    if not (W.omega_minus <= w1 < 0 < w2 <= W.omega_plus):
        raise PreconditionViolated("need omega_minus <= omega1 < 0 < omega2 <= omega_plus")
    there, back = _orbit_halves(p, W, v1, v2, w1, w2)
    tag = CaseTag.CONTRACTING
    mid = simulate(tag, p, v1, there).final
    loop = there.then(back)
    res = _certify(tag, p, v1, v1, loop, "closed_orbit")
    err = max(res.endpoint_error, math.hypot(mid.s - v2[0], mid.t - v2[1]))
    return SteeringResult(loop, err, "closed_orbit", res.endpoint)


def _wedge(p, W, v, margin: float) -> str | None:
    fm = F_omega(p, W.omega_minus, v)
    fp = F_omega(p, W.omega_plus, v)
    if fm >= margin and fp <= -margin:
        return "R"
    if fm <= -margin and fp >= margin:
        return "L"
    return None


def _band_anchor(p, W, side: str, margin: float) -> State:
    """A point deep in one wedge, on the omega = 0 asymptote t = 0."""
    s_apex = -(p.c + p.a * (W.omega_minus + W.omega_plus) / p.lam) / p.a
    direction = 1.0 if side == "R" else -1.0
    step = 1.0
    for _ in range(80):
        v = State(s_apex + direction * step, 0.0)
        if _wedge(p, W, v, margin) == side:
            return v
        step *= 2
    raise PreconditionViolated("could not place a point inside the band")


def _into_band(p, W, v0, margin):
    """Forward leg from v0 to a point deep in the band."""
    if _wedge(p, W, v0, margin):
        return ControlSchedule(), State(*v0)
    taus = 0.25 * np.arange(1, 801)
    best = None
    for omega in (W.omega_plus / 2, W.omega_minus / 2):
        s, t = segment_arrays(CaseTag.CONTRACTING, p, v0[0], v0[1], omega, taus)
        fm = F_omega(p, W.omega_minus, (s, t))
        fp = F_omega(p, W.omega_plus, (s, t))
        ok = ((fm >= margin) & (fp <= -margin)) | ((fm <= -margin) & (fp >= margin))
        if ok.any():
            k = int(np.argmax(ok))
            if best is None or taus[k] < best[0]:
                best = (float(taus[k]), omega)
    if best is None:
        raise PreconditionViolated("forward orbit never enters the band")
    tau, omega = best
    return ControlSchedule.of((tau, omega)), _flow(CaseTag.CONTRACTING, p, v0, omega, tau)


def _from_band(p, W, v1, margin):
    """A band point u and a forward schedule u -> v1.

    Scans backward orbits of v1. Either the orbit itself enters the band, or
    it crosses an asymptote whose far upstream part lies in the band; the
    schedule then runs along that asymptote and switches onto the orbit.
    """
    tag = CaseTag.CONTRACTING
    if _wedge(p, W, v1, margin):
        return ControlSchedule(), State(*v1)
    lo, hi = W.omega_minus, W.omega_plus
    exits = [lo, hi, lo / 2, hi / 2]
    lines = [hi * k / 8 for k in range(1, 8)] + [lo * k / 8 for k in range(1, 8)]
    dtau = 0.05
    taus = dtau * np.arange(0, 801)
    for k in range(1, len(taus)):
        for wi in exits:
            u = _flow(tag, p, v1, wi, -taus[k])
            if _wedge(p, W, u, margin):
                return ControlSchedule.of((taus[k], wi)), u
            prev = _flow(tag, p, v1, wi, -taus[k - 1])
            for ws in lines:
                g0 = F_omega(p, ws, prev)
                g1 = F_omega(p, ws, u)
                if g0 == 0 or (g0 > 0) == (g1 > 0):
                    continue
                tau_c = _root(lambda x: F_omega(p, ws, _flow(tag, p, v1, wi, -x)), taus[k - 1], taus[k])
                P = _flow(tag, p, v1, wi, -tau_c)
                step = 1.0
                for _ in range(60):
                    s_u = P.s - ws * step
                    t_u = -ws * (p.lam * (p.c + p.a * s_u) + p.a * ws) / p.lam ** 2
                    anchor = State(s_u, t_u)
                    if _wedge(p, W, anchor, margin):
                        return ControlSchedule.of((step, ws), (tau_c, wi)), anchor
                    step *= 2
    raise PreconditionViolated("no backward route from the band to the target")


def steer_complement(p: SystemParams, W: ControlRange, v0, v1) -> SteeringResult:
    """Steer between interior points of the complement of C+ u C-."""
    _require_contracting_nf(p)
    if p.a <= 0:
        raise PreconditionViolated("steer_complement needs a > 0")
    tag = CaseTag.CONTRACTING
    desc = control_sets(tag, p, W)[0]
    for v in (v0, v1):
        if membership(desc, v, 0.0).verdict is not Verdict.INSIDE:
            raise NotInControlSet(f"state {tuple(v)} is not interior to the control set")
    if _same(v0, v1):
        return _certify(tag, p, v0, v1, ControlSchedule(), "trivial")
    margin = 0.1 * p.lam ** 2
    lead, u0 = _into_band(p, W, v0, margin)
    tail, u1 = _from_band(p, W, v1, margin)
    side0, side1 = _wedge(p, W, u0, margin), _wedge(p, W, u1, margin)

    def cross(src, dst, src_side):
        if src_side == "R":
            return _orbit_halves(p, W, src, dst, W.omega_minus, W.omega_plus)[0]
        return _orbit_halves(p, W, dst, src, W.omega_minus, W.omega_plus)[1]

    if _same(u0, u1):
        middle = ControlSchedule()
    elif side0 != side1:
        middle = cross(u0, u1, side0)
    else:
        other = "L" if side0 == "R" else "R"
        w = _band_anchor(p, W, other, margin)
        middle = cross(u0, w, side0).then(cross(w, u1, other))
    # junction states are re-simulated so later legs start where earlier ones end
    sched = lead.then(middle).then(tail)
    return _certify(tag, p, v0, v1, sched, "band")


# -- band case: vertical fibers s = omega ----------------------------------

def _require_band_nf(p: SystemParams) -> None:
    if classify_case(p) is not CaseTag.BAND or p.beta >= 0 or p.c != 0 or p.b != -p.beta:
        raise PreconditionViolated("needs the band normal form (beta < 0, b = -beta, c = 0)")


def _band_reach_s(p, W, s_from, s_to):
    """(tau, omega) taking s from s_from to s_to exactly with an extreme control."""
    if s_to == s_from:
        return 0.0, 0.0
    omega = W.omega_plus if s_to > s_from else W.omega_minus
    return math.log((s_to - omega) / (s_from - omega)) / p.beta, omega


def steer_band(p: SystemParams, W: ControlRange, v0, v1) -> SteeringResult:
    """Steer inside Omega x R by riding vertical fibers s = omega."""
    _require_band_nf(p)
    if p.gamma == 0:
        raise PreconditionViolated("steer_band needs gamma != 0")
    tag = CaseTag.BAND
    for v in (v0, v1):
        if not (W.omega_minus < v[0] < W.omega_plus):
            raise NotInControlSet(f"state {tuple(v)} has s outside the interior of the control range")
    if _same(v0, v1):
        return _certify(tag, p, v0, v1, ControlSchedule(), "trivial")

    def speed(omega):
        return (p.a * omega + p.gamma) * omega

    def move(v, s_to):
        tau, omega = _band_reach_s(p, W, v[0], s_to)
        return (tau, omega), _flow(tag, p, v, omega, tau)

    m = min(W.omega_plus, -W.omega_minus) / 2
    if p.a != 0:
        m = min(m, abs(p.gamma) / (2 * abs(p.a)))
    plans = []
    for omega in (v0[0], v1[0], m, -m, 0.9 * W.omega_plus, 0.9 * W.omega_minus):
        if speed(omega) == 0:
            continue
        seg0, u = move(v0, omega)
        seg2, w = move(State(omega, 0.0), v1[0])
        rise = v1[1] - u.t - w.t
        tau_h = rise / speed(omega)
        if tau_h >= 0:
            plans.append(ControlSchedule.of(seg0, (tau_h, omega), seg2))
    if plans:
        return _certify(tag, p, v0, v1, min(plans, key=lambda c: c.total_duration), "fiber")

    # the needed vertical motion has the wrong sign on every single fiber
    seg0, u = move(v0, m)
    seg1, w = move(State(m, 0.0), -m)
    seg2, z = move(State(-m, 0.0), v1[0])
    rise = v1[1] - u.t - w.t - z.t
    up, down = speed(m), speed(-m)
    ha, hb = (rise / up, 0.0) if rise * up >= 0 else (0.0, rise / down)
    sched = ControlSchedule.of(seg0, (ha, m), seg1, (hb, -m), seg2)
    return _certify(tag, p, v0, v1, sched, "two-fiber")


# -- dispatch for arbitrary singular systems --------------------------------

def steer(p: SystemParams, W: ControlRange, v0, v1) -> SteeringResult:
    """Normalize, steer in the chart, and map the schedule back.

    For time-reversed charts the chart problem runs from f(v1) to f(v0) and
    the resulting schedule is played backward.
    """
    nf = normal_form(p, W)
    a = State(*(float(x) for x in nf.conj.forward(*v0)))
    b = State(*(float(x) for x in nf.conj.forward(*v1)))
    if nf.time_reversed:
        a, b = b, a
    q = nf.params
    kind = control_sets(nf.tag, q, W)[0].kind
    builders = {
        ControlSetKind.WHOLE_PLANE: steer_flat,
        ControlSetKind.STRIP: steer_strip,
        ControlSetKind.COMPLEMENT: steer_complement,
        ControlSetKind.OMEGA_BAND: steer_band,
    }
    if kind not in builders:
        if _same(v0, v1):
            return SteeringResult(ControlSchedule(), 0.0, "trivial", State(*v0))
        raise NotInControlSet("control sets are single points; distinct states cannot be joined")
    chart = builders[kind](q, W, a, b)
    sched = chart.schedule
    if nf.time_reversed:
        sched = _replan_reversed(p, W, nf, builders[kind], v0, v1, sched.reversed())
    end = simulate_any(p, v0, sched).final
    err = math.hypot(end.s - v1[0], end.t - v1[1])
    return SteeringResult(sched, err, chart.construction, end)


def _take(schedule: ControlSchedule, horizon: float) -> ControlSchedule:
    """Prefix of the schedule with total duration min(horizon, total)."""
    out, left = [], horizon
    for seg in schedule:
        if left <= 0:
            break
        out.append((min(seg.duration, left), seg.omega))
        left -= seg.duration
    return ControlSchedule.of(*out)


def _drop(schedule: ControlSchedule, horizon: float) -> ControlSchedule:
    """The schedule without its prefix of duration horizon."""
    out, left = [], horizon
    for seg in schedule:
        cut = min(seg.duration, max(left, 0.0))
        out.append((seg.duration - cut, seg.omega))
        left -= seg.duration
    return ControlSchedule.of(*out)


def _replan_reversed(p, W, nf, builder, v0, v1, plan: ControlSchedule) -> ControlSchedule:
    """Execute a backward-built plan in short chunks, replanning from the reached state.

    In a time-reversed chart the original system expands where the chart
    contracts, so a long open-loop replay amplifies roundoff by exp(rate T).
    Each chunk is short enough to keep that factor small, and the replay of
    the concatenated chunks repeats the same arithmetic.
    """
    rate = max(abs(nf.params.lam), abs(nf.params.beta), 1e-12)
    horizon = 2.0 / rate
    b = State(*(float(x) for x in nf.conj.forward(*v0)))
    goal = State(*(float(x) for x in nf.conj.forward(*v1)))
    done = ControlSchedule()
    cur = State(float(v0[0]), float(v0[1]))
    for _ in range(200):
        if plan.total_duration <= 2 * horizon:
            break
        chunk = _take(plan, horizon)
        cur = simulate_any(p, cur, chunk).final
        done = done.then(chunk)
        b = State(*(float(x) for x in nf.conj.forward(*cur)))
        try:
            plan = builder(nf.params, W, goal, b).schedule.reversed()
        except (NotInControlSet, PreconditionViolated):
            # no chart route from the reached state: keep the rest of the old plan
            plan = _drop(plan, horizon)
    return polish(p, v0, v1, done.then(plan))


def polish(p: SystemParams, v0, v1, schedule: ControlSchedule, iterations: int = 12) -> ControlSchedule:
    """Newton correction of the last two segment durations towards v1.

    Returns the input unchanged when fewer than two segments exist, when the
    two segments are not transversal, or when a correction would make a
    duration negative.
    """
    segs = list(schedule.segments)
    if len(segs) < 2 or segs[-1].omega == segs[-2].omega:
        return schedule
    target = np.array([float(v1[0]), float(v1[1])])
    d = np.array([segs[-2].duration, segs[-1].duration])
    head = ControlSchedule(tuple(segs[:-2]))
    w = (segs[-2].omega, segs[-1].omega)

    def residual(dd):
        sched = head.then(ControlSchedule.of((dd[0], w[0]), (dd[1], w[1])))
        end = simulate_any(p, v0, sched).final
        return np.array([end.s, end.t]) - target

    r = residual(d)
    best = (float(np.hypot(*r)), d.copy())
    for _ in range(iterations):
        if best[0] < 1e-14:
            break
        J = np.empty((2, 2))
        for k in range(2):
            e = np.zeros(2)
            e[k] = 1e-7 * max(1.0, d[k])
            J[:, k] = (residual(d + e) - residual(d - e)) / (2 * e[k])
        try:
            d_new = d - np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            break
        if np.any(d_new < 0):
            break
        d = d_new
        r = residual(d)
        err = float(np.hypot(*r))
        if err < best[0]:
            best = (err, d.copy())
    d = best[1]
    return head.then(ControlSchedule.of((d[0], w[0]), (d[1], w[1])))
