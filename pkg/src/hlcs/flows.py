"""Closed-form constant-control solutions, schedules, Lyapunov functionals
and an RK4 reference integrator."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._numerics import phi1, phi2, rk4_fixed
from .errors import DomainError, NoValidSigma, UnsupportedCase
from .system import EXACT_TAGS, CaseTag, ControlRange, NormalForm, SystemParams, classify_case, normal_form


class State(NamedTuple):
    s: float
    t: float


@dataclass(frozen=True)
class ControlSegment:
    duration: float
    omega: float

    def __post_init__(self):
        object.__setattr__(self, "duration", float(self.duration))
        object.__setattr__(self, "omega", float(self.omega))
        if not self.duration >= 0:
            raise ValueError("segment duration must be non-negative")


@dataclass(frozen=True)
class ControlSchedule:
    segments: tuple[ControlSegment, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    @classmethod
    def of(cls, *pairs: tuple[float, float]) -> "ControlSchedule":
        """Build from (duration, omega) pairs, dropping zero-length ones."""
        return cls(tuple(ControlSegment(d, w) for d, w in pairs if d > 0))

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    @property
    def total_duration(self) -> float:
        return float(sum(seg.duration for seg in self.segments))

    def then(self, other: "ControlSchedule") -> "ControlSchedule":
        return ControlSchedule(self.segments + other.segments)

    def reversed(self) -> "ControlSchedule":
        return ControlSchedule(self.segments[::-1])

    def within(self, W: ControlRange) -> bool:
        return all(seg.omega in W for seg in self.segments)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("duration,omega\n")
        for seg in self.segments:
            buf.write(f"{fmt17(seg.duration)},{fmt17(seg.omega)}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ControlSchedule":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["duration", "omega"]:
            raise ValueError("schedule CSV must start with the header 'duration,omega'")
        segs = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ValueError(f"schedule line {lineno}: expected 2 fields, got {len(row)}")
            segs.append(ControlSegment(float(row[0]), float(row[1])))
        return cls(tuple(segs))


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray = field(repr=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float).reshape(len(times), 2)
        if times.size == 0 or times[0] != 0 or np.any(np.diff(times) <= 0):
            raise ValueError("trajectory times must start at 0 and increase strictly")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def final(self) -> State:
        return State(float(self.states[-1, 0]), float(self.states[-1, 1]))

    def to_csv(self) -> str:
        lines = ["time,s,t"]
        for tm, (s, t) in zip(self.times, self.states):
            lines.append(f"{fmt17(tm)},{fmt17(s)},{fmt17(t)}")
        return "\n".join(lines) + "\n"


def fmt17(x: float) -> str:
    """17 significant digits, lossless for doubles; negative zero prints as 0."""
    x = float(x)
    if x == 0:
        return "0"
    return format(x, ".17g")


# -- closed forms ---------------------------------------------------------

def segment_arrays(tag: CaseTag, p: SystemParams, s0, t0, omega, tau):
    """Vectorized closed-form solution of the constant-control system.

    All of ``s0, t0, omega, tau`` broadcast together. Any parameters within
    the tag are accepted, not only the normalized ones.
    """
    s0, t0, w, tau = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (s0, t0, omega, tau)))
    a, b, c, al, be, ga, la = p.as_tuple()
    kappa = a * w + ga
    if tag is CaseTag.FLAT:
        s = s0 + w * b * tau
        t = t0 + (s0 * kappa + c * w) * tau + 0.5 * b * w * kappa * tau * tau
    elif tag is CaseTag.CONTRACTING:
        # s' = b w, t' = lam t + kappa s + c w
        x = la * tau
        s = s0 + w * b * tau
        P = kappa * s0 + c * w
        Q = kappa * w * b
        t = np.exp(x) * t0 + P * tau * phi1(x) + Q * tau * tau * phi2(x)
    elif tag is CaseTag.BAND:
        # s' = beta s + b w, t' = kappa s + c w
        x = be * tau
        e1 = tau * phi1(x)
        s = np.exp(x) * s0 + w * b * e1
        t = t0 + c * w * tau + kappa * (s0 * e1 + w * b * tau * tau * phi2(x))
    elif tag is CaseTag.QUADRATIC:
        # s' = b w, t' = alpha s^2 / 2 + kappa s + c w
        u = w * b
        t = (t0 + 0.5 * al * (s0 * s0 * tau + s0 * u * tau ** 2 + u * u * tau ** 3 / 3.0)
             + c * w * tau + kappa * (s0 * tau + 0.5 * u * tau ** 2))
        s = s0 + u * tau
    else:
        raise UnsupportedCase(f"no closed-form solution for {tag} systems")
    return s, t


def _check_tag(tag: CaseTag, p: SystemParams) -> None:
    if tag not in EXACT_TAGS:
        raise UnsupportedCase(f"no closed-form solution for {tag} systems")
    actual = classify_case(p)
    if actual is not tag:
        raise ValueError(f"parameters classify as {actual}, not {tag}")


def exact_segment(tag: CaseTag, p: SystemParams, v0, omega: float, tau: float) -> State:
    """State reached from v0 after time tau (possibly negative) under constant omega."""
    _check_tag(tag, p)
    s, t = segment_arrays(tag, p, v0[0], v0[1], omega, tau)
    return State(float(s), float(t))


def _sample_times(total: float, step: float) -> np.ndarray:
    if step <= 0:
        raise ValueError("sample_step must be positive")
    n = int(math.floor(total / step + 1e-9))
    times = np.arange(n + 1) * step
    times = times[times < total * (1 - 1e-12)] if total > 0 else times[:1]
    if total > 0:
        times = np.append(times, total)
    return times


def _simulate_with(flow, v0, schedule: ControlSchedule, sample_step: float | None) -> Trajectory:
    starts = [0.0]
    states = [State(float(v0[0]), float(v0[1]))]
    for seg in schedule:
        states.append(flow(states[-1], seg.omega, seg.duration))
        starts.append(starts[-1] + seg.duration)
    total = starts[-1]
    if sample_step is None:
        keep = [0] + [i for i in range(1, len(starts)) if starts[i] > starts[i - 1]]
        return Trajectory(np.array([starts[i] for i in keep]), np.array([states[i] for i in keep]))
    times = _sample_times(total, sample_step)
    out = np.empty((len(times), 2))
    seg_idx = 0
    segs = schedule.segments
    for k, tm in enumerate(times):
        while seg_idx < len(segs) and starts[seg_idx + 1] < tm:
            seg_idx += 1
        if tm == total or seg_idx >= len(segs):
            out[k] = states[-1]
            continue
        out[k] = flow(states[seg_idx], segs[seg_idx].omega, tm - starts[seg_idx])
    return Trajectory(times, out)


def simulate(tag: CaseTag, p: SystemParams, v0, schedule: ControlSchedule,
             sample_step: float | None = None) -> Trajectory:
    """Concatenate exact segments.

    With ``sample_step`` the trajectory is sampled on a uniform grid plus the
    final time; without it only segment junctions are recorded. The final
    sample is always the composition of the exact segments.
    """
    _check_tag(tag, p)
    return _simulate_with(lambda v, w, d: exact_segment(tag, p, v, w, d), v0, schedule, sample_step)


def flow_any(p: SystemParams, v0, omega: float, tau: float) -> State:
    """Exact flow for any singular system, reducible ones via their normal form."""
    tag = classify_case(p)
    if tag in EXACT_TAGS:
        return exact_segment(tag, p, v0, omega, tau)
    if tag is CaseTag.NON_SINGULAR:
        raise UnsupportedCase("no closed-form solution for NonSingular systems")
    nf = normal_form(p)
    return _flow_via(nf, v0, omega, tau)


def _flow_via(nf: NormalForm, v0, omega: float, tau: float) -> State:
    S, T = nf.conj.forward(v0[0], v0[1])
    sign = -1.0 if nf.time_reversed else 1.0
    s1, t1 = segment_arrays(nf.tag, nf.params, S, T, omega, sign * tau)
    s, t = nf.conj.inverse(s1, t1)
    return State(float(s), float(t))


def simulate_any(p: SystemParams, v0, schedule: ControlSchedule,
                 sample_step: float | None = None) -> Trajectory:
    tag = classify_case(p)
    if tag in EXACT_TAGS:
        return simulate(tag, p, v0, schedule, sample_step)
    if tag is CaseTag.NON_SINGULAR:
        raise UnsupportedCase("no closed-form solution for NonSingular systems")
    nf = normal_form(p)
    return _simulate_with(lambda v, w, d: _flow_via(nf, v, w, d), v0, schedule, sample_step)


# -- contracting-case functionals -----------------------------------------

def F_omega(p: SystemParams, omega, v) -> float:
    """lam^2 t + omega (lam (c + a s) + a omega); its zero set is the omega-asymptote."""
    s, t = v[0], v[1]
    return p.lam ** 2 * t + omega * (p.lam * (p.c + p.a * s) + p.a * omega)


def flow_identity_residual(p: SystemParams, omega: float, v, tau: float) -> float:
    """|F_w(phi(tau, v, w)) - e^{lam tau} F_w(v)|."""
    end = exact_segment(CaseTag.CONTRACTING, p, v, omega, tau)
    return abs(F_omega(p, omega, end) - math.exp(p.lam * tau) * F_omega(p, omega, v))


def two_control_residual(p: SystemParams, w0: float, w1: float, w2: float, v, tau: float) -> float:
    """Residual of the identity linking F_{w1} - F_{w2} along a w0 trajectory."""
    end = exact_segment(CaseTag.CONTRACTING, p, v, w0, tau)
    lhs = F_omega(p, w1, end) - F_omega(p, w2, end)
    rhs = p.a * w0 * (w1 - w2) * p.lam * tau + F_omega(p, w1, v) - F_omega(p, w2, v)
    return abs(lhs - rhs)


def vertex(p: SystemParams) -> State:
    """v_a = (-c/a, 0), the common vertex of the two extremal curves."""
    if p.a == 0:
        raise ValueError("the vertex is defined only for a != 0")
    return State(-p.c / p.a, 0.0)


def curve_from_vertex(p: SystemParams, omega, tau):
    """Closed form of phi(tau, v_a, omega) in the contracting normal form."""
    omega = np.asarray(omega, dtype=float)
    tau = np.asarray(tau, dtype=float)
    x = p.lam * tau
    s = -p.c / p.a + omega * tau
    t = p.a * omega ** 2 * tau ** 2 * phi2(x)
    return s, t


# -- Lyapunov functionals for the singleton cases --------------------------

def default_sigma_F(W: ControlRange) -> float:
    return W.max_abs + 1.0


def lyapunov_F(p: SystemParams, sigma: float, v) -> float:
    """t + (a sigma/beta) s - (a sigma^2/beta) ln(s + sigma), band case with gamma = 0."""
    s, t = float(v[0]), float(v[1])
    if s + sigma <= 0:
        raise DomainError("lyapunov_F needs s + sigma > 0")
    k = p.a * sigma / p.beta
    return t + k * s - k * sigma * math.log(s + sigma)


def lyapunov_F_rate(p: SystemParams, sigma: float, v, omega: float) -> float:
    s = float(v[0])
    return p.a * (omega + sigma) * s * s / (s + sigma)


def _quadratic_coeffs(p: SystemParams) -> tuple[float, float]:
    # t' = A s^2 + 2 Ac w s in the quadratic chart
    return 0.5 * p.alpha, 0.5 * p.a


def default_sigma_G(p: SystemParams, W: ControlRange) -> float:
    A, _ = _quadratic_coeffs(p)
    if A == 0:
        raise NoValidSigma("no sigma exists when the quadratic coefficient vanishes")
    return (1.0 + W.max_abs * abs(p.b)) / A


def lyapunov_G(p: SystemParams, sigma: float, v) -> float:
    """6 sigma t - 6 (a/b) sigma s^2 + 2 s^3 in the quadratic chart."""
    A, ac = _quadratic_coeffs(p)
    if A == 0:
        raise NoValidSigma("no sigma exists when the quadratic coefficient vanishes")
    s, t = float(v[0]), float(v[1])
    return 6 * sigma * t - 6 * (ac / p.b) * sigma * s * s + 2 * s ** 3


def lyapunov_G_rate(p: SystemParams, sigma: float, v, omega: float) -> float:
    A, _ = _quadratic_coeffs(p)
    s = float(v[0])
    return 6 * (sigma * A + omega * p.b) * s * s


# -- reference integrator --------------------------------------------------

def rk4_segment(p: SystemParams, s0, t0, omega, tau: float, step: float = 1e-3):
    """RK4 over the raw field for one constant-control segment; arrays allowed."""
    omega = np.asarray(omega, dtype=float)

    def rhs(y):
        ds, dt = p.field(y[0], y[1], omega)
        return np.stack([ds, dt])

    y0 = np.stack(np.broadcast_arrays(np.asarray(s0, dtype=float), np.asarray(t0, dtype=float)))
    return rk4_fixed(rhs, y0, tau, step)


def rk4_integrate(p: SystemParams, v0, schedule: ControlSchedule, step: float = 1e-3) -> Trajectory:
    """RK4 along a schedule; samples every step, with segment ends included."""
    if step <= 0:
        raise ValueError("step must be positive")
    times = [0.0]
    states = [np.array([float(v0[0]), float(v0[1])])]
    for seg in schedule:
        if seg.duration == 0:
            continue
        n = max(1, int(math.ceil(seg.duration / step - 1e-12)))
        h = seg.duration / n
        y = states[-1]
        base = times[-1]
        for i in range(1, n + 1):
            y = rk4_segment(p, y[0], y[1], seg.omega, h, h)
            times.append(base + i * h)
            states.append(np.asarray(y, dtype=float))
    return Trajectory(np.array(times), np.array(states))


def vector_field(p: SystemParams, v, omega: float) -> np.ndarray:
    return np.array(p.field(v[0], v[1], omega), dtype=float)


__all__ = [
    "State", "ControlSegment", "ControlSchedule", "Trajectory", "fmt17",
    "segment_arrays", "exact_segment", "simulate", "flow_any", "simulate_any",
    "F_omega", "flow_identity_residual", "two_control_residual", "vertex", "curve_from_vertex",
    "default_sigma_F", "lyapunov_F", "lyapunov_F_rate", "default_sigma_G", "lyapunov_G",
    "lyapunov_G_rate", "rk4_segment", "rk4_integrate", "vector_field",
]
