import math

import numpy as np
import pytest

from helpers import SINGULAR_SYSTEMS, interior_points
from hlcs.control_sets import ControlSetKind, control_sets_for
from hlcs.errors import LarcViolated, NotInControlSet, PreconditionViolated
from hlcs.flows import ControlSchedule, F_omega, simulate, simulate_any
from hlcs.planner import closed_orbit, polish, steer, steer_band, steer_complement, steer_flat, steer_strip
from hlcs.system import CaseTag, ControlRange, SystemParams

W = ControlRange(-1, 1)
FLAT = SystemParams(b=1, gamma=1)
STRIP = SystemParams(b=1, c=1, lam=-1)
BAND = SystemParams(b=1, beta=-1, gamma=1, lam=1)
CPL = SystemParams(a=1, b=1, lam=-1)


def admissible(schedule, W=W):
    return all(W.omega_minus <= seg.omega <= W.omega_plus and seg.duration >= 0 for seg in schedule)


def test_flat_example_is_one_segment():
    res = steer_flat(FLAT, W, (0, 0), (1, 0.5))
    assert len(res.schedule) == 1
    seg = res.schedule.segments[0]
    assert seg.omega == 1.0 and seg.duration == pytest.approx(1.0)
    assert res.endpoint_error <= 1e-12


def test_equal_endpoints_give_empty_schedule():
    for builder, p in [(steer_flat, FLAT), (steer_strip, STRIP), (steer_band, BAND)]:
        res = builder(p, W, (0.2, 0.3), (0.2, 0.3))
        assert len(res.schedule) == 0 and res.endpoint_error == 0


def test_strip_example():
    res = steer_strip(STRIP, W, (0, 0), (4, 0))
    assert admissible(res.schedule) and res.endpoint_error <= 1e-9


def test_band_example_needs_several_segments():
    # the fiber s = 0 is an equilibrium line, so (0, 0) -> (0, 1) leaves and returns
    res = steer_band(BAND, W, (0, 0), (0, 1))
    assert len(res.schedule) >= 2 and admissible(res.schedule)
    assert res.endpoint_error <= 1e-9


def test_error_paths():
    with pytest.raises(NotInControlSet):
        steer_strip(STRIP, W, (0, 0), (0, 1.5))
    with pytest.raises(NotInControlSet):
        steer_band(BAND, W, (1.5, 0), (0, 0))
    with pytest.raises(PreconditionViolated):
        steer_strip(CPL, W, (0, 0), (1, 0))
    with pytest.raises(PreconditionViolated):
        steer_complement(STRIP, W, (0, 0), (1, 0))
    with pytest.raises(LarcViolated):
        steer_flat(SystemParams(b=0, gamma=1), W, (0, 0), (1, 0))
    with pytest.raises(NotInControlSet):
        steer(SystemParams(b=1, alpha=2), W, (0, 0), (0, 1))
    assert steer(SystemParams(b=1, alpha=2), W, (0, 1), (0, 1)).construction == "trivial"


def test_complement_example():
    res = steer_complement(CPL, W, (2, -1), (-2, -1))
    assert admissible(res.schedule) and res.endpoint_error <= 1e-5


def test_closed_orbit():
    p = SystemParams(a=1, b=1, lam=-1)
    v1, v2 = (1.0, -0.2), (-1.0, -0.2)
    assert F_omega(p, -1, v1) > 0 > F_omega(p, 1, v1)
    res = closed_orbit(p, W, v1, v2)
    assert res.endpoint_error <= 1e-6 and admissible(res.schedule)
    with pytest.raises(PreconditionViolated):
        closed_orbit(p, W, v1, v1)
    with pytest.raises(PreconditionViolated):
        closed_orbit(STRIP, W, v1, v2)


def test_steering_replays_exactly():
    res = steer_strip(STRIP, W, (-2, 0.5), (3, -0.5))
    replay = simulate(CaseTag.CONTRACTING, STRIP, (-2, 0.5), res.schedule).final
    assert replay == res.endpoint


@pytest.mark.parametrize("p", SINGULAR_SYSTEMS)
def test_steer_general_systems(p):
    descs = control_sets_for(p, W)
    if descs[0].kind is ControlSetKind.SINGLETONS:
        with pytest.raises(NotInControlSet):
            steer(p, W, (0.0, 0.0), (0.0, 1.0))
        return
    rng = np.random.default_rng(6)
    pts = interior_points(descs[0], rng, 8, box=2.0, tol=0.05)
    for v0, v1 in zip(pts[::2], pts[1::2]):
        res = steer(p, W, v0, v1)
        assert admissible(res.schedule)
        end = simulate_any(p, v0, res.schedule).final
        assert math.hypot(end.s - v1.s, end.t - v1.t) <= 1e-5


def test_polish_reduces_error():
    rough = ControlSchedule.of((1.1, 1.0), (0.4, -1.0))
    exact = simulate(CaseTag.FLAT, FLAT, (0, 0), ControlSchedule.of((1.0, 1.0), (0.5, -1.0))).final
    fixed = polish(FLAT, (0, 0), exact, rough)
    end = simulate(CaseTag.FLAT, FLAT, (0, 0), fixed).final
    assert math.hypot(end.s - exact.s, end.t - exact.t) <= 1e-10
    single = ControlSchedule.of((1.0, 1.0))
    assert polish(FLAT, (0, 0), exact, single) == single
