"""Random parameter samplers and small utilities shared by the test modules."""

from __future__ import annotations

import numpy as np

from hlcs.control_sets import Verdict, membership
from hlcs.flows import State
from hlcs.system import CaseTag, SystemParams


def nonzero(rng, lo=0.2, hi=1.2) -> float:
    return float(rng.choice([-1.0, 1.0]) * rng.uniform(lo, hi))


def params_for_tag(rng, tag: CaseTag) -> SystemParams:
    """Generic parameters of a given exact tag, not necessarily in normal form."""
    a, b, c, g = (float(x) for x in rng.uniform(-1.5, 1.5, 4))
    if tag is CaseTag.FLAT:
        return SystemParams(a, b, c, 0.0, 0.0, g, 0.0)
    if tag is CaseTag.CONTRACTING:
        return SystemParams(a, b, c, 0.0, 0.0, g, nonzero(rng))
    if tag is CaseTag.BAND:
        be = nonzero(rng)
        return SystemParams(a, b, c, 0.0, be, g, -be)
    if tag is CaseTag.QUADRATIC:
        return SystemParams(a, b, c, nonzero(rng), 0.0, 0.0, 0.0)
    raise ValueError(tag)


def larc_sample(rng) -> SystemParams:
    """Small-integer parameters mixing generic sets with rank-deficient ones.

    Rank-deficient sets come from b = 0 or from forcing the vanishing
    combination, so both verdicts are well represented.
    """
    def v():
        return float(rng.integers(-2, 3))

    def nz():
        return float(rng.choice([-2, -1, 1, 2]))

    kind = rng.choice(3, p=[0.5, 0.2, 0.3])
    a, b, c, al, be, ga, la = (v() for _ in range(7))
    if kind == 0:
        b = nz()
    if kind == 1:
        b = 0.0
    if al != 0 and ga != 0:
        ga = 0.0
    if kind == 2:
        b = nz()
        al = -a * (la - be) / b
        if al != 0:
            ga = 0.0
            if la != 0:
                c = 0.0
        elif la != 0:
            c = -b * ga / la
        else:
            ga = 0.0
    return SystemParams(a, b, c, al, be, ga, la)


# representative singular systems covering every sign pattern of the charts
SINGULAR_SYSTEMS = [
    SystemParams(a=0.4, b=1.5, c=0.3, gamma=0.8),
    SystemParams(a=-0.7, b=-1.1, c=0.2, gamma=0.5),
    SystemParams(b=1.0, c=1.0, lam=-1.0),
    SystemParams(b=2.0, c=1.0, gamma=1.0, lam=0.7),
    SystemParams(a=2.0, b=3.0, c=1.0, gamma=2.0, lam=1.5),
    SystemParams(a=-2.0, b=-3.0, c=1.0, gamma=2.0, lam=-0.5),
    SystemParams(a=1.0, b=2.0, c=1.0, beta=-1.0, gamma=1.0, lam=1.0),
    SystemParams(a=1.0, b=2.0, c=1.0, beta=1.0, gamma=-1.0, lam=-1.0),
    SystemParams(a=1.0, b=-1.0, c=0.5, beta=-0.8, lam=0.8),
    SystemParams(a=1.0, b=2.0, c=1.0, alpha=1.5),
    SystemParams(a=-1.0, b=-2.0, c=0.5, alpha=-1.0),
    SystemParams(a=1.0, b=2.0, c=1.0, alpha=1.5, lam=-1.0),
    SystemParams(a=1.0, b=2.0, c=1.0, alpha=1.5, lam=2.0),
    SystemParams(b=1.0, c=0.3, alpha=1.5, beta=0.7, lam=-0.7),
]


def interior_points(desc, rng, n: int, box: float = 3.0, tol: float = 1e-3) -> list[State]:
    """Rejection-sample n points strictly inside a description."""
    pts: list[State] = []
    while len(pts) < n:
        v = State(*(float(x) for x in rng.uniform(-box, box, 2)))
        if membership(desc, v, tol).verdict is Verdict.INSIDE:
            pts.append(v)
    return pts


def batch_rk4(params: list[SystemParams], s0, t0, omega, tau, n_steps: int):
    """RK4 for many systems at once, each over its own horizon tau in n_steps steps."""
    a, b, c, al, be, ga, la = np.array([p.as_tuple() for p in params]).T
    y = np.stack([np.asarray(s0, float), np.asarray(t0, float)])
    h = np.asarray(tau, float) / n_steps

    def rhs(y):
        s, t = y
        return np.stack([be * s + omega * b, (la + be) * t + 0.5 * al * s * s + ga * s + omega * (c + a * s)])

    for _ in range(n_steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y.T
