"""Induced planar systems, their classification and normal forms.

A system is the pair of planar fields

    f0(s, t) = (beta s, (lambda + beta) t + alpha s^2 / 2 + gamma s)
    f1(s, t) = (b, c + a s)

driven as v' = f0(v) + omega f1(v) with omega in a control range.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace
from fractions import Fraction

import numpy as np

from .errors import ConstraintError, LarcViolated, NotInvariant, PreconditionViolated, UnsupportedCase
from .heisenberg import AlgebraElement, DerivationMatrix

PARAM_NAMES = ("a", "b", "c", "alpha", "beta", "gamma", "lam")


@dataclass(frozen=True)
class SystemParams:
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    lam: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            val = float(getattr(self, f.name))
            if not math.isfinite(val):
                raise ConstraintError(f"parameter {f.name} must be finite")
            # fold -0.0 into 0.0 so equality and printing stay canonical
            object.__setattr__(self, f.name, val + 0.0)
        if self.alpha != 0 and self.gamma != 0:
            raise ConstraintError("alpha and gamma cannot both be nonzero (alpha = 0 if gamma != 0)")

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, n) for n in PARAM_NAMES)

    def reversed_time(self) -> "SystemParams":
        """Parameters of the system run backward, v' = -(f0 + omega f1)."""
        return SystemParams(*(-x for x in self.as_tuple()))

    def drift(self, s, t):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        return (self.beta * s,
                (self.lam + self.beta) * t + 0.5 * self.alpha * s * s + self.gamma * s)

    def control_field(self, s, t):
        s = np.asarray(s, dtype=float)
        return (np.full_like(s, self.b) + 0 * np.asarray(t, dtype=float), self.c + self.a * s)

    def field(self, s, t, omega):
        """f0 + omega f1 evaluated componentwise; broadcasts over arrays."""
        d0, d1 = self.drift(s, t)
        g0, g1 = self.control_field(s, t)
        return d0 + omega * g0, d1 + omega * g1


@dataclass(frozen=True)
class ControlRange:
    omega_minus: float = -1.0
    omega_plus: float = 1.0

    def __post_init__(self):
        lo, hi = float(self.omega_minus), float(self.omega_plus)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ConstraintError("control bounds must be finite")
        if not lo < 0 < hi:
            raise ConstraintError("control bounds must satisfy omega_minus < 0 < omega_plus")
        object.__setattr__(self, "omega_minus", lo)
        object.__setattr__(self, "omega_plus", hi)

    def __contains__(self, omega) -> bool:
        return self.omega_minus <= omega <= self.omega_plus

    @property
    def max_abs(self) -> float:
        return max(-self.omega_minus, self.omega_plus)

    def samples(self, n: int) -> np.ndarray:
        """n controls containing both endpoints and 0, evenly spaced on each side."""
        if n < 3:
            raise ValueError("need at least 3 control samples")
        n_neg = (n - 1) // 2
        n_pos = n - 1 - n_neg
        neg = self.omega_minus * np.arange(n_neg, 0, -1) / n_neg
        pos = self.omega_plus * np.arange(1, n_pos + 1) / n_pos
        return np.concatenate([neg, [0.0], pos])


class CaseTag(enum.Enum):
    FLAT = "Flat"
    CONTRACTING = "Contracting"
    BAND = "Band"
    QUADRATIC = "Quadratic"
    REDUCIBLE = "Reducible"
    NON_SINGULAR = "NonSingular"

    def __str__(self) -> str:
        return self.value


EXACT_TAGS = (CaseTag.FLAT, CaseTag.CONTRACTING, CaseTag.BAND, CaseTag.QUADRATIC)


class Invariance(enum.Enum):
    NEITHER = "Neither"
    INVARIANT_LINE = "InvariantLine"
    INVARIANT_LINE_TIMES_Z = "InvariantLineTimesZ"


def invariance_check(D: DerivationMatrix) -> Invariance:
    """Which of the subgroups R e1 x {0} and R e1 x Z the flow of D preserves.

    The line test asks e1 to be an eigenvector, eta to lie on e2 and the
    off-diagonal entry to vanish when eta does not. The second subgroup
    additionally needs A22 = -A11.
    """
    if not D.is_derivation:
        raise PreconditionViolated("matrix is not a derivation (corner differs from tr A)")
    A, eta = D.A, D.eta
    line = A[1, 0] == 0 and eta[0] == 0 and (A[0, 1] == 0 or eta[1] == 0)
    if not line:
        return Invariance.NEITHER
    if A[1, 1] == -A[0, 0]:
        return Invariance.INVARIANT_LINE_TIMES_Z
    return Invariance.INVARIANT_LINE


def induce_system(D: DerivationMatrix, B: AlgebraElement) -> SystemParams:
    """Project the linear field of D and the left-invariant field B to the plane."""
    if invariance_check(D) is Invariance.NEITHER:
        raise NotInvariant("R e1 x {0} is not invariant under the flow of this derivation")
    return SystemParams(a=B.zeta[0], b=B.zeta[1], c=B.alpha,
                        alpha=D.A[0, 1], beta=D.A[1, 1], gamma=D.eta[1], lam=D.A[0, 0])


def larc_value(p: SystemParams) -> Fraction:
    """b ((b alpha + a (lambda - beta))^2 + (b gamma + c lambda)^2), evaluated exactly."""
    a, b, c, al, be, ga, la = (Fraction(x) for x in p.as_tuple())
    return b * ((b * al + a * (la - be)) ** 2 + (b * ga + c * la) ** 2)


def larc(p: SystemParams) -> bool:
    return larc_value(p) != 0


def classify_case(p: SystemParams) -> CaseTag:
    # the singular test comes first: a nonzero alpha with beta (lambda + beta) != 0
    # is still out of scope rather than reducible
    if p.beta * (p.lam + p.beta) != 0:
        return CaseTag.NON_SINGULAR
    if p.alpha == 0:
        if p.beta == 0:
            return CaseTag.FLAT if p.lam == 0 else CaseTag.CONTRACTING
        return CaseTag.BAND
    if p.lam == 0 and p.beta == 0:
        return CaseTag.QUADRATIC
    return CaseTag.REDUCIBLE


@dataclass(frozen=True)
class PolyMap2:
    """(s, t) -> (k s, m t + q s + r s^2), with k and m nonzero.

    The family is closed under composition and inversion, which is all the
    conjugations used here need.
    """

    k: float = 1.0
    m: float = 1.0
    q: float = 0.0
    r: float = 0.0

    def __post_init__(self):
        if self.k == 0 or self.m == 0:
            raise ValueError("PolyMap2 needs nonzero k and m")
        for name in ("k", "m", "q", "r"):
            object.__setattr__(self, name, float(getattr(self, name)) + 0.0)

    def forward(self, s, t):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        return self.k * s, self.m * t + self.q * s + self.r * s * s

    def inverse(self, S, T):
        return self.inverted().forward(S, T)

    def inverted(self) -> "PolyMap2":
        k, m, q, r = self.k, self.m, self.q, self.r
        return PolyMap2(1.0 / k, 1.0 / m, -q / (m * k), -r / (m * k * k))

    def then(self, other: "PolyMap2") -> "PolyMap2":
        """The map v -> other(self(v))."""
        k1, m1, q1, r1 = self.k, self.m, self.q, self.r
        k2, m2, q2, r2 = other.k, other.m, other.q, other.r
        return PolyMap2(k1 * k2, m1 * m2, m2 * q1 + q2 * k1, m2 * r1 + r2 * k1 * k1)

    def jacobian(self, s) -> np.ndarray:
        return np.array([[self.k, 0.0], [self.q + 2 * self.r * s, self.m]])

    @property
    def is_identity(self) -> bool:
        return (self.k, self.m, self.q, self.r) == (1.0, 1.0, 0.0, 0.0)


IDENTITY_MAP = PolyMap2()


def transform_params(p: SystemParams, f: PolyMap2) -> SystemParams:
    """Parameters of the system obtained by pushing p forward through f.

    Differentiating S = k s and T = m t + q s + r s^2 along the flow and
    rewriting in (S, T) keeps the same family, with the coefficients below.
    """
    k, m, q, r = f.k, f.m, f.q, f.r
    a, b, c, al, be, ga, la = p.as_tuple()
    return SystemParams(
        a=(m * a + 2 * r * b) / k,
        b=k * b,
        c=m * c + q * b,
        alpha=(m * al + 2 * r * (be - la)) / (k * k),
        beta=be,
        gamma=(m * ga - la * q) / k,
        lam=la,
    )


@dataclass(frozen=True)
class NormalForm:
    """A normalized system and the conjugation reaching it.

    With ``time_reversed`` false, ``conj`` maps trajectories of the original
    system onto trajectories of ``params`` at equal times. When true the
    normalized system runs backward: conj(phi(tau, v, w)) = phi_n(-tau, conj(v), w).
    """

    params: SystemParams
    conj: PolyMap2
    tag: CaseTag
    source_tag: CaseTag
    time_reversed: bool = False

    def __iter__(self):
        yield self.params
        yield self.conj
        yield self.tag


def _flip(k: float = 1.0, m: float = 1.0) -> PolyMap2:
    return PolyMap2(k=k, m=m)


def _normalize_contracting(p: SystemParams):
    f = PolyMap2(k=1.0 / p.b, q=p.gamma / p.lam)
    q = transform_params(p, f)
    reversed_ = p.lam > 0
    if reversed_:
        # backward time makes lambda negative; the s flip restores b = 1
        f = f.then(_flip(k=-1.0))
        q = transform_params(q.reversed_time(), _flip(k=-1.0))
    if q.a < 0:
        f = f.then(_flip(m=-1.0))
        q = transform_params(q, _flip(m=-1.0))
    q = replace(q, b=1.0, gamma=0.0, alpha=0.0)
    return q, f, reversed_


def _normalize_band(p: SystemParams):
    f = PolyMap2(k=-p.beta / p.b, q=-p.c / p.b)
    q = transform_params(p, f)
    reversed_ = p.beta > 0
    if reversed_:
        q = q.reversed_time()
    if q.gamma < 0 or (q.gamma == 0 and q.a < 0):
        f = f.then(_flip(m=-1.0))
        q = transform_params(q, _flip(m=-1.0))
    q = replace(q, b=-q.beta, c=0.0, alpha=0.0, lam=-q.beta)
    return q, f, reversed_


def normal_form(p: SystemParams, W: ControlRange | None = None) -> NormalForm:
    """Conjugate p to the normalized chart of its case.

    Contracting systems end with lambda < 0, a >= 0, b = 1, gamma = 0; band
    systems with beta < 0, b = -beta, c = 0 and gamma >= 0; quadratic systems
    with c = 0. Sign flips of s and t and time reversal are folded in.
    """
    tag = classify_case(p)
    if tag is CaseTag.NON_SINGULAR:
        raise UnsupportedCase("non-singular systems (beta (lambda + beta) != 0) are out of scope")
    if not larc(p):
        raise LarcViolated("system does not satisfy the Lie algebra rank condition")

    if tag is CaseTag.FLAT:
        return NormalForm(p, IDENTITY_MAP, tag, tag)
    if tag is CaseTag.CONTRACTING:
        q, f, rev = _normalize_contracting(p)
        return NormalForm(q, f, tag, tag, rev)
    if tag is CaseTag.BAND:
        q, f, rev = _normalize_band(p)
        return NormalForm(q, f, tag, tag, rev)
    if tag is CaseTag.QUADRATIC:
        f = PolyMap2(m=2.0, q=-2.0 * p.c / p.b)
        q = replace(transform_params(p, f), c=0.0, gamma=0.0)
        return NormalForm(q, f, tag, tag)

    # reducible: remove the quadratic term, then normalize what remains
    f0 = PolyMap2(r=p.alpha / (2.0 * (p.lam - p.beta)))
    p1 = replace(transform_params(p, f0), alpha=0.0)
    inner = normal_form(p1, W)
    return NormalForm(inner.params, f0.then(inner.conj), inner.tag, tag, inner.time_reversed)
