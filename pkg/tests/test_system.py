from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from helpers import SINGULAR_SYSTEMS, larc_sample, params_for_tag
from hlcs.brackets import bracket_span_at, bracket_span_rank
from hlcs.errors import ConstraintError, LarcViolated, NotInvariant, PreconditionViolated, UnsupportedCase
from hlcs.flows import rk4_segment
from hlcs.heisenberg import AlgebraElement, DerivationMatrix, GroupElement, left_invariant_field, linear_flow
from hlcs.system import (IDENTITY_MAP, CaseTag, ControlRange, Invariance, PolyMap2, SystemParams, classify_case,
                         induce_system, invariance_check, larc, larc_value, normal_form, transform_params)

small = st.floats(-2, 2, allow_nan=False).map(lambda x: round(x, 3))


def test_alpha_gamma_constraint():
    with pytest.raises(ConstraintError, match="alpha"):
        SystemParams(alpha=1, gamma=1)


def test_control_range_must_straddle_zero():
    with pytest.raises(ConstraintError):
        ControlRange(0.0, 1.0)
    assert ControlRange(-1, 2).samples(5).tolist() == [-1.0, -0.5, 0.0, 1.0, 2.0]


def test_negative_zero_folded():
    assert str(SystemParams(a=-0.0).a) == "0.0"


@pytest.mark.parametrize("A,eta,expected", [
    (np.diag([1.0, 2.0]), [0, 0], Invariance.INVARIANT_LINE),
    (np.diag([1.0, -1.0]), [0, 3], Invariance.INVARIANT_LINE_TIMES_Z),
    (np.array([[1.0, 0.0], [1.0, 1.0]]), [0, 0], Invariance.NEITHER),
    (np.array([[1.0, 2.0], [0.0, 1.0]]), [0, 3], Invariance.NEITHER),
    (np.array([[1.0, 2.0], [0.0, 1.0]]), [0, 0], Invariance.INVARIANT_LINE),
    (np.diag([1.0, 1.0]), [1, 0], Invariance.NEITHER),
])
def test_invariance_examples(A, eta, expected):
    assert invariance_check(DerivationMatrix(A, eta)) is expected


def test_invariance_needs_derivation():
    with pytest.raises(PreconditionViolated):
        invariance_check(DerivationMatrix(np.eye(2), [0, 0], corner=0.0))


@settings(max_examples=200)
@given(st.lists(st.sampled_from([0.0, 0.0, 1.0, -1.0, 0.5]), min_size=6, max_size=6),
       st.floats(-3, 3), st.floats(-2, 2))
def test_invariance_matches_direct_flow(entries, r, tau):
    # the line R e1 x {0} is invariant iff points (r, 0, 0) stay on it
    A = np.array(entries[:4]).reshape(2, 2)
    D = DerivationMatrix(A, entries[4:])
    verdict = invariance_check(D)
    # alpha != 0 with gamma != 0 keeps the line but is excluded by the induced-system constraint
    assume(not (A[0, 1] != 0 and D.eta[1] != 0 and A[1, 0] == 0 and D.eta[0] == 0))
    stays = all(
        np.allclose(linear_flow(D, GroupElement((x, 0), 0), tt).as_array()[1:], 0, atol=1e-9)
        for x in (r, 1.0, -2.0) for tt in (tau, 0.7)
    )
    assert (verdict is not Invariance.NEITHER) == stays


def projected_field(D, B, omega, g):
    """Numerical pushforward of X + omega B through (x, y, z) -> (y, z + xy/2)."""
    x, y, _ = g.as_array()
    J = np.array([[0.0, 1.0, 0.0], [0.5 * y, 0.5 * x, 1.0]])
    return J @ (D.field(g) + omega * left_invariant_field(B, g))


@settings(max_examples=100)
@given(small, small, small, small, small, small, small, st.floats(-1, 1), st.floats(-3, 3), st.floats(-3, 3),
       st.floats(-3, 3))
def test_induced_system_is_the_pushforward(lam, beta, alpha, gamma, z1, z2, aB, omega, x, y, z):
    assume(alpha == 0 or gamma == 0)
    D = DerivationMatrix(np.array([[lam, alpha], [0.0, beta]]), [0.0, gamma])
    B = AlgebraElement((z1, z2), aB)
    p = induce_system(D, B)
    g = GroupElement((x, y), z)
    s, t = y, z + 0.5 * x * y
    expected = np.array(p.field(s, t, omega), dtype=float)
    assert np.allclose(projected_field(D, B, omega, g), expected, atol=1e-8)


def test_induce_examples():
    D = DerivationMatrix(np.diag([-1.0, 0.0]), [0, 2])
    assert induce_system(D, AlgebraElement((0, 0), 0)).as_tuple()[:3] == (0.0, 0.0, 0.0)
    p = induce_system(DerivationMatrix(np.zeros((2, 2)), [0, 0]), AlgebraElement((0, 1), 0))
    assert p.drift(1.3, 0.4) == (0.0, 0.0)
    assert p.control_field(1.3, 0.4) == (1.0, 0.0)
    with pytest.raises(NotInvariant):
        induce_system(DerivationMatrix(np.array([[1.0, 0], [1, 1]]), [0, 0]), AlgebraElement((0, 1), 0))


def test_larc_examples():
    assert not larc(SystemParams(a=1, b=0, c=2, lam=-1, gamma=3))
    assert larc_value(SystemParams(b=1, gamma=1)) == 1
    assert not larc(SystemParams(a=1, b=1, alpha=-1, lam=1))
    assert isinstance(larc_value(SystemParams(b=0.1, gamma=0.3)), Fraction)


def test_larc_oracle_on_examples():
    rng = np.random.default_rng(1)
    assert bracket_span_rank(SystemParams(b=1, gamma=1), rng)[0]
    assert bracket_span_at(SystemParams(b=1, gamma=1), 1.0, 1.0) == 2
    ok, worst = bracket_span_rank(SystemParams(a=1, b=1, alpha=-1, lam=1), rng)
    assert not ok and worst < 1e-9


def test_larc_formula_agrees_with_bracket_oracle_sample():
    # the full 200-set comparison lives in the acceptance suite
    rng = np.random.default_rng(11)
    for _ in range(25):
        p = larc_sample(rng)
        assert bracket_span_rank(p, rng)[0] == larc(p), p


@pytest.mark.parametrize("p,tag", [
    (SystemParams(b=1, gamma=1), CaseTag.FLAT),
    (SystemParams(b=1, beta=1, lam=1), CaseTag.NON_SINGULAR),
    (SystemParams(b=1, alpha=2), CaseTag.QUADRATIC),
    (SystemParams(b=1, c=1, lam=-1), CaseTag.CONTRACTING),
    (SystemParams(b=1, beta=-1, gamma=1, lam=1), CaseTag.BAND),
    (SystemParams(b=1, alpha=2, lam=-1), CaseTag.REDUCIBLE),
    (SystemParams(b=1, alpha=2, beta=1, lam=1), CaseTag.NON_SINGULAR),
])
def test_classification(p, tag):
    assert classify_case(p) is tag


@given(st.lists(st.sampled_from([0.0, 1.0, -1.0, 2.0]), min_size=3, max_size=3))
def test_tags_exhaustive_and_exclusive(v):
    alpha, beta, lam = v
    tag = classify_case(SystemParams(b=1, alpha=alpha, beta=beta, lam=lam))
    singular = beta * (lam + beta) == 0
    if not singular:
        assert tag is CaseTag.NON_SINGULAR
    elif alpha == 0:
        assert tag in (CaseTag.FLAT, CaseTag.CONTRACTING, CaseTag.BAND)
    elif lam == beta:
        assert tag is CaseTag.QUADRATIC
    else:
        assert tag is CaseTag.REDUCIBLE


@given(st.floats(-3, 3).filter(lambda x: abs(x) > 0.1), st.floats(-3, 3).filter(lambda x: abs(x) > 0.1),
       small, small, st.floats(-5, 5), st.floats(-5, 5))
def test_polymap_inverse(k, m, q, r, s, t):
    f = PolyMap2(k, m, q, r)
    S, T = f.forward(s, t)
    assert np.allclose(f.inverse(S, T), (s, t), atol=1e-9 * (1 + abs(s) + abs(t)) ** 2)
    g = PolyMap2(m, k, r, q)
    assert np.allclose(g.forward(*f.forward(s, t)), f.then(g).forward(s, t), atol=1e-9 * (1 + s * s + abs(t)) ** 2)


def test_normal_form_rejections():
    with pytest.raises(UnsupportedCase):
        normal_form(SystemParams(b=1, beta=1, lam=1))
    with pytest.raises(LarcViolated):
        normal_form(SystemParams(b=0, gamma=1))


def test_flat_normal_form_is_identity():
    nf = normal_form(SystemParams(a=0.3, b=2, c=1, gamma=1))
    assert nf.conj == IDENTITY_MAP and nf.params == SystemParams(a=0.3, b=2, c=1, gamma=1)


@pytest.mark.parametrize("p", SINGULAR_SYSTEMS)
def test_normal_form_chart_conventions(p):
    nf = normal_form(p, ControlRange(-1, 1))
    q = nf.params
    assert larc(q)
    expected = classify_case(p)
    if expected is CaseTag.REDUCIBLE:
        assert nf.tag in (CaseTag.FLAT, CaseTag.CONTRACTING, CaseTag.BAND)
    else:
        assert nf.tag is expected
    assert classify_case(q) is nf.tag
    if nf.tag is CaseTag.CONTRACTING:
        assert q.lam < 0 and q.a >= 0 and q.b == 1 and q.gamma == 0
    if nf.tag is CaseTag.BAND:
        assert q.beta < 0 and q.c == 0 and q.gamma >= 0
    if nf.tag is CaseTag.QUADRATIC:
        assert q.c == 0 and q.gamma == 0


@pytest.mark.parametrize("p", SINGULAR_SYSTEMS)
def test_normal_form_conjugates_flows(p):
    # both sides by RK4 on the raw fields: f(phi_p(tau, v)) = phi_q(+-tau, f(v))
    nf = normal_form(p)
    rng = np.random.default_rng(7)
    sign = -1.0 if nf.time_reversed else 1.0
    for _ in range(10):
        v = rng.uniform(-1, 1, 2)
        omega = rng.uniform(-1, 1)
        tau = rng.uniform(0.1, 1.0)
        end = rk4_segment(p, v[0], v[1], omega, tau)
        lhs = np.array(nf.conj.forward(*end), dtype=float)
        S, T = nf.conj.forward(*v)
        rhs = np.array(rk4_segment(nf.params, S, T, omega, sign * tau), dtype=float)
        assert np.allclose(lhs, rhs, atol=1e-8)


@settings(max_examples=100)
@given(st.sampled_from([CaseTag.FLAT, CaseTag.CONTRACTING, CaseTag.BAND, CaseTag.QUADRATIC]),
       st.integers(0, 2**31))
def test_transform_params_matches_field_pushforward(tag, seed):
    rng = np.random.default_rng(seed)
    p = params_for_tag(rng, tag)
    f = PolyMap2(*(float(x) for x in (rng.choice([-1, 1]) * rng.uniform(0.5, 2), rng.choice([-1, 1])
                                      * rng.uniform(0.5, 2), rng.uniform(-1, 1), rng.uniform(-1, 1))))
    try:
        q = transform_params(p, f)
    except ConstraintError:
        # the shear produced a quadratic term next to a nonzero gamma
        f = PolyMap2(f.k, f.m, f.q, 0.0)
        q = transform_params(p, f)
    s, t, omega = rng.uniform(-2, 2, 3)
    J = f.jacobian(s)
    lhs = J @ np.array(p.field(s, t, omega), dtype=float)
    rhs = np.array(q.field(*f.forward(s, t), omega), dtype=float)
    assert np.allclose(lhs, rhs, atol=1e-9)


def test_time_reversal_negates_everything():
    p = SystemParams(a=1, b=2, c=3, alpha=0, beta=4, gamma=5, lam=6)
    assert p.reversed_time().as_tuple() == tuple(-x for x in p.as_tuple())
