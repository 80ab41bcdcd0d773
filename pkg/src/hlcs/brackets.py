"""Polynomial planar vector fields and a numerical bracket-span test.

This is an independent route to the rank condition: it never evaluates the
closed-form expression, only iterated Lie brackets of the two fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.signal import convolve2d

from .system import SystemParams


def _pad(P: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((n, n))
    out[: P.shape[0], : P.shape[1]] = P
    return out


def _d_ds(P: np.ndarray) -> np.ndarray:
    out = np.zeros_like(P)
    out[:-1, :] = P[1:, :] * np.arange(1, P.shape[0])[:, None]
    return out


def _d_dt(P: np.ndarray) -> np.ndarray:
    out = np.zeros_like(P)
    out[:, :-1] = P[:, 1:] * np.arange(1, P.shape[1])[None, :]
    return out


@dataclass(frozen=True)
class PolyField:
    """Components as coefficient grids, entry [i, j] multiplying s^i t^j."""

    P: np.ndarray
    Q: np.ndarray

    def __call__(self, s, t):
        return (np.polynomial.polynomial.polyval2d(s, t, self.P),
                np.polynomial.polynomial.polyval2d(s, t, self.Q))

    def bracket(self, other: "PolyField") -> "PolyField":
        """[X, Y] = DY X - DX Y."""
        def mul(u, v):
            return convolve2d(u, v)

        X, Y = self, other
        comps = []
        for Yc, Xc in ((Y.P, X.P), (Y.Q, X.Q)):
            term = (mul(_d_ds(Yc), X.P) + mul(_d_dt(Yc), X.Q)
                    - mul(_d_ds(Xc), Y.P) - mul(_d_dt(Xc), Y.Q))
            comps.append(term)
        n = max(c.shape[0] for c in comps)
        P, Q = (_pad(c, n) for c in comps)
        return PolyField(P, Q)

    def is_zero(self, tol: float = 0.0) -> bool:
        return bool(np.abs(self.P).max() <= tol and np.abs(self.Q).max() <= tol)


def system_fields(p: SystemParams) -> tuple[PolyField, PolyField]:
    P0 = np.zeros((3, 3))
    Q0 = np.zeros((3, 3))
    P0[1, 0] = p.beta
    Q0[0, 1] = p.lam + p.beta
    Q0[2, 0] = 0.5 * p.alpha
    Q0[1, 0] = p.gamma
    P1 = np.zeros((3, 3))
    Q1 = np.zeros((3, 3))
    P1[0, 0] = p.b
    Q1[0, 0] = p.c
    Q1[1, 0] = p.a
    return PolyField(P0, Q0), PolyField(P1, Q1)


def generated_fields(p: SystemParams, depth: int = 4) -> list[PolyField]:
    """f0, f1 and all left-normed brackets of them up to the given length."""
    f0, f1 = system_fields(p)
    gens = [f0, f1]
    out = list(gens)
    layer = [f0.bracket(f1)]
    for _ in range(depth - 1):
        out.extend(f for f in layer if not f.is_zero())
        layer = [f.bracket(g) for f in layer for g in gens]
    return out


class _Evaluator:
    """Evaluates a list of fields at once through a stacked coefficient tensor."""

    def __init__(self, fields: list[PolyField]):
        n = max(f.P.shape[0] for f in fields)
        self.n = n
        self.C = np.array([[_pad(f.P, n), _pad(f.Q, n)] for f in fields])

    def values(self, s: float, t: float) -> np.ndarray:
        ps = s ** np.arange(self.n)
        pt = t ** np.arange(self.n)
        return np.einsum("kcij,i,j->kc", self.C, ps, pt)

    def max_pair_det(self, x) -> float:
        v = self.values(x[0], x[1])
        dets = np.outer(v[:, 0], v[:, 1])
        return float(np.abs(dets - dets.T).max())


def bracket_span_rank(p: SystemParams, rng: np.random.Generator, *, starts: int = 5,
                      depth: int = 4, box: float = 3.0, tol: float = 1e-6) -> tuple[bool, float]:
    """Numerical rank test: does the bracket span have rank 2 everywhere?

    From each random start, minimize the largest 2x2 minor of the evaluated
    fields. A minimum near zero exhibits a rank-deficient state. Returns the
    verdict and the smallest value found.
    """
    ev = _Evaluator(generated_fields(p, depth))
    best = np.inf
    for x0 in rng.uniform(-box, box, size=(starts, 2)):
        res = minimize(ev.max_pair_det, x0, method="Nelder-Mead",
                       options={"xatol": 1e-9, "fatol": 1e-13, "maxiter": 1500})
        best = min(best, float(res.fun))
    return best > tol, best


def bracket_span_at(p: SystemParams, s: float, t: float, depth: int = 4) -> int:
    """Rank of the evaluated bracket span at a single state."""
    vals = np.array([f(s, t) for f in generated_fields(p, depth)])
    return int(np.linalg.matrix_rank(vals, tol=1e-9))


__all__ = ["PolyField", "system_fields", "generated_fields", "bracket_span_rank", "bracket_span_at"]
