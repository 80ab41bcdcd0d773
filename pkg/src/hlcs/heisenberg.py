"""Heisenberg group arithmetic, its Lie algebra and linear flows.

The group is R^2 x R with product

    (v1, z1) * (v2, z2) = (v1 + v2, z1 + z2 + 1/2 <v1, theta v2>)

where theta(x, y) = (-y, x) is the counter-clockwise quarter turn.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._numerics import expm2, phi1m2

_ROT = np.array([[0.0, -1.0], [1.0, 0.0]])


def theta(v) -> np.ndarray:
    """Counter-clockwise rotation by pi/2: (x, y) -> (-y, x)."""
    v = np.asarray(v, dtype=float)
    return np.array([-v[1], v[0]])


def omega_form(v1, v2) -> float:
    """The symplectic pairing <v1, theta v2>."""
    return float(np.dot(v1, theta(v2)))


@dataclass(frozen=True)
class GroupElement:
    v: tuple[float, float]
    z: float

    def __post_init__(self):
        object.__setattr__(self, "v", tuple(float(x) for x in self.v))
        object.__setattr__(self, "z", float(self.z))
        if not all(np.isfinite(self.as_array())):
            raise ValueError("group element entries must be finite")

    @classmethod
    def from_array(cls, arr) -> "GroupElement":
        return cls((arr[0], arr[1]), arr[2])

    def as_array(self) -> np.ndarray:
        return np.array([self.v[0], self.v[1], self.z])

    def inverse(self) -> "GroupElement":
        return GroupElement((-self.v[0], -self.v[1]), -self.z)


IDENTITY = GroupElement((0.0, 0.0), 0.0)


@dataclass(frozen=True)
class AlgebraElement:
    zeta: tuple[float, float]
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "zeta", tuple(float(x) for x in self.zeta))
        object.__setattr__(self, "alpha", float(self.alpha))

    def as_array(self) -> np.ndarray:
        return np.array([self.zeta[0], self.zeta[1], self.alpha])


def group_mul(g1: GroupElement, g2: GroupElement) -> GroupElement:
    v = (g1.v[0] + g2.v[0], g1.v[1] + g2.v[1])
    return GroupElement(v, g1.z + g2.z + 0.5 * omega_form(g1.v, g2.v))


def lie_bracket(X: AlgebraElement, Y: AlgebraElement) -> AlgebraElement:
    return AlgebraElement((0.0, 0.0), omega_form(X.zeta, Y.zeta))


@dataclass(frozen=True)
class DerivationMatrix:
    """The block matrix [[A, 0], [eta^T, k]].

    ``corner`` defaults to tr A, which is the only value making the matrix a
    derivation of the algebra. Other values are accepted so that non-examples
    can be built and rejected by the checks.
    """

    A: np.ndarray
    eta: np.ndarray
    corner: float | None = None

    def __post_init__(self):
        A = np.array(self.A, dtype=float).reshape(2, 2)
        eta = np.array(self.eta, dtype=float).reshape(2)
        A.setflags(write=False)
        eta.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "eta", eta)
        k = float(np.trace(A)) if self.corner is None else float(self.corner)
        object.__setattr__(self, "corner", k)

    @property
    def is_derivation(self) -> bool:
        return self.corner == float(np.trace(self.A))

    def matrix(self) -> np.ndarray:
        D = np.zeros((3, 3))
        D[:2, :2] = self.A
        D[2, :2] = self.eta
        D[2, 2] = self.corner
        return D

    def apply(self, X: AlgebraElement) -> AlgebraElement:
        out = self.matrix() @ X.as_array()
        return AlgebraElement((out[0], out[1]), out[2])

    def field(self, g: GroupElement) -> np.ndarray:
        """The linear vector field (Av, <eta, v> + k z) at g."""
        v = np.array(g.v)
        return np.concatenate([self.A @ v, [self.eta @ v + self.corner * g.z]])


@dataclass(frozen=True)
class AutomorphismMatrix:
    """The block matrix [[P, 0], [eta^T, det P]] acting on (v, z)."""

    P: np.ndarray
    eta: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        P = np.array(self.P, dtype=float).reshape(2, 2)
        eta = np.array(self.eta, dtype=float).reshape(2)
        if np.linalg.det(P) == 0:
            raise ValueError("automorphism block P must be invertible")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "eta", eta)

    def apply(self, g: GroupElement) -> GroupElement:
        v = np.array(g.v)
        Pv = self.P @ v
        return GroupElement((Pv[0], Pv[1]), self.eta @ v + np.linalg.det(self.P) * g.z)


def lambda_op(B, eta, tau: float, method: str = "closed") -> np.ndarray:
    """Integral of e^{s B^T} eta over s in [0, tau].

    ``method="quad"`` evaluates the integral by adaptive quadrature instead of
    the closed form; it is slower and only meant as a fallback or cross-check.
    """
    B = np.asarray(B, dtype=float).reshape(2, 2)
    eta = np.asarray(eta, dtype=float).reshape(2)
    if tau == 0:
        return np.zeros(2)
    if method == "closed":
        return tau * (phi1m2(tau * B.T) @ eta)
    if method == "quad":
        from scipy.integrate import quad

        def comp(i):
            return quad(lambda s: (expm2(s * B.T) @ eta)[i], 0.0, tau,
                        epsabs=1e-14, epsrel=1e-13, limit=200)[0]

        return np.array([comp(0), comp(1)])
    raise ValueError(f"unknown method {method!r}")


def linear_flow(D: DerivationMatrix, g: GroupElement, tau: float) -> GroupElement:
    """Closed-form flow of the linear field defined by D, at time tau."""
    A, k = D.A, D.corner
    v = np.array(g.v)
    ek = np.exp(tau * k)
    vv = expm2(tau * A) @ v
    shift = lambda_op(A - k * np.eye(2), D.eta, tau)
    return GroupElement((vv[0], vv[1]), ek * (shift @ v) + g.z * ek)


def flow_automorphism_check(D: DerivationMatrix, tau: float,
                            samples: Iterable[tuple[GroupElement, GroupElement]],
                            tol: float = 1e-9) -> bool:
    """True iff the time-tau flow of D respects the product on every sample."""
    for g1, g2 in samples:
        lhs = linear_flow(D, group_mul(g1, g2), tau).as_array()
        rhs = group_mul(linear_flow(D, g1, tau), linear_flow(D, g2, tau)).as_array()
        if not np.allclose(lhs, rhs, rtol=tol, atol=tol):
            return False
    return True


def derivation_defect(D: DerivationMatrix, basis: Sequence[AlgebraElement] | None = None) -> float:
    """Largest violation of D[X,Y] = [DX,Y] + [X,DY] over pairs of a basis."""
    if basis is None:
        basis = [AlgebraElement((1, 0), 0), AlgebraElement((0, 1), 0), AlgebraElement((0, 0), 1)]
    worst = 0.0
    for X in basis:
        for Y in basis:
            lhs = D.apply(lie_bracket(X, Y)).as_array()
            rhs = lie_bracket(D.apply(X), Y).as_array() + lie_bracket(X, D.apply(Y)).as_array()
            worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst


def left_invariant_field(X: AlgebraElement, g: GroupElement) -> np.ndarray:
    """Left translate of X to g: d/du (g * exp(uX)) at u = 0."""
    zeta = np.array(X.zeta)
    return np.concatenate([zeta, [X.alpha + 0.5 * omega_form(g.v, zeta)]])


def projection(g) -> np.ndarray:
    """Coset coordinates (s, t) = (y, z + x y / 2) of (R e1 x {0}) g.

    Accepts a GroupElement or an array whose last axis is (x, y, z).
    """
    arr = g.as_array() if isinstance(g, GroupElement) else np.asarray(g, dtype=float)
    x, y, z = arr[..., 0], arr[..., 1], arr[..., 2]
    return np.stack([y, z + 0.5 * x * y], axis=-1)
