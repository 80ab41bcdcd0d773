"""Numerical kernels shared across modules.

Exponential-integrator functions, closed-form 2x2 matrix functions, a stable
quadratic solver and a generic fixed-step RK4 stepper.
"""

from __future__ import annotations

import cmath
import math
from typing import Callable

import numpy as np

_SERIES_RADIUS = 1.0
_SERIES_TERMS = 24


def phi(k: int, x):
    """phi_k(x) = sum_j x^j / (j+k)!, so phi_1(x) = (e^x - 1)/x.

    Vectorized over ``x``. Small arguments use the power series, large ones
    the downward-stable recurrence phi_k = (phi_{k-1} - 1/(k-1)!) / x.
    """
    if isinstance(x, (float, int)):
        return _phi_scalar(k, float(x))
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < _SERIES_RADIUS

    xs = x[small]
    acc = np.zeros_like(xs)
    for j in reversed(range(_SERIES_TERMS)):
        acc = acc * xs + 1.0 / math.factorial(j + k)
    out[small] = acc

    xl = x[~small]
    val = np.exp(xl)
    for n in range(1, k + 1):
        val = (val - 1.0 / math.factorial(n - 1)) / xl
    out[~small] = val
    return out if out.ndim else float(out)


_INV_FACT = [1.0 / math.factorial(n) for n in range(_SERIES_TERMS + 8)]


def _phi_scalar(k: int, x: float) -> float:
    if abs(x) < _SERIES_RADIUS:
        acc = 0.0
        for j in reversed(range(_SERIES_TERMS)):
            acc = acc * x + _INV_FACT[j + k]
        return acc
    val = math.exp(x)
    for n in range(1, k + 1):
        val = (val - _INV_FACT[n - 1]) / x
    return val


def phi1(x):
    return phi(1, x)


def phi2(x):
    return phi(2, x)


def _moment_exp(z: complex, n: int) -> complex:
    """J_n(z) = integral_0^1 u^n e^{z u} du for complex z."""
    if abs(z) < 2.0:
        total = 0j
        term = 1 + 0j
        for j in range(60):
            if j:
                term *= z / j
            total += term / (j + n + 1)
        return total
    ez = cmath.exp(z)
    val = (ez - 1) / z
    for k in range(1, n + 1):
        val = (ez - k * val) / z
    return val


def _apply_2x2(X: np.ndarray, deriv: Callable[[complex, int], complex]) -> np.ndarray:
    """f(X) for a real 2x2 matrix via f(X) = c0 I + c1 X.

    ``deriv(z, n)`` returns the n-th derivative of the scalar function at z.
    Near-coincident eigenvalues switch to a Taylor form of the divided
    difference so the result stays accurate through the repeated case.
    """
    X = np.asarray(X, dtype=float)
    m = 0.5 * (X[0, 0] + X[1, 1])
    det = X[0, 0] * X[1, 1] - X[0, 1] * X[1, 0]
    r = cmath.sqrt(m * m - det)
    delta = 2 * r
    if abs(delta) > 1e-3:
        x1, x2 = m + r, m - r
        f1, f2 = deriv(x1, 0), deriv(x2, 0)
        c1 = (f1 - f2) / delta
        c0 = f1 - c1 * x1
    else:
        d2 = delta * delta
        c1 = deriv(m, 1) + deriv(m, 3) * d2 / 24
        c0 = deriv(m, 0) + deriv(m, 2) * d2 / 8 - c1 * m
    return c0.real * np.eye(2) + c1.real * X


def expm2(X) -> np.ndarray:
    """Matrix exponential of a real 2x2 matrix in closed form."""
    return _apply_2x2(X, lambda z, n: cmath.exp(z))


def phi1m2(X) -> np.ndarray:
    """phi_1 of a real 2x2 matrix, i.e. integral_0^1 e^{uX} du."""
    return _apply_2x2(X, lambda z, n: _moment_exp(z, n))


def quadratic_roots(a2: float, a1: float, a0: float) -> list[float]:
    """Real roots of a2 x^2 + a1 x + a0, ascending, cancellation-free."""
    if a2 == 0.0:
        if a1 == 0.0:
            return []
        return [-a0 / a1]
    disc = a1 * a1 - 4 * a2 * a0
    if disc < 0:
        return []
    sq = math.sqrt(disc)
    q = -0.5 * (a1 + math.copysign(sq, a1))
    if q == 0.0:
        return [0.0, 0.0]
    roots = sorted([q / a2, a0 / q])
    return roots


def rk4_fixed(field, y0, tau: float, step: float):
    """Integrate y' = field(y) over [0, tau] with classical RK4.

    ``y0`` may be any array shape accepted by ``field``; negative ``tau``
    integrates backward. The step count is ceil(|tau| / step).
    """
    y = np.array(y0, dtype=float)
    n = int(math.ceil(abs(tau) / step - 1e-12)) if tau else 0
    if n == 0:
        return y
    h = tau / n
    for _ in range(n):
        k1 = field(y)
        k2 = field(y + 0.5 * h * k1)
        k3 = field(y + 0.5 * h * k2)
        k4 = field(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y
