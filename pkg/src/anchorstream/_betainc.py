"""Regularized incomplete beta function and its inverse.

Pure Python; used for beta quantiles so the core package does not need scipy.
"""
from __future__ import annotations

import math

__all__ = ["betainc", "betaincinv", "beta_ppf"]

_EPS = 1e-15
_TINY = 1e-300


def _betacf(a, b, x):
    # modified Lentz evaluation of the continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, 10000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def _log_front(a, b, x):
    return (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
            + a * math.log(x) + b * math.log1p(-x))


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta ``I_x(a, b)`` for ``a, b > 0``."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = math.exp(_log_front(a, b, x))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _density(a, b, x):
    return math.exp(_log_front(a, b, x) - math.log(x) - math.log1p(-x))


def _initial_guess(a, b, p):
    # Abramowitz & Stegun 26.5.22 for large shapes, a power-law tail start otherwise
    if a >= 1.0 and b >= 1.0:
        pp = p if p < 0.5 else 1.0 - p
        t = math.sqrt(-2.0 * math.log(pp))
        z = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t
        if p < 0.5:
            z = -z
        al = (z * z - 3.0) / 6.0
        h = 2.0 / (1.0 / (2.0 * a - 1.0) + 1.0 / (2.0 * b - 1.0))
        w = (z * math.sqrt(al + h) / h
             - (1.0 / (2.0 * b - 1.0) - 1.0 / (2.0 * a - 1.0)) * (al + 5.0 / 6.0 - 2.0 / (3.0 * h)))
        return a / (a + b * math.exp(2.0 * w))
    lna = math.log(a / (a + b))
    lnb = math.log(b / (a + b))
    t = math.exp(a * lna) / a
    u = math.exp(b * lnb) / b
    w = t + u
    if p < t / w:
        return (a * w * p) ** (1.0 / a)
    return 1.0 - (b * w * (1.0 - p)) ** (1.0 / b)


def betaincinv(a: float, b: float, p: float, tol: float = 1e-12) -> float:
    """Solve ``I_x(a, b) = p`` for ``x``.

    Newton iteration safeguarded by a bisection bracket; the returned `x`
    is accurate to roughly `tol` in relative terms.
    """
    a, b, p = float(a), float(b), float(p)
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p}")
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    lo, hi = 0.0, 1.0
    x = min(max(_initial_guess(a, b, p), 1e-300), 1.0 - 1e-16)
    for _ in range(200):
        f = betainc(a, b, x) - p
        if f == 0.0:
            return x
        if f < 0:
            lo = x
        else:
            hi = x
        dens = _density(a, b, x)
        step = f / dens if dens > 0 and math.isfinite(dens) else math.inf
        x_new = x - step
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
            if not (lo < x_new < hi):
                # bracket is down to adjacent floats
                return x
        # relative to the nearer endpoint, so extreme quantiles keep precision
        scale = min(x_new, 1.0 - x_new)
        if abs(x_new - x) <= tol * scale or hi - lo <= tol * scale:
            return x_new
        x = x_new
    return x


def beta_ppf(q: float, a: float, b: float) -> float:
    """Quantile function of ``Beta(a, b)``."""
    return betaincinv(a, b, q)
