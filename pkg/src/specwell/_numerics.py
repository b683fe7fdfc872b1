"""Shared low-level numerics: quadrature, rootfinding, stencils.

Internal module; public API lives in the topic modules.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

GL_NODES = 128          # Gauss-Legendre nodes per side of a split integral
ROOT_RTOL = 5e-16


@lru_cache(maxsize=32)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def gl_nodes(a: float, b: float, n: int = GL_NODES):
    """Gauss-Legendre nodes/weights mapped to [a, b]."""
    x, w = _leggauss(n)
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * x, half * w


def gl_integrate(f, a: float, b: float, n: int = GL_NODES) -> float:
    if b <= a:
        return 0.0
    x, w = gl_nodes(a, b, n)
    return float(np.dot(w, f(x)))


def bisect_newton(f, a: float, b: float, df=None, rtol: float = ROOT_RTOL,
                  maxiter: int = 200) -> float:
    """Root of f in [a, b] by bisection, polished by Newton when df given.

    f(a) and f(b) must bracket (allowing a zero endpoint).
    """
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0.0:
        raise ValueError("root not bracketed")
    lo, hi = (a, b) if fa < 0 else (b, a)
    x = 0.5 * (a + b)
    for _ in range(maxiter):
        fx = f(x)
        if fx < 0:
            lo = x
        else:
            hi = x
        step_ok = False
        if df is not None and fx != 0.0:
            d = df(x)
            if d != 0.0:
                xn = x - fx / d
                if (xn - lo) * (xn - hi) < 0.0:
                    step_ok = abs(xn - x) <= 0.5 * abs(hi - lo)
                    if step_ok:
                        x = xn
        if not step_ok:
            x = 0.5 * (lo + hi)
        scale = max(abs(lo), abs(hi), 1.0)
        if abs(hi - lo) <= rtol * scale:
            break
    return x


# -- uniform-grid stencils -------------------------------------------------

def fd_derivative(values: np.ndarray, h: float, order: int = 1) -> np.ndarray:
    """4th-order finite-difference derivative on a uniform grid.

    One-sided 5-point stencils at the edges keep the global order.
    """
    v = np.asarray(values, dtype=float)
    n = v.size
    if n < 6:
        raise ValueError("need at least 6 points for 4th-order stencils")
    out = np.empty_like(v)
    if order == 1:
        out[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)
        c0 = np.array([-25, 48, -36, 16, -3]) / 12.0
        c1 = np.array([-3, -10, 18, -6, 1]) / 12.0
        out[0] = np.dot(c0, v[:5]) / h
        out[1] = np.dot(c1, v[:5]) / h
        out[-1] = -np.dot(c0, v[-5:][::-1]) / h
        out[-2] = -np.dot(c1, v[-5:][::-1]) / h
    elif order == 2:
        out[2:-2] = (-v[:-4] + 16 * v[1:-3] - 30 * v[2:-2]
                     + 16 * v[3:-1] - v[4:]) / (12 * h * h)
        c0 = np.array([45, -154, 214, -156, 61, -10]) / 12.0
        c1 = np.array([10, -15, -4, 14, -6, 1]) / 12.0
        out[0] = np.dot(c0, v[:6]) / (h * h)
        out[1] = np.dot(c1, v[:6]) / (h * h)
        out[-1] = np.dot(c0, v[-6:][::-1]) / (h * h)
        out[-2] = np.dot(c1, v[-6:][::-1]) / (h * h)
    else:
        raise ValueError("order must be 1 or 2")
    return out


def stencil5(f, x: float, h: float, order: int = 1) -> float:
    """5-point central stencil of f at x (4th order)."""
    v = np.array([f(x + k * h) for k in (-2, -1, 0, 1, 2)])
    if order == 1:
        return float((v[0] - 8 * v[1] + 8 * v[3] - v[4]) / (12 * h))
    if order == 2:
        return float((-v[0] + 16 * v[1] - 30 * v[2] + 16 * v[3] - v[4])
                     / (12 * h * h))
    raise ValueError("order must be 1 or 2")


def smooth_bump(t):
    """C-infinity bump on (-1, 1), normalized to peak value 1."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ti * ti))
    return out


def smooth_bump_prime(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    g = 1.0 - ti * ti
    out[inside] = np.exp(1.0 - 1.0 / g) * (-2.0 * ti / (g * g))
    return out


def loglog_slope(x, y) -> float:
    """Least-squares slope of log|y| against log(x)."""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    if np.any(y == 0):
        y = np.where(y == 0, np.finfo(float).tiny, y)
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
