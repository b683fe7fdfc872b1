"""Potential/coefficient models and turning-point geometry.

A PotentialModel wraps a scalar function on an interval together with its
derivatives.  The module computes critical structure (minima, maxima,
inflections and their values), turning points and branch profiles
(parity defect F, half-width G), converts profiles back to a potential,
ships a small library of reference models, and measures the canonical
distance between models modulo translation and mirror symmetry.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from . import _numerics as num
from .errors import (
    BranchViolation,
    DegenerateCritical,
    DuplicateCriticalValue,
    NegativeCurvature,
    NotSingleWell,
    OutOfBand,
    UnknownName,
)

__all__ = [
    "PotentialModel",
    "CriticalPoint",
    "CriticalStructure",
    "Well",
    "ProfilePair",
    "critical_structure",
    "well_intervals",
    "turning_points",
    "profiles_from_potential",
    "potential_from_profiles",
    "build_library",
    "canonical_distance",
]

_SCAN_N = 4096


@dataclass(frozen=True)
class PotentialModel:
    """Scalar model V (or coefficient n) on an open interval.

    Parameters
    ----------
    eval_fn : callable
        Vectorized map x -> value; finite on compact sub-intervals.
    deriv_fn : callable or None
        Vectorized map (x, order) -> derivative.  When None, derivatives
        fall back to adaptive central differences of ``eval_fn``.
    domain : (float, float)
        Open interval of definition; may be infinite.
    kind : str
        ``"schrodinger-V"`` or ``"divergence-n"``.
    symmetric : bool
        User-asserted evenness about the global minimum.  Never inferred.
    """

    eval_fn: Callable
    deriv_fn: Optional[Callable]
    domain: tuple
    kind: str = "schrodinger-V"
    label: str = ""
    symmetric: bool = False

    def __call__(self, x):
        return self.eval_fn(np.asarray(x, dtype=float))

    def deriv(self, x, order: int = 1):
        if order == 0:
            return self(x)
        if self.deriv_fn is not None:
            return self.deriv_fn(np.asarray(x, dtype=float), order)
        return _fd_deriv(self.eval_fn, x, order)

    @staticmethod
    def from_polynomial(coeffs: Sequence[float], domain=(-8.0, 8.0),
                        kind: str = "schrodinger-V", label: str = "",
                        symmetric: bool = False) -> "PotentialModel":
        """Model from polynomial coefficients (low order first)."""
        poly = np.polynomial.Polynomial(list(coeffs))
        derivs = [poly.deriv(k) for k in range(1, 7)]

        def _eval(x):
            return poly(x)

        def _deriv(x, order):
            if order <= 6:
                return derivs[order - 1](x)
            return np.zeros_like(np.asarray(x, dtype=float))

        return PotentialModel(_eval, _deriv, tuple(domain), kind, label,
                              symmetric)

    @staticmethod
    def from_callable(f: Callable, domain, kind: str = "schrodinger-V",
                      label: str = "", symmetric: bool = False,
                      deriv: Optional[Callable] = None) -> "PotentialModel":
        def _eval(x):
            return np.asarray(f(np.asarray(x, dtype=float)), dtype=float)

        return PotentialModel(_eval, deriv, tuple(domain), kind, label,
                              symmetric)


def _fd_deriv(f, x, order: int):
    """Adaptive central differences for derivative orders 1..4."""
    x = np.asarray(x, dtype=float)
    scale = np.maximum(1.0, np.abs(x))
    eps = np.finfo(float).eps
    if order == 1:
        h = eps ** 0.2 * scale
        num_ = (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h))
        return num_ / (12 * h)
    if order == 2:
        h = eps ** (1.0 / 6.0) * scale
        num_ = (-f(x - 2 * h) + 16 * f(x - h) - 30 * f(x)
                + 16 * f(x + h) - f(x + 2 * h))
        return num_ / (12 * h * h)
    if order == 3:
        h = eps ** (1.0 / 7.0) * scale
        num_ = (f(x + 2 * h) - 2 * f(x + h) + 2 * f(x - h) - f(x - 2 * h))
        return num_ / (2 * h ** 3)
    if order == 4:
        h = eps ** (1.0 / 8.0) * scale
        num_ = (f(x - 2 * h) - 4 * f(x - h) + 6 * f(x)
                - 4 * f(x + h) + f(x + 2 * h))
        return num_ / h ** 4
    raise ValueError("derivative order must be 1..4")


@dataclass(frozen=True)
class CriticalPoint:
    x: float
    value: float
    order: int          # first non-vanishing derivative order N >= 2
    kind: str           # "minimum" | "maximum" | "inflection"


@dataclass(frozen=True)
class CriticalStructure:
    points: tuple        # CriticalPoint, sorted by value
    cutoff: float

    def minima(self):
        return [p for p in self.points if p.kind == "minimum"]

    def maxima(self):
        return [p for p in self.points if p.kind == "maximum"]

    @property
    def values(self):
        return np.array([p.value for p in self.points])


@dataclass(frozen=True)
class Well:
    """A connected component of a sublevel set, identified by its minimum."""
    index: int
    x_min: float
    e_min: float


def _scan_box(model: PotentialModel, level: float):
    """Finite interval on which {model <= level} is searched."""
    a, b = model.domain
    if np.isfinite(a) and np.isfinite(b):
        pad = 1e-9 * (b - a)
        return a + pad, b - pad
    lo, hi = -1.0, 1.0
    for _ in range(60):
        grow = False
        if not (np.isfinite(a) and lo <= a) and model(lo) <= level:
            lo *= 2.0
            grow = True
        if not (np.isfinite(b) and hi >= b) and model(hi) <= level:
            hi *= 2.0
            grow = True
        if not grow:
            break
    if np.isfinite(a):
        lo = max(lo, a + 1e-12)
    if np.isfinite(b):
        hi = min(hi, b - 1e-12)
    return lo, hi


def critical_structure(model: PotentialModel, cutoff: float,
                       dup_tol: float = 1e-10,
                       order_tol: float = 1e-7) -> CriticalStructure:
    """Locate critical points with value below ``cutoff``.

    Roots of V' are found by sign-change bracketing on a dense grid plus
    bisection/Newton refinement; touch-points (V' grazing zero, odd-order
    inflections) are caught through sign changes of V''.  Each point is
    classified by the first non-vanishing derivative order N <= 4.

    Raises
    ------
    DegenerateCritical
        if a critical point is flatter than order 4.
    DuplicateCriticalValue
        if two critical values coincide within ``dup_tol``.
    """
    lo, hi = _scan_box(model, cutoff)
    xs = np.linspace(lo, hi, _SCAN_N)
    dv = model.deriv(xs, 1)

    roots = []
    sgn = np.sign(dv)
    for i in np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]:
        r = num.bisect_newton(lambda x: float(model.deriv(x, 1)),
                              xs[i], xs[i + 1],
                              df=lambda x: float(model.deriv(x, 2)))
        roots.append(r)
    # grazing zeros of V': local minima of |V'| near machine scale, refined
    # through the sign change of V''.
    scale = float(np.max(np.abs(dv))) + 1e-300
    absdv = np.abs(dv)
    for i in range(1, _SCAN_N - 1):
        if absdv[i] and absdv[i] <= absdv[i - 1] and absdv[i] < absdv[i + 1]:
            if absdv[i] > 1e-5 * scale:
                continue
            if any(abs(xs[i] - r) < 5 * (xs[1] - xs[0]) for r in roots):
                continue
            d2a = float(model.deriv(xs[i - 1], 2))
            d2b = float(model.deriv(xs[i + 1], 2))
            if d2a * d2b < 0:
                r = num.bisect_newton(lambda x: float(model.deriv(x, 2)),
                                      xs[i - 1], xs[i + 1],
                                      df=lambda x: float(model.deriv(x, 3)))
                if abs(float(model.deriv(r, 1))) <= 1e-6 * scale:
                    roots.append(r)
    roots.sort()

    pts = []
    vref = max(1.0, float(np.max(np.abs(model(xs)))))
    for r in roots:
        order = None
        for k in (2, 3, 4):
            dk = float(model.deriv(r, k))
            if abs(dk) > order_tol * vref:
                order = k
                break
        if order is None:
            raise DegenerateCritical(
                f"critical point at x={r:.6g} flatter than order 4")
        val = float(model(r))
        if val >= cutoff:
            continue
        if order % 2 == 0:
            kind = "minimum" if float(model.deriv(r, order)) > 0 else "maximum"
        else:
            kind = "inflection"
        pts.append(CriticalPoint(float(r), val, order, kind))

    pts.sort(key=lambda p: p.value)
    for p, q in zip(pts[:-1], pts[1:]):
        if abs(p.value - q.value) < dup_tol:
            raise DuplicateCriticalValue(
                f"values at x={p.x:.6g} and x={q.x:.6g} coincide")
    return CriticalStructure(tuple(pts), cutoff)


def well_intervals(model: PotentialModel, y: float):
    """Connected components of {model < y} as refined (a, b) intervals."""
    lo, hi = _scan_box(model, y)
    xs = np.linspace(lo, hi, _SCAN_N)
    below = model(xs) < y
    comps = []
    i = 0
    while i < _SCAN_N:
        if below[i]:
            j = i
            while j + 1 < _SCAN_N and below[j + 1]:
                j += 1
            f = lambda x: float(model(x)) - y
            a = xs[i] if i == 0 else num.bisect_newton(
                f, xs[i - 1], xs[i], df=lambda x: float(model.deriv(x, 1)))
            b = xs[j] if j == _SCAN_N - 1 else num.bisect_newton(
                f, xs[j], xs[j + 1], df=lambda x: float(model.deriv(x, 1)))
            comps.append((a, b))
            i = j + 1
        else:
            i += 1
    return comps


def _anchor_of(model: PotentialModel, well) -> float:
    if well is None:
        lo, hi = _scan_box(model, 1e30)
        xs = np.linspace(lo, hi, _SCAN_N)
        guess = float(xs[np.argmin(model(xs))])
        return refine_minimum(model, guess, span=(hi - lo) / _SCAN_N)[0]
    if isinstance(well, Well):
        return well.x_min
    if isinstance(well, (tuple, list)):      # an (a, b) interval
        a, b = float(well[0]), float(well[1])
        xs = np.linspace(a, b, 512)
        return float(xs[np.argmin(model(xs))])
    return float(well)


def turning_points(model: PotentialModel, y: float, well=None):
    """Edges (f-, f+) of the component of {V < y} containing the well.

    ``well`` may be None (global minimum), an x-position inside the well,
    or a Well record.  Raises OutOfBand when y does not cut the well.
    """
    anchor = _anchor_of(model, well)
    if float(model(anchor)) >= y:
        # the anchor need not sit at the exact bottom; polish before
        # declaring the energy below the well
        x0, e0 = refine_minimum(model, anchor)
        if e0 >= y:
            raise OutOfBand(f"y={y!r} does not exceed the well minimum")
        anchor = x0
    comps = well_intervals(model, y)
    for a, b in comps:
        if a <= anchor <= b:
            return float(a), float(b)
    # component narrower than the global scan: bracket outward from anchor
    lo, hi = _scan_box(model, y)
    step = (hi - lo) / _SCAN_N
    f = lambda x: float(model(x)) - y
    edges = []
    for sgn in (-1.0, 1.0):
        h = step
        x_in = anchor
        while True:
            x_out = anchor + sgn * h
            if f(x_out) >= 0.0:
                a, b = (x_out, x_in) if sgn < 0 else (x_in, x_out)
                edges.append(num.bisect_newton(
                    f, a, b, df=lambda x: float(model.deriv(x, 1))))
                break
            x_in = x_out
            h *= 2.0
            if h > 4.0 * (hi - lo):
                raise OutOfBand(
                    f"no sublevel component of y={y!r} contains the anchor")
    return float(edges[0]), float(edges[1])


def refine_minimum(model: PotentialModel, x_guess: float,
                   span: float = 1e-2):
    """Polish a local minimum by Newton on V' with bracket fallback."""
    x = x_guess
    for _ in range(80):
        d1 = float(model.deriv(x, 1))
        d2 = float(model.deriv(x, 2))
        if d2 <= 0:
            break
        step = d1 / d2
        x -= step
        if abs(step) < 1e-14 * max(1.0, abs(x)):
            break
    if abs(float(model.deriv(x, 1))) > 1e-8:
        try:
            x = num.bisect_newton(lambda t: float(model.deriv(t, 1)),
                                  x - span, x + span,
                                  df=lambda t: float(model.deriv(t, 2)))
        except ValueError:
            pass
    return float(x), float(model(x))


@dataclass(frozen=True)
class ProfilePair:
    """Branch profiles of a single well on (e0, grid[-1]].

    grid holds energies uniform in s = sqrt(y - e0) with grid[0] == e0;
    F is the parity defect (f+ + f-)/2, G the half-width (f+ - f-)/2.
    """
    grid: np.ndarray
    F: np.ndarray
    G: np.ndarray
    fminus: np.ndarray
    fplus: np.ndarray
    e0: float
    x0: float
    vpp: float
    order: int = 2

    @property
    def s(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.grid - self.e0, 0.0))

    def with_tables(self, **kw) -> "ProfilePair":
        return dataclasses.replace(self, **kw)


def profiles_from_potential(model: PotentialModel, e_max: float,
                            npts: int = 256, well=None) -> ProfilePair:
    """Tabulate F, G and the branches for a single well up to e_max.

    The energy grid is uniform in s = sqrt(y - E0): branch functions are
    smooth in s at a nondegenerate minimum, so tables resolve the bottom.

    Raises NotSingleWell if other critical points intrude below e_max.
    """
    anchor = _anchor_of(model, well)
    x0, e0 = refine_minimum(model, anchor)
    if e_max <= e0:
        raise OutOfBand("e_max must exceed the well minimum")
    vpp = float(model.deriv(x0, 2))
    if vpp <= 0:
        raise NegativeCurvature(f"V''(x0)={vpp:.3g} at the minimum")
    a_max, b_max = turning_points(model, e_max, x0)
    try:
        struct = critical_structure(model, e_max)
        for p in struct.points:
            if a_max < p.x < b_max and abs(p.x - x0) > 1e-8 \
                    and p.kind != "inflection":
                raise NotSingleWell(
                    f"critical point at x={p.x:.6g} inside the well")
    except DegenerateCritical:
        pass

    smax = np.sqrt(e_max - e0)
    s = np.linspace(0.0, smax, npts)
    y = e0 + s * s
    fm = np.empty(npts)
    fp = np.empty(npts)
    fm[0] = fp[0] = x0
    lo, hi = x0, x0
    for k in range(1, npts):
        yk = y[k]
        f = lambda x: float(model(x)) - yk
        df = lambda x: float(model.deriv(x, 1))
        # march brackets outward from the previous turning points
        step = max(1e-8, np.sqrt(2.0 * (yk - e0) / vpp) * 0.25)
        b = max(hi, x0 + 1e-12)
        while f(b) < 0:
            b += step
            step *= 1.5
        fp[k] = num.bisect_newton(f, hi if f(hi) < 0 else x0, b, df=df)
        step = max(1e-8, np.sqrt(2.0 * (yk - e0) / vpp) * 0.25)
        a = min(lo, x0 - 1e-12)
        while f(a) < 0:
            a -= step
            step *= 1.5
        fm[k] = num.bisect_newton(f, a, lo if f(lo) < 0 else x0, df=df)
        lo, hi = fm[k], fp[k]

    if np.any(np.diff(fp) <= 0) or np.any(np.diff(fm) >= 0):
        raise BranchViolation("branches are not strictly monotone")
    F = 0.5 * (fp + fm)
    G = 0.5 * (fp - fm)
    return ProfilePair(grid=y, F=F, G=G, fminus=fm, fplus=fp,
                       e0=float(e0), x0=float(x0), vpp=vpp, order=2)


def potential_from_profiles(pair: ProfilePair,
                            kind: str = "schrodinger-V",
                            label: str = "reconstructed") -> PotentialModel:
    """Invert branch tables to a model via monotone cubic interpolation.

    Outside the tabulated sublevel set the model continues linearly with
    the edge slope (C^1 junction).  Derivative orders >= 2 of the result
    are finite-difference approximations of the C^1 interpolant.
    """
    s = pair.s
    G = pair.G
    F = pair.F
    if np.any(G[1:] <= 0):
        raise BranchViolation("half-width G must be positive above e0")
    Fs = num.fd_derivative(F, s[1] - s[0], 1)
    Gs = num.fd_derivative(G, s[1] - s[0], 1)
    bad = np.abs(Fs[1:]) >= Gs[1:] + 1e-9 * np.max(Gs)
    if np.any(bad):
        raise BranchViolation("|F'| >= G' somewhere above e0")

    xp = pair.fplus
    xm = pair.fminus
    y = pair.grid
    right = PchipInterpolator(xp, y, extrapolate=False)
    left = PchipInterpolator(xm[::-1], y[::-1], extrapolate=False)
    x_lo, x_hi = xm[-1], xp[-1]
    e_top = y[-1]
    dright = right.derivative()
    dleft = left.derivative()
    m_hi = float(dright(x_hi - 1e-12 * max(1.0, abs(x_hi))))
    m_lo = float(dleft(x_lo + 1e-12 * max(1.0, abs(x_lo))))

    def _eval(x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        mid = pair.x0
        r = x >= mid
        out[r] = right(np.clip(x[r], mid, x_hi))
        out[~r] = left(np.clip(x[~r], x_lo, mid))
        above = x > x_hi
        out[above] = e_top + m_hi * (x[above] - x_hi)
        below = x < x_lo
        out[below] = e_top + m_lo * (x[below] - x_lo)
        return out

    def _deriv(x, order):
        x = np.asarray(x, dtype=float)
        if order == 1:
            out = np.empty_like(x)
            mid = pair.x0
            r = x >= mid
            out[r] = dright(np.clip(x[r], mid, x_hi))
            out[~r] = dleft(np.clip(x[~r], x_lo, mid))
            out[x > x_hi] = m_hi
            out[x < x_lo] = m_lo
            return out
        return _fd_deriv(_eval, x, order)

    width = x_hi - x_lo
    return PotentialModel(_eval, _deriv,
                          (x_lo - 10 * width, x_hi + 10 * width),
                          kind, label)


# -- model library ---------------------------------------------------------

def _counterexample_pair(eps1: float = 0.6, eps2: float = 0.3,
                         band1=(0.15, 0.45), band2=(0.55, 0.85),
                         e_top: float = 1.0):
    """Pair of single wells sharing G(y)=sqrt(y) and |F'|, realizing the
    same semiclassical actions with genuinely different shapes.

    F' = s1*b1 + b2 with smooth bumps b1, b2 on disjoint energy sub-bands;
    the first well takes s1=+1, the second s1=-1.  Branch maps are
    analytic (bump closed forms; F from one cached fine quadrature), so
    evaluation, V' and V'' are smooth and fast.  The amplitudes must keep
    |F'(y)| < 1/(2 sqrt(y)) = G'(y), or the branch maps fold and no
    single-well potential realizes them; the defaults stay below 2/3 of
    that bound.
    """
    c1, w1 = 0.5 * (band1[0] + band1[1]), 0.5 * (band1[1] - band1[0])
    c2, w2 = 0.5 * (band2[0] + band2[1]), 0.5 * (band2[1] - band2[0])

    def fprime(u, sign1):
        u = np.asarray(u, dtype=float)
        return (sign1 * eps1 * num.smooth_bump((u - c1) / w1)
                + eps2 * num.smooth_bump((u - c2) / w2))

    def fsecond(u, sign1):
        u = np.asarray(u, dtype=float)
        return (sign1 * eps1 / w1 * num.smooth_bump_prime((u - c1) / w1)
                + eps2 / w2 * num.smooth_bump_prime((u - c2) / w2))

    # antiderivative of F' cached on a fine grid (F' vanishes beyond e_top)
    ygrid = np.linspace(0.0, e_top, 16385)
    gx, gw = num._leggauss(8)

    def _cumint(sign1):
        h = ygrid[1] - ygrid[0]
        mids = 0.5 * (ygrid[:-1] + ygrid[1:])
        pieces = np.zeros(len(mids))
        for xg, wg in zip(gx, gw):
            pieces += wg * fprime(mids + 0.5 * h * xg, sign1)
        pieces *= 0.5 * h
        return np.concatenate([[0.0], np.cumsum(pieces)])

    def make(sign1):
        Ftab = _cumint(sign1)
        Fspl = CubicSpline(ygrid, Ftab)
        F_top = float(Ftab[-1])

        def Ffun(u):
            u = np.asarray(u, dtype=float)
            out = np.where(u >= e_top, F_top, Fspl(np.clip(u, 0.0, e_top)))
            return out

        def _branch_solve(x):
            # invert x = F(y) +/- sqrt(y); each branch map is strictly
            # monotone, so the root is unique and bracketable.  Newton alone
            # oscillates where |f'| is small (F' close to G'), hence the
            # bisection safeguard.  Converged elements drop out so a few
            # stubborn nodes do not keep the whole array iterating.
            shape = np.shape(x)
            xf = np.atleast_1d(np.asarray(x, dtype=float))
            rightside = xf >= 0.0
            ylo = np.zeros_like(xf)
            yhi = np.maximum((np.abs(xf) + abs(F_top) + 1.0) ** 2, 1e-12)
            y = np.minimum(np.maximum(xf * xf, 1e-30), yhi)
            active = np.arange(len(xf))
            for _ in range(90):
                ya, xa, ra = y[active], xf[active], rightside[active]
                la, ha = ylo[active], yhi[active]
                sq = np.sqrt(np.maximum(ya, 1e-300))
                Fv = Ffun(ya)
                Fp = np.where(ya < e_top, fprime(ya, sign1), 0.0)
                g = np.where(ra, Fv + sq - xa, Fv - sq - xa)
                # g increases in y on the right branch, decreases on the left
                above = np.where(ra, g > 0, g <= 0)
                ha = np.where(above, np.minimum(ha, ya), ha)
                la = np.where(above, la, np.maximum(la, ya))
                dg = np.where(ra, Fp + 0.5 / sq, Fp - 0.5 / sq)
                with np.errstate(divide="ignore", invalid="ignore"):
                    ynew = ya - g / dg
                bad = ~np.isfinite(ynew) | (ynew <= la) | (ynew >= ha)
                ynew = np.where(bad, 0.5 * (la + ha), ynew)
                sc = np.maximum(ynew, 1.0)
                done = (np.abs(ynew - ya) <= 1e-15 * sc) | \
                       (ha - la <= 1e-15 * sc)
                y[active], ylo[active], yhi[active] = ynew, la, ha
                active = active[~done]
                if len(active) == 0:
                    break
            return y.reshape(shape) if shape else y[0]

        def _eval(x):
            return _branch_solve(x)

        def _deriv(x, order):
            x = np.asarray(x, dtype=float)
            y = _branch_solve(x)
            sq = np.sqrt(np.maximum(y, 1e-30))
            sgn = np.where(x >= 0.0, 1.0, -1.0)
            Fp = np.where(y < e_top, fprime(y, sign1), 0.0)
            fp1 = Fp + sgn * 0.5 / sq          # branch derivative df/dy
            if order == 1:
                return 1.0 / fp1
            Fpp = np.where(y < e_top, fsecond(y, sign1), 0.0)
            fp2 = Fpp - sgn * 0.25 / (sq ** 3)
            if order == 2:
                return -fp2 / fp1 ** 3
            return _fd_deriv(_eval, x, order)

        xm = float(Ffun(e_top)) - np.sqrt(36.0)
        xp = float(Ffun(e_top)) + np.sqrt(36.0)
        return PotentialModel(_eval, _deriv, (xm, xp), "schrodinger-V",
                              f"counterexample[{'+' if sign1 > 0 else '-'}]")

    return make(+1.0), make(-1.0)


def build_library(name: str, **params):
    """Reference models by name.

    Names: harmonic, cubic-perturbed, quartic, tilted-double-well,
    inflection-well, counterexample-pair, acoustic-quadratic.  The
    counterexample entry returns a pair (V1, V2); others a single model.
    """
    if name == "harmonic":
        return PotentialModel.from_polynomial([0.0, 0.0, 1.0],
                                              domain=(-8.0, 8.0),
                                              label="harmonic",
                                              symmetric=True)
    if name == "cubic-perturbed":
        beta = params.get("beta", 0.2)
        # domain stops at the hilltop -2/(3 beta); beyond it V runs to -inf
        return PotentialModel.from_polynomial([0.0, 0.0, 1.0, beta],
                                              domain=(-2.0 / (3.0 * beta)
                                                      + 1e-9, 8.0),
                                              label=f"cubic-perturbed[{beta}]")
    if name == "quartic":
        a = params.get("a", 1.0)
        b = params.get("b", -1.0)
        if b >= 0:
            raise ValueError("quartic double well needs b < 0")
        return PotentialModel.from_polynomial([0.0, 0.0, b, a, 1.0],
                                              domain=(-6.0, 6.0),
                                              label=f"quartic[{a},{b}]")
    if name == "tilted-double-well":
        alpha = params.get("alpha", 0.2)
        beta = params.get("beta", 0.1)
        # (x^2-1)^2 (1+alpha x) + beta x ; sextic so the two wells have
        # genuinely different periods (any quartic two-well has equal ones)
        coeffs = np.polynomial.Polynomial([1.0, 0.0, -2.0, 0.0, 1.0])
        tilt = np.polynomial.Polynomial([1.0, alpha])
        poly = coeffs * tilt + np.polynomial.Polynomial([0.0, beta])
        return PotentialModel.from_polynomial(poly.coef,
                                              domain=(-3.0, 3.0),
                                              label="tilted-double-well")
    if name == "inflection-well":
        return PotentialModel.from_polynomial([0.0, 0.0, 0.5, -2.0 / 3.0,
                                               0.25],
                                              domain=(-6.0, 6.0),
                                              label="inflection-well")
    if name == "counterexample-pair":
        return _counterexample_pair(**params)
    if name == "acoustic-quadratic":
        gamma = params.get("gamma", 0.0)
        return PotentialModel.from_polynomial([1.0, 0.0, 1.0, gamma],
                                              domain=(-4.0, 4.0),
                                              kind="divergence-n",
                                              label=f"acoustic[{gamma}]")
    raise UnknownName(f"unknown library model {name!r}")


# -- canonical distance ----------------------------------------------------

def _single_component(model: PotentialModel, energy: float):
    comps = well_intervals(model, energy)
    if len(comps) != 1:
        raise NotSingleWell(
            f"sublevel set at {energy!r} has {len(comps)} components")
    return comps[0]


def canonical_distance(model_a: PotentialModel, model_b: PotentialModel,
                       region_energy: float, ngrid: int = 801) -> float:
    """Sup distance on sublevel sets modulo translation and mirror flip.

    Minimizes over the translation by golden-section around the aligned
    minima, for both orientations of model_b.  Raises NotSingleWell when
    either sublevel set is disconnected.
    """
    a1, b1 = _single_component(model_a, region_energy)
    a2, b2 = _single_component(model_b, region_energy)
    xs1 = np.linspace(a1, b1, ngrid)
    v1 = model_a(xs1)
    x01, _ = refine_minimum(model_a, float(xs1[np.argmin(v1)]),
                            span=0.1 * (b1 - a1))
    xs2 = np.linspace(a2, b2, ngrid)
    v2 = model_b(xs2)
    x02, _ = refine_minimum(model_b, float(xs2[np.argmin(v2)]),
                            span=0.1 * (b2 - a2))

    width = max(b1 - a1, b2 - a2)

    def objective(c, flip):
        mapped = x02 + flip * (xs1 - c)
        return float(np.max(np.abs(v1 - model_b(mapped))))

    best = np.inf
    phi = 0.5 * (np.sqrt(5.0) - 1.0)
    for flip in (1.0, -1.0):
        lo, hi = x01 - 0.35 * width, x01 + 0.35 * width
        c1 = hi - phi * (hi - lo)
        c2 = lo + phi * (hi - lo)
        f1, f2 = objective(c1, flip), objective(c2, flip)
        for _ in range(90):
            if f1 <= f2:
                hi, c2, f2 = c2, c1, f1
                c1 = hi - phi * (hi - lo)
                f1 = objective(c1, flip)
            else:
                lo, c1, f1 = c1, c2, f2
                c2 = lo + phi * (hi - lo)
                f2 = objective(c2, flip)
        best = min(best, f1, f2)
    return float(best)
