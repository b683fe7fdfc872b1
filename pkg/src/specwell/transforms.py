"""Abel-type transforms on energy tables and the band-bottom ODE solve.

Tables live on grids uniform in s = sqrt(y - e0); integrable endpoint
singularities are removed by the per-side substitution u = e0 + t^2 /
u = y - t^2 before Gauss-Legendre quadrature.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import CubicSpline

from . import _numerics as num
from .errors import InsufficientData, NonpositiveE0, NotInRange

__all__ = [
    "EnergyTable",
    "abel_forward",
    "abel_inverse",
    "cumulative_integral",
    "op_j",
    "op_k",
    "op_a",
    "ta_transform",
    "p_apply",
    "ode_p_solve",
]


@dataclass(frozen=True)
class EnergyTable:
    """Values of a function of energy on an increasing grid.

    e0 marks the band bottom; grids are uniform in s = sqrt(y - e0) and
    may start at e0 itself or strictly above it (open tables).  The
    left-behavior tag records how values behave as y -> e0:
    "vanishing" (value -> 0 like coeff*sqrt(y-e0)), "smooth", or
    "sqrt-singular-derivative" (finite value, derivative ~ coeff/sqrt).
    """
    grid: np.ndarray
    values: np.ndarray
    e0: float
    left_behavior: str = "smooth"
    coeff: float = 0.0

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.size != v.size:
            raise InsufficientData("grid/values size mismatch")
        if g.size < 8:
            raise InsufficientData("table too short")
        if np.any(np.diff(g) <= 0):
            raise NotInRange("grid must increase strictly")
        if g[0] < self.e0 - 1e-12 * max(1.0, abs(self.e0)):
            raise NotInRange("grid starts below e0")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    @property
    def s(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.grid - self.e0, 0.0))

    def spline(self) -> CubicSpline:
        """Cubic spline of values against s (natural extrapolation)."""
        return CubicSpline(self.s, self.values)

    def eval(self, y):
        y = np.asarray(y, dtype=float)
        if np.any(y < self.e0 - 1e-12) or np.any(y > self.grid[-1] + 1e-9):
            raise NotInRange("evaluation outside table range")
        return self.spline()(np.sqrt(np.maximum(y - self.e0, 0.0)))

    def with_values(self, values, **kw) -> "EnergyTable":
        return replace(self, values=np.asarray(values, dtype=float), **kw)


def table_from_fn(fn, e0: float, e_top: float, npts: int = 256,
                  open_left: bool = False, **kw) -> EnergyTable:
    smax = np.sqrt(e_top - e0)
    s = np.linspace(0.0, smax, npts)
    if open_left:
        s = s[1:]
    y = e0 + s * s
    return EnergyTable(y, np.asarray(fn(y), dtype=float), e0, **kw)


def _abel_at(spl, e0: float, x: float, nodes: int) -> float:
    """integral over (e0, x) of f(u)/sqrt(x-u) du, f given as s-spline."""
    if x <= e0:
        return 0.0
    mid = 0.5 * (e0 + x)
    # left half: u = e0 + t^2, the s-spline absorbs any sqrt behavior
    t, w = num.gl_nodes(0.0, np.sqrt(mid - e0), nodes)
    left = np.dot(w, spl(t) * 2.0 * t / np.sqrt(x - e0 - t * t))
    # right half: u = x - t^2 removes the kernel root
    t, w = num.gl_nodes(0.0, np.sqrt(x - mid), nodes)
    right = np.dot(w, spl(np.sqrt(x - t * t - e0)) * 2.0)
    return float(left + right)


def abel_forward(table: EnergyTable, out_grid=None,
                 nodes: int = num.GL_NODES) -> EnergyTable:
    """Abel transform Tf(x) = integral_{e0}^{x} f(u)/sqrt(x-u) du."""
    if out_grid is None:
        out_grid = table.grid
    out_grid = np.asarray(out_grid, dtype=float)
    spl = table.spline()
    vals = np.array([_abel_at(spl, table.e0, x, nodes) for x in out_grid])
    return EnergyTable(out_grid, vals, table.e0, left_behavior="vanishing")


def abel_inverse(table: EnergyTable, out_grid=None,
                 nodes: int = num.GL_NODES) -> EnergyTable:
    """Inverse Abel transform f = (1/pi) d/dx (T g).

    Uses T twice being pi times the primitive: apply T, then
    differentiate in the s variable with 4th-order stencils.  Values at
    e0 itself are quadratic extrapolations in s (the true limit may not
    exist for tables with singular inverses).
    """
    fwd = abel_forward(table, out_grid=out_grid, nodes=nodes)
    s = fwd.s
    if s.size < 8 or np.ptp(np.diff(s)) > 1e-9 * (s[1] - s[0]):
        # non-uniform s target: fall back to spline derivative
        dsp = fwd.spline().derivative()
        ws = dsp(s)
    else:
        ws = num.fd_derivative(fwd.values, s[1] - s[0], 1)
    vals = np.empty_like(ws)
    pos = s > 0
    vals[pos] = ws[pos] / (2.0 * s[pos] * np.pi)
    if not pos.all():
        k = np.nonzero(pos)[0][:3]
        p = np.polyfit(s[k], vals[k], 2)
        vals[~pos] = np.polyval(p, s[~pos])
    return EnergyTable(fwd.grid, vals, table.e0)


def cumulative_integral(table: EnergyTable) -> EnergyTable:
    """integral_{e0}^{y} f(u) du on the table grid (s-substituted)."""
    s = table.s
    spl = CubicSpline(s, table.values * 2.0 * s).antiderivative()
    return table.with_values(spl(s), left_behavior="vanishing")


# -- weighted kernel operators (divergence-form analysis) -------------------

def _require_positive_e0(table: EnergyTable):
    if table.e0 <= 0:
        raise NonpositiveE0("operators need a strictly positive band bottom")


def _op_kernel_at(phi_spl, dphi_spl, e0, y, nodes, combined: bool):
    """integral over (e0, y) of the J (or J+6K) kernel against Phi."""
    mid = 0.5 * (e0 + y)
    # left half: u = e0 + t^2; Phi'(u) du = (dPhi/ds)(t) dt
    t, w = num.gl_nodes(0.0, np.sqrt(mid - e0), nodes)
    u = e0 + t * t
    root = np.sqrt(u * (y - u))
    wgt = (7.0 * y - 6.0 * u) if combined else y
    f = (wgt * dphi_spl(t) - 2.0 * (y / u - 1.0) * phi_spl(t) * 2.0 * t) / root
    left = np.dot(w, f)
    # right half: u = y - t^2; kernel root cancels against du
    t, w = num.gl_nodes(0.0, np.sqrt(y - mid), nodes)
    u = y - t * t
    su = np.sqrt(u - e0)
    wgt = (7.0 * y - 6.0 * u) if combined else y
    f = 2.0 * (wgt * dphi_spl(su) / (2.0 * su)
               - 2.0 * (y / u - 1.0) * phi_spl(su)) / np.sqrt(u)
    right = np.dot(w, f)
    return float(left + right)


def op_j(table: EnergyTable, nodes: int = num.GL_NODES) -> EnergyTable:
    """J-kernel transform: integral of (y Phi' - 2(y/u-1) Phi)/sqrt(u(y-u))."""
    _require_positive_e0(table)
    spl = table.spline()
    dspl = spl.derivative()
    vals = np.array([
        _op_kernel_at(spl, dspl, table.e0, y, nodes, combined=False)
        if y > table.e0 else 0.0
        for y in table.grid
    ])
    return table.with_values(vals, left_behavior="smooth")


def op_k(table: EnergyTable, nodes: int = num.GL_NODES) -> EnergyTable:
    """K-kernel transform: integral of Phi'(u) sqrt(y-u)/sqrt(u) du."""
    _require_positive_e0(table)
    dspl = table.spline().derivative()
    e0 = table.e0
    vals = np.empty_like(table.values)
    for i, y in enumerate(table.grid):
        if y <= e0:
            vals[i] = 0.0
            continue
        mid = 0.5 * (e0 + y)
        # left half: u = e0 + t^2 handles the Phi' layer
        t, w = num.gl_nodes(0.0, np.sqrt(mid - e0), nodes)
        u = e0 + t * t
        left = np.dot(w, dspl(t) * np.sqrt((y - u) / u))
        # right half: u = y - t^2 removes the sqrt(y-u) kink
        t, w = num.gl_nodes(0.0, np.sqrt(y - mid), nodes)
        u = y - t * t
        su = np.sqrt(u - e0)
        right = np.dot(w, dspl(su) / (2.0 * su) * 2.0 * t * t / np.sqrt(u))
        vals[i] = left + right
    return table.with_values(vals, left_behavior="vanishing")


def op_a(table: EnergyTable, nodes: int = num.GL_NODES) -> EnergyTable:
    """Combined transform A = J + 6K via the merged kernel (7y-6u)."""
    _require_positive_e0(table)
    spl = table.spline()
    dspl = spl.derivative()
    vals = np.array([
        _op_kernel_at(spl, dspl, table.e0, y, nodes, combined=True)
        if y > table.e0 else 0.0
        for y in table.grid
    ])
    return table.with_values(vals, left_behavior="smooth")


def ta_transform(table: EnergyTable, nodes: int = num.GL_NODES) -> EnergyTable:
    """Closed form of T(A Phi) without composing the two quadratures:

        (pi/2) * integral (t+y)(7 Phi' - 2 Phi/t) + 2(-6 t Phi' + 2 Phi) dt/sqrt(t)

    over (e0, y).  Agrees with abel_forward(op_a(...)) and satisfies
    d^2/dy^2 of it equal to (pi/y^{3/2}) (y^2 Phi'' + 4y Phi' - Phi).
    """
    _require_positive_e0(table)
    spl = table.spline()
    dspl = spl.derivative()
    e0 = table.e0
    vals = np.empty_like(table.values)
    for i, y in enumerate(table.grid):
        if y <= e0:
            vals[i] = 0.0
            continue
        tau, w = num.gl_nodes(0.0, np.sqrt(y - e0), nodes)
        t = e0 + tau * tau
        phi = spl(tau)
        dphis = dspl(tau)          # dPhi/ds; Phi' dt = dphis dtau
        f = ((t + y) * (7.0 * dphis - 4.0 * tau * phi / t)
             + 2.0 * (-6.0 * t * dphis + 4.0 * tau * phi)) / np.sqrt(t)
        vals[i] = 0.5 * np.pi * np.dot(w, f)
    return table.with_values(vals, left_behavior="vanishing")


def p_apply(table: EnergyTable) -> EnergyTable:
    """Euler-type operator y^2 Phi'' + 4 y Phi' - Phi on the table.

    Derivatives are 4th-order stencils in s; the returned grid drops the
    bottom node where the result is singular.
    """
    s = table.s
    if s[0] > 0:
        raise NotInRange("p_apply expects a table that starts at e0")
    h = s[1] - s[0]
    if np.ptp(np.diff(s)) > 1e-9 * h:
        raise NotInRange("p_apply expects an s-uniform grid")
    ps = num.fd_derivative(table.values, h, 1)
    pss = num.fd_derivative(table.values, h, 2)
    y = table.grid[1:]
    si = s[1:]
    d1 = ps[1:] / (2.0 * si)
    d2 = pss[1:] / (4.0 * si * si) - ps[1:] / (4.0 * si ** 3)
    vals = y * y * d2 + 4.0 * y * d1 - table.values[1:]
    return EnergyTable(y, vals, table.e0, left_behavior="smooth")


def _cheb_matrix(n: int):
    x = np.cos(np.pi * np.arange(n + 1) / n)
    c = np.ones(n + 1)
    c[0] = c[n] = 2.0
    c *= (-1.0) ** np.arange(n + 1)
    dx = x[:, None] - x[None, :]
    d = np.outer(c, 1.0 / c) / (dx + np.eye(n + 1))
    d -= np.diag(d.sum(axis=1))
    return d, x


def _bary_eval(xnodes, fvals, xq):
    n = len(xnodes) - 1
    w = (-1.0) ** np.arange(n + 1)
    w[0] *= 0.5
    w[n] *= 0.5
    xq = np.asarray(xq, dtype=float)
    out = np.empty_like(xq)
    for i, xi in enumerate(xq):
        d = xi - xnodes
        hit = np.argmin(np.abs(d))
        if abs(d[hit]) < 1e-14:
            out[i] = fvals[hit]
            continue
        t = w / d
        out[i] = np.dot(t, fvals) / np.sum(t)
    return out


def ode_p_solve(rhs: EnergyTable, e0: float, a: float,
                out_grid=None, ncheb: int = 96) -> EnergyTable:
    """Solve y^2 Phi'' + 4y Phi' - Phi = rhs with band-bottom data.

    Boundary data: Phi(e0) = 0 and the square-root layer
    Phi ~ 2 sqrt(2a) sqrt(y-e0).  The smooth kernel of the operator
    (spanned by y^r, r = (-3 +- sqrt(13))/2) leaves the quadratic-in-s
    coefficient free; the returned solution is the member with zero
    s^2 coefficient at the bottom.  Chebyshev collocation runs in
    s = sqrt(y-e0) on the substituted unknown w = (Phi - c0 s)/s^2,
    which absorbs the bottom data exactly and pins the kernel through
    the well-conditioned value condition w(0) = 0.
    """
    if e0 <= 0:
        raise NonpositiveE0("ode solve requires e0 > 0")
    if a <= 0:
        raise InsufficientData("curvature parameter a must be positive")
    c0 = 2.0 * np.sqrt(2.0 * a)
    s_rhs = np.sqrt(np.maximum(rhs.grid - e0, 0.0))
    if s_rhs[0] <= 0:
        s_rhs = s_rhs[1:]
        r_vals = np.asarray(rhs.values[1:], dtype=float)
    else:
        r_vals = np.asarray(rhs.values, dtype=float)
    if len(s_rhs) < 8:
        raise InsufficientData("rhs table too short for ode solve")
    smax = s_rhs[-1]

    # Substituting phi = c0 s + s^2 w removes the kernel freedom: phi(0)=0
    # and the layer slope are built in, and the zero-s^2 convention becomes
    # the value condition w(0) = 0.  Dividing the s^3-scaled equation by s^2
    # needs the rhs in the cancellation-free form
    #   mu = (4 s^3 r + c0 e0^2)/s^2 - 6 c0 e0 - 3 c0 s^2,
    # which is O(1) near the bottom (4 s^3 r -> -c0 e0^2 there).
    mu_tab = ((4.0 * s_rhs ** 3 * r_vals + c0 * e0 * e0) / (s_rhs * s_rhs)
              - 6.0 * c0 * e0 - 3.0 * c0 * s_rhs * s_rhs)
    head = min(8, len(s_rhs))
    q0 = np.polyfit(s_rhs[:head] ** 2, 4.0 * s_rhs[:head] ** 3 * r_vals[:head], 2)[-1]
    if abs(q0 + c0 * e0 * e0) > 0.25 * max(c0 * e0 * e0, abs(q0)):
        raise InsufficientData(
            "rhs table inconsistent with the layer coefficient near the bottom")
    mu_spl = CubicSpline(s_rhs, mu_tab)

    d, x = _cheb_matrix(ncheb)
    s = smax * 0.5 * (1.0 - x)        # s[0] = 0, ascending in index
    d1 = d * (-2.0 / smax)
    d2 = d1 @ d1
    y = e0 + s * s
    # y^2 s w'' + (3 y^2 + 8 s^2 y) w' + (16 s y - 4 s^3) w = mu(s)
    A = ((y * y * s)[:, None] * d2
         + (3.0 * y * y + 8.0 * s * s * y)[:, None] * d1
         + np.diag(16.0 * s * y - 4.0 * s ** 3))
    b = mu_spl(s)
    A[0, :] = 0.0
    A[0, 0] = 1.0
    b[0] = 0.0
    scale = np.linalg.norm(A, axis=1)
    w = np.linalg.solve(A / scale[:, None], b / scale)

    if out_grid is None:
        out_s = np.linspace(0.0, smax, max(len(s_rhs) + 1, 9))
        out_grid = e0 + out_s ** 2
    else:
        out_grid = np.asarray(out_grid, dtype=float)
        out_s = np.sqrt(np.maximum(out_grid - e0, 0.0))
    xq = 1.0 - 2.0 * out_s / smax
    vals = c0 * out_s + out_s ** 2 * _bary_eval(x, w, xq)
    return EnergyTable(out_grid, vals, e0,
                       left_behavior="vanishing", coeff=c0)
