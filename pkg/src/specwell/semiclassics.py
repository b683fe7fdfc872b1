"""Semiclassical quantities of one-dimensional wells.

For the Schrodinger form -hbar^2 u'' + V and the divergence form
-hbar^2 (n u')' + n, this module computes periods, the area action S0,
the first quantum correction S2, Bohr-Sommerfeld spectra, smoothed
spectral counting, critical-value detection, trace identities, and the
recovery of (S0, S2) tables from eigenvalue ladders.

All level-set integrals share one quadrature strategy: split the well at
its midpoint and substitute x = x_turn +- t^2 on each side, which removes
the inverse-square-root turning-point singularity exactly; the smooth
result is handled by Gauss-Legendre nodes.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator, make_interp_spline
from scipy.optimize import brentq

from ._numerics import gl_nodes
from .errors import (
    AboveCutoff,
    AssignmentConflict,
    HbarMismatch,
    IndexMismatch,
    IndexingAmbiguity,
    InsufficientLadder,
    KinkClassificationAmbiguous,
    NonMonotoneAction,
    OutOfBand,
    ResolutionTooCoarse,
    SupportViolation,
    TooCloseToCritical,
    UnresolvedPeriods,
    WindowTooWide,
)
from .forward import SpectrumData
from .potentials import (PotentialModel, Well, _anchor_of, critical_structure,
                         refine_minimum, turning_points, well_intervals)

_GL = 128


def _level_integral(model: PotentialModel, y: float, kernel: Callable,
                    well=None, nodes: int = _GL, panels: int = 1) -> float:
    """Integral of kernel(x) dx / sqrt(y - V) (or the divergence analogue)
    over one well at level y, with turning-point substitutions.

    ``panels`` splits each substituted half into equal sub-intervals;
    needed when the kernel has sharp interior features (e.g. V'' of a
    well whose branch slope nearly stalls) that a single Gauss rule
    undersamples.
    """
    xm, xp = turning_points(model, y, well=well)
    mid = 0.5 * (xm + xp)
    total = 0.0
    for sgn, xt in ((1.0, xm), (-1.0, xp)):
        tmax = np.sqrt(abs(mid - xt))
        if panels == 1:
            t, wq = gl_nodes(0.0, tmax, nodes)
        else:
            edges = np.linspace(0.0, tmax, panels + 1)
            parts = [gl_nodes(a, b, nodes)
                     for a, b in zip(edges[:-1], edges[1:])]
            t = np.concatenate([p[0] for p in parts])
            wq = np.concatenate([p[1] for p in parts])
        x = xt + sgn * t * t
        v = model(x)
        root = np.sqrt(np.maximum(y - v, 1e-300))
        total += float(np.sum(wq * 2.0 * t * kernel(x) / root))
    return total


def _vpp_at_bottom(model: PotentialModel, well=None) -> Tuple[float, float, float]:
    x0, e0 = refine_minimum(model, _anchor_of(model, well))
    vpp = float(model.deriv(x0, 2))
    if vpp <= 0.0 or abs(float(model.deriv(x0, 1))) > 1e-6:
        raise OutOfBand(
            f"anchor x={x0:.6g} does not sit at a nondegenerate minimum")
    return x0, e0, vpp


def period_T(model: PotentialModel, y, well=None) -> np.ndarray | float:
    """dS0/dy: integral of dx/sqrt(y-V), or dx/sqrt(n(y-n)) for kind
    'divergence-n'."""
    div = model.kind == "divergence-n"

    def one(yy: float) -> float:
        if div:
            return _level_integral(model, yy, lambda x: 1.0 / np.sqrt(model(x)),
                                   well=well)
        return _level_integral(model, yy, lambda x: np.ones_like(x), well=well)

    ys = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.array([one(v) for v in ys])
    return out if np.ndim(y) else float(out[0])


def action_S0(model: PotentialModel, y, well=None) -> np.ndarray | float:
    """Phase-space area of one well: 2 * integral of sqrt(y-V) dx
    (divergence form: 2 * integral of sqrt((y-n)/n) dx)."""
    div = model.kind == "divergence-n"

    def one(yy: float) -> float:
        if div:
            return _level_integral(model, yy,
                                   lambda x: 2.0 * (yy - model(x)) / np.sqrt(model(x)),
                                   well=well)
        return _level_integral(model, yy, lambda x: 2.0 * (yy - model(x)),
                               well=well)

    ys = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.array([one(v) for v in ys])
    return out if np.ndim(y) else float(out[0])


def _j_integral(model: PotentialModel, y: float, well=None,
                panels: int = 1) -> float:
    """J(y) for the first correction; see action_S2."""
    if model.kind == "divergence-n":
        def ker(x):
            n = model(x)
            npr = model.deriv(x, 1)
            npp = model.deriv(x, 2)
            return (y * npp - 2.0 * (y / n - 1.0) * npr ** 2) / np.sqrt(n)
        return _level_integral(model, y, ker, well=well, panels=panels)
    return _level_integral(model, y, lambda x: model.deriv(x, 2), well=well,
                           panels=panels)


def _k_integral(model: PotentialModel, y: float, well=None,
                panels: int = 1) -> float:
    """K(y) = integral of n'' dx / sqrt(n(y-n)) (divergence form only)."""
    return _level_integral(model, y,
                           lambda x: model.deriv(x, 2) / np.sqrt(model(x)),
                           well=well, panels=panels)


def _j_panels(model: PotentialModel, ys: np.ndarray, well) -> int:
    """Panel count for the J quadrature, decided once per table.

    Self-validating refinement at two probe levels: if one panel and four
    panels disagree, the kernel V''/sqrt(y-V) has unresolved interior
    structure and the count escalates.  One decision serves the whole
    table so quadrature error stays smooth across the differentiation
    stencils.
    """
    probes = [float(np.max(ys))]
    med = float(np.median(ys))
    if med < probes[0]:
        probes.append(med)
    best = 1
    for z in probes:
        p = 1
        while p < 16:
            a = _j_integral(model, z, well=well, panels=p)
            b = _j_integral(model, z, well=well, panels=4 * p)
            if abs(a - b) <= 1e-9 * max(1.0, abs(b)):
                break
            p *= 4
        best = max(best, p)
    return best


# backward 5-point first-derivative stencil, O(h^4)
_BK5 = np.array([25.0, -48.0, 36.0, -16.0, 3.0]) / 12.0


def _jprime_adaptive(model: PotentialModel, y: float, well, e0: float,
                     top: float | None, nmax: int = 12,
                     panels: int = 1) -> float:
    """dJ/dy by a one-sided stencil on points y - j*delta, j = 0..4.

    Backward points keep the stencil inside the well's own band: it never
    reaches the value of a barrier maximum above (where J picks up a
    logarithmic singularity) and never drops below the bottom (the largest
    offset is half the distance to e0).  The spacing is halved until two
    consecutive estimates agree, which adapts it to however close y sits
    to a singular level without knowing where that level is.
    """
    d = y - e0
    d0 = d / 8.0
    if top is not None and top > y:
        d0 = min(d0, max((top - y) / 4.0, d / 64.0))
    cache: dict = {}

    def jval(z: float) -> float:
        r = cache.get(z)
        if r is None:
            r = _j_integral(model, z, well=well, panels=panels)
            cache[z] = r
        return r

    best, bestdiff, prev = None, np.inf, None
    grew = 0
    for k in range(nmax):
        dk = d0 / 2 ** k
        f = [jval(y - j * dk) for j in range(5)]
        dky = float(np.dot(_BK5, f)) / dk
        if prev is not None:
            diff = abs(dky - prev)
            if diff < bestdiff:
                bestdiff, best = diff, dky
                grew = 0
            else:
                grew += 1
                if grew >= 2 and bestdiff < 1e-6 * max(1.0, abs(dky)):
                    break
            if bestdiff <= 1e-10 * max(1.0, abs(dky)):
                break
        prev = dky
    return dky if best is None else best


def action_S2(model: PotentialModel, y, well=None, *,
              rel_margin: float = 1e-5, top: float | None = None
              ) -> np.ndarray | float:
    """First correction to the quantization rule.

    Schrodinger form:  S2 = -(1/12) dJ/dy,  J(y) = int V'' dx / sqrt(y-V).
    Divergence form:   S2 = -(1/12) dJ/dy - (1/4) K(y),
    with J, K as in _j_integral/_k_integral.  dJ/dy comes from an adaptive
    one-sided difference (see _jprime_adaptive); ``top``, when known, caps
    the initial spacing by the distance to the band ceiling.
    """
    div = model.kind == "divergence-n"
    x0, e0, vpp = _vpp_at_bottom(model, well=well)
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    span = float(np.max(ys)) - e0
    if span <= 0 or np.min(ys) - e0 < rel_margin * max(span, 1.0):
        raise TooCloseToCritical(
            "S2 evaluation requires y above the well bottom")
    panels = _j_panels(model, ys, well)
    s2 = np.array([-_jprime_adaptive(model, v, well, e0, top, panels=panels)
                   / 12.0 for v in ys])
    if div:
        s2 = s2 - 0.25 * np.array([_k_integral(model, v, well=well,
                                               panels=panels) for v in ys])
    return s2 if np.ndim(y) else float(s2[0])


def action_S0_div(model: PotentialModel, y) -> np.ndarray | float:
    """S0 for the divergence-form operator; requires kind 'divergence-n'."""
    if model.kind != "divergence-n":
        raise ValueError("model is not in divergence form")
    return action_S0(model, y)


def action_S2_div(model: PotentialModel, y, **kw) -> np.ndarray | float:
    """S2 for the divergence-form operator; requires kind 'divergence-n'."""
    if model.kind != "divergence-n":
        raise ValueError("model is not in divergence form")
    return action_S2(model, y, **kw)


def curvature_integral(model: PotentialModel, y, well=None
                       ) -> np.ndarray | float:
    """Integral of V'' dt along the level set at y (dt = dx/sqrt(y-V)).

    With ``well`` given, only that well's orbit; otherwise summed over all
    wells below y.  Tends to pi*sqrt(2 V''(x0)) at a well bottom; the
    across-maximum jump tends to zero.
    """
    def one(yy: float) -> float:
        if well is not None:
            return _j_integral(model, yy, well=well)
        tot = 0.0
        for (xl, xr) in well_intervals(model, yy):
            tot += _j_integral(model, yy, well=0.5 * (xl + xr))
        return tot

    ys = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.array([one(v) for v in ys])
    return out if np.ndim(y) else float(out[0])


@dataclass(frozen=True)
class ActionProfile:
    """(S0, T, S2) sampled on a common energy grid; classical data of one
    well (hbar-independent)."""
    grid: np.ndarray
    s0: np.ndarray
    t: np.ndarray
    s2: np.ndarray
    well_id: Optional[str] = None

    def __post_init__(self):
        if np.any(self.t <= 0):
            raise ValueError("period table must be positive")
        if np.any(np.diff(self.s0) <= 0):
            raise ValueError("S0 table must be strictly increasing")


def action_profile(model: PotentialModel, band: Tuple[float, float],
                   well=None, *, n: int = 400,
                   well_id: Optional[str] = None) -> ActionProfile:
    """Tabulate S0, T, S2 of one well by quadrature over a band.

    The grid is uniform in s = sqrt(y - e0), which matches the bottom
    behavior of all three tables.
    """
    x0, e0, vpp = _vpp_at_bottom(model, well=well)
    lo, hi = band
    if lo <= e0:
        raise TooCloseToCritical("band must start above the well bottom")
    s = np.linspace(np.sqrt(lo - e0), np.sqrt(hi - e0), n)
    ygrid = e0 + s * s
    s0 = np.asarray(action_S0(model, ygrid, well=well))
    t = np.asarray(period_T(model, ygrid, well=well))
    s2 = np.asarray(action_S2(model, ygrid, well=well))
    return ActionProfile(ygrid, s0, t, s2,
                         well_id=well_id if well_id is not None else model.label)


def bs_spectrum(source, hbar: float, window: Optional[Tuple[float, float]] = None,
                *, cutoff: Optional[float] = None, well=None,
                ngrid: int = 400) -> SpectrumData:
    """Bohr-Sommerfeld eigenvalues: S0(y) + hbar^2 S2(y) = 2 pi hbar (k - 1/2).

    ``source`` is an ActionProfile, or a PotentialModel from which one is
    tabulated on the fly (then ``cutoff`` bounds the band and the grid
    bottom is placed safely below the first quantization target).  Roots
    are bracketed on a PCHIP model of the total action and polished by
    bisection.
    """
    if isinstance(source, ActionProfile):
        profile = source
        operator = "schrodinger"
        label = profile.well_id
    else:
        model: PotentialModel = source
        if cutoff is None:
            if window is None:
                raise ValueError("model input needs a cutoff or window")
            cutoff = window[1]
        x0, e0, vpp = _vpp_at_bottom(model, well=well)
        if cutoff <= e0:
            raise TooCloseToCritical("cutoff must lie above the well bottom")
        smax = np.sqrt(cutoff - e0)
        # bottom of the level grid: safely below the first quantization
        # target (S0 ~ 0.2 pi hbar there) yet clear of the S2 bottom margin
        omega = np.sqrt(2.0 * vpp * (e0 if model.kind == "divergence-n" else 1.0))
        slo = np.sqrt(max(0.1 * hbar * omega, 3e-5 * (cutoff - e0)))
        s = np.linspace(min(slo, 0.3 * smax), smax, ngrid)
        ygrid = e0 + s * s
        s0 = np.asarray(action_S0(model, ygrid, well=well))
        s2 = np.asarray(action_S2(model, ygrid, well=well))
        t = np.asarray(period_T(model, ygrid, well=well))
        profile = ActionProfile(ygrid, s0, t, s2, well_id=model.label)
        operator = "divergence" if model.kind == "divergence-n" else "schrodinger"
        label = model.label
    ygrid = profile.grid
    stot = profile.s0 + hbar ** 2 * profile.s2
    ylo, yhi = window if window is not None else (ygrid[0], ygrid[-1])
    ylo, yhi = max(ylo, ygrid[0]), min(yhi, ygrid[-1])
    if yhi <= ylo:
        return SpectrumData(hbar=hbar, cutoff=float(yhi), operator=operator,
                            eigenvalues=np.empty(0),
                            provenance={"scheme": "bohr-sommerfeld",
                                        "label": label})
    if np.any(np.diff(stot) <= 0):
        raise NonMonotoneAction("total action must increase with energy")
    spl = PchipInterpolator(ygrid, stot)
    slo_v, shi_v = float(spl(ylo)), float(spl(yhi))
    lam: List[float] = []
    k = int(np.ceil(slo_v / (2.0 * np.pi * hbar) + 0.5))
    k = max(k, 1)
    while True:
        target = 2.0 * np.pi * hbar * (k - 0.5)
        if target > shi_v:
            break
        if target >= slo_v:
            lam.append(brentq(lambda yy: spl(yy) - target,
                              ylo, yhi, xtol=1e-14, rtol=1e-15))
        k += 1
    return SpectrumData(hbar=hbar, cutoff=float(yhi), operator=operator,
                        eigenvalues=np.asarray(lam),
                        provenance={"scheme": "bohr-sommerfeld",
                                    "label": label})


def weyl_area(model: PotentialModel, y) -> np.ndarray | float:
    """Total phase-space area below level y, summed over all wells."""
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.zeros_like(ys)
    for i, yy in enumerate(ys):
        for itv in well_intervals(model, yy):
            out[i] += action_S0(model, yy, well=itv)
    return out if np.ndim(y) else float(out[0])


@dataclass(frozen=True)
class AreaProfile:
    """Phase-space area below energy, tabulated on a grid.

    ``source`` is "classical" (well quadrature) or "spectral"
    (2 pi hbar x smoothed counting function); ``smoothing`` records the
    box-average width applied to the spectral staircase (0 for classical).
    """
    grid: np.ndarray
    area: np.ndarray
    source: str
    smoothing: float = 0.0

    def __post_init__(self):
        if np.any(np.diff(self.area) < -1e-12):
            raise ValueError("area table must be non-decreasing")


@dataclass(frozen=True)
class BandDecomposition:
    """Critical values, the bands between them, and the per-band well data.

    ``critical_values`` runs from the global bottom to the working cutoff;
    ``kinds`` labels the interior values ("minimum" | "maximum" |
    "inflection").  Wells open when a minimum is crossed and two wells merge
    into their union at a maximum; ``wells_per_band`` must follow that
    bookkeeping.  ``actions`` maps (band index, well id) to the extracted
    ActionProfile, ``assignments`` to the per-rung eigenvalue arrays used,
    and ``unassigned`` collects per-band leftovers.
    """
    critical_values: Tuple[float, ...]
    kinds: Tuple[str, ...]
    bands: Tuple[Tuple[float, float], ...]
    wells_per_band: Tuple[Tuple[str, ...], ...]
    actions: Dict[Tuple[int, str], ActionProfile]
    assignments: Dict[Tuple[int, str], tuple]
    unassigned: Dict[int, tuple]

    def __post_init__(self):
        cv = self.critical_values
        if np.any(np.diff(cv) <= 0):
            raise ValueError("critical values must increase strictly")
        if len(self.bands) != len(cv) - 1:
            raise ValueError("bands must partition consecutive critical values")
        for k, (lo, hi) in enumerate(self.bands):
            if abs(lo - cv[k]) > 1e-9 or abs(hi - cv[k + 1]) > 1e-9:
                raise ValueError("band edges must match the critical values")
        if len(self.kinds) != max(len(cv) - 2, 0):
            raise ValueError("one kind per interior critical value")
        n_prev = None
        for k, wells in enumerate(self.wells_per_band):
            n = len(wells)
            if k == 0:
                n_prev = n
                continue
            kind = self.kinds[k - 1]
            step = {"minimum": 1, "maximum": -1, "inflection": 0}.get(kind)
            if step is None:
                raise ValueError(f"unknown critical kind {kind!r}")
            if n != n_prev + step:
                raise ValueError(
                    "well count must follow the open/merge bookkeeping")
            n_prev = n


def weyl_area_profile(model: PotentialModel, band: Tuple[float, float],
                      *, n: int = 1200) -> AreaProfile:
    """Classical area table A(y) over a band, summed over all wells."""
    ys = np.linspace(band[0], band[1], n)
    return AreaProfile(ys, np.asarray(weyl_area(model, ys)), "classical")


def weyl_area_from_spectrum(spectrum: SpectrumData,
                            grid: Optional[np.ndarray] = None) -> AreaProfile:
    """Spectral area estimate: 2 pi hbar N(y), box-averaged (width
    3 * 2 pi hbar) to suppress the counting staircase."""
    hbar = spectrum.hbar
    lam = spectrum.eigenvalues
    w = 3.0 * 2.0 * np.pi * hbar
    if grid is None:
        lo, hi = lam[0] - 1.5 * w, spectrum.cutoff
        grid = np.linspace(lo, hi, max(1600, int((hi - lo) / (w / 24.0))))
    # exact box average of the staircase: (1/w) int_{y-w/2}^{y+w/2} N(u) du
    grid = np.asarray(grid, dtype=float)
    if grid[-1] > spectrum.cutoff + 1e-12:
        raise AboveCutoff("area grid may not exceed the spectrum cutoff")
    area = np.empty(len(grid))
    for i0 in range(0, len(grid), 512):
        g = grid[i0:i0 + 512]
        contrib = np.clip(g[:, None] + 0.5 * w - lam[None, :], 0.0, w)
        area[i0:i0 + 512] = contrib.sum(axis=1) / w
    area *= 2.0 * np.pi * hbar
    return AreaProfile(grid, area, "spectral", smoothing=w)


def spectral_period_density(spectrum: SpectrumData, y, *,
                            sigma: Optional[float] = None) -> np.ndarray | float:
    """Smoothed dA/dy from the spectrum: a Gaussian kernel estimate of the
    eigenvalue density times 2 pi hbar; approximates the total period T(y)."""
    if sigma is None:
        sigma = 2.0 * np.pi * spectrum.hbar
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    lam = spectrum.eigenvalues
    z = (ys[:, None] - lam[None, :]) / sigma
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (sigma * np.sqrt(2.0 * np.pi))
    out = 2.0 * np.pi * spectrum.hbar * dens
    return out if np.ndim(y) else float(out[0])


@dataclass(frozen=True)
class DetectedCritical:
    value: float
    kind: str                  # "minimum" | "maximum"
    vpp: Optional[float] = None


def detect_critical_values(area: AreaProfile,
                           band: Optional[Tuple[float, float]] = None
                           ) -> List[DetectedCritical]:
    """Locate critical values from kinks of the area table.

    The slope dA/dy jumps upward by pi sqrt(2/vpp) where a new well opens
    (the jump yields the bottom curvature) and carries a two-sided
    logarithmic spike where two wells merge at a local maximum.
    Candidates come from curvature bursts of the slope; each is
    classified by least squares against the two templates, both convolved
    with the table's effective smoothing kernel so the bias cancels.
    """
    grid, A = area.grid, area.area
    h = float(grid[1] - grid[0])
    w = area.smoothing
    sig2 = max(w / 6.0, 6.0 * h)
    if h > sig2 / 3.0:
        raise ResolutionTooCoarse(
            f"grid step {h:.3g} too coarse for smoothing width {w:.3g}")
    T = np.gradient(A, h)
    nk = int(np.ceil(4.0 * sig2 / h))
    kg = np.exp(-0.5 * (np.arange(-nk, nk + 1) * h / sig2) ** 2)
    kg /= kg.sum()
    Ts = np.convolve(np.pad(T, nk, mode="edge"), kg, mode="valid")
    s_eff = float(np.hypot(w / np.sqrt(12.0), sig2))
    if band is not None:
        lo, hi = band
    elif area.source == "spectral":
        # a spectral table carries onset/cutoff transitions of width
        # ~w/2 + 3 sig2 at both ends of the staircase; stay clear of them
        edge = 0.5 * w + 3.0 * sig2
        lo, hi = grid[0] + 1.5 * w + edge, grid[-1] - edge
    else:
        # one-sided differentiation pollutes ~4 sig2 at the table ends
        lo, hi = grid[0] + 6.0 * sig2, grid[-1] - 6.0 * sig2
    dt = sig2 / 20.0
    ker_g = np.exp(-0.5 * (np.arange(-80, 81) * dt / sig2) ** 2)
    nb = max(1, int(round(w / dt)))
    kernel = np.convolve(ker_g, np.ones(nb))
    kernel /= kernel.sum()

    curv = np.abs(np.gradient(np.gradient(Ts, h), h))
    sel = (grid >= lo) & (grid <= hi)
    cmask = np.where(sel, curv, 0.0)
    med = np.median(curv[sel])
    half = max(3, int(round(4.0 * s_eff / h)))
    cand: List[float] = []
    idx_all = np.nonzero(sel)[0]
    for i in idx_all:
        if cmask[i] == np.max(cmask[max(0, i - half):i + half + 1]) \
                and cmask[i] > 12.0 * med:
            if cand and grid[i] - cand[-1] < 6.0 * s_eff:
                j = int(round((cand[-1] - grid[0]) / h))
                if curv[i] > curv[j]:
                    cand[-1] = float(grid[i])
                continue
            cand.append(float(grid[i]))
    found: List[DetectedCritical] = []
    # a box-smoothed kink has its curvature bursts displaced to y0 +- w/2,
    # so the location search must reach that far from the candidate
    rs = 0.5 * w + 2.0 * sig2
    for yc in cand:
        det = _classify_feature(grid, Ts, yc, s_eff, lo, hi, dt, kernel, rs)
        if det is not None:
            found.append(det)
    return found


def _smoothed_templates(dt: float, kernel: np.ndarray, span: float):
    """Kernel-smoothed basis shapes for the feature fits.

    Returns an abscissa grid and the four convolved columns: step,
    ramp-step, and the left/right halves of -log|t|.
    """
    half = int(np.ceil(span / dt)) + len(kernel)
    t = (np.arange(-half, half + 1) + 0.5) * dt
    def smooth(f):
        return np.convolve(f, kernel, mode="same")
    step = smooth((t > 0).astype(float))
    ramp = smooth(np.where(t > 0, t, 0.0))
    logm = smooth(np.where(t < 0, -np.log(np.abs(t)), 0.0))
    logp = smooth(np.where(t > 0, -np.log(np.abs(t)), 0.0))
    return t, (step, ramp, logm, logp)


def _classify_feature(ys: np.ndarray, T: np.ndarray, yc: float,
                      sigma: float, lo: float, hi: float,
                      dt: float, kernel: np.ndarray, rs: float
                      ) -> Optional[DetectedCritical]:
    yf = float(np.clip(yc, lo + 2.2 * sigma, hi - 2.2 * sigma))
    Rl = min(8.0 * sigma, yf - lo)
    Rr = min(8.0 * sigma, hi - yf)
    if Rl < 2.2 * sigma or Rr < 2.2 * sigma:
        return None
    mask = (ys >= yf - Rl) & (ys <= yf + Rr)
    yw, Tw = ys[mask], T[mask]
    tg, (step, ramp, logm, logp) = _smoothed_templates(
        dt, kernel, max(Rl, Rr) + rs + 2.0 * sigma)

    def fit(cols: List[np.ndarray]) -> Tuple[float, np.ndarray]:
        A = np.column_stack(cols)
        coef, _, _, _ = np.linalg.lstsq(A, Tw, rcond=None)
        r = Tw - A @ coef
        return float(np.sqrt(np.mean(r * r))), coef

    ones = np.ones_like(yw)
    r_base, _ = fit([ones, yw - yc])
    best = {"kink": (np.inf, None, None), "log": (np.inf, None, None)}
    for y0 in np.linspace(yc - rs, yc + rs, 121):
        dy = yw - y0
        cs = np.interp(dy, tg, step)
        cr_ = np.interp(dy, tg, ramp)
        cm = np.interp(dy, tg, logm)
        cp = np.interp(dy, tg, logp)
        rk, ck = fit([ones, dy, cs, cr_])
        if rk < best["kink"][0]:
            best["kink"] = (rk, y0, ck)
        rl, cl = fit([ones, dy, cm, cp])
        if rl < best["log"][0]:
            best["log"] = (rl, y0, cl)
    rk, yk, ck = best["kink"]
    rl, yl, cl = best["log"]
    if min(rk, rl) > 0.35 * r_base:
        return None        # explains little beyond a straight line
    if rk < 0.7 * rl and ck[2] > 0.0:
        vpp = 2.0 * (np.pi / float(ck[2])) ** 2
        return DetectedCritical(float(yk), "minimum", vpp)
    if rl < 0.7 * rk and cl[2] > 0.0 and cl[3] > 0.0:
        return DetectedCritical(float(yl), "maximum", None)
    raise KinkClassificationAmbiguous(
        f"cannot classify the feature near y={yc:.6g} "
        f"(kink residual {rk:.3g}, log residual {rl:.3g})")


@dataclass(frozen=True)
class TraceCheckResult:
    lhs: float
    rhs: float

    @property
    def difference(self) -> float:
        return abs(self.lhs - self.rhs)


def trace_check(spectrum: SpectrumData, model: PotentialModel,
                f=None, *, support: Optional[Tuple[float, float]] = None,
                nquad: int = 600) -> TraceCheckResult:
    """Compare sum_l F(lambda_l) with its two-term semiclassical expansion.

    ``f`` is a smooth function supported in ``support``; passing a pair
    (lo, hi) instead of a callable uses the standard bump on that band.
    F(y) = -int_y^inf f.  The expansion is
    -(2 pi hbar)^(-1) int f(y) (A(y) + hbar^2 sum_w S2_w(y)) dy with A the
    total area below y and the sum over the wells present in the band;
    it is accurate to O(hbar^3) only when the support avoids all critical
    values, so crossing one raises SupportViolation.
    """
    lam = spectrum.eigenvalues
    if isinstance(f, (tuple, list)) and support is None:
        f, support = None, tuple(f)
    if support is None:
        lo = lam[0] + 0.25 * (spectrum.cutoff - lam[0])
        hi = lam[0] + 0.75 * (spectrum.cutoff - lam[0])
    else:
        lo, hi = support
    cs = critical_structure(model, cutoff=spectrum.cutoff)
    crit = [p.value for p in cs.points]
    if lo <= min(crit) or hi > spectrum.cutoff:
        raise SupportViolation(
            f"support ({lo:.6g}, {hi:.6g}) must lie strictly inside the "
            "computed band")
    inside = [v for v in crit if lo <= v <= hi]
    if inside:
        raise SupportViolation(
            f"support ({lo:.6g}, {hi:.6g}) contains critical values "
            f"{inside}; the expansion breaks down there")
    if f is None:
        c, r = 0.5 * (lo + hi), 0.5 * (hi - lo)
        f = lambda yy: _bump((yy - c) / r)

    # lhs: F at each eigenvalue by quadrature of f from lambda to hi
    def F(v: float) -> float:
        if v >= hi:
            return 0.0
        x, wq = gl_nodes(max(v, lo), hi, nquad)
        return -float(np.sum(wq * f(x)))

    lhs = float(sum(F(v) for v in lam))
    yq, wq = gl_nodes(lo, hi, nquad)
    stot = np.asarray(weyl_area(model, yq), dtype=float)
    s2 = np.zeros_like(yq)
    for wl in well_intervals(model, 0.5 * (lo + hi)):
        s2 += np.asarray(action_S2(model, yq, well=wl))
    rhs = -float(np.sum(wq * f(yq) * (stot + spectrum.hbar ** 2 * s2))) \
        / (2.0 * np.pi * spectrum.hbar)
    return TraceCheckResult(lhs=lhs, rhs=rhs)


def _bump(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
    return out


_BUMP_MASS = 0.887935358388127   # integral of exp(1 - 1/(1-t^2)) over (-1, 1)


@dataclass(frozen=True)
class PeriodPeak:
    t: float
    amplitude: float


@dataclass(frozen=True)
class PeriodPeaks:
    """Windowed oscillation sum |C(t)| and its refined local maxima."""
    window: Tuple[float, float]
    t: np.ndarray
    correlation: np.ndarray
    peaks: Tuple[PeriodPeak, ...]


def oscillation_spectrum(spectrum: SpectrumData,
                         window: Tuple[float, float], *,
                         weight: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                         tmax: Optional[float] = None,
                         nt: int = 2048, threshold: float = 0.2) -> PeriodPeaks:
    """Oscillation sum C(t) = sum chi(lambda_l) e^{-i t lambda_l / hbar}.

    chi is the weight (default: the standard bump scaled to ``window``).
    |C| peaks at the classical periods present in the window; each local
    maximum above ``threshold`` times the strongest is refined by a
    three-point quadratic fit.  The scanned t-range starts at 15% of the
    total period implied by the local level density and ends at ``tmax``
    (default 90% of it), so the trivial peak at t=0 is excluded.
    """
    lam = spectrum.eigenvalues
    hbar = spectrum.hbar
    lo, hi = window
    center, halfwidth = 0.5 * (lo + hi), 0.5 * (hi - lo)
    if lo < lam[0] - 2.0 * hbar or hi > spectrum.cutoff + 2.0 * hbar:
        raise WindowTooWide(
            "window exceeds the computed part of the band")
    if weight is None:
        w = _bump((lam - center) / halfwidth)
    else:
        w = np.asarray(weight(lam), dtype=float)
        w[(lam <= lo) | (lam >= hi)] = 0.0
    if np.sum(w > 0.05) < 6:
        raise WindowTooWide("window holds too few levels for a period estimate")
    t_total = 2.0 * np.pi * hbar * float(np.sum(w)) / (halfwidth * _BUMP_MASS)
    if tmax is None:
        tmax = 0.9 * t_total
    t = np.linspace(0.15 * t_total, tmax, nt)
    phase = np.exp(-1j * np.outer(t, lam) / hbar)
    amp = np.abs(phase @ w)
    peaks: List[PeriodPeak] = []
    top = float(np.max(amp))
    for i in range(1, nt - 1):
        if amp[i] >= amp[i - 1] and amp[i] > amp[i + 1] and amp[i] > threshold * top:
            denom = amp[i - 1] - 2.0 * amp[i] + amp[i + 1]
            shift = 0.0 if denom >= 0 else 0.5 * (amp[i - 1] - amp[i + 1]) / denom
            peaks.append(PeriodPeak(float(t[i] + shift * (t[1] - t[0])),
                                    float(amp[i])))
    peaks.sort(key=lambda p: -p.amplitude)
    return PeriodPeaks(window=(float(lo), float(hi)), t=t,
                       correlation=amp, peaks=tuple(peaks))


@dataclass(frozen=True)
class SeparationResult:
    """Labels for eigenvalues inside the two-well band.

    labels: 1 or 2 per eigenvalue (0 = below the seam, where everything
    belongs to well 1, or above the margin-trimmed top).  windows record
    the tracked per-window periods (center, T1, T2).
    """
    eigenvalues: np.ndarray
    labels: np.ndarray
    confidence: np.ndarray
    band: Tuple[float, float]
    margin: float
    windows: Tuple[Tuple[float, float, float], ...]
    hbar: float
    operator: str = "schrodinger"

    def subspectrum(self, label: int) -> SpectrumData:
        """The eigenvalues assigned to one well, valid up to the band top."""
        lam = self.eigenvalues[self.labels == label]
        return SpectrumData(hbar=self.hbar, cutoff=self.band[1],
                            operator=self.operator, eigenvalues=lam,
                            provenance={"scheme": "separation",
                                        "well": str(label)})

    def subspectra(self) -> Tuple[SpectrumData, SpectrumData]:
        return self.subspectrum(1), self.subspectrum(2)


def separate_wells(spectrum: SpectrumData, band: Tuple[float, float],
                   periods: Optional[Sequence[PeriodPeaks]] = None, *,
                   margin: Optional[float] = None,
                   window: Optional[float] = None) -> SeparationResult:
    """Assign each eigenvalue in the two-well band to one of the wells.

    ``band`` = (seam, top): seam is the critical value where the second
    well opens, top where the band ends.  Unless precomputed ``periods``
    are supplied, 50%-overlapping bump windows slide across the band and
    the oscillation spectrum of each yields the two primitive periods,
    tracked by continuity from the single-well region below the seam
    (where only well 1 exists).  The band levels are then partitioned
    into two interleaved ladders whose local spacings follow
    2 pi hbar / T_w(y), by dynamic programming over the squared relative
    spacing errors; per-level confidence is the cost of flipping that
    level, normalized by the squared spacing contrast.
    """
    seam, top = band
    hbar = spectrum.hbar
    lam = spectrum.eigenvalues
    if margin is None:
        margin = 5.0 * hbar ** (2.0 / 3.0)
    lo, hi = seam + margin, top - margin
    if hi - lo < 4.0 * np.sqrt(hbar):
        raise WindowTooWide("band too narrow for windowed separation")
    if periods is not None:
        return _separate_tracked(spectrum, seam, top, margin, lo, hi,
                                 periods=periods)
    if window is not None:
        widths = [window]
    else:
        base = min(3.0 * np.sqrt(hbar), (hi - lo) / 2.2)
        widths = [min(f * base, (hi - lo) / 1.6) for f in (1.0, 1.35, 1.8)]
    last_err: Optional[Exception] = None
    for W in widths:
        try:
            return _separate_tracked(spectrum, seam, top, margin, lo, hi,
                                     halfwidth=W)
        except UnresolvedPeriods as exc:
            last_err = exc
    raise last_err


def _separate_tracked(spectrum: SpectrumData, seam: float, top: float,
                      margin: float, lo: float, hi: float,
                      halfwidth: Optional[float] = None,
                      periods: Optional[Sequence[PeriodPeaks]] = None
                      ) -> SeparationResult:
    hbar = spectrum.hbar
    lam = spectrum.eigenvalues

    # reference period of well 1 from the levels just below the seam,
    # where only well 1 contributes: T = 2 pi hbar dk/dy
    below = lam[lam < seam]
    if len(below) < 3:
        raise WindowTooWide("no single-well region below the seam to anchor on")
    tail = below[-min(8, len(below)):]
    slope = float(np.polyfit(tail, np.arange(len(tail), dtype=float), 1)[0])
    t1_prev = 2.0 * np.pi * hbar * slope

    if periods is not None:
        wins: List[Tuple[float, float, Optional[PeriodPeaks]]] = \
            [(0.5 * (p.window[0] + p.window[1]),
              0.5 * (p.window[1] - p.window[0]), p)
             for p in sorted(periods, key=lambda q: q.window[0])]
    else:
        W = halfwidth
        # tracking windows start right above the seam (so the period of
        # well 1 is followed continuously from its anchored value) and
        # stop a full width short of the top so that no window tail
        # reaches the logarithmic period divergence at the saddle
        start = max(seam + 0.6 * W, lam[0] + W)
        centers = np.arange(start, hi - W + 1e-12, 0.5 * W)
        if len(centers) == 0:
            centers = np.array([max(start, min(hi - W, 0.5 * (lo + hi)))])
        elif centers[-1] < hi - W - 1e-12:
            centers = np.append(centers, hi - W)
        wins = [(float(yc), W, None) for yc in centers]

    tracked: List[Tuple[float, float, float]] = []
    for yc, W, osc in wins:
        if osc is None:
            osc = oscillation_spectrum(spectrum, (yc - W, yc + W))
        if not osc.peaks:
            raise UnresolvedPeriods(f"no period peak near y={yc:.6g}")
        amax = osc.peaks[0].amplitude
        res = 4.0 * hbar / W
        # well 1: nearest to the tracked period among strong peaks only
        # (interference shoulders between the true pair stay below ~55%)
        strong = [p for p in osc.peaks if p.amplitude >= 0.55 * amax]
        i1 = int(np.argmin([abs(p.t - t1_prev) for p in strong]))
        T1 = strong[i1].t
        # well 2: strongest peak clear of well 1's main lobe and not a
        # repetition (2x) of any strong peak
        def is_harmonic(p):
            return any(abs(p.t - 2.0 * q.t) < 3.0 * res
                       for q in osc.peaks if q.amplitude >= 0.55 * amax)

        rest = [p for p in osc.peaks
                if p.amplitude >= 0.4 * amax
                and abs(p.t - T1) >= 1.2 * res and not is_harmonic(p)]
        if not rest:
            raise UnresolvedPeriods(
                f"no second period resolved near y={yc:.6g} outside "
                f"{1.2 * res:.3g} of T1={T1:.6g}")
        T2 = rest[int(np.argmax([p.amplitude for p in rest]))].t
        tracked.append((float(yc), float(T1), float(T2)))
        t1_prev = T1

    # equal-period wells leave only one true peak; interference can split
    # its main lobe into a spurious pair, recognizable because the tracked
    # periods never separate beyond the window broadening
    seps = [abs(t1 - t2) * wc / (4.0 * hbar)
            for (_, t1, t2), (_, wc, _) in zip(tracked, wins)]
    if float(np.median(seps)) < 1.5:
        raise UnresolvedPeriods(
            "tracked periods stay within the window broadening across the "
            "band; the wells' periods are not separable")
    rel = [abs(t1 - t2) / (0.5 * (t1 + t2)) for _, t1, t2 in tracked]
    if float(np.median(rel)) < 0.05:
        raise UnresolvedPeriods(
            "tracked periods differ by under 5% across the band; the two "
            "ladder spacings cannot be told apart")

    centers = np.array([c for c, _, _ in tracked])
    T1s = np.array([a for _, a, _ in tracked])
    T2s = np.array([b for _, _, b in tracked])

    # global assignment: partition the band levels into two interleaved
    # ladders whose local spacings track 2 pi hbar / T_w(y)
    inband = (lam > seam) & (lam < hi)
    sel = np.nonzero(inband)[0]
    lams = lam[sel]
    gap1 = 2.0 * np.pi * hbar / np.interp(lams, centers, T1s)
    gap2 = 2.0 * np.pi * hbar / np.interp(lams, centers, T2s)
    best_cost, chain = _two_chain_dp(lams, gap1, gap2)

    labels = np.zeros(len(lam), dtype=int)
    labels[sel] = chain + 1
    confidence = np.zeros(len(lam))
    # flip cost in units of the squared relative gap contrast: a level
    # whose reassignment costs less than the contrast is not decisive.
    # For very long ladders the flip costs are subsampled and interpolated.
    dscale = ((gap1 - gap2) / (0.5 * (gap1 + gap2))) ** 2
    m_all = np.arange(len(lams))
    probes = m_all if len(lams) <= 200 else \
        np.unique(np.linspace(0, len(lams) - 1, 200).astype(int))
    conf_probe = np.empty(len(probes))
    for ip, m in enumerate(probes):
        alt, _ = _two_chain_dp(lams, gap1, gap2,
                               forced=(int(m), 1 - chain[m]))
        d = max(0.0, alt - best_cost)
        conf_probe[ip] = d / (d + dscale[m])
    confidence[sel] = np.interp(m_all, probes, conf_probe)
    # decisiveness is judged on the margin-trimmed interior, away from
    # the seam where the second ladder is still sparse
    conf_band = confidence[sel][lams >= lo]
    if len(conf_band) and float(np.median(conf_band)) < 0.15:
        raise AssignmentConflict(
            "ladder spacings too similar for a decisive assignment "
            f"(median confidence {float(np.median(conf_band)):.3g})")
    return SeparationResult(eigenvalues=lam, labels=labels,
                            confidence=confidence, band=(seam, top),
                            margin=margin, windows=tuple(tracked), hbar=hbar,
                            operator=spectrum.operator)


def _two_chain_dp(lams: np.ndarray, gap1: np.ndarray, gap2: np.ndarray,
                  forced: Optional[Tuple[int, int]] = None
                  ) -> Tuple[float, np.ndarray]:
    """Split sorted levels into two chains with prescribed local spacings.

    Minimizes the sum of squared relative spacing errors; each chain's
    consecutive members should differ by its gap table (evaluated at the
    newer member).  ``forced=(m, c)`` pins level m to chain c.  Returns
    (cost, chain indices in {0, 1}).
    """
    n = len(lams)
    gaps = (gap1, gap2)
    INF = np.inf
    js = np.arange(n + 1)
    jprev = np.maximum(js - 1, 0)

    def pen_scalar(c: int, prev: int, cur: int) -> float:
        g = gaps[c][cur]
        r = (lams[cur] - lams[prev] - g) / g
        return r * r

    # state after level i: (chain of i, last index of the other chain + 1)
    cost = np.full((2, n + 1), INF)
    for c in (0, 1):
        if forced is not None and forced[0] == 0 and forced[1] != c:
            continue
        cost[c, 0] = 0.0
    back: List[np.ndarray] = []
    for i in range(1, n):
        nxt = np.full((2, n + 1), INF)
        ptr = np.full((2, n + 1, 2), -1, dtype=int)
        for c in (0, 1):
            oc = 1 - c
            # i joins the same chain as i-1: state (c, j) unchanged
            if forced is None or forced[0] != i or forced[1] == c:
                v = cost[c] + pen_scalar(c, i - 1, i)
                upd = v < nxt[c]
                nxt[c][upd] = v[upd]
                ptr[c, upd, 0] = c
                ptr[c, upd, 1] = js[upd]
            # i joins the other chain: new state (oc, i), best over j
            if forced is None or forced[0] != i or forced[1] == oc:
                g = gaps[oc][i]
                r = (lams[i] - lams[jprev] - g) / g
                pens = np.where(js > 0, r * r, 0.0)
                v = cost[c] + pens
                jb = int(np.argmin(v))
                if v[jb] < nxt[oc, i]:
                    nxt[oc, i] = v[jb]
                    ptr[oc, i] = (c, jb)
        cost = nxt
        back.append(ptr)
    c_best, j_best = np.unravel_index(np.argmin(cost), cost.shape)
    total = float(cost[c_best, j_best])
    chain = np.zeros(n, dtype=int)
    c, j = int(c_best), int(j_best)
    for i in range(n - 1, 0, -1):
        chain[i] = c
        c, j = (int(v) for v in back[i - 1][c, j])
    chain[0] = c
    return total, chain


def extract_actions(spectra: Sequence[SpectrumData],
                    window: Optional[Tuple[float, float]] = None,
                    assignments: Optional[Sequence[np.ndarray]] = None,
                    *, k0=1, grid: Optional[np.ndarray] = None,
                    n: int = 200, margin: Optional[float] = None,
                    well_id: Optional[str] = None) -> ActionProfile:
    """Recover (S0, T, S2) of one well from an eigenvalue ladder.

    Each rung turns its (assigned) eigenvalues into exact action samples
    S(lambda_k) = 2 pi hbar (k - 1/2), k counted from the bottom of the
    well (``k0`` = index of the first listed level, scalar or one per
    rung).  A smooth spline carries each rung's samples — and their
    derivatives, for the period — to a common grid inside ``window``,
    where a least-squares fit in (1, hbar^2) separates S0 from S2 and T
    from its hbar^2 correction.  ``assignments`` selects each rung's
    levels (boolean mask or index array) when the spectra hold more than
    one well.  The grid stays ``margin`` inside every rung's sampled
    range.  With three or more rungs the fit residual cross-checks the
    indexing: a wrong k0 on any rung leaves a residual of order
    2 pi hbar, far above the hbar^4 model error.
    """
    if len(spectra) < 2:
        raise InsufficientLadder("need at least two hbar rungs")
    if len(spectra) == 2:
        warnings.warn("two-rung ladder: (S0, S2) solvable but the level "
                      "indexing cannot be cross-checked", UserWarning,
                      stacklevel=2)
    hb = np.array([s.hbar for s in spectra])
    if len(np.unique(hb)) != len(hb):
        raise HbarMismatch("ladder rungs must have distinct hbar")
    if np.ndim(k0) == 0:
        k0s = [int(k0)] * len(spectra)
    else:
        k0s = [int(v) for v in k0]
        if len(k0s) != len(spectra):
            raise IndexMismatch("k0 must be a scalar or give one index per rung")
    hmax = float(np.max(hb))
    los, his = [], []
    splines, dsplines = [], []
    for r, sp in enumerate(spectra):
        lam = sp.eigenvalues
        if assignments is not None:
            mask = np.asarray(assignments[r])
            lam = lam[mask]
        if len(lam) < 6:
            raise InsufficientLadder(
                f"rung hbar={sp.hbar} has too few eigenvalues")
        kk = np.arange(len(lam)) + k0s[r]
        svals = 2.0 * np.pi * sp.hbar * (kk - 0.5)
        spl = make_interp_spline(lam, svals, k=5)
        splines.append(spl)
        dsplines.append(spl.derivative())
        los.append(lam[0])
        his.append(lam[-1])
    lo, hi = max(los), min(his)
    if window is not None:
        lo, hi = max(lo, window[0]), min(hi, window[1])
        if hi <= lo:
            raise InsufficientLadder(
                "window lies outside the commonly sampled range")
    if margin is None:
        margin = 5.0 * hmax ** (2.0 / 3.0) * max(hi - lo, 1e-30) / 4.0
        margin = min(margin, 0.25 * (hi - lo))
    if grid is None:
        grid = np.linspace(lo + margin, hi - margin, n)
    else:
        grid = np.asarray(grid, dtype=float)
        if grid[0] < lo or grid[-1] > hi:
            raise SupportViolation(
                f"grid [{grid[0]}, {grid[-1]}] exceeds the common sampled "
                f"range [{lo}, {hi}]")
    design = np.column_stack([np.ones_like(hb), hb ** 2])
    samples = np.array([spl(grid) for spl in splines])   # rungs x grid
    coef, *_ = np.linalg.lstsq(design, samples, rcond=None)
    if len(spectra) >= 3:
        res = samples - design @ coef
        worst = float(np.median(np.max(np.abs(res), axis=0)))
        if worst > 0.05 * 2.0 * np.pi * float(np.min(hb)):
            raise IndexingAmbiguity(
                "rung actions disagree beyond the hbar^2 model "
                f"(residual {worst:.3g}); the per-rung level indices are "
                "inconsistent with a single well on this window")
    dsamples = np.array([dspl(grid) for dspl in dsplines])
    tcoef, *_ = np.linalg.lstsq(design, dsamples, rcond=None)
    return ActionProfile(grid=grid, s0=coef[0], t=tcoef[0], s2=coef[1],
                         well_id=well_id)
