"""Reconstruction pipelines: potential from actions.

One well: the period determines the half-width G by Abel inversion, the
first correction determines Phi = 1/f'+ - 1/f'- and with it the midline
slope via F'^2 = G'^2 - 2G'/Phi; sign resolution and integration rebuild
the branches.  Divergence form replaces the G step by a weighted Abel
kernel and obtains Phi from a singular ODE.  Multi-well spectra are
processed band by band between detected critical values, restarting the
Abel transforms above each one with the known-region integrals
subtracted.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from . import _numerics as num
from .errors import (
    BandTooThin,
    BranchViolation,
    DegreeTooHigh,
    DivisionFloor,
    InsufficientData,
    KinkClassificationAmbiguous,
    MultipleSolutions,
    NegativeCurvature,
    NegativeFp2,
    NonpositiveE0,
    OrderUndetermined,
    OutOfBand,
)
from .forward import SpectrumData, fit_ground_state
from .potentials import PotentialModel, ProfilePair, potential_from_profiles
from .semiclassics import (
    ActionProfile,
    BandDecomposition,
    DetectedCritical,
    detect_critical_values,
    extract_actions,
    separate_wells,
    weyl_area_from_spectrum,
)
from .transforms import EnergyTable, abel_forward, cumulative_integral, ode_p_solve

__all__ = [
    "InversionTrace",
    "ReconstructionPiece",
    "ReconstructionResult",
    "reconstruct_one_well",
    "reconstruct_acoustic",
    "reconstruct_multiwell",
    "resolve_sign",
    "taylor_at_minimum",
]


# -- trace record ------------------------------------------------------------

@dataclass(frozen=True)
class InversionTrace:
    """Intermediate tables of a bottom-anchored one-well reconstruction.

    grid is s-uniform from the band bottom; I = T, J the correction
    integral, G the half-width, Phi = 1/f'+ - 1/f'-, Fp2 = F'^2 after
    clamping, Fp the signed F'.  Checked here: Phi vanishes at the
    bottom, Fp2 is non-negative and equals Fp^2, and the pointwise
    identity Phi (G'^2 - F'^2) = 2 G' holds away from the division floor.
    """
    grid: np.ndarray
    I: np.ndarray
    J: np.ndarray
    G: np.ndarray
    Phi: np.ndarray
    Fp2: np.ndarray
    Fp: np.ndarray
    diagnostics: dict

    def __post_init__(self):
        n = len(self.grid)
        for name in ("I", "J", "G", "Phi", "Fp2", "Fp"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"table {name} does not match the grid")
        pmax = float(np.max(np.abs(self.Phi)))
        if pmax > 0 and abs(self.Phi[0]) > 0.05 * pmax:
            raise BranchViolation("Phi must vanish at the band bottom")
        if np.min(self.Fp2) < -1e-12 * max(1.0, float(np.max(self.Fp2))):
            raise BranchViolation("clamped F'^2 must be non-negative")
        if np.max(np.abs(self.Fp ** 2 - self.Fp2)) > \
                1e-9 * max(1.0, float(np.max(self.Fp2))):
            raise BranchViolation("Fp^2 must agree with Fp2 after resolution")
        sup = _identity_residual(self.grid, self.G, self.Phi, self.Fp,
                                 self.diagnostics.get("floor_index", 3))
        if sup > 0.05:
            raise BranchViolation(
                f"Phi (G'^2-F'^2) = 2G' violated (rel sup {sup:.3g})")


def _identity_residual(grid, G, Phi, Fp, i_fl: int) -> float:
    """Relative sup of Phi (G'^2 - F'^2) - 2 G' on the division region."""
    s = np.sqrt(np.maximum(grid - grid[0], 0.0))
    if len(s) < 8:
        return 0.0
    hs = s[1] - s[0]
    if np.ptp(np.diff(s)) > 1e-9 * hs:
        return 0.0
    Gs = num.fd_derivative(np.asarray(G, float), hs, 1)
    Fs = Fp * 2.0 * s
    lhs = Phi * (Gs * Gs - Fs * Fs)
    rhs = 4.0 * s * Gs
    i0 = max(int(i_fl) + 2, 3)
    if i0 >= len(s) - 3:
        return 0.0
    sl = slice(i0, len(s) - 2)
    scale = max(float(np.max(np.abs(rhs[sl]))), 1e-300)
    return float(np.max(np.abs(lhs[sl] - rhs[sl]))) / scale


# -- table extension to the band bottom -------------------------------------

def _action_tables(actions: ActionProfile, e0: float, npts: Optional[int]
                   ) -> Tuple[EnergyTable, EnergyTable, float]:
    """T and S2 on an s-uniform grid from e0, extended below the profile.

    The gap between e0 and the first profile point is filled by fitting S0
    with a quartic in y-e0 anchored at S0(e0)=0 (an exact constraint, free
    of any curvature estimate) and taking its derivative for T; S2 gets a
    free quadratic.  Both are blended into the tabulated values over the
    lower part of the profile.  Returns the extrapolated bottom period
    T0 = T(e0), which the caller must use for every bottom anchor so the
    1/s^2 cancellation in F'^2 stays exact.
    """
    g = np.asarray(actions.grid, dtype=float)
    if g[0] <= e0:
        raise OutOfBand("action grid must start above the band bottom")
    sA = np.sqrt(g - e0)
    t_spl = CubicSpline(sA, actions.t)
    s2_spl = CubicSpline(sA, actions.s2)
    if npts is None:
        npts = max(301, 2 * len(g) + 1)
    s = np.linspace(0.0, sA[-1], npts)
    y = e0 + s * s
    uu = y - e0
    # wide fit window keeps the extrapolation below g[0] conditioned even
    # when the profile starts well above e0 (spectra-derived grids are
    # bounded below by the coarsest ladder rung)
    m = max(8, min(len(g), max(int(0.4 * len(g)), 8), 120))
    u = g[:m] - e0
    um = u[-1]
    v = u / um
    design = np.column_stack([v, v * v, v ** 3, v ** 4])
    cs, *_ = np.linalg.lstsq(design, np.asarray(actions.s0[:m]), rcond=None)
    vv = uu / um
    t_fit = (cs[0] + 2.0 * cs[1] * vv + 3.0 * cs[2] * vv ** 2
             + 4.0 * cs[3] * vv ** 3) / um
    t0 = float(cs[0] / um)
    s2_fit = np.polyval(np.polyfit(v, actions.s2[:m], 2), vv)
    sc = np.clip(s, sA[0], sA[-1])
    w = np.clip((s - sA[0]) / max(sA[m // 2] - sA[0], 1e-300), 0.0, 1.0)
    w = w * w * (3.0 - 2.0 * w)
    tv = (1.0 - w) * t_fit + w * t_spl(sc)
    s2v = (1.0 - w) * s2_fit + w * s2_spl(sc)
    return (EnergyTable(y, tv, e0, left_behavior="smooth"),
            EnergyTable(y, s2v, e0, left_behavior="smooth"), t0)


# -- F'^2 assembly -----------------------------------------------------------

def _fp2_from_phi(s: np.ndarray, Gs: np.ndarray, Phi: np.ndarray,
                  cphi: float) -> Tuple[np.ndarray, int]:
    """F'^2 = (Gs^2 - 4 Gs / (Phi/s)) / (4 s^2) with a bottom floor.

    Both terms diverge like 1/s^2 at the bottom and cancel to a finite
    limit; the lowest nodes are replaced by a linear-in-(y-e0) fit of the
    values just above, where the cancellation is still benign.
    """
    n = len(s)
    w = np.empty(n)
    w[0] = cphi
    w[1:] = Phi[1:] / s[1:]
    tiny = 1e-12 * max(float(np.max(np.abs(w))), 1.0)
    w = np.where(np.abs(w) < tiny, tiny, w)
    fp2 = np.zeros(n)
    fp2[1:] = (Gs[1:] ** 2 - 4.0 * Gs[1:] / w[1:]) / (4.0 * s[1:] ** 2)
    i_fl = max(3, int(0.05 * n))
    i_hi = min(n - 2, i_fl + max(8, n // 16))
    uu = s * s
    coef = np.polyfit(uu[i_fl:i_hi], fp2[i_fl:i_hi], 1)
    fp2[:i_fl] = np.polyval(coef, uu[:i_fl])
    return fp2, i_fl


def _clamp_fp2(fp2: np.ndarray, s: np.ndarray, Gs: np.ndarray, i_fl: int
               ) -> Tuple[np.ndarray, dict]:
    """Zero small negatives; widespread negativity means bad input actions.

    The tolerance is relative to the largest tabulated G'^2, which grows
    like 1/s^2 toward the bottom node exactly as the noise amplification
    of the F'^2 division does.
    """
    gp2 = (Gs[1:] / (2.0 * s[1:])) ** 2
    tau = 1e-8 * float(np.max(gp2))
    neg = fp2 < -tau
    frac = float(np.count_nonzero(neg)) / len(fp2)
    info = {"clamp_tau": tau, "fp2_min": float(np.min(fp2)),
            "negative_fraction": frac}
    if frac > 0.02:
        raise NegativeFp2(
            f"F'^2 < -{tau:.3g} on {100 * frac:.1f}% of the band; "
            "the input actions are not consistent with a single well")
    return np.where(fp2 > 0.0, fp2, 0.0), info


# -- sign resolution ---------------------------------------------------------

def _vanishing_order(grid: np.ndarray, v: np.ndarray, iz: int,
                     vmax: float) -> int:
    """Vanishing order of a table at grid[iz] by a local log-log fit."""
    yz = grid[iz]
    d = np.abs(grid - yz)
    ok = (v > 1e-6 * vmax) & (d > 0)
    idx = np.nonzero(ok)[0]
    if len(idx) < 6:
        raise OrderUndetermined("too few usable points around the zero")
    idx = idx[np.argsort(d[idx])][:24]
    ld, lv = np.log(d[idx]), np.log(v[idx])
    slope, intercept = np.polyfit(ld, lv, 1)
    resid = float(np.sqrt(np.mean((lv - slope * ld - intercept) ** 2)))
    order = int(round(slope))
    if abs(slope - order) > 0.35 or resid > 0.5:
        raise OrderUndetermined(
            f"log-log fit inconclusive at y={yz:.6g} (slope {slope:.3g})")
    if order > 6:
        raise OrderUndetermined(f"vanishing order {order} beyond 6")
    return max(order, 1)


def resolve_sign(fp2: EnergyTable, symmetry_assumed: bool = False
                 ) -> Tuple[EnergyTable, dict]:
    """Signed F' from its square.

    Touch-point zeros flip the sign when the table's vanishing order is
    odd; identically-zero plateaus cut the band into sign components.
    With ``symmetry_assumed`` the plateaus are genuine evenness and only
    a global sign remains free; otherwise every component's sign is free
    and all-positive is returned with a MultipleSolutions warning.
    """
    g = np.asarray(fp2.grid, dtype=float)
    v = np.asarray(fp2.values, dtype=float)
    n = len(v)
    vmax = float(np.max(v, initial=0.0))
    report: dict = {"even": False, "components": 1, "zeros": [],
                    "plateaus": [], "patterns": 2,
                    "symmetry_assumed": bool(symmetry_assumed)}
    if vmax <= 0.0:
        report.update(even=True, components=0, patterns=1)
        return fp2.with_values(np.zeros(n)), report

    zero = v < 1e-4 * vmax
    runs: List[Tuple[int, int]] = []
    i = 0
    while i < n:
        if zero[i]:
            j = i
            while j + 1 < n and zero[j + 1]:
                j += 1
            runs.append((i, j))
            i = j + 1
        else:
            i += 1
    lp = max(5, n // 32)
    plateaus = [(a, b) for a, b in runs if b - a + 1 >= lp]
    interior = [(a, b) for a, b in plateaus if a > 0 and b < n - 1]
    point_zeros = [(a, b) for a, b in runs
                   if b - a + 1 < lp and a > 0 and b < n - 1]

    sgn = np.ones(n)
    for a, b in point_zeros:
        iz = a + int(np.argmin(v[a:b + 1]))
        order = _vanishing_order(g, v, iz, vmax)
        flip = order % 2 == 1
        report["zeros"].append({"y": float(g[iz]), "order": order,
                                "flip": bool(flip)})
        if flip:
            sgn[iz + 1:] *= -1.0

    k = len(interior) + 1
    report["components"] = k
    report["plateaus"] = [(float(g[a]), float(g[b])) for a, b in interior]
    report["patterns"] = 2 if symmetry_assumed else 2 ** k
    if k >= 2 and not symmetry_assumed:
        warnings.warn(MultipleSolutions(
            f"{k} sign components separated by F'=0 plateaus; "
            f"{2 ** k} sign patterns are consistent (all-positive returned)"))
    fpv = sgn * np.sqrt(np.maximum(v, 0.0))
    return fp2.with_values(fpv, left_behavior="vanishing"), report


# -- one-well pipeline -------------------------------------------------------

def _mirror_pair(pair: ProfilePair) -> ProfilePair:
    """Reflect x -> 2 x0 - x; swaps and negates the branches about x0."""
    c = 2.0 * pair.x0
    return ProfilePair(grid=pair.grid, F=c - pair.F, G=pair.G,
                       fminus=c - pair.fplus, fplus=c - pair.fminus,
                       e0=pair.e0, x0=pair.x0, vpp=pair.vpp, order=pair.order)


def _canonical_orientation(pair: ProfilePair) -> Tuple[ProfilePair, bool]:
    """Fix the mirror: first significant parity defect must be negative,
    which makes the first non-vanishing odd derivative at the minimum
    positive.  Even wells are left untouched."""
    F = pair.F - pair.x0
    scale = max(float(np.max(np.abs(F))), 1e-3 * float(pair.G[-1]))
    sig = np.nonzero(np.abs(F) > 1e-6 * scale)[0]
    if len(sig) == 0 or float(np.max(np.abs(F))) < 1e-9 * float(pair.G[-1]):
        return pair, False
    if F[sig[0]] > 0:
        return _mirror_pair(pair), True
    return pair, False


def _assemble_pair(y: np.ndarray, s: np.ndarray, Gv: np.ndarray,
                   Fp: np.ndarray, e0: float, vpp: float) -> ProfilePair:
    """Integrate the signed F' and build branch tables around x0 = 0."""
    hs = s[1] - s[0]
    Gs = num.fd_derivative(Gv, hs, 1)
    # keep |F'| strictly inside |G'| so the branches stay monotone
    lim = np.abs(Gs) / (2.0 * np.maximum(s, hs))
    Fp = np.clip(Fp, -0.999999 * lim, 0.999999 * lim)
    F = CubicSpline(s, Fp * 2.0 * s).antiderivative()(s)
    return ProfilePair(grid=y, F=F, G=Gv, fminus=F - Gv, fplus=F + Gv,
                       e0=float(e0), x0=0.0, vpp=float(vpp), order=2)


def reconstruct_one_well(actions: ActionProfile, e0: float, vpp: float,
                         symmetry_assumed: bool = False, *,
                         npts: Optional[int] = None,
                         kind: str = "schrodinger-V",
                         label: str = "reconstructed"
                         ) -> Tuple[ProfilePair, PotentialModel, InversionTrace]:
    """Potential of a single well from its actions and bottom data.

    Pipeline: T -> G by Abel composition (T applied to T is pi times the
    primitive); S2 -> J -> Phi the same way; F'^2 = G'^2 - 2 G'/Phi with
    the bottom division handled by the square-root layer of Phi; sign
    resolution; branch integration.  The returned model is the canonical
    representative: minimum at x = 0, first non-vanishing odd derivative
    positive.
    """
    if vpp <= 0.0:
        raise NegativeCurvature("bottom curvature must be positive")
    Ttab, S2tab, t0 = _action_tables(actions, e0, npts)
    # every bottom anchor below uses the curvature seen by the T data
    # itself; mixing in an external estimate would break the 1/s^2
    # cancellation in F'^2 by the mismatch
    vpp_eff = 2.0 * np.pi ** 2 / t0 ** 2
    y, s = Ttab.grid, Ttab.s
    hs = s[1] - s[0]
    Jv = np.pi * np.sqrt(2.0 * vpp_eff) - 12.0 * cumulative_integral(S2tab).values
    Jtab = EnergyTable(y, Jv, e0, left_behavior="smooth")
    Gv = abel_forward(Ttab).values / (2.0 * np.pi)
    Phi = abel_forward(Jtab).values / np.pi
    Gs = num.fd_derivative(Gv, hs, 1)

    pmax = float(np.max(np.abs(Phi)))
    gsmax = float(np.max(np.abs(Gs)))
    low = (np.abs(Phi) < 1e-3 * pmax) & (np.abs(Gs) > 1e-3 * gsmax)
    i_guard = max(3, int(0.05 * len(s)))
    if np.any(low[i_guard:]):
        raise DivisionFloor(
            "Phi vanishes on an interior sub-band while G' does not; "
            "2G'/Phi is not computable there")

    cphi = 2.0 * np.sqrt(2.0 * vpp_eff)
    fp2_raw, i_fl = _fp2_from_phi(s, Gs, Phi, cphi)
    fp2, clamp_info = _clamp_fp2(fp2_raw, s, Gs, i_fl)
    fp_tab, sign_report = resolve_sign(
        EnergyTable(y, fp2, e0, left_behavior="smooth"), symmetry_assumed)
    pair = _assemble_pair(y, s, Gv, fp_tab.values, e0, vpp_eff)
    pair, mirrored = _canonical_orientation(pair)
    model = potential_from_profiles(pair, kind=kind, label=label)

    Fp_final = num.fd_derivative(pair.F, hs, 1) / (2.0 * np.maximum(s, hs))
    Fp_final[0] = Fp_final[1]
    diagnostics = dict(clamp_info)
    diagnostics.update(floor_index=i_fl, mirrored=mirrored,
                       sign_report=sign_report, vpp_input=float(vpp),
                       vpp_effective=float(vpp_eff))
    trace = InversionTrace(grid=y, I=Ttab.values, J=Jv, G=Gv, Phi=Phi,
                           Fp2=Fp_final ** 2, Fp=Fp_final,
                           diagnostics=diagnostics)
    return pair, model, trace


# -- Taylor coefficients at the minimum --------------------------------------

def taylor_at_minimum(pair: ProfilePair, degree: int) -> np.ndarray:
    """Taylor coefficients of the reconstructed well at its minimum.

    Polynomial fits on |x-x0| <= r for a sweep of radii; the radius is
    chosen where consecutive fits agree best (small radii amplify table
    noise, large ones pick up higher-order bias).  Odd coefficients are
    meaningful up to the global mirror.
    """
    if degree > 6:
        raise DegreeTooHigh("Taylor extraction supports degree <= 6")
    if degree < 2:
        raise ValueError("degree must be at least 2")
    model = potential_from_profiles(pair)
    x0 = pair.x0
    reach = 0.85 * min(x0 - pair.fminus[-1], pair.fplus[-1] - x0)
    radii = reach * np.geomspace(0.08, 1.0, 12)
    coefs = []
    for r in radii:
        xs = x0 + np.linspace(-r, r, 81)
        t = (xs - x0) / r
        c = np.polynomial.polynomial.polyfit(t, model(xs), degree)
        coefs.append(c / r ** np.arange(degree + 1))
    coefs = np.array(coefs)
    r_ref = radii[len(radii) // 2]
    wts = r_ref ** np.arange(degree + 1)
    diff = np.sum(np.abs(np.diff(coefs, axis=0)) * wts, axis=1)
    i = int(np.argmin(diff))
    return 0.5 * (coefs[i] + coefs[i + 1])


# -- divergence form ---------------------------------------------------------

def reconstruct_acoustic(actions: ActionProfile, e0: float, a: float,
                         symmetry_assumed: bool = False, *,
                         npts: Optional[int] = None,
                         label: str = "reconstructed-n"
                         ) -> Tuple[ProfilePair, PotentialModel]:
    """Coefficient n of the divergence-form operator from its actions.

    The width comes from T via a weighted Abel kernel (the unknown is
    2G'(u)/sqrt(u)); the asymmetry carrier Phi solves the Euler-type ODE
    whose right side is the doubly differentiated T-transform of
    A Phi(y) = A Phi(E0) - 12 int S2.
    """
    if e0 <= 0.0:
        raise NonpositiveE0("divergence-form band bottom must be positive")
    if a <= 0.0:
        raise NegativeCurvature("bottom curvature of n must be positive")
    Ttab, S2tab, t0 = _action_tables(actions, e0, npts)
    a_eff = 2.0 * np.pi ** 2 / (t0 * t0 * e0)
    y, s = Ttab.grid, Ttab.s
    hs = s[1] - s[0]

    # width: T = Abel(g) with g = 2G'/sqrt(u); G' 2s = (dT2/ds) sqrt(u)/(2 pi)
    fwd = abel_forward(Ttab)
    ws = num.fd_derivative(fwd.values, hs, 1)
    integ = ws * np.sqrt(y) / (2.0 * np.pi)
    integ[0] = np.sqrt(2.0 / a_eff)
    Gv = CubicSpline(s, integ).antiderivative()(s)
    Gs = num.fd_derivative(Gv, hs, 1)

    # Phi from the combined transform: anchor - 12 int S2, then T, then P
    aphi = np.pi * np.sqrt(2.0 * a_eff * e0) \
        - 12.0 * cumulative_integral(S2tab).values
    U = abel_forward(EnergyTable(y, aphi, e0, left_behavior="smooth")).values
    Us = num.fd_derivative(U, hs, 1)
    Uss = num.fd_derivative(U, hs, 2)
    si = s[1:]
    d2u = Uss[1:] / (4.0 * si * si) - Us[1:] / (4.0 * si ** 3)
    rhs = EnergyTable(y[1:], y[1:] ** 1.5 * d2u / np.pi, e0,
                      left_behavior="smooth")
    Phi = ode_p_solve(rhs, e0, a_eff, out_grid=y).values

    cphi = 2.0 * np.sqrt(2.0 * a_eff)
    fp2_raw, i_fl = _fp2_from_phi(s, Gs, Phi, cphi)
    fp2, _ = _clamp_fp2(fp2_raw, s, Gs, i_fl)
    fp_tab, _ = resolve_sign(
        EnergyTable(y, fp2, e0, left_behavior="smooth"), symmetry_assumed)
    pair = _assemble_pair(y, s, Gv, fp_tab.values, e0, a_eff)
    pair, _ = _canonical_orientation(pair)
    model = potential_from_profiles(pair, kind="divergence-n", label=label)
    return pair, model
