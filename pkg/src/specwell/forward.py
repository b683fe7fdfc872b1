"""Finite-difference eigensolvers used as the independent spectral oracle.

Operators on a Dirichlet box, discretized sparsely and solved by Sturm
bisection for all eigenvalues below a cutoff:

* ``schrodinger``:  -hbar^2 u'' + V(x) u
* ``divergence``:   -hbar^2 (n(x) u')' + n(x) u

The default scheme is second-order central differences refined by one
Richardson step (solve at h and h/2, combine (4*fine - coarse)/3), which
leaves an O(h^4) dispersion error.  A direct fourth-order stencil is
available for the Schrodinger form.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eig_banded, eigh_tridiagonal

from .errors import (
    AboveCutoff,
    BoxTooSmall,
    IndexMismatch,
    InsufficientLadder,
    NonPositiveCoefficient,
    NotConverged,
)
from .potentials import PotentialModel

_SCHEMES = ("fd2-richardson", "fd2", "fd4")


@dataclass(frozen=True)
class DiscretizationSpec:
    """How to discretize: scheme, grid size and box (None means automatic)."""

    scheme: str = "fd2-richardson"
    n: Optional[int] = None
    box: Optional[Tuple[float, float]] = None
    points_per_radian: float = 25.0

    def __post_init__(self):
        if self.scheme not in _SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; pick from {_SCHEMES}")
        if self.n is not None and self.n < 16:
            raise ValueError("grid size must be at least 16")


@dataclass(frozen=True)
class SpectrumData:
    """Eigenvalues below a cutoff for one operator at one hbar."""

    hbar: float
    cutoff: float
    operator: str               # "schrodinger" | "divergence"
    eigenvalues: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues",
                           np.sort(np.asarray(self.eigenvalues, dtype=float)))

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def to_json(self) -> str:
        return json.dumps({
            "hbar": self.hbar,
            "cutoff": self.cutoff,
            "operator": self.operator,
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "provenance": self.provenance,
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SpectrumData":
        d = json.loads(text)
        return cls(hbar=float(d["hbar"]), cutoff=float(d["cutoff"]),
                   operator=str(d["operator"]),
                   eigenvalues=np.asarray(d["eigenvalues"], dtype=float),
                   provenance=dict(d.get("provenance", {})))


def counting_function(spectrum: SpectrumData, y: float) -> int:
    """Number of eigenvalues <= y; y must not exceed the computed window."""
    if y > spectrum.cutoff:
        raise AboveCutoff(
            f"y={y} exceeds the computed cutoff {spectrum.cutoff}")
    return int(np.searchsorted(spectrum.eigenvalues, y, side="right"))


def _auto_box(model: PotentialModel, cutoff: float, hbar: float) -> Tuple[float, float]:
    """Dirichlet walls where the coefficient clears cutoff + 10 hbar^(2/3).

    That clearance alone gives Airy-type suppression exp(-(4/3)*10^(3/2))
    of the wall's effect on eigenvalues below the cutoff.
    """
    margin = cutoff + 10.0 * hbar ** (2.0 / 3.0)
    lo, hi = model.domain
    lo = max(lo, -1e6)
    hi = min(hi, 1e6)
    xs = np.linspace(lo, hi, 4001)
    vs = model(xs)
    below = np.nonzero(vs <= cutoff)[0]
    if len(below) == 0:
        raise BoxTooSmall("no classical region below the cutoff in the domain")
    il, ir = below[0], below[-1]
    left = None
    for i in range(il, -1, -1):
        if vs[i] >= margin:
            left = xs[i]
            break
    right = None
    for i in range(ir, len(xs)):
        if vs[i] >= margin:
            right = xs[i]
            break
    if left is None or right is None:
        raise BoxTooSmall(
            "domain ends before the coefficient reaches cutoff + 10 hbar^(2/3); "
            "enlarge the domain or lower the cutoff")
    return float(left), float(right)


def _auto_n(box: Tuple[float, float], vmin: float, cutoff: float, hbar: float,
            points_per_radian: float) -> int:
    width = box[1] - box[0]
    kmax = np.sqrt(max(cutoff - vmin, 1e-12)) / hbar
    return int(np.clip(round(width * kmax * points_per_radian), 1500, 200_000))


def _fd2_eigvals(diag, off, lo, hi):
    return eigh_tridiagonal(diag, off, eigvals_only=True, select="v",
                            select_range=(lo, hi))


def _schrodinger_fd2(model, hbar, box, n, cutoff, slack):
    x = np.linspace(box[0], box[1], n + 1)
    h = x[1] - x[0]
    xi = x[1:-1]
    diag = 2.0 * hbar ** 2 / h ** 2 + model(xi)
    off = np.full(n - 2, -hbar ** 2 / h ** 2)
    return _fd2_eigvals(diag, off, model(xi).min() - 1.0, cutoff + slack)


def _divergence_fd2(model, hbar, box, n, cutoff, slack):
    x = np.linspace(box[0], box[1], n + 1)
    h = x[1] - x[0]
    xi = x[1:-1]
    nh = model(x[:-1] + 0.5 * h)          # n at half-integer nodes
    if np.min(nh) <= 0 or np.min(model(xi)) <= 0:
        raise NonPositiveCoefficient("coefficient must stay positive on the box")
    diag = hbar ** 2 * (nh[:-1] + nh[1:]) / h ** 2 + model(xi)
    off = -hbar ** 2 * nh[1:-1] / h ** 2
    return _fd2_eigvals(diag, off, model(xi).min() - 1.0, cutoff + slack)


def _schrodinger_fd4(model, hbar, box, n, cutoff, slack):
    x = np.linspace(box[0], box[1], n + 1)
    h = x[1] - x[0]
    xi = x[1:-1]
    m = len(xi)
    c = hbar ** 2 / (12.0 * h ** 2)
    bands = np.zeros((3, m))
    bands[0] = 30.0 * c + model(xi)
    bands[1, : m - 1] = -16.0 * c
    bands[2, : m - 2] = c
    return eig_banded(bands, lower=True, eigvals_only=True, select="v",
                      select_range=(model(xi).min() - 1.0, cutoff + slack))


def _solve(model: PotentialModel, hbar: float, cutoff: float, operator: str,
           disc: Optional[DiscretizationSpec]) -> SpectrumData:
    disc = disc or DiscretizationSpec()
    box = disc.box or _auto_box(model, cutoff, hbar)
    xs = np.linspace(box[0], box[1], 2001)
    vmin = float(np.min(model(xs)))
    n = disc.n or _auto_n(box, vmin, cutoff, hbar, disc.points_per_radian)
    slack = 0.0

    if operator == "schrodinger":
        kernel = _schrodinger_fd4 if disc.scheme == "fd4" else _schrodinger_fd2
    elif operator == "divergence":
        if disc.scheme == "fd4":
            raise ValueError("fd4 scheme is only available for the schrodinger form")
        kernel = _divergence_fd2
    else:
        raise ValueError(f"unknown operator {operator!r}")

    if disc.scheme == "fd2-richardson":
        # shared box, nested grids h and h/2; pair eigenvalues by index
        lam_c = kernel(model, hbar, box, n, cutoff, slack)
        lam_f = kernel(model, hbar, box, 2 * n, cutoff, slack)
        k = min(len(lam_c), len(lam_f))
        lam = (4.0 * lam_f[:k] - lam_c[:k]) / 3.0
        est = np.abs(lam_f[:k] - lam_c[:k]) / 3.0
        keep = lam <= cutoff
        lam = lam[keep]
        if len(lam) and np.max(est[keep]) > 1e-2 * max(1.0, abs(cutoff)):
            raise NotConverged(
                "grid too coarse: Richardson correction exceeds 1% of scale; "
                "increase DiscretizationSpec.n")
    else:
        lam = kernel(model, hbar, box, n, cutoff, slack)
        lam = lam[lam <= cutoff]

    prov = {"scheme": disc.scheme, "n": n, "box": [box[0], box[1]],
            "label": model.label}
    return SpectrumData(hbar=hbar, cutoff=cutoff, operator=operator,
                        eigenvalues=lam, provenance=prov)


def solve_schrodinger(model: PotentialModel, hbar: float, cutoff: float,
                      disc: Optional[DiscretizationSpec] = None) -> SpectrumData:
    """Eigenvalues of -hbar^2 u'' + V u below cutoff (Dirichlet box)."""
    return _solve(model, hbar, cutoff, "schrodinger", disc)


def solve_divergence(model: PotentialModel, hbar: float, cutoff: float,
                     disc: Optional[DiscretizationSpec] = None) -> SpectrumData:
    """Eigenvalues of -hbar^2 (n u')' + n u below cutoff (flux-form FD)."""
    return _solve(model, hbar, cutoff, "divergence", disc)


def fit_ground_state(spectra: Sequence, values: Optional[Sequence[float]] = None
                     ) -> Tuple[float, float]:
    """Fit lambda_1(hbar) ~ e0 + c*hbar; return (e0, vpp) with vpp = 2 c^2.

    ``spectra`` is a ladder of SpectrumData (smallest eigenvalue used), or a
    sequence of hbar values when ``values`` supplies the ground states.
    """
    if values is None:
        hb = np.array([s.hbar for s in spectra], dtype=float)
        lam1 = np.array([s.eigenvalues[0] for s in spectra], dtype=float)
    else:
        hb = np.asarray(spectra, dtype=float)
        lam1 = np.asarray(values, dtype=float)
    if len(hb) < 2:
        raise InsufficientLadder("ground-state fit needs at least two hbar rungs")
    c, e0 = np.polyfit(hb, lam1, 1)
    if c <= 0:
        raise NotConverged("ground-state slope must be positive")
    return float(e0), float(2.0 * c * c)


def semiclassical_distance(spec_a: SpectrumData, spec_b: SpectrumData,
                           slack: Optional[float] = None) -> float:
    """Sup over matched indices of |lambda_a - lambda_b| below the cutoff.

    Lists may differ in length only by eigenvalues within ``slack`` of the
    cutoff (default 5*hbar); a larger mismatch raises IndexMismatch.
    """
    if spec_a.hbar != spec_b.hbar:
        raise IndexMismatch("spectra computed at different hbar")
    cut = min(spec_a.cutoff, spec_b.cutoff)
    if slack is None:
        slack = 5.0 * spec_a.hbar
    a = spec_a.eigenvalues[spec_a.eigenvalues <= cut]
    b = spec_b.eigenvalues[spec_b.eigenvalues <= cut]
    k = min(len(a), len(b))
    for arr in (a, b):
        if len(arr) > k and arr[k] < cut - slack:
            raise IndexMismatch(
                f"eigenvalue counts differ well below the cutoff "
                f"({len(a)} vs {len(b)})")
    if k == 0:
        return 0.0
    return float(np.max(np.abs(a[:k] - b[:k])))
