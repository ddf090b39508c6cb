"""The explicit piecewise field with non-unique flows and its solution family.

Closed forms throughout: the Hamiltonian and field are exact piecewise
expressions, the flow is an exact piecewise map (straight lines with a
bounce in the outer wedges, radial collapse through the origin between the
upper and lower wedges), and the family of flows is indexed by a
measure-preserving interval-exchange map that relabels the ray on which a
trajectory re-emerges after crossing the origin.

Conventions for boundary sets of measure zero: the flow assigns the
diagonal rays to the outer wedges and the vertical axis to the upper/lower
wedges; the field formulas keep the closed wedge |x1| <= |x2| as printed.
Negative times use the exact conjugation X(-t, x) = R X_inv(t, R x) with
R = reflection across the x1-axis and the inverse interval map.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .fields import PlanarVectorField, ScalarField2D, Window
from .numerics import halton, integrate_richardson
from .transport import Renormalization, TransportSolution


class Region(Enum):
    J = "upper-right"
    J_MIRROR = "upper-left"
    I = "lower-right"
    I_MIRROR = "lower-left"
    EAST = "outer-east"
    WEST = "outer-west"
    BOUNDARY = "boundary"


def region(x1, x2):
    """Strict open-region tags; rays, axes and the origin map to BOUNDARY."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    out = np.full(np.broadcast(x1, x2).shape, Region.BOUNDARY, dtype=object)
    out[(0 < x1) & (x1 < x2)] = Region.J
    out[(x1 < 0) & (-x1 < x2)] = Region.J_MIRROR
    out[(0 < x1) & (x1 < -x2)] = Region.I
    out[(x1 < 0) & (-x1 < -x2)] = Region.I_MIRROR
    out[x1 > np.abs(x2)] = Region.EAST
    out[x1 < -np.abs(x2)] = Region.WEST
    return out if out.shape else out.item()


@dataclass(frozen=True)
class MeasurePreservingMap:
    """Interval-exchange map of (-1, 1): pieces of slope +-1 tiling the interval."""

    src_lo: np.ndarray
    src_hi: np.ndarray
    tgt_lo: np.ndarray
    tgt_hi: np.ndarray
    orient: np.ndarray

    @classmethod
    def from_pieces(cls, pieces: Sequence) -> "MeasurePreservingMap":
        """Build from ((s0, s1), (t0, t1), orientation) triples and validate."""
        arr = sorted(pieces, key=lambda p: p[0][0])
        m = cls(
            src_lo=np.array([p[0][0] for p in arr], dtype=float),
            src_hi=np.array([p[0][1] for p in arr], dtype=float),
            tgt_lo=np.array([p[1][0] for p in arr], dtype=float),
            tgt_hi=np.array([p[1][1] for p in arr], dtype=float),
            orient=np.array([float(p[2]) for p in arr]),
        )
        m.validate()
        return m

    @classmethod
    def identity(cls) -> "MeasurePreservingMap":
        return cls.from_pieces([((-1.0, 1.0), (-1.0, 1.0), +1)])

    @classmethod
    def reflection(cls) -> "MeasurePreservingMap":
        return cls.from_pieces([((-1.0, 1.0), (-1.0, 1.0), -1)])

    def validate(self, tol: float = 1e-12) -> None:
        """Exact measure-preservation test: both partitions tile (-1, 1)."""
        if np.any(np.abs((self.src_hi - self.src_lo)
                         - (self.tgt_hi - self.tgt_lo)) > tol):
            raise ValueError("piece lengths differ between source and target")
        for lo, hi, what in ((self.src_lo, self.src_hi, "source"),
                             (self.tgt_lo, self.tgt_hi, "target")):
            order = np.argsort(lo)
            lo, hi = lo[order], hi[order]
            if abs(lo[0] + 1.0) > tol or abs(hi[-1] - 1.0) > tol:
                raise ValueError(f"{what} pieces do not span (-1, 1)")
            if np.any(np.abs(hi[:-1] - lo[1:]) > tol):
                raise ValueError(f"{what} pieces overlap or leave gaps")

    def inverse(self) -> "MeasurePreservingMap":
        """Swap source and target pieces; orientation is self-inverse."""
        pieces = [((self.tgt_lo[k], self.tgt_hi[k]),
                   (self.src_lo[k], self.src_hi[k]), self.orient[k])
                  for k in range(len(self.orient))]
        return MeasurePreservingMap.from_pieces(pieces)

    def __call__(self, lam):
        scalar = np.isscalar(lam)
        arr = np.atleast_1d(np.asarray(lam, dtype=float))
        flat = np.ascontiguousarray(arr.ravel())
        out = np.empty_like(flat)
        _kernels.iem_apply(flat, self.src_lo, self.src_hi, self.tgt_lo,
                           self.tgt_hi, self.orient, out)
        return float(out[0]) if scalar else out.reshape(arr.shape)

    @property
    def arrays(self):
        return self.src_lo, self.src_hi, self.tgt_lo, self.tgt_hi, self.orient


def h_example(x1, x2):
    """The piecewise Hamiltonian, exact closed form."""
    scalar = np.isscalar(x1) and np.isscalar(x2)
    a1 = np.ascontiguousarray(np.atleast_1d(x1), dtype=float)
    a2 = np.ascontiguousarray(np.atleast_1d(x2), dtype=float)
    a1, a2 = np.broadcast_arrays(a1, a2)
    out = np.empty(a1.size)
    _kernels.h_example(np.ascontiguousarray(a1.ravel()),
                       np.ascontiguousarray(a2.ravel()), out)
    return float(out[0]) if scalar else out.reshape(a1.shape)


def b_example(x1, x2):
    """The derived field; NaN-flagged on the axis {x2 = 0} where it jumps."""
    scalar = np.isscalar(x1) and np.isscalar(x2)
    a1 = np.ascontiguousarray(np.atleast_1d(x1), dtype=float)
    a2 = np.ascontiguousarray(np.atleast_1d(x2), dtype=float)
    a1, a2 = np.broadcast_arrays(a1, a2)
    o1 = np.empty(a1.size)
    o2 = np.empty(a1.size)
    _kernels.b_example(np.ascontiguousarray(a1.ravel()),
                       np.ascontiguousarray(a2.ravel()), o1, o2)
    if scalar:
        return float(o1[0]), float(o2[0])
    return o1.reshape(a1.shape), o2.reshape(a1.shape)


_IDENTITY = MeasurePreservingMap.from_pieces([((-1.0, 1.0), (-1.0, 1.0), +1)])


def flow_x_psi(psi: MeasurePreservingMap, t, x1, x2):
    """The flow indexed by the interval map psi; exact for either sign of t."""
    scalar = np.isscalar(x1) and np.isscalar(x2) and np.isscalar(t)
    a1 = np.asarray(x1, dtype=float)
    a2 = np.asarray(x2, dtype=float)
    a1, a2 = np.broadcast_arrays(a1, a2)
    tt = np.broadcast_to(np.asarray(t, dtype=float), a1.shape)
    shape = a1.shape
    a1 = np.ascontiguousarray(a1.ravel())
    a2 = np.ascontiguousarray(a2.ravel())
    tt = np.ascontiguousarray(tt.ravel())
    o1 = np.empty(a1.size)
    o2 = np.empty(a1.size)
    pos = tt >= 0
    if np.any(pos):
        r1 = np.empty(int(pos.sum()))
        r2 = np.empty(int(pos.sum()))
        _kernels.flow_psi(np.ascontiguousarray(tt[pos]),
                          np.ascontiguousarray(a1[pos]),
                          np.ascontiguousarray(a2[pos]), *psi.arrays, r1, r2)
        o1[pos], o2[pos] = r1, r2
    if np.any(~pos):
        inv = psi.inverse()
        neg = ~pos
        r1 = np.empty(int(neg.sum()))
        r2 = np.empty(int(neg.sum()))
        _kernels.flow_psi(np.ascontiguousarray(-tt[neg]),
                          np.ascontiguousarray(a1[neg]),
                          np.ascontiguousarray(-a2[neg]), *inv.arrays, r1, r2)
        o1[neg], o2[neg] = r1, -r2
    if scalar:
        return float(o1[0]), float(o2[0])
    return o1.reshape(shape), o2.reshape(shape)


def flow_x(t, x1, x2):
    """The distinguished flow (identity relabelling; Hamiltonian-constant)."""
    return flow_x_psi(_IDENTITY, t, x1, x2)


def example_hamiltonian(half_width: float = 8.0) -> ScalarField2D:
    return ScalarField2D(evaluator=lambda x1, x2: h_example(x1, x2),
                         kind="analytic", window=Window.square(half_width),
                         grad=None)


def example_field(half_width: float = 8.0) -> PlanarVectorField:
    return PlanarVectorField(evaluator=lambda x1, x2: b_example(x1, x2),
                             window=Window.square(half_width),
                             source=example_hamiltonian(half_width))


# ---------------------------------------------------------------------------
# the solution family and its constraint functionals

def solution_family(u0: Callable, u_tilde: Optional[Callable] = None,
                    ) -> TransportSolution:
    """Weak solutions u(t,x) = u0 or u_tilde pulled back along the flow.

    ``u_tilde`` is the redistribution datum on the upper wedge seen by
    points that have crossed the origin; None selects the distinguished
    solution (u_tilde = u0).  Defined for t >= 0.
    """
    ut = u0 if u_tilde is None else u_tilde

    def ev(t, x1, x2):
        if np.any(t < 0):
            raise ValueError("family solutions are defined for t >= 0")
        back1, back2 = flow_x(-t, x1, x2)
        vals = np.asarray(u0(back1, back2), dtype=float)
        crossed = (x2 < -np.abs(x1)) & (2.0 * t > np.square(x2))
        if np.any(crossed):
            vals = np.where(crossed, ut(back1, back2), vals)
        return vals

    return TransportSolution(evaluate=ev,
                             initial=lambda x1, x2: np.asarray(
                                 u0(x1, x2), dtype=float),
                             provenance="counterexample-family")


def data_reflected(u0: Callable) -> Callable:
    """u_tilde = u0 composed with reflection in x1 (the Psi=reflection datum)."""
    return lambda x1, x2: u0(-np.asarray(x1, dtype=float), x2)


def data_from_psi(u0: Callable, psi: MeasurePreservingMap) -> Callable:
    """The redistribution datum matching the flow X_psi.

    A point re-emerging on the ray of slope lam came from the ray of slope
    psi^{-1}(lam), so u_tilde(x1, x2) = u0(psi^{-1}(x1/x2) * x2, x2).
    """
    inv = psi.inverse()

    def ut(x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        lam = np.where(x2 != 0, x1 / np.where(x2 != 0, x2, 1.0), 0.0)
        return u0(inv(np.ascontiguousarray(lam)) * x2, x2)

    return ut


def data_averaged(u0: Callable, rel_tol: float = 1e-12) -> Callable:
    """u_tilde = segment average of u0: conserves mass, breaks beta-moments."""
    cache: dict[int, float] = {}

    def ut(x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        x1b, x2b = np.broadcast_arrays(x1, x2)
        out = np.empty(x2b.shape)
        for idx, s in np.ndenumerate(x2b):
            key = int(round(s / 1e-12))
            if key not in cache:
                cache[key] = integrate_richardson(
                    lambda r: np.asarray(u0(r, np.full_like(r, s)), dtype=float),
                    -abs(s), abs(s), rel_tol=rel_tol) / (2 * abs(s))
            out[idx] = cache[key]
        return out

    return ut


def _segment_residuals(u_tilde: Callable, u0: Callable, levels,
                       weights: Sequence[Callable], rel_tol: float = 1e-12
                       ) -> np.ndarray:
    out = np.empty((len(levels), len(weights)))
    for i, s in enumerate(levels):
        s = float(s)
        for j, w in enumerate(weights):
            def diff(r):
                lvl = np.full_like(r, s)
                return w(np.asarray(u_tilde(r, lvl), dtype=float), r) \
                    - w(np.asarray(u0(r, lvl), dtype=float), r)

            out[i, j] = abs(integrate_richardson(diff, -s, s, rel_tol=rel_tol))
    return out


def check_masscons(u_tilde: Callable, u0: Callable, levels,
                   rel_tol: float = 1e-12) -> np.ndarray:
    """Per-level |segment integral of u_tilde - segment integral of u0|."""
    return _segment_residuals(u_tilde, u0, levels,
                              [lambda u, r: u], rel_tol=rel_tol)[:, 0]


def check_masscons2(u_tilde: Callable, u0: Callable,
                    betas: Sequence[Renormalization], levels,
                    rel_tol: float = 1e-12) -> np.ndarray:
    """Residuals of the renormalized segment conservation, per (level, beta)."""
    weights = [(lambda u, r, b=beta: b.fn(u)) for beta in betas]
    return _segment_residuals(u_tilde, u0, levels, weights, rel_tol=rel_tol)


def hamiltonian_moment_residual(u_tilde: Callable, u0: Callable, levels,
                                degree: int = 3,
                                fs: Optional[Sequence[Callable]] = None,
                                rel_tol: float = 1e-12) -> np.ndarray:
    """Residuals of the monomial-weighted segment moments, per (level, f).

    With f running over monomials up to ``degree`` these are the segment
    moments whose joint vanishing pins u_tilde = u0 (constancy of the
    Hamiltonian along trajectories); f = 1 reduces to mass conservation.
    """
    if fs is None:
        fs = [(lambda s, k=k: s ** k) for k in range(degree + 1)]
    weights = [(lambda u, r, f=f: u * f(r)) for f in fs]
    return _segment_residuals(u_tilde, u0, levels, weights, rel_tol=rel_tol)


# ---------------------------------------------------------------------------
# measure-preservation audit

def measure_preservation_report(t: float, n_points: int = 10 ** 6,
                                domain=((0.05, 1.0), (0.05, 1.0)),
                                window=None, bins: int = 20,
                                ray_margin: float = 1e-3,
                                domain_margin: float = 0.005,
                                probe_n: int = 8,
                                psi: Optional[MeasurePreservingMap] = None,
                                ) -> dict:
    """Push a deterministic low-discrepancy cloud and audit cell densities.

    Halton points fill the source rectangle; the histogram covers ``window``
    (auto: the pushed cloud's bounding box) with ``bins`` x ``bins`` cells.
    A cell enters the audit only when it avoids the discontinuity rays and
    its backward image lies inside the source rectangle, so its exact
    density is 1; deviations then measure only the sampling discrepancy.
    """
    (d1_lo, d1_hi), (d2_lo, d2_hi) = domain
    pts = halton(n_points, 2)
    x1 = d1_lo + (d1_hi - d1_lo) * pts[:, 0]
    x2 = d2_lo + (d2_hi - d2_lo) * pts[:, 1]
    if psi is None:
        y1, y2 = flow_x(t, x1, x2)
    else:
        y1, y2 = flow_x_psi(psi, t, x1, x2)
    if window is None:
        pad1 = 0.02 * (y1.max() - y1.min())
        pad2 = 0.02 * (y2.max() - y2.min())
        window = ((y1.min() + pad1, y1.max() - pad1),
                  (y2.min() + pad2, y2.max() - pad2))
    (w1_lo, w1_hi), (w2_lo, w2_hi) = window
    e1 = np.linspace(w1_lo, w1_hi, bins + 1)
    e2 = np.linspace(w2_lo, w2_hi, bins + 1)
    hist, _, _ = np.histogram2d(y1, y2, bins=[e1, e2])
    cell_area = (e1[1] - e1[0]) * (e2[1] - e2[0])
    dom_area = (d1_hi - d1_lo) * (d2_hi - d2_lo)
    expected = n_points * cell_area / dom_area

    valid = np.zeros((bins, bins), dtype=bool)
    for i in range(bins):
        for j in range(bins):
            c1 = np.linspace(e1[i], e1[i + 1], probe_n)
            c2 = np.linspace(e2[j], e2[j + 1], probe_n)
            p1, p2 = (g.ravel() for g in np.meshgrid(c1, c2))
            if (np.min(np.abs(np.abs(p1) - np.abs(p2))) < ray_margin
                    or np.min(np.abs(p2)) < ray_margin):
                continue
            if psi is None:
                q1, q2 = flow_x(-t, p1, p2)
            else:
                q1, q2 = flow_x_psi(psi, -t, p1, p2)
            if (q1.min() >= d1_lo + domain_margin and q1.max() <= d1_hi - domain_margin
                    and q2.min() >= d2_lo + domain_margin
                    and q2.max() <= d2_hi - domain_margin):
                valid[i, j] = True
    dev = np.abs(hist / expected - 1.0)[valid]
    return {
        "t": t,
        "n_points": n_points,
        "bins": bins,
        "window": window,
        "expected_per_cell": expected,
        "valid_cells": int(valid.sum()),
        "mean_abs_deviation": float(dev.mean()) if dev.size else float("nan"),
        "rms_deviation": float(np.sqrt(np.mean(dev ** 2))) if dev.size else float("nan"),
        "max_deviation": float(dev.max()) if dev.size else float("nan"),
    }
