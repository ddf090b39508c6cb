"""Local energy coordinates around a point with a direction witness.

The chart maps x in a frame square U (side 2*eta, axes xi and
n = (xi2, -xi1)) to Phi(x) = ((x - x0).xi, H(x)).  Along n the Hamiltonian
increases at rate b.xi >= alpha, so each vertical fiber of U maps
monotonically onto an interval and Phi inverts by bisection, which needs
nothing beyond continuity and strict monotonicity.  The image V is stored
through its sampled boundary profiles; the Jacobian profile J = (b.xi) on
Phi^{-1} is bounded below by alpha, so fiber primitives of 1/J never see a
singularity (turning points live elsewhere, in the classical-Hamiltonian
machinery).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .fields import DomainError, PlanarVectorField, PxWitness, ScalarField2D
from .numerics import (MonotoneTabulation, bisect_increasing, midpoint_nodes,
                       tabulate_primitive)
from .transport import TransportSolution


class ChartError(ValueError):
    """Chart construction failed (unsound witness at sampling resolution)."""


@dataclass(frozen=True)
class Chart:
    center: np.ndarray
    xi: np.ndarray
    eta: float
    alpha: float
    hamiltonian: ScalarField2D
    field: PlanarVectorField
    y1_grid: np.ndarray
    lower_profile: np.ndarray
    upper_profile: np.ndarray
    inv_tol: float = 1e-12

    @property
    def normal(self) -> np.ndarray:
        """Direction of increase of H: the clockwise rotation of xi."""
        return np.array([self.xi[1], -self.xi[0]])

    # frame <-> plane
    def frame_to_xy(self, y1, c):
        y1 = np.asarray(y1, dtype=float)
        c = np.asarray(c, dtype=float)
        n = self.normal
        return (self.center[0] + y1 * self.xi[0] + c * n[0],
                self.center[1] + y1 * self.xi[1] + c * n[1])

    def xy_to_frame(self, x1, x2):
        d1 = np.asarray(x1, dtype=float) - self.center[0]
        d2 = np.asarray(x2, dtype=float) - self.center[1]
        n = self.normal
        return d1 * self.xi[0] + d2 * self.xi[1], d1 * n[0] + d2 * n[1]

    def forward(self, x1, x2):
        """Phi(x) = ((x - x0).xi, H(x)); x must lie in the frame square U."""
        y1, c = self.xy_to_frame(x1, x2)
        pad = 1e-9 * self.eta
        if np.any(np.abs(y1) > self.eta + pad) or np.any(np.abs(c) > self.eta + pad):
            raise DomainError("point outside the chart square U")
        return y1, self.hamiltonian(*self.frame_to_xy(y1, c))

    def invert(self, y1, y2):
        """Phi^{-1} by bisection along the fiber; exact to inv_tol in c."""
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)

        def h_of_c(c):
            return self.hamiltonian.evaluator(*self.frame_to_xy(y1, c))

        c = bisect_increasing(h_of_c, -self.eta, self.eta, y2, xtol=self.inv_tol)
        return self.frame_to_xy(y1, c)

    def profiles(self, y1):
        """Linearly interpolated boundary profiles of V at raster y1."""
        lo = np.interp(y1, self.y1_grid, self.lower_profile)
        hi = np.interp(y1, self.y1_grid, self.upper_profile)
        return lo, hi

    def contains(self, y1, y2):
        """Membership in V, shrunk inward by one interpolation cell."""
        cell = self.y1_grid[1] - self.y1_grid[0]
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        inside = np.abs(y1) <= self.eta - cell
        lo = np.maximum.reduce([self.profiles(y1 - cell)[0],
                                self.profiles(y1)[0],
                                self.profiles(y1 + cell)[0]])
        hi = np.minimum.reduce([self.profiles(y1 - cell)[1],
                                self.profiles(y1)[1],
                                self.profiles(y1 + cell)[1]])
        return inside & (y2 > lo) & (y2 < hi)

    def jacobian(self, y1, y2):
        """J = (b . xi) evaluated at Phi^{-1}(y1, y2)."""
        x1, x2 = self.invert(y1, y2)
        b1, b2 = self.field(x1, x2)
        return b1 * self.xi[0] + b2 * self.xi[1]

    def dump_csv(self, path) -> None:
        data = np.column_stack([self.y1_grid, self.lower_profile,
                                self.upper_profile])
        np.savetxt(path, data, delimiter=",", comments="",
                   header="y1,lower_profile,upper_profile")


def build_chart(H: ScalarField2D, x0, witness: PxWitness, eta: float,
                b: Optional[PlanarVectorField] = None, n_profile: int = 257,
                n_check: int = 33) -> Chart:
    """Construct and verify the chart at x0 from a direction witness.

    Requires eta <= epsilon/sqrt(2) so the frame square sits inside the
    witness ball.  Verifies fiber monotonicity on a subsample and the
    profile gap >= 2*eta*alpha; a violation means the witness was unsound
    at the sampling resolution and raises ChartError naming the fiber.
    """
    from .fields import derive_field

    x0 = np.asarray(x0, dtype=float)
    if eta <= 0:
        raise ValueError("eta must be positive")
    if eta > witness.epsilon / np.sqrt(2.0) * (1 + 1e-12):
        raise ValueError("eta too large for the witness ball: need eta <= eps/sqrt(2)")
    if b is None:
        b = derive_field(H)
    xi = np.asarray(witness.xi, dtype=float)
    nrm = np.array([xi[1], -xi[0]])

    def to_xy(y1, c):
        return (x0[0] + y1 * xi[0] + c * nrm[0], x0[1] + y1 * xi[1] + c * nrm[1])

    y1_grid = np.linspace(-eta, eta, n_profile)
    lo = H(*to_xy(y1_grid, np.full(n_profile, -eta)))
    hi = H(*to_xy(y1_grid, np.full(n_profile, eta)))
    gap = hi - lo
    if np.min(gap) < 2 * eta * witness.alpha * (1 - 1e-9):
        k = int(np.argmin(gap))
        raise ChartError(
            f"profile gap {gap[k]:.3e} < 2*eta*alpha at y1={y1_grid[k]:.6g}")
    # strict monotonicity of H along a subsample of fibers
    c_grid = np.linspace(-eta, eta, n_check)
    for y1 in np.linspace(-eta, eta, 9):
        vals = H(*to_xy(np.full(n_check, y1), c_grid))
        if np.any(np.diff(vals) <= 0):
            raise ChartError(f"H not strictly increasing on the fiber y1={y1:.6g}")
    return Chart(center=x0, xi=xi, eta=float(eta), alpha=float(witness.alpha),
                 hamiltonian=H, field=b, y1_grid=y1_grid,
                 lower_profile=lo, upper_profile=hi)


@dataclass(frozen=True)
class CovResult:
    pullback: float   # integral over U of f(Phi) |DPhi|
    direct: float     # integral over V of f
    difference: float


def cov_integral(chart: Chart, f: Callable, n: int = 128) -> CovResult:
    """Both sides of the change-of-variables identity at resolution n.

    The left side integrates f(Phi(x)) |DPhi(x)| = f(Phi(x)) (b.xi)(x) over
    the frame square by tensor midpoint; the right side integrates f over V
    using the exact fiber bounds.  Their difference is a diagnostic, not an
    exception: it must shrink at the quadrature's order as n grows.
    """
    eta = chart.eta
    nodes = midpoint_nodes(-eta, eta, n)
    w = 2 * eta / n
    Y1, C = np.meshgrid(nodes, nodes, indexing="ij")
    X1, X2 = chart.frame_to_xy(Y1, C)
    hvals = chart.hamiltonian(X1, X2)
    b1, b2 = chart.field(X1, X2)
    jac = b1 * chart.xi[0] + b2 * chart.xi[1]
    lhs = float(np.sum(f(Y1, hvals) * np.abs(jac))) * w * w

    lo = chart.hamiltonian(*chart.frame_to_xy(nodes, np.full(n, -eta)))
    hi = chart.hamiltonian(*chart.frame_to_xy(nodes, np.full(n, eta)))
    rhs = 0.0
    for i in range(n):
        y2 = midpoint_nodes(lo[i], hi[i], n)
        rhs += np.sum(f(np.full(n, nodes[i]), y2)) * (hi[i] - lo[i]) / n
    rhs = float(rhs) * w
    return CovResult(pullback=lhs, direct=rhs, difference=abs(lhs - rhs))


@dataclass(frozen=True)
class FiberReduction:
    """Time parameterization of one fiber of V: F' = 1/J, F(a) = 0."""

    level: float
    a: float
    b: float
    F: MonotoneTabulation = field(repr=False)

    @property
    def span(self) -> float:
        return float(self.F.y[-1])

    def dump_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.F.x, self.F.y]),
                   delimiter=",", comments="", header="x,F")


def fiber_intervals(chart: Chart, y2: float) -> list[tuple[float, float]]:
    """Maximal open intervals of the horizontal fiber of V at height y2."""
    g = chart.y1_grid
    lo, hi = chart.lower_profile, chart.upper_profile
    inside = (lo < y2) & (y2 < hi)
    if not np.any(inside):
        return []
    out = []
    idx = np.flatnonzero(inside)
    runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    for run in runs:
        i0, i1 = run[0], run[-1]
        a = g[i0] if i0 == 0 else _profile_crossing(g, lo, hi, i0 - 1, y2)
        b = g[i1] if i1 == len(g) - 1 else _profile_crossing(g, lo, hi, i1, y2)
        out.append((float(a), float(b)))
    return out


def _profile_crossing(g, lo, hi, i, y2):
    """Linear crossing of a boundary profile with height y2 on cell [i, i+1]."""
    for prof in (lo, hi):
        f0, f1 = prof[i] - y2, prof[i + 1] - y2
        if f0 == 0.0:
            return g[i]
        if f0 * f1 < 0:
            return g[i] + (g[i + 1] - g[i]) * f0 / (f0 - f1)
    # fell back: the run ended because the fiber left through a grid node
    return g[i + 1]


def reduce_fiber(chart: Chart, y2: float, rel_tol: float = 1e-9,
                 segment: Optional[int] = None) -> FiberReduction:
    """Tabulate the primitive F of 1/J on the fiber at height y2.

    1/J <= 1/alpha is bounded here, so a plain adaptive midpoint tabulation
    with Richardson control reaches the target without substitutions.
    ``segment`` selects among multiple maximal intervals; with None the
    fiber must be a single interval.
    """
    intervals = fiber_intervals(chart, y2)
    if not intervals:
        raise ValueError(f"empty fiber at level {y2}")
    if segment is None:
        if len(intervals) > 1:
            raise ValueError(
                f"fiber at level {y2} has {len(intervals)} intervals; pass segment=")
        segment = 0
    a, b = intervals[segment]

    def inv_j(s):
        return 1.0 / chart.jacobian(s, np.full_like(s, y2))

    edges, cum = tabulate_primitive(inv_j, a, b, rel_tol=rel_tol)
    return FiberReduction(level=float(y2), a=a, b=b,
                          F=MonotoneTabulation(edges, cum))


def fiber_flow(red: FiberReduction, x, t):
    """F^{-1}(F(x) + t), or None/NaN where the trajectory exits the fiber."""
    scalar = np.isscalar(x) and np.isscalar(t)
    z = np.asarray(red.F(np.asarray(x, dtype=float)), dtype=float) + t
    lo, hi = red.F.range
    ok = (z > lo) & (z < hi)
    out = np.where(ok, red.F.inverse(np.clip(z, lo, hi)), np.nan)
    if scalar:
        return float(out) if np.isfinite(out) else None
    return out


def chart_pullback_solution(chart: Chart, u0: Callable,
                            rel_tol: float = 1e-9,
                            level_tol: float = 1e-12) -> TransportSolution:
    """Transport solution on the chart by backward fiber flow.

    u(t, x) = u0(Phi^{-1}(F^{-1}(F(y1) - t), y2)) with (y1, y2) = Phi(x);
    NaN where the backward trajectory exits the chart within time t.
    Fiber reductions are cached per level (pooled at ``level_tol``).
    """
    cache: dict[tuple[int, int], FiberReduction] = {}

    def reduction_for(level: float, y1: float) -> Optional[FiberReduction]:
        key0 = int(round(level / level_tol))
        for seg in range(8):
            red = cache.get((key0, seg))
            if red is None:
                intervals = fiber_intervals(chart, level)
                if seg >= len(intervals):
                    return None
                red = reduce_fiber(chart, level, rel_tol=rel_tol, segment=seg)
                cache[(key0, seg)] = red
            if red.a <= y1 <= red.b:
                return red
        return None

    def ev(t, x1, x2):
        y1, y2 = chart.forward(x1, x2)
        flat1 = np.ravel(y1)
        flat2 = np.ravel(y2)
        flatt = np.ravel(np.broadcast_to(t, np.shape(y1)))
        fx1 = np.ravel(np.broadcast_to(x1, np.shape(y1)))
        fx2 = np.ravel(np.broadcast_to(x2, np.shape(y1)))
        out = np.full(flat1.shape, np.nan)
        for i in range(flat1.size):
            if flatt[i] == 0.0:
                out[i] = u0(fx1[i], fx2[i])   # exact reproduction of the datum
                continue
            red = reduction_for(flat2[i], flat1[i])
            if red is None:
                continue
            z = red.F(flat1[i]) - flatt[i]
            lo, hi = red.F.range
            if not (lo < z < hi):
                continue
            xb = red.F.inverse(z)
            px, py = chart.invert(xb, flat2[i])
            out[i] = u0(px, py)
        return out.reshape(np.shape(y1))

    def init(x1, x2):
        return u0(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))

    return TransportSolution(evaluate=ev, initial=init, provenance="chart-pullback")
