"""Deterministic sampling, root bracketing and quadrature helpers.

Everything here is bit-reproducible: sampling uses unscrambled Halton
sequences, quadrature nodes are placed deterministically, and no routine
consumes a random seed.
"""
from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.stats import qmc


def halton(n: int, dim: int = 2) -> np.ndarray:
    """First ``n`` points of the unscrambled Halton sequence in [0,1)^dim."""
    return qmc.Halton(d=dim, scramble=False).random(n)


def halton_box(n: int, lo, hi) -> np.ndarray:
    """Halton points mapped affinely into the box [lo, hi] (per component)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    return lo + (hi - lo) * halton(n, dim=lo.size)


def disk_samples(center, radius: float, n: int) -> np.ndarray:
    """Area-uniform deterministic samples of the closed disk B(center, radius)."""
    u = halton(n, 2)
    r = radius * np.sqrt(u[:, 0])
    th = 2.0 * np.pi * u[:, 1]
    c = np.asarray(center, dtype=float)
    return np.column_stack([c[0] + r * np.cos(th), c[1] + r * np.sin(th)])


def unit_directions(n: int) -> np.ndarray:
    """``n`` unit vectors at uniformly spaced angles, starting from (1,0)."""
    th = 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([np.cos(th), np.sin(th)])


def bisect_increasing(f: Callable[[np.ndarray], np.ndarray], lo, hi,
                      target, xtol: float = 1e-12, max_iter: int = 200) -> np.ndarray:
    """Vectorized bisection for ``f`` strictly increasing per component.

    Solves f(c) = target on [lo, hi] componentwise.  Only requires
    continuity and strict monotonicity; converges at one bit per step.
    """
    lo = np.array(np.broadcast_arrays(np.asarray(lo, float), target)[0], copy=True)
    hi = np.array(np.broadcast_arrays(np.asarray(hi, float), target)[0], copy=True)
    target = np.asarray(target, dtype=float)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        below = f(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.max(hi - lo) <= xtol:
            break
    return 0.5 * (lo + hi)


def midpoint_nodes(a: float, b: float, n: int) -> np.ndarray:
    """Midpoints of ``n`` equal cells of [a, b]."""
    h = (b - a) / n
    return a + (np.arange(n) + 0.5) * h


def integrate_midpoint(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                       n: int) -> float:
    if b <= a:
        return 0.0
    x = midpoint_nodes(a, b, n)
    return float(np.sum(f(x))) * (b - a) / n


def integrate_richardson(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                         rel_tol: float = 1e-12, n0: int = 16,
                         max_doublings: int = 16) -> float:
    """Composite midpoint with Richardson extrapolation, refined until stable.

    The midpoint rule has an h^2 error expansion, so (4 M(h/2) - M(h)) / 3
    removes the leading term.  Refinement stops once two successive
    extrapolated values agree to ``rel_tol`` (relative to the integral scale).
    """
    if b <= a:
        return 0.0
    n = n0
    coarse = integrate_midpoint(f, a, b, n)
    prev = None
    for _ in range(max_doublings):
        n *= 2
        fine = integrate_midpoint(f, a, b, n)
        extrap = (4.0 * fine - coarse) / 3.0
        if prev is not None:
            scale = max(abs(extrap), abs(b - a), 1e-300)
            if abs(extrap - prev) <= rel_tol * scale:
                return extrap
        prev = extrap
        coarse = fine
    return prev if prev is not None else coarse


def cumulative_midpoint(g: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                        n: int) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative integral of ``g`` from ``a`` at the n+1 cell edges of [a, b].

    Uses per-cell midpoint values; never evaluates ``g`` at the endpoints,
    which lets integrands with removable 0/0 endpoints pass through.
    """
    h = (b - a) / n
    vals = g(midpoint_nodes(a, b, n))
    edges = np.linspace(a, b, n + 1)
    cum = np.empty(n + 1)
    cum[0] = 0.0
    np.cumsum(vals * h, out=cum[1:])
    return edges, cum


def tabulate_primitive(g: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                       rel_tol: float = 1e-9, n0: int = 64,
                       max_doublings: int = 12) -> tuple[np.ndarray, np.ndarray]:
    """Adaptive tabulation of the primitive G(x) = int_a^x g on cell edges.

    Doubles the resolution until the Richardson-extrapolated cumulative
    values at the coarse edges stabilize to ``rel_tol`` relative error; the
    returned tabulation carries the extrapolated (h^4-accurate) values.
    """
    if b <= a:
        raise ValueError("empty integration interval")
    n = n0
    edges, cum = cumulative_midpoint(g, a, b, n)
    for _ in range(max_doublings):
        edges2, cum2 = cumulative_midpoint(g, a, b, 2 * n)
        extrap = (4.0 * cum2[::2] - cum) / 3.0
        scale = max(abs(extrap[-1]), 1e-300)
        if np.max(np.abs(extrap - cum2[::2])) <= rel_tol * scale:
            return edges, extrap
        n *= 2
        edges, cum = edges2, cum2
    return edges, (4.0 * cum2[::2] - cum) / 3.0


class MonotoneTabulation:
    """Strictly increasing tabulated map with a monotone inverse.

    Both directions interpolate with PCHIP, which preserves monotonicity of
    the data; the inverse is the interpolant of the swapped tables.
    """

    def __init__(self, x: np.ndarray, y: np.ndarray):
        dx = np.diff(x)
        dy = np.diff(y)
        if np.any(dx <= 0) or np.any(dy <= 0):
            raise ValueError("tabulated map is not strictly increasing")
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self._fwd = PchipInterpolator(self.x, self.y, extrapolate=False)
        self._inv = PchipInterpolator(self.y, self.x, extrapolate=False)

    def __call__(self, x):
        return self._fwd(x)

    def inverse(self, y):
        return self._inv(y)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.x[0]), float(self.x[-1])

    @property
    def range(self) -> tuple[float, float]:
        return float(self.y[0]), float(self.y[-1])
