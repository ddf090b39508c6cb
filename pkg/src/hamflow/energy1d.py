"""Phase-plane machinery for H(x, y) = y^2/2 + V(x).

Level sets project to sublevel intervals of the potential; on each
interval the traversal time F(x) = int dx / sqrt(2 (E - V(x))) is an
increasing map whose endpoint square-root singularity is removed by the
substitution x = b - s^2 (valid at regular turning points, where the
one-sided slope of V stays away from zero).  A closed orbit is the
interval's double cover: a circle of circumference 2 l obtained by gluing
the two velocity sheets at both turning points, on which the flow is the
unit-speed rotation.  Degenerate contact points (vanishing slope at an
endpoint) break uniqueness of continuation and are refused rather than
integrated through.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .numerics import MonotoneTabulation, integrate_midpoint, tabulate_primitive


class EnergyMismatchError(ValueError):
    """Phase point does not lie on the slice's energy level."""


class NonIntegrableIntervalError(ValueError):
    """Turning-point quadrature refused at an irregular endpoint."""


@dataclass(frozen=True)
class Potential1D:
    """1D potential with optional analytic derivative.

    ``v`` must accept numpy arrays.  Table potentials interpolate linearly
    and differentiate by difference quotients at the table spacing.
    """

    v: Callable[[np.ndarray], np.ndarray]
    dv: Optional[Callable[[np.ndarray], np.ndarray]] = None
    kind: str = "analytic"
    window: tuple[float, float] = (-5.0, 5.0)
    name: str = ""

    def __call__(self, x):
        return np.asarray(self.v(np.asarray(x, dtype=float)), dtype=float)

    def slope(self, x):
        if self.dv is not None:
            return np.asarray(self.dv(np.asarray(x, dtype=float)), dtype=float)
        h = 1e-6
        x = np.asarray(x, dtype=float)
        return (self(x + h) - self(x - h)) / (2 * h)

    @classmethod
    def from_table(cls, x: np.ndarray, values: np.ndarray,
                   name: str = "table") -> "Potential1D":
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=float)

        def v(q):
            return np.interp(q, x, values)

        return cls(v=v, kind="table", window=(float(x[0]), float(x[-1])),
                   name=name)

    @classmethod
    def from_csv(cls, path) -> "Potential1D":
        raw = np.genfromtxt(path, delimiter=",", names=True)
        return cls.from_table(raw["x"], raw["v"])


def check_confinement(V: Potential1D, n_blocks: int = 8,
                      block_n: int = 512, ratio_threshold: float = 0.6) -> bool:
    """Numerical test that [max(1, -V)]^{-1/2} fails to be integrable outward.

    Integrates over dyadic blocks extending past both window ends; the
    integral diverges (no finite-time escape to infinity) when the block
    contributions do not decay geometrically.  A heuristic flag, not a
    certificate.
    """

    def g(x):
        return 1.0 / np.sqrt(np.maximum(1.0, -V.v(np.asarray(x, dtype=float))))

    for sign in (1.0, -1.0):
        edge = V.window[1] if sign > 0 else V.window[0]
        r0 = max(1.0, abs(edge))
        prev = None
        for k in range(n_blocks):
            lo, hi = r0 * 2 ** k, r0 * 2 ** (k + 1)
            if sign > 0:
                block = integrate_midpoint(g, lo, hi, block_n)
            else:
                block = integrate_midpoint(g, -hi, -lo, block_n)
            if prev is not None and block < ratio_threshold * prev:
                return False
            prev = block
    return True


@dataclass
class SliceInterval:
    a: float
    b: float
    a_open: bool = False      # endpoint is the window edge, not a turning point
    b_open: bool = False
    a_regular: Optional[bool] = None
    b_regular: Optional[bool] = None


@dataclass
class EnergySlice:
    """Sublevel decomposition {V < E} inside the window, with lazy per-interval data."""

    E: float
    window: tuple[float, float]
    intervals: list[SliceInterval]
    potential: Potential1D
    _time_params: dict = field(default_factory=dict, repr=False)

    def locate(self, x: float, pad: float = 1e-9) -> int:
        for i, iv in enumerate(self.intervals):
            if iv.a - pad <= x <= iv.b + pad:
                return i
        raise EnergyMismatchError(f"x={x} lies on no sublevel interval of E={self.E}")

    def dump_csv(self, path) -> None:
        rows = []
        for n, iv in enumerate(self.intervals):
            l = self._time_params[n].l if n in self._time_params else np.nan
            rows.append((n, iv.a, iv.b, l,
                         int(bool(iv.a_regular)) if not iv.a_open else -1,
                         int(bool(iv.b_regular)) if not iv.b_open else -1))
        np.savetxt(path, np.array(rows), delimiter=",", comments="",
                   header="n,a_n,b_n,l_n,a_flag,b_flag")


def energy_slice(V: Potential1D, E: float, window=None, scan_n: int = 4096,
                 root_tol: float = 1e-12) -> EnergySlice:
    """Bracket the sublevel set on a scan grid and polish roots by bisection."""
    lo, hi = window if window is not None else V.window
    xs = np.linspace(lo, hi, scan_n + 1)
    below = V(xs) < E
    intervals: list[SliceInterval] = []
    if not np.any(below):
        return EnergySlice(E=E, window=(lo, hi), intervals=[], potential=V)
    idx = np.flatnonzero(below)
    runs = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    for run in runs:
        i0, i1 = int(run[0]), int(run[-1])
        if i0 == 0:
            a, a_open = lo, True
        else:
            a = _bisect_root(V, E, xs[i0 - 1], xs[i0], root_tol)
            a_open = False
        if i1 == scan_n:
            b, b_open = hi, True
        else:
            b = _bisect_root(V, E, xs[i1], xs[i1 + 1], root_tol)
            b_open = False
        intervals.append(SliceInterval(a=float(a), b=float(b),
                                       a_open=a_open, b_open=b_open))
    return EnergySlice(E=E, window=(lo, hi), intervals=intervals, potential=V)


def _bisect_root(V, E, lo, hi, tol):
    # V - E changes sign on [lo, hi]; plain bisection (continuity only)
    flo = float(V(lo) - E)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = float(V(mid) - E)
        if flo * fm <= 0:
            hi = mid
        else:
            lo, flo = mid, fm
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


def free_zone_check(V: Potential1D, slc: EnergySlice, delta0: Optional[float] = None,
                    n_shrink: int = 6, slope_tol: float = 1e-4,
                    scan_m: int = 64) -> list[tuple[Optional[bool], Optional[bool]]]:
    """Flag endpoints where the slice has an isolating free zone.

    A finite endpoint is regular when (i) the potential stays above E on a
    scanned outer one-sided neighbourhood, and (ii) the chord slope
    (V(b + d) - V(b)) / d keeps a consistent sign bounded away from zero
    through a geometric shrink schedule (a Lebesgue-point style check).
    Ambiguity is resolved toward irregular.  Window-edge endpoints get None.
    """
    E = slc.E
    out = []
    for k, iv in enumerate(slc.intervals):
        length = iv.b - iv.a
        gap_left = iv.a - (slc.intervals[k - 1].b if k > 0 else slc.window[0])
        gap_right = (slc.intervals[k + 1].a if k + 1 < len(slc.intervals)
                     else slc.window[1]) - iv.b
        flags = []
        for endpoint, side, gap in ((iv.a, -1.0, gap_left), (iv.b, +1.0, gap_right)):
            is_open = iv.a_open if side < 0 else iv.b_open
            if is_open:
                flags.append(None)
                continue
            d0 = delta0 if delta0 is not None else 0.25 * min(length, max(gap, 1e-12))
            d0 = max(d0, 1e-9)
            xs_out = endpoint + side * np.linspace(d0 / scan_m, d0, scan_m)
            outer_ok = bool(np.all(V(xs_out) > E - 1e-12))
            deltas = d0 * 0.5 ** np.arange(n_shrink)
            outer_slopes = side * (V(endpoint + side * deltas) - E) / deltas
            inner_slopes = side * (E - V(endpoint - side * deltas)) / deltas
            slopes_ok = bool(np.all(outer_slopes > slope_tol)
                             and np.all(inner_slopes > slope_tol))
            flags.append(outer_ok and slopes_ok)
        iv.a_regular, iv.b_regular = flags
        out.append((flags[0], flags[1]))
    return out


@dataclass(frozen=True)
class TimeParam:
    """Tabulated traversal-time map F on one sublevel interval; F(a) = 0."""

    a: float
    b: float
    E: float
    l: float
    a_open: bool
    b_open: bool
    _mid: float
    _left: MonotoneTabulation = field(repr=False)   # in s = sqrt(x - a) or in x
    _right: MonotoneTabulation = field(repr=False)  # in s = sqrt(b - x) or in x
    _left_turning: bool = True
    _right_turning: bool = True

    def F(self, x):
        x = np.asarray(x, dtype=float)
        xl = np.clip(x, self.a, self._mid)
        xr = np.clip(x, self._mid, self.b)
        if self._left_turning:
            left_val = self._left(np.sqrt(xl - self.a))
        else:
            left_val = self._left(xl)
        if self._right_turning:
            right_val = self.l - self._right(np.sqrt(self.b - xr))
        else:
            right_val = self._t_mid + self._right(xr)
        return np.where(x <= self._mid, left_val, right_val)

    @property
    def _t_mid(self) -> float:
        return float(self._left.y[-1])

    def F_inv(self, tau):
        tau = np.asarray(tau, dtype=float)
        t_mid = self._t_mid
        tau_c = np.clip(tau, 0.0, self.l)
        if self._left_turning:
            s = self._left.inverse(np.clip(tau_c, 0.0, t_mid))
            left_val = self.a + s * s
        else:
            left_val = self._left.inverse(np.clip(tau_c, 0.0, t_mid))
        if self._right_turning:
            s = self._right.inverse(np.clip(self.l - tau_c, 0.0, self.l - t_mid))
            right_val = self.b - s * s
        else:
            right_val = self._right.inverse(np.clip(tau_c - t_mid, 0.0, self.l - t_mid))
        return np.where(tau_c <= t_mid, left_val, right_val)


def time_param(V: Potential1D, slc: EnergySlice, index: int,
               rel_tol: float = 1e-9) -> TimeParam:
    """Adaptive tabulation of F with turning-point substitution at closed ends.

    Finite endpoints must have passed the free-zone check; an irregular
    endpoint makes 1/sqrt(2(E-V)) non-integrable (or the continuation
    ambiguous) and raises NonIntegrableIntervalError instead of silently
    producing a divergent traversal time.  Results are memoized per slice.
    """
    if index in slc._time_params:
        return slc._time_params[index]
    iv = slc.intervals[index]
    if iv.a_regular is None and iv.b_regular is None and not (iv.a_open or iv.b_open):
        free_zone_check(V, slc)
    for fin_open, reg, name in ((iv.a_open, iv.a_regular, "left"),
                                (iv.b_open, iv.b_regular, "right")):
        if not fin_open and reg is False:
            raise NonIntegrableIntervalError(
                f"interval {index}: irregular {name} endpoint; "
                f"traversal time not defined")
        if not fin_open and reg is None:
            free_zone_check(V, slc)
            iv = slc.intervals[index]
            if (iv.a_regular is False) or (iv.b_regular is False):
                raise NonIntegrableIntervalError(
                    f"interval {index}: irregular endpoint after check")
    E = slc.E
    mid = 0.5 * (iv.a + iv.b)

    def speed(x):
        val = 2.0 * (E - V.v(x))
        if np.any(val <= 0):
            raise NonIntegrableIntervalError(
                f"interval {index}: E - V not positive inside; root polish failed")
        return np.sqrt(val)

    if iv.a_open:
        edges, cum = tabulate_primitive(lambda x: 1.0 / speed(x), iv.a, mid,
                                        rel_tol=rel_tol)
        left = MonotoneTabulation(edges, cum)
        left_turning = False
    else:
        s_max = np.sqrt(mid - iv.a)

        def g_left(s):
            return 2.0 * s / speed(iv.a + s * s)

        edges, cum = tabulate_primitive(g_left, 0.0, float(s_max), rel_tol=rel_tol)
        left = MonotoneTabulation(edges, cum)
        left_turning = True
    t_mid = float(left.y[-1])
    if iv.b_open:
        edges, cum = tabulate_primitive(lambda x: 1.0 / speed(x), mid, iv.b,
                                        rel_tol=rel_tol)
        right = MonotoneTabulation(edges, cum)
        right_turning = False
        l = t_mid + float(right.y[-1])
    else:
        s_max = np.sqrt(iv.b - mid)

        def g_right(s):
            return 2.0 * s / speed(iv.b - s * s)

        edges, cum = tabulate_primitive(g_right, 0.0, float(s_max), rel_tol=rel_tol)
        right = MonotoneTabulation(edges, cum)
        right_turning = True
        l = t_mid + float(right.y[-1])
    tp = TimeParam(a=iv.a, b=iv.b, E=E, l=l, a_open=iv.a_open, b_open=iv.b_open,
                   _mid=mid, _left=left, _right=right,
                   _left_turning=left_turning, _right_turning=right_turning)
    slc._time_params[index] = tp
    return tp


@dataclass(frozen=True)
class PhasePoint:
    x: float
    y: float

    def energy(self, V: Potential1D) -> float:
        return 0.5 * self.y * self.y + float(V(self.x))

    @property
    def branch(self) -> int:
        return 1 if self.y >= 0 else -1


def orbit_flow(slc: EnergySlice, p: PhasePoint, t: float,
               energy_tol: float = 1e-9) -> Optional[PhasePoint]:
    """Advance a phase point by time t along its glued level-set orbit.

    Closed orbits rotate on the circle of circumference 2 l; intervals with
    window-edge ends reflect only at finite regular turning points and
    return None once the trajectory exits the window within |t|.
    """
    V = slc.potential
    E = p.energy(V)
    if abs(E - slc.E) > energy_tol * max(1.0, abs(slc.E)):
        raise EnergyMismatchError(
            f"phase point energy {E} != slice energy {slc.E}")
    idx = slc.locate(p.x)
    tp = time_param(V, slc, idx)
    E = tp.E
    fx = float(tp.F(np.clip(p.x, tp.a, tp.b)))
    closed_left = not tp.a_open
    closed_right = not tp.b_open

    if closed_left and closed_right:
        z0 = fx if p.y > 0 else (2 * tp.l - fx if p.y < 0
                                 else (0.0 if fx < 0.5 * tp.l else tp.l))
        z = np.mod(z0 + t, 2 * tp.l)
        if z <= tp.l:
            x_new = float(tp.F_inv(z))
            y_new = np.sqrt(max(2 * (E - float(V(x_new))), 0.0))
        else:
            x_new = float(tp.F_inv(2 * tp.l - z))
            y_new = -np.sqrt(max(2 * (E - float(V(x_new))), 0.0))
        return PhasePoint(x=x_new, y=float(y_new))

    if closed_left:                      # reflect at a only: w<0 lower, w>0 upper
        w0 = fx if p.y > 0 else -fx
        w = w0 + t
        if not (-tp.l < w < tp.l):
            return None
        x_new = float(tp.F_inv(abs(w)))
        y_sign = 1.0 if w > 0 else -1.0
    elif closed_right:                   # reflect at b only: w<0 upper, w>0 lower
        w0 = fx - tp.l if p.y > 0 else tp.l - fx
        w = w0 + t
        if not (-tp.l < w < tp.l):
            return None
        x_new = float(tp.F_inv(tp.l - abs(w)))
        y_sign = 1.0 if w < 0 else -1.0
    else:                                # free passage, two independent sheets
        z = fx + t if p.y >= 0 else fx - t
        if not (0.0 < z < tp.l):
            return None
        x_new = float(tp.F_inv(z))
        y_sign = 1.0 if p.y >= 0 else -1.0
    y_new = y_sign * np.sqrt(max(2 * (E - float(V(x_new))), 0.0))
    return PhasePoint(x=x_new, y=float(y_new))


def solve_classical_transport(V: Potential1D, u0: Callable, t: float,
                              x_pts, y_pts, window=None,
                              pool_tol: float = 1e-12) -> np.ndarray:
    """u(t, x, y) = u0 at the backward orbit point; NaN where it exits.

    Evaluation points are grouped by energy (pooled at ``pool_tol``) so
    each distinct level builds its slice and traversal-time tables once.
    """
    x_pts = np.asarray(x_pts, dtype=float).ravel()
    y_pts = np.asarray(y_pts, dtype=float).ravel()
    E = 0.5 * y_pts ** 2 + V(x_pts)
    keys = np.round(E / pool_tol).astype(np.int64)
    out = np.full(x_pts.shape, np.nan)
    slices: dict[int, EnergySlice] = {}
    for i in range(x_pts.size):
        key = int(keys[i])
        if key not in slices:
            slices[key] = energy_slice(V, float(E[i]), window=window)
        slc = slices[key]
        try:
            back = orbit_flow(slc, PhasePoint(x=float(x_pts[i]), y=float(y_pts[i])),
                              -t)
        except (EnergyMismatchError, NonIntegrableIntervalError):
            continue
        if back is not None:
            out[i] = u0(back.x, back.y)
    return out
