"""Hamiltonians, divergence-free planar fields, and the local direction test.

The orientation convention is fixed once and for all:

    b = (-dH/dx2, +dH/dx1)

i.e. the field is the clockwise-perpendicular gradient of the stream
function H, so H increases at rate ``b . xi`` along the direction
``(xi2, -xi1)`` whenever ``b . xi > 0``.  All evaluators are pure and
vectorized over numpy arrays; nothing here holds mutable state.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .numerics import disk_samples, unit_directions


class DomainError(ValueError):
    """Evaluation requested outside a field's validity window."""


@dataclass(frozen=True)
class Window:
    """Axis-aligned validity rectangle."""

    x1_min: float
    x1_max: float
    x2_min: float
    x2_max: float

    def contains(self, x1, x2, pad: float = 1e-12) -> np.ndarray:
        return ((x1 >= self.x1_min - pad) & (x1 <= self.x1_max + pad)
                & (x2 >= self.x2_min - pad) & (x2 <= self.x2_max + pad))

    def require(self, x1, x2) -> None:
        if not np.all(self.contains(x1, x2)):
            raise DomainError(
                f"evaluation outside validity window "
                f"[{self.x1_min},{self.x1_max}]x[{self.x2_min},{self.x2_max}]")

    @staticmethod
    def square(half_width: float, center=(0.0, 0.0)) -> "Window":
        cx, cy = center
        return Window(cx - half_width, cx + half_width,
                      cy - half_width, cy + half_width)


@dataclass(frozen=True)
class ScalarField2D:
    """A stream function / Hamiltonian, analytic or grid-sampled.

    ``evaluator(x1, x2)`` returns H pointwise; ``grad`` is an optional
    closed-form gradient ``(x1, x2) -> (dH/dx1, dH/dx2)`` used by
    `derive_field` when available.
    """

    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    kind: str  # "analytic" | "grid"
    window: Window
    grad: Optional[Callable] = None
    spacing: Optional[float] = None

    def __call__(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        self.window.require(x1, x2)
        return self.evaluator(x1, x2)

    @classmethod
    def from_function(cls, f, window: Window, grad=None) -> "ScalarField2D":
        return cls(evaluator=f, kind="analytic", window=window, grad=grad)

    @classmethod
    def from_grid(cls, x: np.ndarray, y: np.ndarray,
                  values: np.ndarray) -> "ScalarField2D":
        """Bilinear interpolant of values[i, j] = H(x[i], y[j])."""
        interp = RegularGridInterpolator((x, y), values, method="linear",
                                         bounds_error=True)

        def ev(x1, x2):
            pts = np.stack([np.broadcast_arrays(x1, x2)[0],
                            np.broadcast_arrays(x1, x2)[1]], axis=-1)
            return interp(pts)

        h = float(min(np.min(np.diff(x)), np.min(np.diff(y))))
        win = Window(float(x[0]), float(x[-1]), float(y[0]), float(y[-1]))
        return cls(evaluator=ev, kind="grid", window=win, spacing=h)

    @classmethod
    def from_csv(cls, path) -> "ScalarField2D":
        """Load a grid field from CSV with header ``x,y,value``, row-major."""
        raw = np.genfromtxt(path, delimiter=",", names=True)
        x = np.unique(raw["x"])
        y = np.unique(raw["y"])
        if raw.size != x.size * y.size:
            raise ValueError("CSV table is not a full rectangular grid")
        vals = raw["value"].reshape(x.size, y.size)
        return cls.from_grid(x, y, vals)


@dataclass(frozen=True)
class PlanarVectorField:
    """Divergence-free planar field, optionally remembering its Hamiltonian."""

    evaluator: Callable[[np.ndarray, np.ndarray], tuple]
    window: Window
    source: Optional[ScalarField2D] = None

    def __call__(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        self.window.require(x1, x2)
        return self.evaluator(x1, x2)

    def at(self, pts):
        pts = np.asarray(pts, dtype=float)
        b1, b2 = self(pts[..., 0], pts[..., 1])
        return np.stack([b1, b2], axis=-1)


def derive_field(H: ScalarField2D, step: Optional[float] = None) -> PlanarVectorField:
    """Rotate the gradient of H into the divergence-free field b.

    Analytic fields with a known gradient use it exactly; otherwise the
    partials come from centered differences (one-sided at window edges).
    Grid fields difference at their own spacing.
    """
    if H.kind == "analytic" and H.grad is not None and step is None:
        def ev(x1, x2):
            d1, d2 = H.grad(x1, x2)
            return -np.asarray(d2, dtype=float), np.asarray(d1, dtype=float)

        return PlanarVectorField(evaluator=ev, window=H.window, source=H)

    h = step if step is not None else (H.spacing if H.kind == "grid" else 1e-6)
    win = H.window

    def partial(x1, x2, axis):
        # centered difference, clamped one-sided against the window edge
        lo = win.x1_min if axis == 0 else win.x2_min
        hi = win.x1_max if axis == 0 else win.x2_max
        c = x1 if axis == 0 else x2
        up = np.minimum(c + h, hi)
        dn = np.maximum(c - h, lo)
        if axis == 0:
            fu = H.evaluator(up, x2)
            fd = H.evaluator(dn, x2)
        else:
            fu = H.evaluator(x1, up)
            fd = H.evaluator(x1, dn)
        return (fu - fd) / (up - dn)

    def ev(x1, x2):
        return -partial(x1, x2, 1), partial(x1, x2, 0)

    return PlanarVectorField(evaluator=ev, window=win, source=H)


@dataclass(frozen=True)
class PxWitness:
    """Sampled witness of the uniform-direction condition at a point.

    ``b . xi >= alpha`` held at every sampled point of the ball of radius
    ``epsilon``; this is a sampled sufficient test, not a certificate of
    the almost-everywhere statement.
    """

    xi: np.ndarray
    alpha: float
    epsilon: float


class PointClass(Enum):
    P = "direction-condition"
    O = "vanishing"
    Z = "undecided"


def _sampled_field(b: PlanarVectorField, x, epsilon: float, n_samples: int):
    pts = disk_samples(x, epsilon, n_samples)
    b1, b2 = b(pts[:, 0], pts[:, 1])
    vals = np.column_stack([b1, b2])
    finite = np.all(np.isfinite(vals), axis=1)
    if np.mean(finite) < 0.9:
        raise DomainError("field evaluation failed on most of the sampled ball")
    return vals[finite]


def check_px(b: PlanarVectorField, x, epsilon: float, n_dirs: int = 64,
             n_samples: int = 256) -> Optional[PxWitness]:
    """Search for a direction xi with ``b . xi > 0`` on the sampled ball.

    Directions are the ``n_dirs`` uniformly spaced unit vectors; the winner
    maximizes the sampled minimum of ``b . xi`` and alpha is set to that
    minimum.  Returns None when every direction dips nonpositive.
    Non-finite field samples (flagged null sets) are ignored.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if n_dirs < 8:
        raise ValueError("need at least 8 directions")
    vals = _sampled_field(b, x, epsilon, n_samples)
    dirs = unit_directions(n_dirs)
    mins = (vals @ dirs.T).min(axis=0)
    k = int(np.argmax(mins))
    if mins[k] <= 0.0:
        return None
    return PxWitness(xi=dirs[k], alpha=float(mins[k]), epsilon=float(epsilon))


def classify_point(b: PlanarVectorField, x, epsilon: float, n_dirs: int = 64,
                   n_samples: int = 256, vanish_tol: float = 0.0) -> PointClass:
    """O if |b| <= vanish_tol on the sampled ball, else P on witness, else Z."""
    vals = _sampled_field(b, x, epsilon, n_samples)
    if np.max(np.hypot(vals[:, 0], vals[:, 1])) <= vanish_tol:
        return PointClass.O
    if check_px(b, x, epsilon, n_dirs=n_dirs, n_samples=n_samples) is not None:
        return PointClass.P
    return PointClass.Z
