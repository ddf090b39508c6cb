"""Transport solutions evaluated along exact backward characteristics.

Solutions are represented by pull-back evaluators, never by PDE
discretization: values at time t are initial values transported along the
flow, so the essential range is preserved exactly at sample points.
Points whose backward characteristic leaves the construction's domain are
flagged with NaN.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class TransportSolution:
    """Evaluator (t, x) -> u(t, x) together with its initial datum.

    ``evaluate`` receives broadcast-ready float64 arrays (t, x1, x2) of a
    common shape and returns values of that shape, NaN where the solution
    is undefined.  At t=0 it must reproduce ``initial`` exactly.
    """

    evaluate: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    initial: Callable[[np.ndarray, np.ndarray], np.ndarray]
    provenance: str

    def at(self, t, x1, x2) -> np.ndarray:
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        x1, x2 = np.broadcast_arrays(x1, x2)
        tt = np.broadcast_to(np.asarray(t, dtype=float), x1.shape)
        return self.evaluate(np.ascontiguousarray(tt, dtype=float),
                             np.ascontiguousarray(x1, dtype=float),
                             np.ascontiguousarray(x2, dtype=float))

    def initial_values(self, x1, x2) -> np.ndarray:
        return self.initial(np.asarray(x1, dtype=float),
                            np.asarray(x2, dtype=float))


def translate_1d(w0: Callable, t: float) -> Callable:
    """Solution of the unit-speed 1D translation equation: z -> w0(z - t)."""

    def shifted(z):
        return w0(np.asarray(z, dtype=float) - t)

    return shifted


@dataclass(frozen=True)
class Renormalization:
    """A C^1 renormalization beta with its derivative evaluator."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]

    def __call__(self, s):
        return self.fn(np.asarray(s, dtype=float))


def make_clip(lo: float, hi: float) -> Renormalization:
    return Renormalization(
        name=f"clip[{lo},{hi}]",
        fn=lambda s: np.clip(s, lo, hi),
        deriv=lambda s: ((s > lo) & (s < hi)).astype(float),
    )


BETAS = {
    "id": Renormalization("id", lambda s: s, lambda s: np.ones_like(s)),
    "square": Renormalization("square", lambda s: s * s, lambda s: 2.0 * s),
    "arctan": Renormalization("arctan", np.arctan, lambda s: 1.0 / (1.0 + s * s)),
}


class RenormalizationFamily:
    """A finite list of renormalizations, sanity-checked on a sampled range."""

    def __init__(self, betas: Sequence[Renormalization]):
        self.betas = list(betas)

    @classmethod
    def from_names(cls, names: Sequence[str]) -> "RenormalizationFamily":
        out = []
        for name in names:
            if name == "clip":
                out.append(make_clip(-1.0, 1.0))
            elif name.startswith("clip["):
                lo, hi = (float(v) for v in name[5:-1].split(","))
                out.append(make_clip(lo, hi))
            else:
                out.append(BETAS[name])
        return cls(out)

    def validate(self, samples) -> None:
        """Check each derivative is finite and bounded on the sampled range."""
        s = np.asarray(samples, dtype=float).ravel()
        for beta in self.betas:
            d = beta.deriv(s)
            if not np.all(np.isfinite(d)):
                raise ValueError(f"beta {beta.name!r}: derivative not finite on range")

    def __iter__(self):
        return iter(self.betas)

    def __len__(self):
        return len(self.betas)


def renormalize(sol: TransportSolution, beta: Renormalization) -> TransportSolution:
    """Pointwise composition beta(u); the datum becomes beta(u0).

    Composition commutes with time evaluation exactly, and NaN exit flags
    propagate through beta untouched.
    """

    def ev(t, x1, x2):
        return beta.fn(sol.evaluate(t, x1, x2))

    def init(x1, x2):
        return beta.fn(sol.initial(x1, x2))

    return replace(sol, evaluate=ev, initial=init)


def constant_solution(c: float) -> TransportSolution:
    def ev(t, x1, x2):
        return np.full_like(x1, c, dtype=float)

    return TransportSolution(evaluate=ev,
                             initial=lambda x1, x2: np.full_like(
                                 np.asarray(x1, dtype=float), c),
                             provenance="classical")
