"""Named constructors for fields, potentials, initial data and interval maps.

Everything a JSON config can name lives here; analytic entries carry exact
gradients so derived fields are closed-form rather than differenced.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .counterexample import (MeasurePreservingMap, data_averaged, data_from_psi,
                             data_reflected, example_field, example_hamiltonian)
from .energy1d import Potential1D
from .fields import PlanarVectorField, ScalarField2D, Window, derive_field
from .transport import RenormalizationFamily


def _window_from(params: dict, default_half: float = 4.0) -> Window:
    if "window" in params:
        (a, b), (c, d) = params["window"]
        return Window(float(a), float(b), float(c), float(d))
    return Window.square(float(params.get("half_width", default_half)))


def _field_uniform(params: dict):
    c1 = float(params.get("b1", -1.0))
    c2 = float(params.get("b2", 0.0))
    win = _window_from(params)
    H = ScalarField2D.from_function(
        lambda x1, x2: c2 * x1 - c1 * x2, win,
        grad=lambda x1, x2: (np.full_like(np.asarray(x1, float), c2),
                             np.full_like(np.asarray(x2, float), -c1)))
    return H, derive_field(H)


def _field_linear(params: dict):
    a1 = float(params.get("a1", 0.0))
    a2 = float(params.get("a2", 1.0))
    win = _window_from(params)
    H = ScalarField2D.from_function(
        lambda x1, x2: a1 * x1 + a2 * x2, win,
        grad=lambda x1, x2: (np.full_like(np.asarray(x1, float), a1),
                             np.full_like(np.asarray(x2, float), a2)))
    return H, derive_field(H)


def _field_rotation(params: dict):
    win = _window_from(params)
    H = ScalarField2D.from_function(
        lambda x1, x2: 0.5 * (np.square(x1) + np.square(x2)), win,
        grad=lambda x1, x2: (np.asarray(x1, float), np.asarray(x2, float)))
    return H, derive_field(H)


def _field_shear(params: dict):
    win = _window_from(params)
    H = ScalarField2D.from_function(
        lambda x1, x2: np.asarray(x2, float) + np.square(x1), win,
        grad=lambda x1, x2: (2.0 * np.asarray(x1, float),
                             np.ones_like(np.asarray(x2, float))))
    return H, derive_field(H)


def _field_example(params: dict):
    half = float(params.get("half_width", 8.0))
    return example_hamiltonian(half), example_field(half)


FIELDS = {
    "uniform": _field_uniform,
    "linear": _field_linear,
    "rotation": _field_rotation,
    "shear": _field_shear,
    "example": _field_example,
}


def make_field(spec: dict) -> tuple[ScalarField2D, PlanarVectorField]:
    if "table" in spec:
        H = ScalarField2D.from_csv(spec["table"])
        return H, derive_field(H)
    name = spec.get("name")
    if name not in FIELDS:
        raise ValueError(f"unknown field {name!r}; known: {sorted(FIELDS)}")
    params = {k: v for k, v in spec.items() if k != "name"}
    return FIELDS[name](params)


POTENTIALS = {
    "harmonic": lambda: (lambda x: 0.5 * np.square(x), lambda x: np.asarray(x, float)),
    "absval": lambda: (np.abs, np.sign),
    "free": lambda: (lambda x: np.zeros_like(np.asarray(x, float)),
                     lambda x: np.zeros_like(np.asarray(x, float))),
    "quartic": lambda: (lambda x: 0.25 * np.asarray(x, float) ** 4,
                        lambda x: np.asarray(x, float) ** 3),
    "double_well": lambda: (lambda x: np.square(np.square(x) - 1.0),
                            lambda x: 4.0 * np.asarray(x, float)
                            * (np.square(x) - 1.0)),
}


def make_potential(spec: dict) -> Potential1D:
    if "table" in spec:
        return Potential1D.from_csv(spec["table"])
    name = spec.get("name")
    if name not in POTENTIALS:
        raise ValueError(f"unknown potential {name!r}; known: {sorted(POTENTIALS)}")
    v, dv = POTENTIALS[name]()
    win = spec.get("window", (-5.0, 5.0))
    return Potential1D(v=v, dv=dv, kind="analytic",
                       window=(float(win[0]), float(win[1])), name=name)


def _upper_wedge(x1, x2):
    return (np.asarray(x2, float) > np.abs(x1)).astype(float)


INITIAL_DATA = {
    "constant": lambda p: (lambda x1, x2: np.full_like(
        np.asarray(x1, float), float(p.get("value", 1.0)))),
    "x1": lambda p: (lambda x1, x2: np.asarray(x1, dtype=float)),
    "x2": lambda p: (lambda x1, x2: np.asarray(x2, dtype=float)),
    "x1_upper": lambda p: (lambda x1, x2: np.asarray(x1, float)
                           * _upper_wedge(x1, x2)),
    "ray_slope": lambda p: (lambda x1, x2: np.where(
        _upper_wedge(x1, x2) > 0,
        np.asarray(x1, float) / np.where(np.asarray(x2, float) != 0, x2, 1.0),
        0.0)),
}


def make_initial(spec: dict) -> Callable:
    name = spec.get("name")
    if name not in INITIAL_DATA:
        raise ValueError(f"unknown initial datum {name!r}; known: {sorted(INITIAL_DATA)}")
    return INITIAL_DATA[name]({k: v for k, v in spec.items() if k != "name"})


def make_psi(spec: dict) -> MeasurePreservingMap:
    if "pieces" in spec:
        return MeasurePreservingMap.from_pieces(
            [((p[0][0], p[0][1]), (p[1][0], p[1][1]), p[2]) for p in spec["pieces"]])
    name = spec.get("name", "identity")
    if name == "identity":
        return MeasurePreservingMap.identity()
    if name == "reflection":
        return MeasurePreservingMap.reflection()
    raise ValueError(f"unknown psi {name!r}; use identity, reflection, or pieces")


def make_u_tilde(spec: dict, u0: Callable) -> Callable | None:
    """The redistribution datum: same / reflected / averaged / from a psi map."""
    name = spec.get("name", "same")
    if name == "same":
        return None
    if name == "reflected":
        return data_reflected(u0)
    if name == "averaged":
        return data_averaged(u0)
    if name == "psi":
        return data_from_psi(u0, make_psi(spec.get("psi", {"name": "identity"})))
    raise ValueError(f"unknown u_tilde transform {name!r}")


def make_betas(names) -> RenormalizationFamily:
    return RenormalizationFamily.from_names(list(names))
