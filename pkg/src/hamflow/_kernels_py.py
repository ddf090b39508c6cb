"""Pure-numpy kernels for the piecewise example field and its explicit flow.

This is the fallback backend; `hamflow._ext` implements the same three
entry points in Cython.  All arguments are 1-d contiguous float64 arrays
of equal length (``t`` included) and results are written into the
preallocated ``out`` arrays.

Geometry conventions (measure-zero boundary assignments):

* upper wedge  x2 > |x1|   -- rays of slope lam = x1/x2 in (-1, 1)
* lower wedge  x2 < -|x1|  -- rays of slope mu = x1/(-x2) in (-1, 1)
* east wedge   x1 >= |x2|  -- includes both diagonal rays and the origin
* west wedge   x1 <= -|x2| -- mirror image of the east wedge

The flow is exact: straight lines bouncing off the positive x1-axis in the
east/west wedges, radial collapse onto the origin in the upper wedge with
re-emission into the lower wedge along the ray prescribed by the
measure-preserving interval map (identity map = the distinguished flow).
"""
from __future__ import annotations

import numpy as np


def h_example(x1, x2, out):
    """Piecewise Hamiltonian; exact closed form, continuous off the origin."""
    ax1 = np.abs(x1)
    ax2 = np.abs(x2)
    wedge = ax1 <= ax2
    east = x1 > ax2
    np.copyto(out, -(x1 + ax2 - 1.0))           # west branch default
    out[east] = -(x1[east] - ax2[east] + 1.0)
    w = wedge & (ax2 > 0)
    out[w] = -x1[w] / ax2[w]
    out[wedge & (ax2 == 0)] = -1.0              # origin only; convention
    return out


def b_example(x1, x2, out1, out2):
    """Derived field b = (-dH/dx2, dH/dx1); NaN-flagged on the axis {x2=0}."""
    ax1 = np.abs(x1)
    ax2 = np.abs(x2)
    sx1 = np.sign(x1)
    sx2 = np.sign(x2)
    wedge = ax1 <= ax2
    with np.errstate(divide="ignore", invalid="ignore"):
        out1[...] = np.where(wedge, -sx2 * x1 / np.square(x2), -sx2 * sx1)
        out2[...] = np.where(wedge, -1.0 / ax2, -1.0)
    axis = x2 == 0
    out1[axis] = np.nan
    out2[axis] = np.nan
    return out1, out2


def iem_apply(lam, src_lo, src_hi, tgt_lo, tgt_hi, orient, out):
    """Apply the interval-exchange map piecewise; identity off all pieces."""
    np.copyto(out, lam)
    for k in range(len(src_lo)):
        m = (lam >= src_lo[k]) & (lam < src_hi[k])
        shifted = lam[m] - src_lo[k]
        if orient[k] > 0:
            out[m] = tgt_lo[k] + shifted
        else:
            out[m] = tgt_hi[k] - shifted
    return out


def flow_psi(t, x1, x2, src_lo, src_hi, tgt_lo, tgt_hi, orient, out1, out2):
    """Forward flow X_Psi(t, x) for t >= 0 elementwise.

    The origin-crossing continuation is computed from the well-conditioned
    combination 2t - x2**2 (no cancellation through the 1/x2**2 form).
    """
    ax1 = np.abs(x1)
    ax2 = np.abs(x2)
    upper = x2 > ax1
    lower = x2 < -ax1
    east = (x1 >= ax2) & ~upper & ~lower
    west = ~(upper | lower | east)

    # east/west wedges: unit-speed lines with a bounce on the x1-axis
    for side, sgn in ((east, 1.0), (west, -1.0)):
        u = x1[side] * sgn
        v = x2[side]
        ts = t[side]
        pre = (v >= 0) & (ts <= v)
        u_new = np.where(pre, u - ts, np.where(v >= 0, u - 2 * v + ts, u + ts))
        out1[side] = sgn * u_new
        out2[side] = v - ts

    # upper wedge: collapse along the ray, re-emerge with relabelled slope
    if np.any(upper):
        lam = x1[upper] / x2[upper]
        disc = 2.0 * t[upper] - np.square(x2[upper])
        pre = disc <= 0
        r = np.sqrt(np.abs(disc))
        lam_out = np.empty_like(lam)
        iem_apply(lam, src_lo, src_hi, tgt_lo, tgt_hi, orient, lam_out)
        out1[upper] = np.where(pre, lam * r, lam_out * r)
        out2[upper] = np.where(pre, r, -r)

    # lower wedge: radial escape along the ray
    if np.any(lower):
        mu = x1[lower] / (-x2[lower])
        r = np.sqrt(np.square(x2[lower]) + 2.0 * t[lower])
        out1[lower] = mu * r
        out2[lower] = -r
    return out1, out2
