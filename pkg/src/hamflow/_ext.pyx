# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the piecewise example field and its explicit flow.

Mirrors `hamflow._kernels_py` function for function; see that module for
the geometry conventions.  Selected automatically at import by
`hamflow._kernels` when the extension is built.
"""
from libc.math cimport sqrt, fabs, NAN


cdef inline double _iem_one(double lam, const double[::1] src_lo,
                            const double[::1] src_hi, const double[::1] tgt_lo,
                            const double[::1] tgt_hi, const double[::1] orient,
                            Py_ssize_t npieces) noexcept nogil:
    cdef Py_ssize_t k
    for k in range(npieces):
        if src_lo[k] <= lam < src_hi[k]:
            if orient[k] > 0:
                return tgt_lo[k] + (lam - src_lo[k])
            return tgt_hi[k] - (lam - src_lo[k])
    return lam


def h_example(const double[::1] x1, const double[::1] x2, double[::1] out):
    cdef Py_ssize_t i, n = x1.shape[0]
    cdef double xi, yi, axi, ayi
    with nogil:
        for i in range(n):
            xi = x1[i]
            yi = x2[i]
            axi = fabs(xi)
            ayi = fabs(yi)
            if axi <= ayi:
                if ayi == 0.0:
                    out[i] = -1.0
                else:
                    out[i] = -xi / ayi
            elif xi > 0.0:
                out[i] = -(xi - ayi + 1.0)
            else:
                out[i] = -(xi + ayi - 1.0)
    return out


def b_example(const double[::1] x1, const double[::1] x2,
              double[::1] out1, double[::1] out2):
    cdef Py_ssize_t i, n = x1.shape[0]
    cdef double xi, yi, axi, ayi, sx, sy
    with nogil:
        for i in range(n):
            xi = x1[i]
            yi = x2[i]
            if yi == 0.0:
                out1[i] = NAN
                out2[i] = NAN
                continue
            axi = fabs(xi)
            ayi = fabs(yi)
            sy = 1.0 if yi > 0 else -1.0
            if axi <= ayi:
                out1[i] = -sy * xi / (yi * yi)
                out2[i] = -1.0 / ayi
            else:
                sx = 1.0 if xi > 0 else (-1.0 if xi < 0 else 0.0)
                out1[i] = -sy * sx
                out2[i] = -1.0
    return out1, out2


def iem_apply(const double[::1] lam, const double[::1] src_lo,
              const double[::1] src_hi, const double[::1] tgt_lo,
              const double[::1] tgt_hi, const double[::1] orient,
              double[::1] out):
    cdef Py_ssize_t i, n = lam.shape[0]
    cdef Py_ssize_t npieces = src_lo.shape[0]
    with nogil:
        for i in range(n):
            out[i] = _iem_one(lam[i], src_lo, src_hi, tgt_lo, tgt_hi,
                              orient, npieces)
    return out


def flow_psi(const double[::1] t, const double[::1] x1, const double[::1] x2,
             const double[::1] src_lo, const double[::1] src_hi,
             const double[::1] tgt_lo, const double[::1] tgt_hi,
             const double[::1] orient, double[::1] out1, double[::1] out2):
    cdef Py_ssize_t i, n = x1.shape[0]
    cdef Py_ssize_t npieces = src_lo.shape[0]
    cdef double xi, yi, ti, axi, ayi, lam, disc, r, sgn, u, v, un
    with nogil:
        for i in range(n):
            xi = x1[i]
            yi = x2[i]
            ti = t[i]
            axi = fabs(xi)
            ayi = fabs(yi)
            if yi > axi:
                lam = xi / yi
                disc = 2.0 * ti - yi * yi
                if disc <= 0.0:
                    r = sqrt(-disc)
                    out1[i] = lam * r
                    out2[i] = r
                else:
                    r = sqrt(disc)
                    out1[i] = _iem_one(lam, src_lo, src_hi, tgt_lo, tgt_hi,
                                       orient, npieces) * r
                    out2[i] = -r
            elif yi < -axi:
                r = sqrt(yi * yi + 2.0 * ti)
                out1[i] = (xi / (-yi)) * r
                out2[i] = -r
            else:
                sgn = 1.0 if xi >= ayi else -1.0
                u = xi * sgn
                v = yi
                if v >= 0.0 and ti <= v:
                    un = u - ti
                elif v >= 0.0:
                    un = u - 2.0 * v + ti
                else:
                    un = u + ti
                out1[i] = sgn * un
                out2[i] = v - ti
    return out1, out2
