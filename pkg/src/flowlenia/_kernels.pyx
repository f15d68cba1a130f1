# cython: boundscheck=False, wraparound=False, cdivision=True
"""Cython implementations of the per-step hot kernels.

Single-pass scalar loops for the gradient-blend flow and the
reintegration-tracking advection. The numpy fallback in
flowlenia._kernels_py mirrors these formulas operation for operation.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor, pow

cnp.import_array()


def flow_chw(double[:, :, ::1] u, double[:, ::1] a_sum, double dt,
             double theta_a, double n_alpha, double d_max):
    """Blended, clamped displacement; returns (dx, dy), each (C, H, W)."""
    cdef Py_ssize_t C = u.shape[0]
    cdef Py_ssize_t H = u.shape[1]
    cdef Py_ssize_t W = u.shape[2]
    dx_arr = np.empty((C, H, W))
    dy_arr = np.empty((C, H, W))
    cdef double[:, :, ::1] dx = dx_arr
    cdef double[:, :, ::1] dy = dy_arr
    cdef double inv_theta = 1.0 / theta_a
    cdef bint square = n_alpha == 2.0
    cdef Py_ssize_t HW = H * W
    cdef double *pu = &u[0, 0, 0]
    cdef double *pdx = &dx[0, 0, 0]
    cdef double *pdy = &dy[0, 0, 0]
    cdef double *arow
    cdef double *arow_m
    cdef double *arow_p
    cdef Py_ssize_t c, y, x, xm, xp, i, rm, rp, cb
    cdef double t, alpha, keep, gxa, gya, v

    for y in range(H):
        arow = &a_sum[y, 0]
        arow_m = &a_sum[H - 1 if y == 0 else y - 1, 0]
        arow_p = &a_sum[0 if y == H - 1 else y + 1, 0]
        i = y * W
        rm = (H - 1) * W if y == 0 else -W  # row offsets relative to i
        rp = -(H - 1) * W if y == H - 1 else W
        for x in range(W):
            xm = W - 1 if x == 0 else x - 1
            xp = 0 if x == W - 1 else x + 1
            t = arow[x] * inv_theta
            alpha = t * t if square else pow(t, n_alpha)
            if alpha > 1.0:
                alpha = 1.0
            elif alpha < 0.0:
                alpha = 0.0
            keep = 1.0 - alpha
            gxa = alpha * (0.5 * (arow[xp] - arow[xm]))
            gya = alpha * (0.5 * (arow_p[x] - arow_m[x]))
            for c in range(C):
                cb = c * HW + i
                v = dt * (keep * (0.5 * (pu[cb + xp - x] - pu[cb + xm - x])) - gxa)
                pdx[cb] = d_max if v > d_max else (-d_max if v < -d_max else v)
                v = dt * (keep * (0.5 * (pu[cb + rp] - pu[cb + rm])) - gya)
                pdy[cb] = d_max if v > d_max else (-d_max if v < -d_max else v)
            i += 1
    return dx_arr, dy_arr


def advect_chw(double[:, :, ::1] a, double[:, :, ::1] dx, double[:, :, ::1] dy, double ell):
    """Reintegration transport of a (C, H, W) state by per-cell (dx, dy).

    Each cell's mass square (side 2*ell <= 1) spans at most two cells per
    axis; axis weights sum to exactly 1, so per-channel totals are conserved
    to round-off.
    """
    cdef Py_ssize_t C = a.shape[0]
    cdef Py_ssize_t H = a.shape[1]
    cdef Py_ssize_t W = a.shape[2]
    out_arr = np.zeros((C, H, W))
    cdef double[:, :, ::1] out = out_arr
    cdef double inv = 0.5 / ell
    cdef double *pa
    cdef double *pdx
    cdef double *pdy
    cdef double *po
    cdef double *row0
    cdef double *row1
    cdef Py_ssize_t c, y, x, i, jy0, jx0, jy1, jx1
    cdef double m, lo, w, wy0, wy1, wx0, wx1, fj, m0, m1

    for c in range(C):
        pa = &a[c, 0, 0]
        pdx = &dx[c, 0, 0]
        pdy = &dy[c, 0, 0]
        po = &out[c, 0, 0]
        i = 0
        for y in range(H):
            for x in range(W):
                m = pa[i]
                if m != 0.0:
                    lo = y + pdy[i] - ell
                    fj = floor(lo + 0.5)
                    w = (fj + 0.5 - lo) * inv
                    wy0 = 1.0 if w > 1.0 else (0.0 if w < 0.0 else w)
                    wy1 = 1.0 - wy0
                    jy0 = (<Py_ssize_t> fj) % H
                    if jy0 < 0:
                        jy0 += H
                    jy1 = jy0 + 1
                    if jy1 == H:
                        jy1 = 0

                    lo = x + pdx[i] - ell
                    fj = floor(lo + 0.5)
                    w = (fj + 0.5 - lo) * inv
                    wx0 = 1.0 if w > 1.0 else (0.0 if w < 0.0 else w)
                    wx1 = 1.0 - wx0
                    jx0 = (<Py_ssize_t> fj) % W
                    if jx0 < 0:
                        jx0 += W
                    jx1 = jx0 + 1
                    if jx1 == W:
                        jx1 = 0

                    m0 = m * wy0
                    m1 = m * wy1
                    row0 = po + jy0 * W
                    row1 = po + jy1 * W
                    row0[jx0] += m0 * wx0
                    row0[jx1] += m0 * wx1
                    row1[jx0] += m1 * wx0
                    row1[jx1] += m1 * wx1
                i += 1
    return out_arr
