"""Pure-numpy implementations of the per-step hot kernels.

Fallback backend mirroring flowlenia._kernels; used when the compiled
extension is unavailable or FLF_NO_EXT is set. Formulas and operation
order match the Cython kernels so results agree to the last few ulps.
"""

import numpy as np


def _grad_pair(f):
    """Central differences with toroidal wrap along the last two axes."""
    gy = np.empty_like(f)
    gx = np.empty_like(f)
    np.subtract(f[..., 2:, :], f[..., :-2, :], out=gy[..., 1:-1, :])
    np.subtract(f[..., 1, :], f[..., -1, :], out=gy[..., 0, :])
    np.subtract(f[..., 0, :], f[..., -2, :], out=gy[..., -1, :])
    np.subtract(f[..., :, 2:], f[..., :, :-2], out=gx[..., :, 1:-1])
    np.subtract(f[..., :, 1], f[..., :, -1], out=gx[..., :, 0])
    np.subtract(f[..., :, 0], f[..., :, -2], out=gx[..., :, -1])
    gy *= 0.5
    gx *= 0.5
    return gx, gy


def flow_chw(u, a_sum, dt, theta_a, n_alpha, d_max):
    """Blended, clamped displacement from (C, H, W) affinity and the summed
    (H, W) mass field; returns (dx, dy), each (C, H, W)."""
    t = a_sum * (1.0 / theta_a)
    alpha = t * t if n_alpha == 2.0 else t**n_alpha
    np.clip(alpha, 0.0, 1.0, out=alpha)
    keep = 1.0 - alpha
    gax, gay = _grad_pair(a_sum)
    gax *= alpha
    gay *= alpha
    gux, guy = _grad_pair(u)
    dx = np.clip(dt * (keep * gux - gax), -d_max, d_max)
    dy = np.clip(dt * (keep * guy - gay), -d_max, d_max)
    return dx, dy


def advect_chw(a, dx, dy, ell):
    """Reintegration transport of a (C, H, W) state by per-cell (dx, dy).

    Each cell's mass square (side 2*ell <= 1) lands on at most two cells per
    axis; the split weights per axis sum to exactly 1, so per-channel totals
    are conserved to round-off.
    """
    C, H, W = a.shape
    inv = 0.5 / ell
    out = np.empty_like(a)
    yy = np.arange(H, dtype=np.float64)[:, None]
    xx = np.arange(W, dtype=np.float64)[None, :]
    for c in range(C):
        lo_y = yy + dy[c] - ell
        lo_x = xx + dx[c] - ell
        jy = np.floor(lo_y + 0.5)
        jx = np.floor(lo_x + 0.5)
        wy0 = np.clip((jy + 0.5 - lo_y) * inv, 0.0, 1.0)
        wx0 = np.clip((jx + 0.5 - lo_x) * inv, 0.0, 1.0)
        wy1 = 1.0 - wy0
        wx1 = 1.0 - wx0
        jy0 = jy.astype(np.int64) % H
        jx0 = jx.astype(np.int64) % W
        jy1 = (jy0 + 1) % H
        jx1 = (jx0 + 1) % W
        m0 = a[c] * wy0
        m1 = a[c] * wy1
        idx = np.concatenate(
            [
                (jy0 * W + jx0).ravel(),
                (jy0 * W + jx1).ravel(),
                (jy1 * W + jx0).ravel(),
                (jy1 * W + jx1).ravel(),
            ]
        )
        wts = np.concatenate(
            [
                (m0 * wx0).ravel(),
                (m0 * wx1).ravel(),
                (m1 * wx0).ravel(),
                (m1 * wx1).ravel(),
            ]
        )
        out[c] = np.bincount(idx, weights=wts, minlength=H * W).reshape(H, W)
    return out
