"""Compiled inner loop of the AERIS sequence (RK4 drive + exact precession)."""

import numba as nb
import numpy as np


@nb.njit(cache=True, inline="always")
def _rhs(mx, my, mz, d, wc, ws, r1, r2):
    dx = -r2 * mx - d * my + ws * mz
    dy = d * mx - r2 * my - wc * mz
    dz = -ws * mx + wc * my - r1 * mz + r1
    return dx, dy, dz


@nb.njit(cache=True, inline="always")
def _rk4(mx, my, mz, d, w, c, s, r1, r2, h):
    wc = w * c
    ws = w * s
    ax, ay, az = _rhs(mx, my, mz, d, wc, ws, r1, r2)
    bx, by, bz = _rhs(mx + 0.5 * h * ax, my + 0.5 * h * ay, mz + 0.5 * h * az,
                      d, wc, ws, r1, r2)
    cx, cy, cz = _rhs(mx + 0.5 * h * bx, my + 0.5 * h * by, mz + 0.5 * h * bz,
                      d, wc, ws, r1, r2)
    ex, ey, ez = _rhs(mx + h * cx, my + h * cy, mz + h * cz, d, wc, ws, r1, r2)
    k = h / 6.0
    return (mx + k * (ax + 2.0 * bx + 2.0 * cx + ex),
            my + k * (ay + 2.0 * by + 2.0 * cy + ey),
            mz + k * (az + 2.0 * bz + 2.0 * cz + ez))


@nb.njit(cache=True)
def accumulate_phases(delta, amp, r1, r2, w0, h, m0, trig_c, trig_s, n_trig,
                      sub_c, sub_s, sub_n, n_cycles, prec_c, prec_s, e1,
                      weights, eps, hold, out):
    """Fill ``out[r, n]`` with ``sum_k amp_k sum_j weights_j mz_k(t_j)``.

    ``delta`` is angular; ``prec_c/prec_s`` already include the T2* decay
    over one free precession and ``e1`` the T1 factor. ``m0`` is the state
    before the trigger pulse (``n_trig`` steps, possibly none). ``eps[r, 0]`` drives
    the trigger pulse and ``eps[r, n + 1]`` rotation stage ``n``; each value
    is held for ``hold`` steps.
    """
    n_real = out.shape[0]
    n_comp = delta.shape[0]
    n_sub = sub_n.shape[0]
    for r in range(n_real):
        for k in range(n_comp):
            d = delta[k]
            mx, my, mz = m0[0], m0[1], m0[2]
            for j in range(n_trig):
                w = w0 * (1.0 + eps[r, 0, j // hold])
                mx, my, mz = _rk4(mx, my, mz, d, w, trig_c, trig_s, r1, r2, h)
            for n in range(n_cycles):
                if n > 0:
                    x = prec_c[k] * mx - prec_s[k] * my
                    y = prec_s[k] * mx + prec_c[k] * my
                    mx, my = x, y
                    mz = 1.0 + (mz - 1.0) * e1
                acc = weights[0] * mz
                j = 0
                for q in range(n_sub):
                    c = sub_c[q]
                    s = sub_s[q]
                    for _ in range(sub_n[q]):
                        w = w0 * (1.0 + eps[r, n + 1, j // hold])
                        mx, my, mz = _rk4(mx, my, mz, d, w, c, s, r1, r2, h)
                        j += 1
                        acc += weights[j] * mz
                out[r, n] += amp[k] * acc
    return out


def warmup():
    """Trigger compilation on a tiny problem."""
    out = np.zeros((1, 1))
    accumulate_phases(np.zeros(1), np.ones(1), 0.0, 0.0, 1.0, 0.1,
                      np.array([0.0, 0.0, 1.0]), 1.0, 0.0, 1,
                      np.ones(1), np.zeros(1), np.ones(1, dtype=np.int64), 1,
                      np.ones(1), np.zeros(1), 1.0, np.zeros(2), np.zeros((1, 2, 1)),
                      1, out)
