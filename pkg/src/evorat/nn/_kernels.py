"""Compiled inner loops of the GRU recurrence.

Only the sequential part lives here; the batched input projections and
weight-gradient reductions stay as numpy matmuls in ``layers.py``.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _sig(a):
    if a >= 0.0:
        return 1.0 / (1.0 + math.exp(-a))
    e = math.exp(a)
    return e / (1.0 + e)


@njit(cache=True)
def gru_forward_loop(xp, U_zrT, U_hT, hs, zr_all, cs, record):
    """xp (T,B,3H) input projections; hs (T+1,B,H) with hs[0] preset."""
    T, B, H3 = xp.shape
    H = H3 // 3
    acc = np.empty(2 * H)
    acc_h = np.empty(H)
    for t in range(T):
        for b in range(B):
            h = hs[t, b]
            for j in range(2 * H):
                acc[j] = xp[t, b, j]
            for k in range(H):
                hk = h[k]
                for j in range(2 * H):
                    acc[j] += hk * U_zrT[k, j]
            for j in range(2 * H):
                zr_all[t, b, j] = _sig(acc[j])
            for j in range(H):
                acc_h[j] = xp[t, b, 2 * H + j]
            for k in range(H):
                rk = zr_all[t, b, H + k] * h[k]
                for j in range(H):
                    acc_h[j] += rk * U_hT[k, j]
            for j in range(H):
                c = math.tanh(acc_h[j])
                cs[t, b, j] = c
                hs[t + 1, b, j] = h[j] + zr_all[t, b, j] * (c - h[j])


@njit(cache=True)
def gru_backward_loop(dhs_t, hs, zr_all, cs, U_zr, U_h, da):
    """Fill da (T,B,3H) with pre-activation gradients, newest step first."""
    T, B, H = dhs_t.shape
    dh_next = np.zeros((B, H))
    dh = np.empty(H)
    drh = np.empty(H)
    for t in range(T - 1, -1, -1):
        for b in range(B):
            for j in range(H):
                dh[j] = dhs_t[t, b, j] + dh_next[b, j]
            for j in range(H):
                c = cs[t, b, j]
                z = zr_all[t, b, j]
                da[t, b, 2 * H + j] = dh[j] * z * (1.0 - c * c)
                da[t, b, j] = dh[j] * (c - hs[t, b, j]) * z * (1.0 - z)
            for k in range(H):
                acc = 0.0
                for j in range(H):
                    acc += da[t, b, 2 * H + j] * U_h[j, k]
                drh[k] = acc
            for k in range(H):
                r = zr_all[t, b, H + k]
                da[t, b, H + k] = drh[k] * hs[t, b, k] * r * (1.0 - r)
            for k in range(H):
                acc = dh[k] * (1.0 - zr_all[t, b, k]) + drh[k] * zr_all[t, b, H + k]
                for j in range(2 * H):
                    acc += da[t, b, j] * U_zr[j, k]
                dh_next[b, k] = acc
