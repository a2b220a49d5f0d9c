"""Numba-compiled twins of the kernels in ``kernels_numpy``.

Same signatures, same math.  Matrix products go through ``np.dot`` (numba
lowers these to fast loops / BLAS); everything else is elementwise.  The
first call per process pays JIT compilation; ``cache=True`` amortizes that
across runs.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_JIT = dict(cache=True, fastmath=False)


@njit(**_JIT)
def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@njit(**_JIT)
def softmax(logits):
    shifted = logits - np.max(logits)
    exps = np.exp(shifted)
    return exps / np.sum(exps)


@njit(**_JIT)
def gru_forward(x, h_prev, w_z, u_z, b_z, w_r, u_r, b_r, w_h, u_h, b_h):
    z = sigmoid(np.dot(w_z, x) + np.dot(u_z, h_prev) + b_z)
    r = sigmoid(np.dot(w_r, x) + np.dot(u_r, h_prev) + b_r)
    hbar = np.tanh(np.dot(w_h, x) + np.dot(u_h, r * h_prev) + b_h)
    h_new = (1.0 - z) * h_prev + z * hbar
    return h_new, z, r, hbar


@njit(**_JIT)
def _outer(a, b):
    out = np.empty((a.shape[0], b.shape[0]))
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            out[i, j] = a[i] * b[j]
    return out


@njit(**_JIT)
def gru_backward(d_h, x, h_prev, z, r, hbar,
                 w_z, u_z, w_r, u_r, w_h, u_h):
    d_z = d_h * (hbar - h_prev)
    d_hbar = d_h * z
    d_a_h = d_hbar * (1.0 - hbar * hbar)

    d_rh = np.dot(u_h.T, d_a_h)
    d_r = d_rh * h_prev
    d_a_r = d_r * r * (1.0 - r)
    d_a_z = d_z * z * (1.0 - z)

    d_wz = _outer(d_a_z, x)
    d_uz = _outer(d_a_z, h_prev)
    d_wr = _outer(d_a_r, x)
    d_ur = _outer(d_a_r, h_prev)
    d_wh = _outer(d_a_h, x)
    d_uh = _outer(d_a_h, r * h_prev)

    d_x = np.dot(w_z.T, d_a_z) + np.dot(w_r.T, d_a_r) + np.dot(w_h.T, d_a_h)
    d_h_prev = d_h * (1.0 - z) + np.dot(u_z.T, d_a_z) + np.dot(u_r.T, d_a_r) + d_rh * r
    return d_x, d_h_prev, d_wz, d_uz, d_a_z, d_wr, d_ur, d_a_r, d_wh, d_uh, d_a_h


@njit(**_JIT)
def dense_forward(x, w, b, relu):
    pre = np.dot(w, x) + b
    if relu:
        return np.maximum(pre, 0.0), pre
    return pre, pre


@njit(**_JIT)
def dense_backward(d_out, x, pre, w, relu):
    d_pre = d_out.copy()
    if relu:
        for i in range(d_pre.shape[0]):
            if pre[i] <= 0.0:
                d_pre[i] = 0.0
    d_w = _outer(d_pre, x)
    d_x = np.dot(w.T, d_pre)
    return d_x, d_w, d_pre


@njit(**_JIT)
def adam_update(param, grad, m, v, t, lr, beta1, beta2, eps):
    # All tensors are C-contiguous, so ravel() is a writable view.
    p = param.ravel()
    g = grad.ravel()
    mm = m.ravel()
    vv = v.ravel()
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for i in range(p.size):
        gi = g[i]
        mm[i] = beta1 * mm[i] + (1.0 - beta1) * gi
        vv[i] = beta2 * vv[i] + (1.0 - beta2) * gi * gi
        m_hat = mm[i] / c1
        v_hat = vv[i] / c2
        p[i] -= lr * m_hat / (np.sqrt(v_hat) + eps)
