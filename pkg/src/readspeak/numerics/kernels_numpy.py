"""Pure-numpy reference kernels.

Every function here has a numba twin in ``kernels_numba`` with the same
signature and semantics; the twin is selected at import time (see the
package ``__init__``).  All arrays are float64 and C-contiguous, vectors
are 1-D.  Caches are returned as flat tuples of arrays so the numba path
can mirror them without boxing.
"""

from __future__ import annotations

import numpy as np


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax (max-subtracted)."""
    shifted = logits - np.max(logits)
    exps = np.exp(shifted)
    return exps / np.sum(exps)


def gru_forward(x, h_prev, w_z, u_z, b_z, w_r, u_r, b_r, w_h, u_h, b_h):
    """One gated-recurrent step.

    Update gate z, reset gate r, candidate via reset-before-candidate:
    ``h' = (1 - z) * h_prev + z * tanh(W_h x + U_h (r * h_prev) + b_h)``.
    Returns ``(h_new, z, r, hbar)``; the gate values are the backward cache.
    """
    z = sigmoid(w_z @ x + u_z @ h_prev + b_z)
    r = sigmoid(w_r @ x + u_r @ h_prev + b_r)
    hbar = np.tanh(w_h @ x + u_h @ (r * h_prev) + b_h)
    h_new = (1.0 - z) * h_prev + z * hbar
    return h_new, z, r, hbar


def gru_backward(d_h, x, h_prev, z, r, hbar,
                 w_z, u_z, w_r, u_r, w_h, u_h):
    """Backward pass of :func:`gru_forward`.

    ``d_h`` is the upstream gradient w.r.t. the new hidden state.  Returns
    ``(d_x, d_h_prev, d_wz, d_uz, d_bz, d_wr, d_ur, d_br, d_wh, d_uh, d_bh)``.
    """
    d_z = d_h * (hbar - h_prev)
    d_hbar = d_h * z
    d_a_h = d_hbar * (1.0 - hbar * hbar)

    d_rh = u_h.T @ d_a_h
    d_r = d_rh * h_prev
    d_a_r = d_r * r * (1.0 - r)
    d_a_z = d_z * z * (1.0 - z)

    d_wz = np.outer(d_a_z, x)
    d_uz = np.outer(d_a_z, h_prev)
    d_wr = np.outer(d_a_r, x)
    d_ur = np.outer(d_a_r, h_prev)
    d_wh = np.outer(d_a_h, x)
    d_uh = np.outer(d_a_h, r * h_prev)

    d_x = w_z.T @ d_a_z + w_r.T @ d_a_r + w_h.T @ d_a_h
    d_h_prev = d_h * (1.0 - z) + u_z.T @ d_a_z + u_r.T @ d_a_r + d_rh * r
    return d_x, d_h_prev, d_wz, d_uz, d_a_z, d_wr, d_ur, d_a_r, d_wh, d_uh, d_a_h


def dense_forward(x, w, b, relu: bool):
    """Affine layer ``w @ x + b``, optionally rectified.

    Returns ``(out, pre)`` where ``pre`` is the pre-activation (needed by
    the backward pass when ``relu`` is set).
    """
    pre = w @ x + b
    if relu:
        return np.maximum(pre, 0.0), pre
    return pre, pre


def dense_backward(d_out, x, pre, w, relu: bool):
    """Backward of :func:`dense_forward`: ``(d_x, d_w, d_b)``."""
    if relu:
        d_pre = np.where(pre > 0.0, d_out, 0.0)
    else:
        d_pre = d_out
    d_w = np.outer(d_pre, x)
    d_x = w.T @ d_pre
    return d_x, d_w, d_pre


def adam_update(param, grad, m, v, t, lr, beta1, beta2, eps):
    """In-place bias-corrected adaptive-moment step on one tensor.

    ``t`` is the step count *after* this update (1-based).
    """
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)
