"""Gated recurrent cell and multilayer perceptron over a ParamStore.

Both classes register their tensors in a shared store under a dotted
prefix, run forward steps through the dispatched kernels, and
accumulate analytic gradients back into the store.  The perceptron
additionally offers batched pure-numpy forward/backward passes for
fitting a value head over many observations at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import DomainError
from . import kernels
from .params import ParamStore, uniform_init

_ACTIVATIONS = ("relu", "linear")


@dataclass(frozen=True)
class GruSpec:
    input_size: int
    hidden_size: int

    def __post_init__(self) -> None:
        if self.input_size < 1 or self.hidden_size < 1:
            raise DomainError("gru sizes must be positive")


@dataclass(frozen=True)
class MlpSpec:
    input_size: int
    layer_sizes: tuple[int, ...]
    activations: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.input_size < 1 or not self.layer_sizes:
            raise DomainError("mlp needs a positive input size and at least one layer")
        if any(s < 1 for s in self.layer_sizes):
            raise DomainError("mlp layer sizes must be positive")
        if len(self.activations) != len(self.layer_sizes):
            raise DomainError("one activation tag per layer is required")
        for act in self.activations:
            if act not in _ACTIVATIONS:
                raise DomainError(f"unknown activation {act!r}")


_GRU_LEAVES = ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h")


class GruCell:
    """Single-step gated recurrent cell; caller owns the hidden state."""

    def __init__(self, store: ParamStore, prefix: str, spec: GruSpec,
                 rng: np.random.Generator) -> None:
        self.spec = spec
        i, h = spec.input_size, spec.hidden_size
        for gate in ("z", "r", "h"):
            store.add(f"{prefix}.w_{gate}", uniform_init(rng, (h, i), i))
            store.add(f"{prefix}.u_{gate}", uniform_init(rng, (h, h), h))
            store.add(f"{prefix}.b_{gate}", np.zeros(h))
        self._p = {leaf: store.param(f"{prefix}.{leaf}") for leaf in _GRU_LEAVES}
        self._g = {leaf: store.grad(f"{prefix}.{leaf}") for leaf in _GRU_LEAVES}

    def initial_state(self) -> np.ndarray:
        return np.zeros(self.spec.hidden_size)

    def forward(self, x: np.ndarray, h_prev: np.ndarray):
        p = self._p
        h_new, z, r, hbar = kernels.gru_forward(
            x, h_prev,
            p["w_z"], p["u_z"], p["b_z"],
            p["w_r"], p["u_r"], p["b_r"],
            p["w_h"], p["u_h"], p["b_h"],
        )
        return h_new, (x, h_prev, z, r, hbar)

    def backward(self, d_h_new: np.ndarray, cache):
        x, h_prev, z, r, hbar = cache
        p, g = self._p, self._g
        (d_x, d_h_prev, d_wz, d_uz, d_bz, d_wr, d_ur, d_br,
         d_wh, d_uh, d_bh) = kernels.gru_backward(
            d_h_new, x, h_prev, z, r, hbar,
            p["w_z"], p["u_z"], p["w_r"], p["u_r"], p["w_h"], p["u_h"],
        )
        g["w_z"] += d_wz
        g["u_z"] += d_uz
        g["b_z"] += d_bz
        g["w_r"] += d_wr
        g["u_r"] += d_ur
        g["b_r"] += d_br
        g["w_h"] += d_wh
        g["u_h"] += d_uh
        g["b_h"] += d_bh
        return d_x, d_h_prev


class Mlp:
    """Dense stack with per-layer relu/linear tags."""

    def __init__(self, store: ParamStore, prefix: str, spec: MlpSpec,
                 rng: np.random.Generator) -> None:
        self.spec = spec
        self._relu = tuple(act == "relu" for act in spec.activations)
        self._w: list[np.ndarray] = []
        self._b: list[np.ndarray] = []
        self._gw: list[np.ndarray] = []
        self._gb: list[np.ndarray] = []
        fan_in = spec.input_size
        for i, out in enumerate(spec.layer_sizes):
            wname, bname = f"{prefix}.l{i}.w", f"{prefix}.l{i}.b"
            store.add(wname, uniform_init(rng, (out, fan_in), fan_in))
            store.add(bname, np.zeros(out))
            self._w.append(store.param(wname))
            self._b.append(store.param(bname))
            self._gw.append(store.grad(wname))
            self._gb.append(store.grad(bname))
            fan_in = out

    def forward(self, x: np.ndarray):
        caches = []
        h = x
        for w, b, relu in zip(self._w, self._b, self._relu):
            out, pre = kernels.dense_forward(h, w, b, relu)
            caches.append((h, pre))
            h = out
        return h, caches

    def backward(self, d_out: np.ndarray, caches) -> np.ndarray:
        d = d_out
        for i in range(len(self._w) - 1, -1, -1):
            x_in, pre = caches[i]
            d, d_w, d_b = kernels.dense_backward(d, x_in, pre, self._w[i], self._relu[i])
            self._gw[i] += d_w
            self._gb[i] += d_b
        return d

    def forward_batch(self, x: np.ndarray):
        """Rows are samples; pure numpy regardless of kernel dispatch."""
        caches = []
        h = x
        for w, b, relu in zip(self._w, self._b, self._relu):
            pre = h @ w.T + b
            out = np.maximum(pre, 0.0) if relu else pre
            caches.append((h, pre))
            h = out
        return h, caches

    def backward_batch(self, d_out: np.ndarray, caches) -> np.ndarray:
        d = d_out
        for i in range(len(self._w) - 1, -1, -1):
            x_in, pre = caches[i]
            d_pre = np.where(pre > 0.0, d, 0.0) if self._relu[i] else d
            self._gw[i] += d_pre.T @ x_in
            self._gb[i] += d_pre.sum(axis=0)
            d = d_pre @ self._w[i]
        return d
