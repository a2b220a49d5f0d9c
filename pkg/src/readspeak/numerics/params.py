"""Named-tensor parameter store with per-tensor adaptive-moment state.

All tensors are float64 and C-contiguous.  The store is the single owner
of parameters, gradients, and optimizer moments; networks reference
tensors by name and accumulate gradients into the store.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import DomainError
from . import kernels


def as_tensor(value, shape: tuple[int, ...] | None = None) -> np.ndarray:
    """Coerce to a float64 C-contiguous array and require finite entries."""
    arr = np.ascontiguousarray(value, dtype=np.float64)
    if shape is not None and arr.shape != shape:
        raise DomainError(f"expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("tensor contains non-finite values")
    return arr


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    """Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    bound = 1.0 / np.sqrt(float(fan_in))
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class AdamState:
    """First/second moment tensors plus the step count for one parameter."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0


class ParamStore:
    """Ordered map name -> tensor, with parallel gradients and Adam state."""

    def __init__(self) -> None:
        self._params: dict[str, np.ndarray] = {}
        self._grads: dict[str, np.ndarray] = {}
        self._adam: dict[str, AdamState] = {}

    def add(self, name: str, value) -> np.ndarray:
        if name in self._params:
            raise DomainError(f"parameter {name!r} already exists")
        arr = as_tensor(value)
        self._params[name] = arr
        self._grads[name] = np.zeros_like(arr)
        self._adam[name] = AdamState(m=np.zeros_like(arr), v=np.zeros_like(arr))
        return arr

    def names(self) -> list[str]:
        return list(self._params)

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def param(self, name: str) -> np.ndarray:
        try:
            return self._params[name]
        except KeyError:
            raise DomainError(f"unknown parameter {name!r}") from None

    def grad(self, name: str) -> np.ndarray:
        try:
            return self._grads[name]
        except KeyError:
            raise DomainError(f"unknown parameter {name!r}") from None

    def set_param(self, name: str, value) -> None:
        arr = self.param(name)
        arr[...] = as_tensor(value, arr.shape)

    def accumulate_grad(self, name: str, delta: np.ndarray) -> None:
        grad = self.grad(name)
        if grad.shape != delta.shape:
            raise DomainError(
                f"gradient shape {delta.shape} does not match {name!r} {grad.shape}"
            )
        grad += delta

    def zero_grads(self) -> None:
        for grad in self._grads.values():
            grad[...] = 0.0

    def grad_norm(self) -> float:
        total = 0.0
        for grad in self._grads.values():
            total += float(np.sum(grad * grad))
        return float(np.sqrt(total))

    def scale_grads(self, factor: float) -> None:
        for grad in self._grads.values():
            grad *= factor

    def adam_step(
        self,
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        """One bias-corrected adaptive-moment update over every parameter.

        Aborts (without touching any tensor) if a gradient is non-finite.
        """
        for name, grad in self._grads.items():
            if not np.all(np.isfinite(grad)):
                raise DomainError(f"non-finite gradient for {name!r}; training aborted")
        for name, param in self._params.items():
            state = self._adam[name]
            state.t += 1
            kernels.adam_update(
                param, self._grads[name], state.m, state.v,
                state.t, lr, beta1, beta2, eps,
            )

    def adam_t(self, name: str) -> int:
        return self._adam[name].t

    def clone_params(self) -> dict[str, np.ndarray]:
        return {name: arr.copy() for name, arr in self._params.items()}

    def state_dict(self) -> dict[str, np.ndarray]:
        """Parameters only; optimizer state is not checkpointed."""
        return {name: arr.copy() for name, arr in self._params.items()}

    def load_state_dict(self, tensors: dict[str, np.ndarray]) -> None:
        for name in self._params:
            if name not in tensors:
                raise DomainError(f"checkpoint missing tensor {name!r}")
        for name, value in tensors.items():
            if name not in self._params:
                raise DomainError(f"checkpoint has unexpected tensor {name!r}")
            self.set_param(name, value)


def finite_difference_grad(
    f,
    store: ParamStore,
    h: float = 1e-5,
    names: list[str] | None = None,
) -> dict[str, np.ndarray]:
    """Central-difference gradient of a scalar function of the store.

    ``f`` must be deterministic and must not mutate the store.  This is
    the independent oracle every analytic backward pass is checked
    against; keep it free of any shared code with those passes.
    """
    grads: dict[str, np.ndarray] = {}
    for name in names if names is not None else store.names():
        param = store.param(name)
        grad = np.zeros_like(param)
        flat = param.ravel()
        gflat = grad.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            plus = f()
            flat[i] = orig - h
            minus = f()
            flat[i] = orig
            gflat[i] = (plus - minus) / (2.0 * h)
        grads[name] = grad
    return grads
