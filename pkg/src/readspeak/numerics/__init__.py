"""Numeric kernels and small network building blocks.

Two interchangeable kernel implementations exist: a pure-numpy module
and a numba-compiled twin.  The active one is chosen once at import
time from the ``READSPEAK_KERNELS`` environment variable:

- ``auto`` (default): numba if importable, else numpy
- ``numba``: require the compiled kernels, fail loudly if unavailable
- ``numpy``: force the pure-numpy path

Every public kernel has the same signature in both modules, and the
test suite asserts numerical agreement between them.
"""

from __future__ import annotations

import os

_VALID_MODES = ("auto", "numba", "numpy")


def _select() -> tuple[object, str]:
    mode = os.environ.get("READSPEAK_KERNELS", "auto").strip().lower()
    if mode not in _VALID_MODES:
        raise RuntimeError(
            f"READSPEAK_KERNELS={mode!r} is not one of {_VALID_MODES}"
        )
    if mode in ("auto", "numba"):
        try:
            from . import kernels_numba
            return kernels_numba, "numba"
        except ImportError:
            if mode == "numba":
                raise RuntimeError(
                    "READSPEAK_KERNELS=numba but numba is not importable"
                )
    from . import kernels_numpy
    return kernels_numpy, "numpy"


kernels, _KERNEL_NAME = _select()


def selected_kernels() -> tuple[str, object]:
    """The active kernel implementation: ('numba'|'numpy', module)."""
    return _KERNEL_NAME, kernels


from .params import AdamState, ParamStore, as_tensor, finite_difference_grad, uniform_init
from .nets import GruCell, GruSpec, Mlp, MlpSpec

__all__ = [
    "kernels",
    "selected_kernels",
    "AdamState",
    "ParamStore",
    "as_tensor",
    "finite_difference_grad",
    "uniform_init",
    "GruCell",
    "GruSpec",
    "Mlp",
    "MlpSpec",
]
