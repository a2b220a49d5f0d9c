"""Text checkpoints: named tensors with explicit shapes, plus a config
snapshot and seed.  Values are decimal (repr) so save -> load -> save
is byte-identical and files diff cleanly."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DomainError
from .numerics import ParamStore

FORMAT_VERSION = 1
COMPONENTS = ("agent", "backend")


@dataclass
class Checkpoint:
    component: str
    seed: int
    config: dict
    tensors: dict[str, np.ndarray]


def save_checkpoint(
    path: str | Path,
    component: str,
    tensors: dict[str, np.ndarray],
    config: dict,
    seed: int,
) -> None:
    if component not in COMPONENTS:
        raise DomainError(f"component must be one of {COMPONENTS}, got {component!r}")
    payload = {
        "format_version": FORMAT_VERSION,
        "component": component,
        "seed": seed,
        "config": config,
        "tensors": {
            name: {
                "shape": list(arr.shape),
                "data": [float(v) for v in np.asarray(arr).ravel()],
            }
            for name, arr in tensors.items()
        },
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def save_store(path: str | Path, component: str, store: ParamStore,
               config: dict, seed: int) -> None:
    save_checkpoint(path, component, store.state_dict(), config, seed)


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DomainError(f"cannot read checkpoint {path}: {exc}") from None
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise DomainError(
            f"checkpoint {path} has format_version {version!r}, "
            f"expected {FORMAT_VERSION}")
    component = payload.get("component")
    if component not in COMPONENTS:
        raise DomainError(f"checkpoint {path} has unknown component {component!r}")
    tensors = {}
    for name, entry in payload.get("tensors", {}).items():
        shape = tuple(int(s) for s in entry["shape"])
        data = np.array(entry["data"], dtype=np.float64)
        expected = int(np.prod(shape, dtype=np.int64))
        if data.size != expected:
            raise DomainError(
                f"tensor {name!r}: {data.size} values for shape {shape}")
        tensors[name] = data.reshape(shape)
    return Checkpoint(
        component=component,
        seed=int(payload.get("seed", 0)),
        config=payload.get("config", {}),
        tensors=tensors,
    )


def load_into_store(checkpoint: Checkpoint, store: ParamStore) -> None:
    """Copy checkpoint tensors into an existing store; missing,
    unexpected, or reshaped tensors all fail loudly by name."""
    store.load_state_dict(checkpoint.tensors)
