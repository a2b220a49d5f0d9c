"""Run configuration: one JSON tree covering every component.

Sections map one-to-one onto the component config dataclasses; unknown
keys anywhere are rejected so a typo cannot silently fall back to a
default.  The defaults themselves are the reference operating point
(reward weights -1/-10/-100, streak threshold 4, area target 0.5,
window 5, discount 0.99, 10 episodes per update, learning rate 1e-4).
"""

from __future__ import annotations

import dataclasses
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .agent import AgentConfig
from .backend.corpus import SyntheticCorpusSpec
from .backend.learned import LearnedBackendConfig
from .core import DomainError
from .env import RewardConfig


@dataclass(frozen=True)
class EvalConfig:
    split: str = "eval"
    mode: str = "train"

    def __post_init__(self) -> None:
        if self.split not in ("train", "eval", "all"):
            raise DomainError(f"split must be train/eval/all, got {self.split!r}")
        if self.mode not in ("train", "eval"):
            raise DomainError(f"mode must be train or eval, got {self.mode!r}")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    out_dir: str = "runs"
    window: int = 5
    corpus: SyntheticCorpusSpec = field(default_factory=SyntheticCorpusSpec)
    backend: LearnedBackendConfig = field(default_factory=LearnedBackendConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self) -> None:
        if self.window < 1:
            raise DomainError("attention window must be positive")


def _coerce(value, annotation, path: str):
    origin = typing.get_origin(annotation)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise DomainError(f"config key {path!r} must be a list")
        args = typing.get_args(annotation)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(v, args[0], path) for v in value)
        if len(args) != len(value):
            raise DomainError(f"config key {path!r} needs exactly {len(args)} entries")
        return tuple(_coerce(v, a, path) for v, a in zip(value, args))
    if origin in (typing.Union, types.UnionType):
        if value is None:
            if type(None) in typing.get_args(annotation):
                return None
            raise DomainError(f"config key {path!r} may not be null")
        inner = [a for a in typing.get_args(annotation) if a is not type(None)]
        return _coerce(value, inner[0], path)
    if annotation is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise DomainError(f"config key {path!r} must be a number")
        return float(value)
    if annotation is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise DomainError(f"config key {path!r} must be an integer")
        return int(value)
    if annotation is bool:
        if not isinstance(value, bool):
            raise DomainError(f"config key {path!r} must be a boolean")
        return value
    if annotation is str:
        if not isinstance(value, str):
            raise DomainError(f"config key {path!r} must be a string")
        return value
    raise DomainError(f"config key {path!r} has unsupported type {annotation}")


def _build(dc_cls, data, path: str):
    if not isinstance(data, dict):
        raise DomainError(f"config section {path or 'root'!r} must be an object")
    hints = typing.get_type_hints(dc_cls)
    known = {f.name for f in dataclasses.fields(dc_cls)}
    for key in data:
        if key not in known:
            dotted = f"{path}.{key}" if path else key
            raise DomainError(f"unknown config key {dotted!r}")
    kwargs = {}
    for name, value in data.items():
        annotation = hints[name]
        key_path = f"{path}.{name}" if path else name
        if dataclasses.is_dataclass(annotation):
            kwargs[name] = _build(annotation, value, key_path)
        else:
            kwargs[name] = _coerce(value, annotation, key_path)
    return dc_cls(**kwargs)


def config_from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data, "")


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DomainError(f"cannot read config {path}: {exc}") from None
    return config_from_dict(data)


def config_to_dict(cfg) -> dict:
    """Nested plain-type rendering (tuples become lists)."""
    out = {}
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            out[f.name] = config_to_dict(value)
        elif isinstance(value, tuple):
            out[f.name] = list(value)
        else:
            out[f.name] = value
    return out


def save_config(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(config_to_dict(cfg), indent=2) + "\n", encoding="utf-8")
