"""Rule-based benchmark policies.

Two families: read the whole source before speaking, or interleave on a
fixed cycle of one READ per ``k`` steps.  The implicit ingestion at
reset counts as the opening READ of the default cycle, so with k=2 the
first chosen action is a SPEAK.  Both policies are pure functions of
the episode counters and the step index.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .core import Action, DomainError, EpisodeCounters


@dataclass(frozen=True)
class WaitKConfig:
    """Cycle length and phase for the wait-k family.

    ``phase="read"`` treats the reset ingestion as the cycle's READ
    slot; ``phase="speak"`` shifts the cycle one slot later so reads
    land one step earlier relative to the chosen actions.
    """

    k: int = 2
    phase: str = "read"

    def __post_init__(self) -> None:
        if self.k < 2:
            raise DomainError("cycle length must be at least 2")
        if self.phase not in ("read", "speak"):
            raise DomainError(f"phase must be 'read' or 'speak', got {self.phase!r}")


def wue_policy(counters: EpisodeCounters) -> Action:
    """Read until the source is exhausted, then speak everything."""
    return Action.SPEAK if counters.source_exhausted else Action.READ


def wks_policy(counters: EpisodeCounters, cfg: WaitKConfig, step_index: int) -> Action:
    """One READ per ``k``-step cycle, SPEAK otherwise; reads degrade to
    SPEAK once the source is exhausted."""
    position = step_index + 1
    if cfg.phase == "read":
        wants_read = position % cfg.k == 0
    else:
        wants_read = position % cfg.k == cfg.k - 1
    if wants_read and not counters.source_exhausted:
        return Action.READ
    return Action.SPEAK


class RulePolicy:
    """Step-counting wrapper giving rule policies the common
    reset/act interface used by the evaluator."""

    def __init__(self, name: str, fn) -> None:
        self.name = name
        self._fn = fn
        self._step = 0

    def reset(self) -> None:
        self._step = 0

    def act(self, observation, counters: EpisodeCounters) -> Action:
        action = self._fn(counters, self._step)
        self._step += 1
        return action


_WKS_PATTERN = re.compile(r"^w(\d+)s$")


def make_rule_policy(name: str) -> RulePolicy:
    """Build "wue" or "w<k>s" (e.g. "w2s"); anything else is an error."""
    lowered = name.strip().lower()
    if lowered == "wue":
        return RulePolicy("wue", lambda counters, step: wue_policy(counters))
    match = _WKS_PATTERN.match(lowered)
    if match:
        cfg = WaitKConfig(k=int(match.group(1)))
        return RulePolicy(lowered, lambda counters, step: wks_policy(counters, cfg, step))
    raise DomainError(
        f"unknown policy {name!r}; valid values: 'wue', 'w<k>s' (e.g. 'w2s'), 'agent'")
