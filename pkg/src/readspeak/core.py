"""Episode bookkeeping shared by the environment, baselines, and metrics.

The action vocabulary has two values: READ ingests one more source symbol
into the synthesis buffer, SPEAK emits one output frame from what has been
read so far.  An episode always starts with the first symbol already
ingested (``chars_read == 1``), because emitting a frame from an empty
buffer is undefined.  The implicit ingestion at reset is counted by every
derived quantity (notably ``chars_before_frame``).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace


class DomainError(ValueError):
    """Raised when a precondition of a domain operation is violated."""


class Action(enum.Enum):
    """One agent decision: ingest a symbol or emit a frame."""

    READ = "READ"
    SPEAK = "SPEAK"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def from_string(cls, name: str) -> "Action":
        try:
            return cls[name]
        except KeyError:
            raise DomainError(f"unknown action {name!r}") from None


@dataclass(frozen=True)
class EpisodeCounters:
    """Immutable (reads, frames, streak) snapshot of an episode.

    ``num_frames`` is the teacher-forced frame budget and is only known in
    train mode; eval-mode episodes carry ``None`` and run until the backend
    reports completion.
    """

    chars_read: int
    frames_spoken: int
    read_streak: int
    num_chars: int
    num_frames: int | None = None

    def __post_init__(self) -> None:
        if self.num_chars < 1:
            raise DomainError("sentence must contain at least one symbol")
        if not 1 <= self.chars_read <= self.num_chars:
            raise DomainError(
                f"chars_read={self.chars_read} outside [1, {self.num_chars}]"
            )
        if self.frames_spoken < 0 or self.read_streak < 0:
            raise DomainError("counters must be nonnegative")

    @classmethod
    def initial(cls, num_chars: int, num_frames: int | None = None) -> "EpisodeCounters":
        """Counters right after reset: first symbol ingested, nothing spoken."""
        return cls(
            chars_read=1,
            frames_spoken=0,
            read_streak=0,
            num_chars=num_chars,
            num_frames=num_frames,
        )

    @property
    def source_exhausted(self) -> bool:
        return self.chars_read == self.num_chars


def apply_action(counters: EpisodeCounters, action: Action) -> EpisodeCounters:
    """Pure transition: READ bumps the read count and streak, SPEAK emits.

    The environment never requests a READ once the source is exhausted;
    calling this with one anyway is a domain error.
    """
    if action is Action.READ:
        if counters.source_exhausted:
            raise DomainError("source exhausted")
        return replace(
            counters,
            chars_read=counters.chars_read + 1,
            read_streak=counters.read_streak + 1,
        )
    if counters.num_frames is not None and counters.frames_spoken >= counters.num_frames:
        raise DomainError("all frames already emitted")
    return replace(counters, frames_spoken=counters.frames_spoken + 1, read_streak=0)


@dataclass(frozen=True)
class PolicyPath:
    """The staircase of an episode: its action list plus, for every emitted
    frame s, the number of symbols available when it was spoken
    (``chars_before_frame[s-1]``, counting the implicit reset ingestion)."""

    actions: tuple[Action, ...]
    chars_before_frame: tuple[int, ...]
    num_chars: int
    num_frames: int | None = None

    @property
    def frames_spoken(self) -> int:
        return len(self.chars_before_frame)


def policy_path(
    actions: list[Action] | tuple[Action, ...],
    num_chars: int,
    num_frames: int | None = None,
) -> PolicyPath:
    """Validate an action sequence and derive its staircase.

    A sequence is malformed if it reads past the end of the source, speaks
    past the frame budget, or carries trailing actions after the budget is
    consumed.
    """
    counters = EpisodeCounters.initial(num_chars, num_frames)
    chars_before: list[int] = []
    for i, action in enumerate(actions):
        if num_frames is not None and counters.frames_spoken == num_frames:
            raise DomainError(
                f"action {i}: sequence continues after all {num_frames} frames emitted"
            )
        try:
            counters = apply_action(counters, action)
        except DomainError as exc:
            raise DomainError(f"action {i}: {exc}") from None
        if action is Action.SPEAK:
            chars_before.append(counters.chars_read)
    return PolicyPath(
        actions=tuple(actions),
        chars_before_frame=tuple(chars_before),
        num_chars=num_chars,
        num_frames=num_frames,
    )


def area_under_path(
    chars_before_frame: list[int] | tuple[int, ...],
    num_chars: int,
    num_frames: int,
) -> float:
    """Normalized area under the staircase: the mean, over emitted
    frames, of the fraction of the source readable when each frame was
    spoken.  1 means every symbol was read before the first frame;
    the floor 1/num_chars is the (unattainable) speak-everything-first
    limit."""
    if num_frames < 1:
        raise DomainError("area is undefined for an episode with no frames")
    if len(chars_before_frame) != num_frames:
        raise DomainError(
            f"{len(chars_before_frame)} per-frame read counts for "
            f"{num_frames} frames")
    return sum(chars_before_frame) / (num_chars * num_frames)


# Fixed ndjson key order for one trace line; part of the file contract.
_TRACE_KEYS = (
    "j", "action", "r", "r_cr", "r_ap", "r_q", "unread_penalty",
    "R", "S", "terminal", "alpha",
)


@dataclass(frozen=True)
class StepRecord:
    """One executed action with its reward decomposition.

    ``reward`` is the immediate reward of this very step (no discounting);
    it always equals ``r_cr + r_ap + r_q + unread_penalty``.  ``attention``
    holds the alignment weights over the symbols readable at this step:
    for a SPEAK, the weights used to decode the emitted frame; for a READ,
    the refreshed weights after ingesting the new symbol.
    """

    index: int
    action: Action
    reward: float
    r_cr: float
    r_ap: float
    r_q: float
    unread_penalty: float
    counters: EpisodeCounters
    terminal: bool
    attention: tuple[float, ...]
    forced: bool = False
    observation_digest: str = ""

    def to_json_line(self) -> str:
        payload = {
            "j": self.index,
            "action": self.action.value,
            "r": self.reward,
            "r_cr": self.r_cr,
            "r_ap": self.r_ap,
            "r_q": self.r_q,
            "unread_penalty": self.unread_penalty,
            "R": self.counters.chars_read,
            "S": self.counters.frames_spoken,
            "terminal": self.terminal,
            "alpha": list(self.attention),
        }
        return json.dumps(payload)


def record_from_json_line(line: str, num_chars: int, num_frames: int | None = None) -> StepRecord:
    """Parse one trace line.  Streak and digest are not serialized; the
    streak is recoverable by replaying the action list."""
    data = json.loads(line)
    missing = [k for k in _TRACE_KEYS if k not in data]
    if missing:
        raise DomainError(f"trace line missing keys {missing}")
    return StepRecord(
        index=int(data["j"]),
        action=Action.from_string(data["action"]),
        reward=float(data["r"]),
        r_cr=float(data["r_cr"]),
        r_ap=float(data["r_ap"]),
        r_q=float(data["r_q"]),
        unread_penalty=float(data["unread_penalty"]),
        counters=EpisodeCounters(
            chars_read=int(data["R"]),
            frames_spoken=int(data["S"]),
            read_streak=0,
            num_chars=num_chars,
            num_frames=num_frames,
        ),
        terminal=bool(data["terminal"]),
        attention=tuple(float(a) for a in data["alpha"]),
    )


@dataclass
class EpisodeTrace:
    """A finished episode: its records plus cached aggregates.

    ``discounted_return`` is the discounted sum of the per-record rewards
    and ``mean_mse`` the per-frame-element squared error averaged over the
    aligned frames.  Both are recomputable from the records; ``frames`` is
    an in-memory convenience (emitted frame matrix) and is not serialized.
    """

    sentence_id: int
    mode: str
    records: list[StepRecord] = field(default_factory=list)
    discounted_return: float = 0.0
    d_t: float = 0.0
    mean_mse: float = 0.0
    frames: object | None = None

    @property
    def actions(self) -> tuple[Action, ...]:
        return tuple(rec.action for rec in self.records)

    def path(self) -> PolicyPath:
        last = self.records[-1].counters
        return policy_path(list(self.actions), last.num_chars, last.num_frames)

    def recompute_return(self, discount: float) -> float:
        total = 0.0
        weight = 1.0
        for rec in self.records:
            total += weight * rec.reward
            weight *= discount
        return total

    def to_json_lines(self) -> list[str]:
        return [rec.to_json_line() for rec in self.records]


def trace_from_json_lines(
    lines: list[str],
    sentence_id: int,
    mode: str,
    num_chars: int,
    num_frames: int | None,
    discount: float,
) -> EpisodeTrace:
    records = []
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            records.append(record_from_json_line(line, num_chars, num_frames))
        except (DomainError, ValueError, KeyError) as exc:
            raise DomainError(f"line {i + 1}: {exc}") from None
    trace = EpisodeTrace(sentence_id=sentence_id, mode=mode, records=records)
    trace.discounted_return = trace.recompute_return(discount)
    return trace
