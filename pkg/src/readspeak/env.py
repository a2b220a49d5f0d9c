"""Decision environment around a synthesis backend.

Each step executes one READ or SPEAK, prices it (consecutive-read
penalty, per-frame quality penalty), and applies the end-of-episode
rules: once the source is exhausted the remaining frames are emitted
automatically as a forced tail whose rewards come back bundled into the
triggering step; finishing the frame budget with unread symbols costs
one penalty unit per symbol; and every episode ends with a latency
penalty proportional to how far the area under the policy path exceeds
its target.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .core import (
    Action,
    DomainError,
    EpisodeCounters,
    EpisodeTrace,
    StepRecord,
    apply_action,
    area_under_path,
)

if TYPE_CHECKING:
    from .backend.base import SynthesisBackend
    from .backend.corpus import Sentence


@dataclass(frozen=True)
class RewardConfig:
    """Weights and targets of the composite reward.

    The three weights are negative: rewards are penalties.  A read
    streak is free up to ``acceptable_streak`` consecutive READs and
    costs ``read_streak_weight`` (doubled beyond the threshold) after;
    the terminal area penalty activates once the normalized area under
    the policy path exceeds ``target_area``.
    """

    read_streak_weight: float = -1.0
    area_weight: float = -10.0
    quality_weight: float = -100.0
    acceptable_streak: int = 4
    target_area: float = 0.5
    discount: float = 0.99
    unread_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.read_streak_weight > 0 or self.area_weight > 0 or self.quality_weight > 0:
            raise DomainError("reward weights must not be positive")
        if self.acceptable_streak < 1:
            raise DomainError("acceptable streak must be at least 1")
        if not 0.0 <= self.target_area <= 1.0:
            raise DomainError("target area must lie in [0, 1]")
        if not 0.0 <= self.discount <= 1.0:
            raise DomainError("discount must lie in [0, 1]")
        if self.unread_scale < 0:
            raise DomainError("unread scale must be nonnegative")


@dataclass(frozen=True)
class Observation:
    """What the agent sees: attention context over the readable prefix,
    a fixed window of the newest attention weights (zero-padded on the
    left while fewer than ``window`` symbols are readable), and the
    previously emitted frame (ground truth in train mode, the model's
    own output in eval mode; zeros before the first frame)."""

    context: np.ndarray
    window: np.ndarray
    last_frame: np.ndarray

    def vector(self) -> np.ndarray:
        return np.ascontiguousarray(
            np.concatenate([self.context, self.window, self.last_frame]))

    @property
    def size(self) -> int:
        return self.context.size + self.window.size + self.last_frame.size


@dataclass(frozen=True)
class StepResult:
    observation: Observation
    reward: float
    terminal: bool
    info: dict


def context_vector(encoder_outputs, weights: np.ndarray) -> np.ndarray:
    """Attention-weighted combination of the readable encoder outputs."""
    h_matrix = np.vstack(encoder_outputs)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 1 or weights.size != h_matrix.shape[0]:
        raise DomainError(
            f"{weights.size} weights for {h_matrix.shape[0]} encoder outputs")
    return weights @ h_matrix


def frame_mse(y: np.ndarray, y_hat: np.ndarray) -> float:
    if y.shape != y_hat.shape:
        raise DomainError(f"frame shapes differ: {y.shape} vs {y_hat.shape}")
    diff = np.asarray(y, dtype=np.float64) - y_hat
    return float(diff @ diff) / diff.size


def reward_consecutive_read(streak: int, cfg: RewardConfig) -> float:
    """Zero below the acceptable streak, one unit at it, two beyond."""
    if streak < 1:
        raise DomainError("streak penalty applies to READ steps only")
    return cfg.read_streak_weight * (float(np.sign(streak - cfg.acceptable_streak)) + 1.0)


def reward_area_penalty(d_t: float, cfg: RewardConfig) -> float:
    if not 0.0 <= d_t <= 1.0 + 1e-12:
        raise DomainError(f"normalized area {d_t} outside [0, 1]")
    return cfg.area_weight * max(0.0, d_t - cfg.target_area)


def reward_quality(y: np.ndarray, y_hat: np.ndarray, action: Action,
                   cfg: RewardConfig) -> float:
    if action is Action.READ:
        return 0.0
    return cfg.quality_weight * frame_mse(y, y_hat)


class Environment:
    """Stateful episode runner; one instance handles one episode at a time.

    In train mode the teacher-forced frame budget equals the sentence's
    ground-truth length and the forced tail fires as soon as the source
    is exhausted.  In eval mode the backend's own stop criterion ends
    the episode (with a hard cap at twice the reference length plus a
    margin, in case a learned stop head never fires).
    """

    def __init__(self, backend: "SynthesisBackend", cfg: RewardConfig | None = None,
                 window: int = 5) -> None:
        if window < 1:
            raise DomainError("attention window must be positive")
        self.backend = backend
        self.cfg = cfg if cfg is not None else RewardConfig()
        self.window = window
        self._sentence: "Sentence | None" = None

    # -- episode lifecycle -------------------------------------------------

    def reset(self, sentence: "Sentence", mode: str = "train") -> Observation:
        self._sentence = sentence
        self._mode = mode
        self._bstate = self.backend.reset(sentence, mode)
        budget = sentence.num_frames if mode == "train" else None
        self._counters = EpisodeCounters.initial(sentence.num_chars, budget)
        self._records: list[StepRecord] = []
        self._chars_before: list[int] = []
        self._frame_mses: list[float] = []
        self._emitted: list[np.ndarray] = []
        self._last_frame = np.zeros(self.backend.frame_dim)
        self._terminal = False
        self.trace: EpisodeTrace | None = None
        self._frame_cap = 2 * sentence.num_frames + 8
        if mode == "train" and self._counters.source_exhausted:
            self._run_forced_tail()
            self._finalize()
        self._refresh_observation()
        return self._obs

    @property
    def terminal(self) -> bool:
        return self._terminal

    @property
    def counters(self) -> EpisodeCounters:
        return self._counters

    @property
    def observation(self) -> Observation:
        return self._obs

    def observation_size(self) -> int:
        return self.backend.hidden_dim + self.window + self.backend.frame_dim

    # -- observation assembly ---------------------------------------------

    def _refresh_observation(self) -> None:
        self._alpha = self.backend.attention(self._bstate)
        ctx = context_vector(self._bstate.encoder_outputs, self._alpha)
        win = np.zeros(self.window)
        take = min(self.window, self._alpha.size)
        win[self.window - take:] = self._alpha[self._alpha.size - take:]
        self._obs = Observation(context=ctx, window=win,
                                last_frame=self._last_frame.copy())

    # -- stepping ----------------------------------------------------------

    def step(self, action: Action) -> StepResult:
        if self._sentence is None:
            raise DomainError("reset before stepping")
        if self._terminal:
            raise DomainError("episode is over; reset to continue")
        if action is Action.READ:
            result = self._step_read()
        else:
            result = self._step_speak()
        self._refresh_observation()
        return StepResult(observation=self._obs, reward=result[0],
                          terminal=self._terminal, info=result[1])

    def _info(self, r_cr=0.0, r_ap=0.0, r_q=0.0, unread=0.0, forced=False) -> dict:
        return {"r_cr": r_cr, "r_ap": r_ap, "r_q": r_q,
                "unread_penalty": unread, "forced_tail": forced}

    def _step_read(self) -> tuple[float, dict]:
        self._bstate = self.backend.read(self._bstate)
        self._counters = apply_action(self._counters, Action.READ)
        r_cr = reward_consecutive_read(self._counters.read_streak, self.cfg)
        alpha = self.backend.attention(self._bstate)
        self._records.append(StepRecord(
            index=len(self._records), action=Action.READ, reward=r_cr,
            r_cr=r_cr, r_ap=0.0, r_q=0.0, unread_penalty=0.0,
            counters=self._counters, terminal=False,
            attention=tuple(float(a) for a in alpha)))
        if self._mode == "train" and self._counters.source_exhausted:
            tail_q, tail_ap, m_last = self._run_forced_tail()
            self._finalize()
            gamma = self.cfg.discount
            discounted_ap = gamma ** m_last * tail_ap
            bundled = r_cr + tail_q + discounted_ap
            return bundled, self._info(r_cr=r_cr, r_q=tail_q,
                                       r_ap=discounted_ap, forced=True)
        return r_cr, self._info(r_cr=r_cr)

    def _decode_one(self) -> tuple[float, np.ndarray, tuple[float, ...]]:
        """Emit one frame with the currently observed attention; returns
        (per-frame mse, frame, weights used)."""
        alpha = self.backend.attention(self._bstate)
        ctx = context_vector(self._bstate.encoder_outputs, alpha)
        frame, self._bstate = self.backend.decode_frame(
            self._bstate, ctx, self._last_frame)
        self._counters = apply_action(self._counters, Action.SPEAK)
        s = self._counters.frames_spoken
        truth = self._sentence.frames
        mse = frame_mse(truth[s - 1], frame) if s <= truth.shape[0] else 0.0
        self._chars_before.append(self._counters.chars_read)
        if s <= truth.shape[0]:
            self._frame_mses.append(mse)
        self._emitted.append(frame)
        if self._mode == "train":
            self._last_frame = truth[s - 1].copy()
        else:
            self._last_frame = frame.copy()
        return mse, frame, tuple(float(a) for a in alpha)

    def _step_speak(self) -> tuple[float, dict]:
        mse, _, alpha = self._decode_one()
        r_q = self.cfg.quality_weight * mse
        done = (
            self._counters.frames_spoken == self._counters.num_frames
            if self._mode == "train"
            else (self.backend.finished(self._bstate)
                  or self._counters.frames_spoken >= self._frame_cap)
        )
        r_ap = unread = 0.0
        if done:
            d_t = area_under_path(
                self._chars_before, self._counters.num_chars,
                len(self._chars_before))
            r_ap = reward_area_penalty(d_t, self.cfg)
            if not self._counters.source_exhausted:
                unread = -self.cfg.unread_scale * (
                    self._counters.num_chars - self._counters.chars_read)
        reward = r_q + r_ap + unread
        self._records.append(StepRecord(
            index=len(self._records), action=Action.SPEAK, reward=reward,
            r_cr=0.0, r_ap=r_ap, r_q=r_q, unread_penalty=unread,
            counters=self._counters, terminal=done, attention=alpha))
        if done:
            self._finalize()
        return reward, self._info(r_ap=r_ap, r_q=r_q, unread=unread)

    def _run_forced_tail(self) -> tuple[float, float, int]:
        """Auto-SPEAK until the frame budget is spent.  Returns the
        discounted tail quality sum (discounted relative to the
        triggering step), the undiscounted terminal area penalty, and
        the tail length; the per-step records carry undiscounted
        rewards, so replaying them with the discount reproduces the
        bundled value exactly."""
        gamma = self.cfg.discount
        tail_q = 0.0
        m = 0
        while self._counters.frames_spoken < self._counters.num_frames:
            mse, _, alpha = self._decode_one()
            m += 1
            r_q = self.cfg.quality_weight * mse
            tail_q += gamma ** m * r_q
            last = self._counters.frames_spoken == self._counters.num_frames
            r_ap = 0.0
            if last:
                d_t = area_under_path(
                    self._chars_before, self._counters.num_chars,
                    len(self._chars_before))
                r_ap = reward_area_penalty(d_t, self.cfg)
            self._records.append(StepRecord(
                index=len(self._records), action=Action.SPEAK,
                reward=r_q + r_ap, r_cr=0.0, r_ap=r_ap, r_q=r_q,
                unread_penalty=0.0, counters=self._counters, terminal=last,
                attention=alpha, forced=True))
        return tail_q, self._records[-1].r_ap, m

    def _finalize(self) -> None:
        self._terminal = True
        trace = EpisodeTrace(
            sentence_id=self._sentence.sentence_id,
            mode=self._mode,
            records=list(self._records),
            d_t=area_under_path(self._chars_before, self._counters.num_chars,
                                len(self._chars_before)),
            mean_mse=(sum(self._frame_mses) / len(self._frame_mses)
                      if self._frame_mses else 0.0),
            frames=np.array(self._emitted) if self._emitted else None,
        )
        trace.discounted_return = trace.recompute_return(self.cfg.discount)
        self.trace = trace
