"""Latency/quality measurement and cross-policy aggregation.

Latency is the normalized area under the READ/SPEAK staircase: the
mean over emitted frames of the fraction of the source read when each
frame was spoken.  Quality is the per-frame-element squared error of
teacher-force-aligned frames.  The trade-off table lines policies up
from most offline to most incremental.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    Action,
    DomainError,
    EpisodeTrace,
    PolicyPath,
    area_under_path,
)
from .env import Environment, RewardConfig

SUMMARY_COLUMNS = ("policy", "seed", "episodes", "mean_d_T", "median_d_T",
                   "mean_mse", "mean_return")
TRADEOFF_COLUMNS = ("policy", "mean_d_T", "mean_mse", "mean_return")


@dataclass(frozen=True)
class EvalSummary:
    policy: str
    seed: int
    episodes: int
    mean_d_t: float
    median_d_t: float
    mean_mse: float
    mean_return: float

    def row(self) -> list:
        return [self.policy, self.seed, self.episodes, self.mean_d_t,
                self.median_d_t, self.mean_mse, self.mean_return]


def latency_d_t(path: PolicyPath) -> float:
    """Normalized area under a complete policy path; 1 means fully
    offline (everything read before the first frame)."""
    return area_under_path(path.chars_before_frame, path.num_chars,
                           path.frames_spoken)


def quality_mse(trace: EpisodeTrace, ground_truth: np.ndarray) -> float:
    """Mean per-frame-element squared error of an aligned trace.

    ``trace.frames`` must hold the emitted frames; in eval mode frames
    past the reference length are excluded (unaligned), as are
    reference frames never emitted.
    """
    if trace.frames is None:
        raise DomainError("trace carries no emitted frames")
    emitted = np.asarray(trace.frames)
    count = min(emitted.shape[0], ground_truth.shape[0])
    if count == 0:
        raise DomainError("no aligned frames to score")
    if emitted.shape[1:] != ground_truth.shape[1:]:
        raise DomainError(
            f"frame shapes differ: {emitted.shape[1:]} vs {ground_truth.shape[1:]}")
    diff = emitted[:count] - ground_truth[:count]
    return float(np.mean(diff * diff))


def mse_from_rewards(trace: EpisodeTrace, quality_weight: float) -> float:
    """Invert the per-frame quality penalties back into a mean error."""
    if quality_weight == 0:
        raise DomainError("quality weight of zero carries no error information")
    speak_records = [r for r in trace.records if r.action is Action.SPEAK]
    if not speak_records:
        raise DomainError("trace has no frames")
    total = sum(r.r_q for r in speak_records)
    return total / (quality_weight * len(speak_records))


def evaluate_policy(
    policy,
    sentences,
    backend,
    cfg: RewardConfig | None = None,
    window: int = 5,
    mode: str = "train",
    seed: int = 0,
) -> tuple[EvalSummary, list[EpisodeTrace]]:
    """Run a policy over every sentence and aggregate.

    The policy object needs ``reset()`` and ``act(observation,
    counters) -> Action``; deterministic policies make the summary a
    pure function of (policy, sentences, backend).  ``seed`` labels the
    summary for bookkeeping.
    """
    if not sentences:
        raise DomainError("no sentences to evaluate")
    env = Environment(backend, cfg, window)
    traces: list[EpisodeTrace] = []
    for sentence in sentences:
        obs = env.reset(sentence, mode)
        policy.reset()
        while not env.terminal:
            action = policy.act(obs, env.counters)
            obs = env.step(action).observation
        traces.append(env.trace)
    d_ts = np.array([t.d_t for t in traces])
    summary = EvalSummary(
        policy=getattr(policy, "name", policy.__class__.__name__),
        seed=seed,
        episodes=len(traces),
        mean_d_t=float(d_ts.mean()),
        median_d_t=float(np.median(d_ts)),
        mean_mse=float(np.mean([t.mean_mse for t in traces])),
        mean_return=float(np.mean([t.discounted_return for t in traces])),
    )
    return summary, traces


def tradeoff_table(summaries: list[EvalSummary]) -> list[list]:
    """Rows sorted from most offline (highest latency) downward."""
    if len(summaries) < 2:
        raise DomainError("a trade-off needs at least two policies")
    ordered = sorted(summaries, key=lambda s: -s.mean_d_t)
    return [[s.policy, s.mean_d_t, s.mean_mse, s.mean_return] for s in ordered]


def _format_cell(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def _csv_text(header, rows) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_format_cell(v) for v in row])
    return buffer.getvalue()


def summaries_to_csv(summaries: list[EvalSummary], path: str | Path) -> None:
    Path(path).write_text(
        _csv_text(SUMMARY_COLUMNS, [s.row() for s in summaries]),
        encoding="utf-8")


def summaries_from_csv(path: str | Path) -> list[EvalSummary]:
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != SUMMARY_COLUMNS:
            raise DomainError(f"unexpected summary header {header}")
        out = []
        for row in reader:
            out.append(EvalSummary(
                policy=row[0], seed=int(row[1]), episodes=int(row[2]),
                mean_d_t=float(row[3]), median_d_t=float(row[4]),
                mean_mse=float(row[5]), mean_return=float(row[6])))
    return out


def tradeoff_to_csv(rows: list[list], path: str | Path) -> None:
    Path(path).write_text(_csv_text(TRADEOFF_COLUMNS, rows), encoding="utf-8")


def tradeoff_from_csv(path: str | Path) -> list[list]:
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != TRADEOFF_COLUMNS:
            raise DomainError(f"unexpected trade-off header {header}")
        return [[row[0], float(row[1]), float(row[2]), float(row[3])]
                for row in reader]


def curve_to_csv(curve: list[dict], path: str | Path) -> None:
    """Training curve: one row of batch means per update."""
    header = ("batch", "mean_return", "mean_d_T", "mean_mse")
    rows = [[row["batch"], row["mean_return"], row["mean_d_T"], row["mean_mse"]]
            for row in curve]
    Path(path).write_text(_csv_text(header, rows), encoding="utf-8")
