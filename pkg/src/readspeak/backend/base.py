"""Synthesis backend contract shared by the oracle and learned models.

A backend turns a growing prefix of source symbols into output frames:
``read`` appends one encoder output, ``attention`` scores the readable
prefix for the next frame, ``decode_frame`` emits that frame.  Encoder
outputs are incremental by contract: ``h_i`` may depend only on symbols
``x_1..x_i``, so reading further never changes earlier entries.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field, replace

import numpy as np

from ..core import DomainError
from .corpus import Sentence

MODES = ("train", "eval")


@dataclass
class BackendState:
    """Value object holding everything a backend accumulates in an episode.

    ``alignments`` stores one full-width row per emitted frame, zero in
    the columns beyond the read prefix at emission time.
    """

    sentence: Sentence
    mode: str
    encoder_outputs: list[np.ndarray]
    decoder_state: np.ndarray
    frames_spoken: int = 0
    alignments: list[np.ndarray] = field(default_factory=list)
    finished: bool = False

    @property
    def chars_read(self) -> int:
        return len(self.encoder_outputs)

    def clone(self) -> "BackendState":
        return replace(
            self,
            encoder_outputs=list(self.encoder_outputs),
            alignments=list(self.alignments),
            decoder_state=self.decoder_state.copy(),
        )

    def alignment_matrix(self) -> np.ndarray:
        """Emitted-frames-by-symbols attention history."""
        n = self.sentence.num_chars
        if not self.alignments:
            return np.zeros((0, n))
        return np.vstack(self.alignments)


def _check_mode(mode: str) -> str:
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


class SynthesisBackend(abc.ABC):
    """Incremental sequence-to-frame synthesizer."""

    #: dimension of encoder outputs (and of the observation context slot)
    hidden_dim: int
    #: dimension of emitted frames
    frame_dim: int

    @abc.abstractmethod
    def reset(self, sentence: Sentence, mode: str = "train") -> BackendState:
        """Start an episode with exactly the first symbol ingested."""

    @abc.abstractmethod
    def read(self, state: BackendState) -> BackendState:
        """Ingest the next symbol; raises once the source is exhausted."""

    @abc.abstractmethod
    def attention(self, state: BackendState) -> np.ndarray:
        """Weights over the readable prefix for the next frame; sums to 1."""

    @abc.abstractmethod
    def decode_frame(
        self, state: BackendState, context: np.ndarray, prev_frame: np.ndarray
    ) -> tuple[np.ndarray, BackendState]:
        """Emit the next frame from (attention context, previous frame)."""

    @abc.abstractmethod
    def finished(self, state: BackendState) -> bool:
        """Whether synthesis reported completion (stop criterion)."""

    def padded_attention(self, state: BackendState) -> np.ndarray:
        """Attention row widened to the full symbol count with zeros."""
        weights = self.attention(state)
        row = np.zeros(state.sentence.num_chars)
        row[: weights.size] = weights
        return row


def full_buffer_decode(
    backend: "SynthesisBackend", sentence: Sentence, mode: str = "train"
) -> tuple[np.ndarray, BackendState]:
    """Read the whole source, then decode the reference frame count.

    Teacher-forced in train mode (previous frame from the ground
    truth), free-running in eval mode.  This is the offline-equivalence
    reference: a policy that reads everything before speaking must
    reproduce these frames bit for bit.
    """
    from ..env import context_vector

    state = backend.reset(sentence, mode)
    while state.chars_read < sentence.num_chars:
        state = backend.read(state)
    frames = []
    prev = np.zeros(backend.frame_dim)
    for t in range(sentence.num_frames):
        weights = backend.attention(state)
        context = context_vector(state.encoder_outputs, weights)
        frame, state = backend.decode_frame(state, context, prev)
        frames.append(frame)
        prev = sentence.frames[t] if mode == "train" else frame
    return np.array(frames), state
