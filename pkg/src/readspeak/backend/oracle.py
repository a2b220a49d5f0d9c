"""Deterministic synthesis backend with an analytic error model.

Encoder outputs are the symbols' base frames, attention is a fixed
peaked shape centered on the symbol owning the next frame, and decoding
reproduces the ground-truth frame exactly whenever the information to
do so has been read.  The only possible mistake is a missing
coarticulation term on a sensitive symbol whose successor is unread,
which costs exactly ``coart_scale**2 / frame_dim`` of per-frame error —
so every reward a policy can earn is computable by hand.
"""

from __future__ import annotations

import numpy as np

from ..core import DomainError
from .base import BackendState, SynthesisBackend, _check_mode
from .corpus import Sentence, SymbolTable, clean_symbol_frame

PEAK_WEIGHT = 0.8
NEIGHBOR_WEIGHT = 0.1


class OracleBackend(SynthesisBackend):
    def __init__(self, table: SymbolTable) -> None:
        self.table = table
        self.hidden_dim = table.frame_dim
        self.frame_dim = table.frame_dim

    def reset(self, sentence: Sentence, mode: str = "train") -> BackendState:
        _check_mode(mode)
        return BackendState(
            sentence=sentence,
            mode=mode,
            encoder_outputs=[self.table.base[sentence.symbols[0]]],
            decoder_state=np.zeros(0),
        )

    def read(self, state: BackendState) -> BackendState:
        r = state.chars_read
        if r >= state.sentence.num_chars:
            raise DomainError("source exhausted")
        new = state.clone()
        new.encoder_outputs.append(self.table.base[state.sentence.symbols[r]])
        return new

    def _owner(self, state: BackendState) -> int:
        sentence = state.sentence
        s = min(state.frames_spoken + 1, sentence.num_frames)
        return sentence.owner_of_frame(s)

    def attention(self, state: BackendState) -> np.ndarray:
        """Peak on the next frame's owner (capped at the read prefix),
        small mass on its in-prefix neighbors, renormalized."""
        r = state.chars_read
        center = min(self._owner(state), r)
        weights = np.zeros(r)
        weights[center - 1] = PEAK_WEIGHT
        if center >= 2:
            weights[center - 2] = NEIGHBOR_WEIGHT
        if center < r:
            weights[center] = NEIGHBOR_WEIGHT
        return weights / weights.sum()

    def decode_frame(
        self, state: BackendState, context: np.ndarray, prev_frame: np.ndarray
    ) -> tuple[np.ndarray, BackendState]:
        sentence = state.sentence
        if state.mode == "train" and state.frames_spoken >= sentence.num_frames:
            raise DomainError("all frames already emitted")
        owner = self._owner(state)
        sym = sentence.symbols[owner - 1]
        successor_known = (
            not self.table.sensitive[sym]
            or owner == sentence.num_chars
            or state.chars_read >= owner + 1
        )
        if successor_known:
            frame = clean_symbol_frame(self.table, sentence.symbols, owner)
        else:
            frame = self.table.base[sym].copy()
        new = state.clone()
        new.alignments.append(self.padded_attention(state))
        new.frames_spoken += 1
        new.finished = new.frames_spoken >= sentence.num_frames
        return frame, new

    def finished(self, state: BackendState) -> bool:
        return state.frames_spoken >= state.sentence.num_frames
