"""Toy learned sequence-to-frame model honoring the incremental contract.

One-hot symbols feed a unidirectional recurrent encoder; an additive
content-based attention scores the readable prefix against the decoder
state; the decoder consumes (context, previous frame) and drives a
linear frame head plus a sigmoid stop head.  Training is teacher-forced
with the full buffer read, minimizing frame error plus stop
cross-entropy, with analytic gradients through the whole unroll.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import DomainError
from ..numerics import GruCell, GruSpec, Mlp, MlpSpec, ParamStore, uniform_init
from .base import BackendState, SynthesisBackend, _check_mode
from .corpus import Corpus, Sentence


@dataclass(frozen=True)
class LearnedBackendConfig:
    alphabet_size: int = 12
    frame_dim: int = 16
    hidden_size: int = 32
    attention_size: int = 32
    learning_rate: float = 1e-3
    max_epochs: int = 60
    patience: int = 8
    min_delta: float = 1e-5
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.alphabet_size, self.frame_dim, self.hidden_size,
               self.attention_size) < 1:
            raise DomainError("model sizes must be positive")
        if self.learning_rate <= 0:
            raise DomainError("learning rate must be positive")
        if self.max_epochs < 1 or self.patience < 1:
            raise DomainError("epoch and patience counts must be positive")


class LearnedBackend(SynthesisBackend):
    def __init__(self, config: LearnedBackendConfig) -> None:
        self.config = config
        self.hidden_dim = config.hidden_size
        self.frame_dim = config.frame_dim
        self.store = ParamStore()
        rng = np.random.default_rng(np.random.SeedSequence(config.seed))
        h, k = config.hidden_size, config.attention_size
        self.encoder = GruCell(
            self.store, "enc", GruSpec(config.alphabet_size, h), rng)
        self.store.add("att.w_s", uniform_init(rng, (k, h), h))
        self.store.add("att.w_h", uniform_init(rng, (k, h), h))
        self.store.add("att.b", np.zeros(k))
        self.store.add("att.v", uniform_init(rng, (k,), k))
        self.decoder = GruCell(
            self.store, "dec", GruSpec(h + config.frame_dim, h), rng)
        self.frame_head = Mlp(
            self.store, "frame", MlpSpec(h, (config.frame_dim,), ("linear",)), rng)
        self.stop_head = Mlp(self.store, "stop", MlpSpec(h, (1,), ("linear",)), rng)

    def _one_hot(self, symbol: int) -> np.ndarray:
        x = np.zeros(self.config.alphabet_size)
        x[symbol] = 1.0
        return x

    def reset(self, sentence: Sentence, mode: str = "train") -> BackendState:
        _check_mode(mode)
        if sentence.frame_dim != self.frame_dim:
            raise DomainError(
                f"sentence frame dim {sentence.frame_dim} != model {self.frame_dim}")
        h1, _ = self.encoder.forward(
            self._one_hot(sentence.symbols[0]), self.encoder.initial_state())
        return BackendState(
            sentence=sentence,
            mode=mode,
            encoder_outputs=[h1],
            decoder_state=np.zeros(self.config.hidden_size),
        )

    def read(self, state: BackendState) -> BackendState:
        r = state.chars_read
        if r >= state.sentence.num_chars:
            raise DomainError("source exhausted")
        h_next, _ = self.encoder.forward(
            self._one_hot(state.sentence.symbols[r]), state.encoder_outputs[-1])
        new = state.clone()
        new.encoder_outputs.append(h_next)
        return new

    def _scores(self, decoder_state: np.ndarray, h_matrix: np.ndarray) -> np.ndarray:
        p = self.store.param
        pre = np.tanh(
            decoder_state @ p("att.w_s").T + h_matrix @ p("att.w_h").T + p("att.b"))
        return pre @ p("att.v")

    def attention(self, state: BackendState) -> np.ndarray:
        h_matrix = np.vstack(state.encoder_outputs)
        scores = self._scores(state.decoder_state, h_matrix)
        shifted = np.exp(scores - np.max(scores))
        return shifted / shifted.sum()

    def decode_frame(
        self, state: BackendState, context: np.ndarray, prev_frame: np.ndarray
    ) -> tuple[np.ndarray, BackendState]:
        sentence = state.sentence
        if state.mode == "train" and state.frames_spoken >= sentence.num_frames:
            raise DomainError("all frames already emitted")
        x = np.ascontiguousarray(np.concatenate([context, prev_frame]))
        s_next, _ = self.decoder.forward(x, state.decoder_state)
        frame, _ = self.frame_head.forward(s_next)
        stop_logit, _ = self.stop_head.forward(s_next)
        new = state.clone()
        new.alignments.append(self.padded_attention(state))
        new.decoder_state = s_next
        new.frames_spoken += 1
        if state.mode == "train":
            new.finished = new.frames_spoken >= sentence.num_frames
        else:
            stop_p = 1.0 / (1.0 + np.exp(-stop_logit[0]))
            new.finished = state.finished or stop_p > 0.5
        return frame, new

    def finished(self, state: BackendState) -> bool:
        return state.finished


def _attention_forward(store: ParamStore, s: np.ndarray, h_matrix: np.ndarray):
    """Training-path attention with everything backward needs cached."""
    p = store.param
    pre = s @ p("att.w_s").T + h_matrix @ p("att.w_h").T + p("att.b")
    g = np.tanh(pre)
    scores = g @ p("att.v")
    shifted = np.exp(scores - np.max(scores))
    alpha = shifted / shifted.sum()
    context = alpha @ h_matrix
    return context, alpha, (s, h_matrix, g, alpha)


def _attention_backward(store: ParamStore, d_context: np.ndarray, cache):
    """Returns (d_s, d_h_matrix); accumulates attention parameter grads."""
    s, h_matrix, g, alpha = cache
    p = store.param
    d_alpha = h_matrix @ d_context
    d_h = alpha[:, None] * d_context[None, :]
    d_scores = alpha * (d_alpha - float(alpha @ d_alpha))
    d_g = np.outer(d_scores, p("att.v"))
    store.accumulate_grad("att.v", g.T @ d_scores)
    d_pre = d_g * (1.0 - g * g)
    store.accumulate_grad("att.b", d_pre.sum(axis=0))
    store.accumulate_grad("att.w_h", d_pre.T @ h_matrix)
    d_h += d_pre @ p("att.w_h")
    d_u = d_pre.sum(axis=0)
    store.accumulate_grad("att.w_s", np.outer(d_u, s))
    d_s = d_u @ p("att.w_s")
    return d_s, d_h


def _stable_bce(logit: float, target: float) -> float:
    return max(logit, 0.0) - logit * target + float(np.log1p(np.exp(-abs(logit))))


def teacher_forced_pass(
    backend: LearnedBackend,
    sentence: Sentence,
    accumulate_grads: bool = False,
) -> tuple[float, float, np.ndarray]:
    """Full-buffer teacher-forced decode of one sentence.

    Returns (mean per-element frame MSE, mean stop cross-entropy,
    predicted frames); with ``accumulate_grads`` the analytic gradient of
    frame_mse + stop_bce lands in the backend's store.
    """
    store = backend.store
    symbols = sentence.symbols
    n, t_total, d = sentence.num_chars, sentence.num_frames, sentence.frame_dim

    enc_caches = []
    h_prev = backend.encoder.initial_state()
    h_rows = []
    for i in range(n):
        h_prev, cache = backend.encoder.forward(backend._one_hot(symbols[i]), h_prev)
        enc_caches.append(cache)
        h_rows.append(h_prev)
    h_matrix = np.vstack(h_rows)

    s = np.zeros(backend.config.hidden_size)
    frame_mse = 0.0
    stop_bce = 0.0
    predicted = np.zeros((t_total, d))
    steps = []
    for t in range(t_total):
        context, _, att_cache = _attention_forward(store, s, h_matrix)
        prev = sentence.frames[t - 1] if t > 0 else np.zeros(d)
        x = np.ascontiguousarray(np.concatenate([context, prev]))
        s_new, dec_cache = backend.decoder.forward(x, s)
        frame, frame_cache = backend.frame_head.forward(s_new)
        logit, stop_cache = backend.stop_head.forward(s_new)
        predicted[t] = frame
        target = 1.0 if t == t_total - 1 else 0.0
        diff = frame - sentence.frames[t]
        frame_mse += float(diff @ diff) / (d * t_total)
        stop_bce += _stable_bce(float(logit[0]), target) / t_total
        if accumulate_grads:
            steps.append((att_cache, dec_cache, frame_cache, stop_cache,
                          diff, float(logit[0]), target))
        s = s_new

    if accumulate_grads:
        d_h_matrix = np.zeros_like(h_matrix)
        d_s = np.zeros_like(s)
        for t in range(t_total - 1, -1, -1):
            att_cache, dec_cache, frame_cache, stop_cache, diff, logit, target = steps[t]
            sig = 1.0 / (1.0 + np.exp(-logit))
            d_s_new = backend.frame_head.backward(2.0 * diff / (d * t_total), frame_cache)
            d_s_new = d_s_new + backend.stop_head.backward(
                np.array([(sig - target) / t_total]), stop_cache)
            d_s_new = d_s_new + d_s
            d_x, d_s = backend.decoder.backward(d_s_new, dec_cache)
            d_context = d_x[: backend.config.hidden_size]
            d_s_att, d_h = _attention_backward(store, d_context, att_cache)
            d_s = d_s + d_s_att
            d_h_matrix += d_h
        d_h_chain = np.zeros(backend.config.hidden_size)
        for i in range(n - 1, -1, -1):
            _, d_h_chain = backend.encoder.backward(
                np.ascontiguousarray(d_h_matrix[i] + d_h_chain), enc_caches[i])

    return frame_mse, stop_bce, predicted


def train_learned_backend(
    corpus: Corpus, config: LearnedBackendConfig
) -> tuple[LearnedBackend, list[dict]]:
    """Fit the model on the train split until held-out MSE plateaus.

    Returns the trained backend plus one history row per epoch.
    """
    train = corpus.train_sentences()
    if not train:
        raise DomainError("corpus has no training sentences")
    heldout = corpus.eval_sentences() or train
    backend = LearnedBackend(config)
    order_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))

    history: list[dict] = []
    best = np.inf
    stale = 0
    for epoch in range(config.max_epochs):
        train_mse = 0.0
        train_bce = 0.0
        for idx in order_rng.permutation(len(train)):
            sent = train[idx]
            backend.store.zero_grads()
            mse, bce, _ = teacher_forced_pass(backend, sent, accumulate_grads=True)
            if not (np.isfinite(mse) and np.isfinite(bce)):
                raise DomainError(
                    f"training diverged at epoch {epoch} on sentence "
                    f"{sent.sentence_id}: mse={mse}, bce={bce}")
            train_mse += mse / len(train)
            train_bce += bce / len(train)
            backend.store.adam_step(config.learning_rate)
        val_mse = 0.0
        for sent in heldout:
            mse, _, _ = teacher_forced_pass(backend, sent)
            val_mse += mse / len(heldout)
        history.append({
            "epoch": epoch,
            "train_frame_mse": float(train_mse),
            "train_stop_bce": float(train_bce),
            "val_frame_mse": float(val_mse),
        })
        if val_mse < best - config.min_delta:
            best = val_mse
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return backend, history
