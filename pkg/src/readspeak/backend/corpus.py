"""Synthetic corpus with a built-in lookahead/quality trade-off.

Each alphabet symbol owns a fixed base frame vector and a fixed number
of output frames.  A configurable fraction of symbols is
lookahead-sensitive: their ground-truth frames are shifted by a
coarticulation vector belonging to the NEXT symbol, so a synthesizer
that has not read ahead cannot reproduce them exactly.  The size of
that unavoidable error is analytic (coarticulation norm squared spread
over the frame dimension), which is what makes every downstream reward
quantity checkable by hand.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core import DomainError


@dataclass(frozen=True)
class SyntheticCorpusSpec:
    alphabet_size: int = 12
    frame_dim: int = 16
    duration_choices: tuple[int, ...] = (2, 3, 4)
    sensitive_fraction: float = 0.25
    coart_scale: float = 0.5
    noise_scale: float = 0.0
    min_length: int = 12
    max_length: int = 24
    size: int = 217
    train_fraction: float = 0.92
    seed: int = 0

    def __post_init__(self) -> None:
        if self.alphabet_size < 2:
            raise DomainError("alphabet needs at least two symbols")
        if self.frame_dim < 1:
            raise DomainError("frame dimension must be positive")
        if not self.duration_choices or any(d < 1 for d in self.duration_choices):
            raise DomainError("durations must be positive")
        if not 0.0 <= self.sensitive_fraction <= 1.0:
            raise DomainError("sensitive fraction must lie in [0, 1]")
        if self.coart_scale <= 0.0:
            raise DomainError("coarticulation magnitude must be positive")
        if self.noise_scale < 0.0:
            raise DomainError("noise scale must be nonnegative")
        if not 1 <= self.min_length <= self.max_length:
            raise DomainError("invalid sentence length range")
        if self.size < 1:
            raise DomainError("corpus size must be positive")
        if not 0.0 < self.train_fraction <= 1.0:
            raise DomainError("train fraction must lie in (0, 1]")


@dataclass(frozen=True)
class SymbolTable:
    """Per-symbol properties: base frame, coarticulation vector, duration,
    sensitivity flag.  Base rows are unit-norm; coart rows share one norm."""

    base: np.ndarray
    coart: np.ndarray
    durations: tuple[int, ...]
    sensitive: tuple[bool, ...]

    @property
    def alphabet_size(self) -> int:
        return self.base.shape[0]

    @property
    def frame_dim(self) -> int:
        return self.base.shape[1]


def clean_symbol_frame(table: SymbolTable, symbols: tuple[int, ...], i: int) -> np.ndarray:
    """Noise-free frame value shared by all frames of symbol position ``i``
    (1-based).  The single source of truth for ground-truth construction:
    sensitive symbols with a successor carry that successor's
    coarticulation vector; the last symbol has none to carry."""
    sym = symbols[i - 1]
    frame = table.base[sym].copy()
    if table.sensitive[sym] and i < len(symbols):
        frame += table.coart[symbols[i]]
    return frame


@dataclass(frozen=True)
class Sentence:
    sentence_id: int
    symbols: tuple[int, ...]
    durations: tuple[int, ...]
    sensitive: tuple[bool, ...]
    frames: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.symbols)
        if n < 1:
            raise DomainError("sentence must contain at least one symbol")
        if len(self.durations) != n or len(self.sensitive) != n:
            raise DomainError("per-symbol annotation lengths must match")
        if self.frames.shape[0] != sum(self.durations):
            raise DomainError("frame count must equal the duration sum")

    @property
    def num_chars(self) -> int:
        return len(self.symbols)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def frame_dim(self) -> int:
        return self.frames.shape[1]

    def owner_of_frame(self, s: int) -> int:
        """1-based symbol position owning 1-based frame ``s``."""
        if not 1 <= s <= self.num_frames:
            raise DomainError(f"frame {s} outside [1, {self.num_frames}]")
        total = 0
        for i, dur in enumerate(self.durations, start=1):
            total += dur
            if s <= total:
                return i
        raise AssertionError("unreachable: durations sum to num_frames")


@dataclass
class Corpus:
    spec: SyntheticCorpusSpec
    table: SymbolTable
    sentences: list[Sentence]
    train_ids: tuple[int, ...]
    eval_ids: tuple[int, ...]

    def train_sentences(self) -> list[Sentence]:
        return [self.sentences[i] for i in self.train_ids]

    def eval_sentences(self) -> list[Sentence]:
        return [self.sentences[i] for i in self.eval_ids]


def sentence_from_symbols(
    symbols: tuple[int, ...] | list[int],
    table: SymbolTable,
    sentence_id: int = 0,
    rng: np.random.Generator | None = None,
    noise_scale: float = 0.0,
) -> Sentence:
    """Assemble a sentence (ground truth included) from symbol ids."""
    symbols = tuple(int(s) for s in symbols)
    for sym in symbols:
        if not 0 <= sym < table.alphabet_size:
            raise DomainError(f"symbol id {sym} outside alphabet")
    durations = tuple(table.durations[s] for s in symbols)
    sensitive = tuple(table.sensitive[s] for s in symbols)
    rows = []
    for i in range(1, len(symbols) + 1):
        value = clean_symbol_frame(table, symbols, i)
        for _ in range(durations[i - 1]):
            rows.append(value.copy())
    frames = np.array(rows)
    if noise_scale > 0.0:
        if rng is None:
            raise DomainError("noise requires a generator")
        frames += noise_scale * rng.normal(size=frames.shape)
    return Sentence(
        sentence_id=sentence_id,
        symbols=symbols,
        durations=durations,
        sensitive=sensitive,
        frames=frames,
    )


def generate_corpus(spec: SyntheticCorpusSpec) -> Corpus:
    """Deterministically build the symbol table and sentence set."""
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    a, d = spec.alphabet_size, spec.frame_dim

    base = rng.normal(size=(a, d))
    base /= np.linalg.norm(base, axis=1, keepdims=True)
    diffs = base[:, None, :] - base[None, :, :]
    off_diag = ~np.eye(a, dtype=bool)
    if np.min(np.linalg.norm(diffs, axis=2)[off_diag]) < 1e-9:
        raise DomainError("degenerate draw: base embeddings not distinct")

    coart = rng.normal(size=(a, d))
    coart *= spec.coart_scale / np.linalg.norm(coart, axis=1, keepdims=True)

    durations = tuple(int(x) for x in rng.choice(spec.duration_choices, size=a))
    n_sensitive = round(spec.sensitive_fraction * a)
    flags = np.zeros(a, dtype=bool)
    if n_sensitive:
        flags[rng.choice(a, size=n_sensitive, replace=False)] = True
    table = SymbolTable(
        base=base, coart=coart, durations=durations,
        sensitive=tuple(bool(f) for f in flags),
    )

    sentences = []
    for k in range(spec.size):
        n = int(rng.integers(spec.min_length, spec.max_length + 1))
        symbols = [int(s) for s in rng.integers(0, a, size=n)]
        sentences.append(
            sentence_from_symbols(
                symbols, table, sentence_id=k,
                rng=rng, noise_scale=spec.noise_scale,
            )
        )

    n_train = min(spec.size, round(spec.train_fraction * spec.size))
    return Corpus(
        spec=spec,
        table=table,
        sentences=sentences,
        train_ids=tuple(range(n_train)),
        eval_ids=tuple(range(n_train, spec.size)),
    )


def save_corpus(corpus: Corpus, corpus_path: str | Path, manifest_path: str | Path) -> None:
    """Write one sentence per line plus a manifest with the symbol table
    and split indices.  Floats go through repr, so reloads are exact."""
    corpus_path, manifest_path = Path(corpus_path), Path(manifest_path)
    with corpus_path.open("w", encoding="utf-8") as fh:
        for sent in corpus.sentences:
            fh.write(json.dumps({
                "id": sent.sentence_id,
                "symbols": list(sent.symbols),
                "durations": list(sent.durations),
                "sensitive": list(sent.sensitive),
                "frames": [float(v) for v in sent.frames.ravel()],
            }) + "\n")
    spec = corpus.spec
    manifest = {
        "format_version": 1,
        "spec": {
            "alphabet_size": spec.alphabet_size,
            "frame_dim": spec.frame_dim,
            "duration_choices": list(spec.duration_choices),
            "sensitive_fraction": spec.sensitive_fraction,
            "coart_scale": spec.coart_scale,
            "noise_scale": spec.noise_scale,
            "min_length": spec.min_length,
            "max_length": spec.max_length,
            "size": spec.size,
            "train_fraction": spec.train_fraction,
            "seed": spec.seed,
        },
        "table": {
            "base": [[float(v) for v in row] for row in corpus.table.base],
            "coart": [[float(v) for v in row] for row in corpus.table.coart],
            "durations": list(corpus.table.durations),
            "sensitive": list(corpus.table.sensitive),
        },
        "counts": {
            "size": len(corpus.sentences),
            "train": len(corpus.train_ids),
            "eval": len(corpus.eval_ids),
        },
        "train_ids": list(corpus.train_ids),
        "eval_ids": list(corpus.eval_ids),
    }
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def load_corpus(corpus_path: str | Path, manifest_path: str | Path) -> Corpus:
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DomainError(f"malformed manifest {manifest_path}: {exc}") from None
    version = manifest.get("format_version")
    if version != 1:
        raise DomainError(f"unsupported manifest format_version {version!r}")
    spec = SyntheticCorpusSpec(
        alphabet_size=int(manifest["spec"]["alphabet_size"]),
        frame_dim=int(manifest["spec"]["frame_dim"]),
        duration_choices=tuple(int(x) for x in manifest["spec"]["duration_choices"]),
        sensitive_fraction=float(manifest["spec"]["sensitive_fraction"]),
        coart_scale=float(manifest["spec"]["coart_scale"]),
        noise_scale=float(manifest["spec"]["noise_scale"]),
        min_length=int(manifest["spec"]["min_length"]),
        max_length=int(manifest["spec"]["max_length"]),
        size=int(manifest["spec"]["size"]),
        train_fraction=float(manifest["spec"]["train_fraction"]),
        seed=int(manifest["spec"]["seed"]),
    )
    table = SymbolTable(
        base=np.array(manifest["table"]["base"]),
        coart=np.array(manifest["table"]["coart"]),
        durations=tuple(int(x) for x in manifest["table"]["durations"]),
        sensitive=tuple(bool(x) for x in manifest["table"]["sensitive"]),
    )
    sentences = []
    with Path(corpus_path).open("r", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                symbols = tuple(int(s) for s in data["symbols"])
                durations = tuple(int(x) for x in data["durations"])
                frames = np.array(data["frames"]).reshape(
                    sum(durations), spec.frame_dim
                )
                sentences.append(Sentence(
                    sentence_id=int(data["id"]),
                    symbols=symbols,
                    durations=durations,
                    sensitive=tuple(bool(x) for x in data["sensitive"]),
                    frames=frames,
                ))
            except (KeyError, ValueError, json.JSONDecodeError) as exc:
                raise DomainError(f"corpus line {i + 1}: {exc}") from None
    if len(sentences) != manifest["counts"]["size"]:
        raise DomainError(
            f"manifest promises {manifest['counts']['size']} sentences, "
            f"file has {len(sentences)}"
        )
    return Corpus(
        spec=spec,
        table=table,
        sentences=sentences,
        train_ids=tuple(int(i) for i in manifest["train_ids"]),
        eval_ids=tuple(int(i) for i in manifest["eval_ids"]),
    )
