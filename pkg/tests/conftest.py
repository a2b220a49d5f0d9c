"""Shared fixtures: hand-built symbol tables and generated corpora.

The hand-built table keeps every number reproducible by hand: base
frames are scaled unit vectors, the coarticulation vectors all point
along the last axis, and symbol 2 is the single context-sensitive one.
"""

from __future__ import annotations

import numpy as np
import pytest

from readspeak.backend import (
    Sentence,
    SymbolTable,
    SyntheticCorpusSpec,
    clean_symbol_frame,
    generate_corpus,
)

TINY_SPEC = SyntheticCorpusSpec(
    alphabet_size=6,
    frame_dim=8,
    min_length=3,
    max_length=6,
    size=20,
    train_fraction=0.8,
    seed=3,
)

#: (number, name, passed) tuples registered by the acceptance suite and
#: echoed after the test summary so each criterion gets one visible line.
ACCEPTANCE_RESULTS: list[tuple[int, str, bool]] = []


def record_criterion(number: int, name: str, passed: bool) -> None:
    ACCEPTANCE_RESULTS.append((number, name, passed))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed in sorted(ACCEPTANCE_RESULTS):
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number} ({name}): {verdict}")


@pytest.fixture(scope="session")
def tiny_corpus():
    return generate_corpus(TINY_SPEC)


@pytest.fixture(scope="session")
def default_corpus():
    return generate_corpus(SyntheticCorpusSpec())


def hand_table(frame_dim: int = 4, coart_scale: float = 0.5) -> SymbolTable:
    """Three symbols on orthogonal axes; symbol 2 is sensitive and all
    coarticulation vectors equal ``coart_scale * e_last``."""
    base = np.eye(3, frame_dim)
    coart = np.zeros((3, frame_dim))
    coart[:, frame_dim - 1] = coart_scale
    return SymbolTable(base=base, coart=coart, durations=(2, 2, 2),
                       sensitive=(False, False, True))


def hand_sentence(table: SymbolTable, symbols, durations,
                  sentence_id: int = 0) -> Sentence:
    """Ground-truth sentence with explicit per-position durations."""
    symbols = tuple(symbols)
    durations = tuple(durations)
    rows = []
    for i, dur in enumerate(durations, start=1):
        frame = clean_symbol_frame(table, symbols, i)
        rows.extend([frame] * dur)
    return Sentence(
        sentence_id=sentence_id,
        symbols=symbols,
        durations=durations,
        sensitive=tuple(table.sensitive[s] for s in symbols),
        frames=np.array(rows),
    )
