from .base import BackendState, SynthesisBackend, full_buffer_decode
from .corpus import (
    Corpus,
    Sentence,
    SymbolTable,
    SyntheticCorpusSpec,
    clean_symbol_frame,
    generate_corpus,
    load_corpus,
    save_corpus,
    sentence_from_symbols,
)
from .learned import (
    LearnedBackend,
    LearnedBackendConfig,
    teacher_forced_pass,
    train_learned_backend,
)
from .oracle import OracleBackend

__all__ = [
    "BackendState",
    "SynthesisBackend",
    "full_buffer_decode",
    "Corpus",
    "Sentence",
    "SymbolTable",
    "SyntheticCorpusSpec",
    "clean_symbol_frame",
    "generate_corpus",
    "load_corpus",
    "save_corpus",
    "sentence_from_symbols",
    "LearnedBackend",
    "LearnedBackendConfig",
    "teacher_forced_pass",
    "train_learned_backend",
    "OracleBackend",
]
