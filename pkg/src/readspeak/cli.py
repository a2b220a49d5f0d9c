"""Command-line surface: data generation, training, evaluation, figures.

Every command is a pure function of (config, seed): re-running with the
same inputs reproduces every output file byte for byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .agent import (
    AgentConfig,
    AgentPolicy,
    BaselineNetwork,
    PolicyNetwork,
    train_agent,
)
from .backend import (
    LearnedBackend,
    LearnedBackendConfig,
    OracleBackend,
    generate_corpus,
    load_corpus,
    save_corpus,
    train_learned_backend,
)
from .baselines import make_rule_policy
from .checkpoint import load_checkpoint, load_into_store, save_checkpoint
from .config import RunConfig, _build, config_to_dict, load_config
from .core import DomainError, trace_from_json_lines
from .env import Environment
from .metrics import (
    curve_to_csv,
    evaluate_policy,
    summaries_to_csv,
    tradeoff_table,
    tradeoff_to_csv,
)
from .plots import render_path_svg, render_tradeoff_svg, write_svg

CORPUS_FILE = "corpus.ndjson"
MANIFEST_FILE = "manifest.json"


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        cfg = dataclasses.replace(
            cfg,
            seed=args.seed,
            corpus=dataclasses.replace(cfg.corpus, seed=args.seed),
            backend=dataclasses.replace(cfg.backend, seed=args.seed),
            agent=dataclasses.replace(cfg.agent, seed=args.seed),
        )
    if args.out_dir is not None:
        cfg = dataclasses.replace(cfg, out_dir=str(args.out_dir))
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_corpus(cfg: RunConfig):
    out = Path(cfg.out_dir)
    corpus_path, manifest_path = out / CORPUS_FILE, out / MANIFEST_FILE
    if not corpus_path.exists() or not manifest_path.exists():
        raise DomainError(
            f"no corpus under {out}; run 'readspeak gen-data' first")
    return load_corpus(corpus_path, manifest_path)


def _make_backend(cfg: RunConfig, backend_arg: str, corpus):
    if backend_arg == "oracle":
        return OracleBackend(corpus.table)
    ckpt = load_checkpoint(backend_arg)
    if ckpt.component != "backend":
        raise DomainError(
            f"{backend_arg} is a {ckpt.component!r} checkpoint, expected 'backend'")
    backend_cfg = _build(LearnedBackendConfig, ckpt.config, "backend")
    backend = LearnedBackend(backend_cfg)
    load_into_store(ckpt, backend.store)
    return backend


def _split_sentences(cfg: RunConfig, corpus):
    if cfg.eval.split == "train":
        return corpus.train_sentences()
    if cfg.eval.split == "eval":
        return corpus.eval_sentences()
    return list(corpus.sentences)


def cmd_gen_data(cfg: RunConfig) -> list[Path]:
    out = _out_dir(cfg)
    corpus = generate_corpus(cfg.corpus)
    corpus_path, manifest_path = out / CORPUS_FILE, out / MANIFEST_FILE
    save_corpus(corpus, corpus_path, manifest_path)
    return [corpus_path, manifest_path]


def cmd_train_backend(cfg: RunConfig) -> list[Path]:
    out = _out_dir(cfg)
    corpus = _load_corpus(cfg)
    backend, history = train_learned_backend(corpus, cfg.backend)
    ckpt_path = out / "backend.json"
    save_checkpoint(ckpt_path, "backend", backend.store.state_dict(),
                    config_to_dict(cfg.backend), cfg.backend.seed)
    curve_path = out / "backend_curve.csv"
    lines = ["epoch,train_frame_mse,train_stop_bce,val_frame_mse"]
    for row in history:
        lines.append(
            f"{row['epoch']},{row['train_frame_mse']!r},"
            f"{row['train_stop_bce']!r},{row['val_frame_mse']!r}")
    curve_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return [ckpt_path, curve_path]


def cmd_train_agent(cfg: RunConfig, backend_arg: str) -> list[Path]:
    out = _out_dir(cfg)
    corpus = _load_corpus(cfg)
    backend = _make_backend(cfg, backend_arg, corpus)
    env = Environment(backend, cfg.reward, cfg.window)
    trained = train_agent(env, corpus, cfg.agent)
    ckpt_path = out / "agent.json"
    tensors = {**trained.policy.store.state_dict(),
               **trained.baseline.store.state_dict()}
    snapshot = {
        "agent": config_to_dict(cfg.agent),
        "observation_size": env.observation_size(),
        "window": cfg.window,
    }
    save_checkpoint(ckpt_path, "agent", tensors, snapshot, cfg.agent.seed)
    curve_path = out / "train_curve.csv"
    curve_to_csv(trained.curve, curve_path)
    return [ckpt_path, curve_path]


def load_agent_policy(ckpt_path: str | Path) -> AgentPolicy:
    """Rebuild the greedy policy (and its value net) from a checkpoint."""
    ckpt = load_checkpoint(ckpt_path)
    if ckpt.component != "agent":
        raise DomainError(
            f"{ckpt_path} is a {ckpt.component!r} checkpoint, expected 'agent'")
    agent_cfg = _build(AgentConfig, ckpt.config.get("agent", {}), "agent")
    obs_size = int(ckpt.config.get("observation_size", 0))
    if obs_size < 1:
        raise DomainError("checkpoint lacks a valid observation_size")
    rng = np.random.default_rng(np.random.SeedSequence(agent_cfg.seed))
    policy = PolicyNetwork(obs_size, agent_cfg, rng)
    baseline = BaselineNetwork(obs_size, agent_cfg, rng)
    policy_tensors = {k: v for k, v in ckpt.tensors.items()
                      if k.startswith("policy.")}
    baseline_tensors = {k: v for k, v in ckpt.tensors.items()
                        if k.startswith("baseline.")}
    policy.store.load_state_dict(policy_tensors)
    baseline.store.load_state_dict(baseline_tensors)
    return AgentPolicy(policy)


def cmd_eval(cfg: RunConfig, policy_names: list[str], backend_arg: str,
             agent_ckpt: str | None) -> list[Path]:
    out = _out_dir(cfg)
    corpus = _load_corpus(cfg)
    backend = _make_backend(cfg, backend_arg, corpus)
    sentences = _split_sentences(cfg, corpus)
    written: list[Path] = []
    summaries = []
    for name in policy_names:
        if name == "agent":
            if not agent_ckpt:
                raise DomainError("policy 'agent' requires --agent-checkpoint")
            policy = load_agent_policy(agent_ckpt)
        else:
            policy = make_rule_policy(name)
        summary, traces = evaluate_policy(
            policy, sentences, backend, cfg.reward, cfg.window,
            mode=cfg.eval.mode, seed=cfg.seed)
        trace_dir = out / "traces" / summary.policy
        trace_dir.mkdir(parents=True, exist_ok=True)
        for trace in traces:
            trace_path = trace_dir / f"{trace.sentence_id}.ndjson"
            trace_path.write_text(
                "\n".join(trace.to_json_lines()) + "\n", encoding="utf-8")
            written.append(trace_path)
        summaries.append(summary)
    summary_path = out / "summary.csv"
    summaries_to_csv(summaries, summary_path)
    written.append(summary_path)
    if len(summaries) >= 2:
        tradeoff_path = out / "tradeoff.csv"
        tradeoff_to_csv(tradeoff_table(summaries), tradeoff_path)
        written.append(tradeoff_path)
    return written


def _infer_num_chars(records, unread_scale: float) -> int:
    last = records[-1]
    unread = abs(last.unread_penalty)
    if unread > 0 and unread_scale > 0:
        return last.counters.chars_read + round(unread / unread_scale)
    return last.counters.chars_read


def cmd_plot(cfg: RunConfig, kind: str, input_path: str, output: str | None,
             num_chars: int | None, index: int) -> list[Path]:
    in_path = Path(input_path)
    out_path = Path(output) if output else in_path.with_suffix(".svg")
    if kind == "tradeoff":
        from .metrics import tradeoff_from_csv

        svg = render_tradeoff_svg(tradeoff_from_csv(in_path))
        write_svg(svg, out_path)
        return [out_path]
    lines = in_path.read_text(encoding="utf-8").splitlines()
    episodes: list[list[str]] = [[]]
    for line in lines:
        if not line.strip():
            continue
        episodes[-1].append(line)
        if json.loads(line).get("terminal"):
            episodes.append([])
    episodes = [ep for ep in episodes if ep]
    if not 0 <= index < len(episodes):
        raise DomainError(
            f"episode index {index} out of range; file holds {len(episodes)}")
    probe = trace_from_json_lines(episodes[index], sentence_id=index,
                                  mode="train", num_chars=10 ** 9,
                                  num_frames=None,
                                  discount=cfg.reward.discount)
    n = num_chars if num_chars is not None else _infer_num_chars(
        probe.records, cfg.reward.unread_scale)
    trace = trace_from_json_lines(episodes[index], sentence_id=index,
                                  mode="train", num_chars=n, num_frames=None,
                                  discount=cfg.reward.discount)
    svg = render_path_svg(trace, n)
    write_svg(svg, out_path)
    return [out_path]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="readspeak",
        description="Incremental text-to-speech scheduling: synthetic data, "
                    "policy training, evaluation, figures.")
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=None,
                        help="override every component seed")
    parser.add_argument("--out-dir", type=Path, default=None,
                        help="artifact directory (default from config)")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("gen-data", help="generate the synthetic corpus")
    sub.add_parser("train-backend", help="fit the learned synthesizer")

    p_agent = sub.add_parser("train-agent", help="train the scheduling policy")
    p_agent.add_argument("--backend", default="oracle",
                         help="'oracle' or a backend checkpoint path")

    p_eval = sub.add_parser("eval", help="evaluate policies over a corpus split")
    p_eval.add_argument("--policy", action="append", required=True,
                        help="wue, w<k>s (e.g. w2s), or agent; repeatable")
    p_eval.add_argument("--backend", default="oracle",
                        help="'oracle' or a backend checkpoint path")
    p_eval.add_argument("--agent-checkpoint", default=None,
                        help="agent checkpoint (required for --policy agent)")

    p_plot = sub.add_parser("plot", help="render an SVG figure")
    p_plot.add_argument("--kind", choices=("path", "tradeoff"), required=True)
    p_plot.add_argument("--in", dest="input", required=True,
                        help="trace ndjson (path) or trade-off CSV")
    p_plot.add_argument("--out", default=None, help="output SVG path")
    p_plot.add_argument("--num-chars", type=int, default=None,
                        help="symbol count (inferred from the trace if omitted)")
    p_plot.add_argument("--index", type=int, default=0,
                        help="episode index within the trace file")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = _apply_overrides(cfg, args)
        if args.command == "gen-data":
            written = cmd_gen_data(cfg)
        elif args.command == "train-backend":
            written = cmd_train_backend(cfg)
        elif args.command == "train-agent":
            written = cmd_train_agent(cfg, args.backend)
        elif args.command == "eval":
            written = cmd_eval(cfg, args.policy, args.backend,
                               args.agent_checkpoint)
        elif args.command == "plot":
            written = cmd_plot(cfg, args.kind, args.input, args.out,
                               args.num_chars, args.index)
        else:  # pragma: no cover - argparse enforces the choices
            raise DomainError(f"unknown command {args.command!r}")
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
