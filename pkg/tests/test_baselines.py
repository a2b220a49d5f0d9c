"""Rule policies: read-until-exhausted and the fixed read/speak cycle."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from readspeak.backend import OracleBackend
from readspeak.baselines import (
    RulePolicy,
    WaitKConfig,
    make_rule_policy,
    wks_policy,
    wue_policy,
)
from readspeak.core import Action, DomainError, EpisodeCounters, policy_path
from readspeak.env import Environment
from readspeak.metrics import evaluate_policy

from conftest import hand_sentence, hand_table

R, S = Action.READ, Action.SPEAK


def run_policy(policy: RulePolicy, sentence, table):
    env = Environment(OracleBackend(table))
    obs = env.reset(sentence, "train")
    policy.reset()
    while not env.terminal:
        obs = env.step(policy.act(obs, env.counters)).observation
    return env.trace


class TestWue:
    def test_reads_until_exhausted(self):
        c = EpisodeCounters.initial(3, 4)
        assert wue_policy(c) is R
        c = EpisodeCounters(3, 0, 2, num_chars=3, num_frames=4)
        assert wue_policy(c) is S

    def test_full_episode_shape(self):
        table = hand_table()
        sentence = hand_sentence(table, (0, 1, 2), (1, 2, 1))
        trace = run_policy(make_rule_policy("wue"), sentence, table)
        # (N - 1) explicit reads, then every frame arrives forced.
        assert trace.actions == (R, R, S, S, S, S)
        assert trace.d_t == 1.0


class TestWks:
    def test_config_validation(self):
        with pytest.raises(DomainError, match="at least 2"):
            WaitKConfig(k=1)
        with pytest.raises(DomainError, match="phase"):
            WaitKConfig(k=2, phase="middle")

    def test_reset_ingestion_occupies_the_first_read_slot(self):
        # [DERIVED] k=2, N=2, T=4: the implicit read fills cycle slot 0,
        # so the chosen actions run S, R and the tail is forced:
        # full record sequence S R S S S.
        table = hand_table()
        sentence = hand_sentence(table, (0, 1), (2, 2))
        trace = run_policy(make_rule_policy("w2s"), sentence, table)
        assert trace.actions == (S, R, S, S, S)
        assert trace.d_t == pytest.approx((1 + 2 + 2 + 2) / 8, abs=1e-12)

    def test_speak_phase_reads_one_step_earlier(self):
        cfg = WaitKConfig(k=3, phase="speak")
        c = EpisodeCounters.initial(5, 10)
        actions = [wks_policy(c, cfg, step) for step in range(6)]
        # [DERIVED] positions 1..6 mod 3 == 2 at steps 1 and 4.
        assert actions == [S, R, S, S, R, S]

    def test_read_phase_cycle(self):
        cfg = WaitKConfig(k=3)
        c = EpisodeCounters.initial(5, 10)
        actions = [wks_policy(c, cfg, step) for step in range(6)]
        # [DERIVED] positions 1..6 mod 3 == 0 at steps 2 and 5.
        assert actions == [S, S, R, S, S, R]

    def test_degrades_to_speak_when_exhausted(self):
        cfg = WaitKConfig(k=2)
        done = EpisodeCounters(2, 0, 1, num_chars=2, num_frames=6)
        assert wks_policy(done, cfg, 1) is S

    def test_larger_k_delays_reads(self):
        table = hand_table()
        sentence = hand_sentence(table, (0, 1, 2, 0), (2, 2, 2, 2))
        d2 = run_policy(make_rule_policy("w2s"), sentence, table).d_t
        d3 = run_policy(make_rule_policy("w3s"), sentence, table).d_t
        wue = run_policy(make_rule_policy("wue"), sentence, table).d_t
        assert wue > d2 > d3

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 5), st.integers(2, 5), st.integers(2, 4))
    def test_schedule_is_always_a_valid_path(self, num_chars, extra, k):
        table = hand_table()
        symbols = tuple(i % 3 for i in range(num_chars))
        durations = (1,) * (num_chars - 1) + (extra,)
        sentence = hand_sentence(table, symbols, durations)
        trace = run_policy(make_rule_policy(f"w{k}s"), sentence, table)
        path = policy_path(list(trace.actions), sentence.num_chars,
                           sentence.num_frames)
        assert path.frames_spoken == sentence.num_frames


class TestFactory:
    def test_known_names(self):
        assert make_rule_policy("wue").name == "wue"
        assert make_rule_policy("W2S").name == "w2s"
        assert make_rule_policy(" w10s ").name == "w10s"

    def test_unknown_name_lists_the_valid_ones(self):
        with pytest.raises(DomainError, match="'wue', 'w<k>s'"):
            make_rule_policy("fastest")

    def test_wait_one_is_rejected(self):
        with pytest.raises(DomainError, match="at least 2"):
            make_rule_policy("w1s")

    def test_evaluator_accepts_rule_policies(self, tiny_corpus):
        backend = OracleBackend(tiny_corpus.table)
        summary, traces = evaluate_policy(
            make_rule_policy("wue"), tiny_corpus.eval_sentences(), backend)
        assert summary.policy == "wue"
        assert summary.mean_d_t == 1.0
        assert len(traces) == len(tiny_corpus.eval_ids)
