"""Recurrent READ/SPEAK policy trained with score-function gradients.

The policy runs each observation through a recurrent cell and a small
rectified dense trunk ending in a two-way softmax.  A separate dense
value network predicts the discounted return from the observation
alone; batch-normalized advantages (return minus predicted value,
standardized over the update batch) weight the log-probability
gradients, which flow through the full episode unroll.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import Action, DomainError, EpisodeTrace
from .env import Environment, Observation
from .numerics import GruCell, GruSpec, Mlp, MlpSpec, ParamStore


@dataclass(frozen=True)
class AgentConfig:
    gru_hidden: int = 64
    policy_hidden: int = 64
    baseline_hidden: tuple[int, ...] = (64, 64)
    discount: float = 0.99
    episodes_per_update: int = 10
    learning_rate: float = 1e-4
    adv_epsilon: float = 1e-8
    episodes: int = 5000
    grad_clip: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.baseline_hidden or any(h < 1 for h in self.baseline_hidden):
            raise DomainError("baseline hidden sizes must be positive")
        if self.episodes_per_update < 1:
            raise DomainError("episodes per update must be at least 1")
        if self.episodes < 1:
            raise DomainError("episode budget must be positive")
        if not 0.0 <= self.discount <= 1.0:
            raise DomainError("discount must lie in [0, 1]")
        if self.learning_rate <= 0:
            raise DomainError("learning rate must be positive")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise DomainError("gradient clip must be positive when set")


class PolicyNetwork:
    """Recurrent trunk: observation -> GRU -> relu x2 -> 2 logits."""

    def __init__(self, obs_size: int, cfg: AgentConfig,
                 rng: np.random.Generator) -> None:
        self.obs_size = obs_size
        self.cfg = cfg
        self.store = ParamStore()
        self.gru = GruCell(self.store, "policy.gru",
                           GruSpec(obs_size, cfg.gru_hidden), rng)
        self.head = Mlp(self.store, "policy.head",
                        MlpSpec(cfg.gru_hidden,
                                (cfg.policy_hidden, cfg.policy_hidden, 2),
                                ("relu", "relu", "linear")), rng)

    def initial_state(self) -> np.ndarray:
        return self.gru.initial_state()

    def forward(self, obs_vec: np.ndarray, state: np.ndarray):
        """Returns (action probabilities, new state, step cache)."""
        if obs_vec.shape != (self.obs_size,):
            raise DomainError(
                f"observation shape {obs_vec.shape} != ({self.obs_size},)")
        h_new, gru_cache = self.gru.forward(
            np.ascontiguousarray(obs_vec), state)
        logits, head_caches = self.head.forward(h_new)
        shifted = np.exp(logits - np.max(logits))
        probs = shifted / shifted.sum()
        return probs, h_new, (gru_cache, head_caches, probs)

    def backward_episode(self, caches: list, advantages: np.ndarray,
                         action_indices: list[int]) -> None:
        """Accumulate the gradient of -sum_t adv_t * log pi(a_t) through
        the episode unroll (advantages are treated as constants)."""
        d_h = np.zeros(self.cfg.gru_hidden)
        for t in range(len(caches) - 1, -1, -1):
            gru_cache, head_caches, probs = caches[t]
            d_logits = advantages[t] * probs.copy()
            d_logits[action_indices[t]] -= advantages[t]
            d_h_head = self.head.backward(d_logits, head_caches)
            _, d_h = self.gru.backward(
                np.ascontiguousarray(d_h_head + d_h), gru_cache)


class BaselineNetwork:
    """Observation -> relu x2 -> scalar expected-return estimate."""

    def __init__(self, obs_size: int, cfg: AgentConfig,
                 rng: np.random.Generator) -> None:
        self.obs_size = obs_size
        self.store = ParamStore()
        sizes = tuple(cfg.baseline_hidden) + (1,)
        activations = ("relu",) * len(cfg.baseline_hidden) + ("linear",)
        self.net = Mlp(self.store, "baseline",
                       MlpSpec(obs_size, sizes, activations), rng)

    def forward(self, obs_vec: np.ndarray) -> float:
        if obs_vec.shape != (self.obs_size,):
            raise DomainError(
                f"observation shape {obs_vec.shape} != ({self.obs_size},)")
        out, _ = self.net.forward(np.ascontiguousarray(obs_vec))
        return float(out[0])

    def forward_batch(self, obs_matrix: np.ndarray):
        out, caches = self.net.forward_batch(obs_matrix)
        return out[:, 0], caches

    def backward_batch(self, d_values: np.ndarray, caches) -> None:
        self.net.backward_batch(d_values[:, None], caches)


def select_action(probs: np.ndarray, mode: str, rng: np.random.Generator | None,
                  counters) -> tuple[Action, int]:
    """Sample or take the argmax; a READ choice with the source already
    exhausted is overridden to SPEAK.  Greedy ties break toward READ
    (index 0), which the override turns into SPEAK at the boundary."""
    if mode == "sample":
        if rng is None:
            raise DomainError("sampling requires a generator")
        idx = int(rng.choice(2, p=probs))
    elif mode == "greedy":
        idx = int(np.argmax(probs))
    else:
        raise DomainError(f"selection mode must be 'sample' or 'greedy', got {mode!r}")
    if idx == 0 and counters.source_exhausted:
        idx = 1
    return (Action.READ if idx == 0 else Action.SPEAK), idx


def compute_returns(rewards, discount: float) -> np.ndarray:
    """Discounted reward-to-go per step, by backward recursion."""
    returns = np.zeros(len(rewards))
    running = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        running = rewards[t] + discount * running
        returns[t] = running
    return returns


def normalize_advantages(returns: np.ndarray, baselines: np.ndarray,
                         epsilon: float = 1e-8) -> np.ndarray:
    """Standardize (return - baseline) over the whole batch."""
    raw = np.asarray(returns) - np.asarray(baselines)
    if raw.size == 0:
        raise DomainError("cannot normalize an empty batch")
    if raw.size == 1:
        warnings.warn("advantage batch of size 1; using zero advantage")
        return np.zeros(1)
    return (raw - raw.mean()) / (raw.std() + epsilon)


@dataclass
class EpisodeRollout:
    """One sampled episode with everything the update needs."""

    observations: list[np.ndarray] = field(default_factory=list)
    action_indices: list[int] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    caches: list = field(default_factory=list)
    trace: EpisodeTrace | None = None

    @property
    def num_steps(self) -> int:
        return len(self.rewards)


@dataclass
class TransitionBatch:
    episodes: list[EpisodeRollout]
    returns: np.ndarray | None = None
    baselines: np.ndarray | None = None
    advantages: np.ndarray | None = None

    @property
    def num_steps(self) -> int:
        return sum(ep.num_steps for ep in self.episodes)


def run_episode(env: Environment, sentence, policy: PolicyNetwork,
                rng: np.random.Generator | None, selection: str = "sample",
                mode: str = "train") -> EpisodeRollout:
    """Roll one episode; the recurrent state ends where forcing takes
    over (no actions are chosen during the forced tail)."""
    rollout = EpisodeRollout()
    obs = env.reset(sentence, mode)
    state = policy.initial_state()
    while not env.terminal:
        vec = obs.vector()
        probs, state, cache = policy.forward(vec, state)
        action, idx = select_action(probs, selection, rng, env.counters)
        result = env.step(action)
        rollout.observations.append(vec)
        rollout.action_indices.append(idx)
        rollout.rewards.append(result.reward)
        rollout.caches.append(cache)
        obs = result.observation
    rollout.trace = env.trace
    return rollout


def reinforce_update(batch: TransitionBatch, policy: PolicyNetwork,
                     baseline: BaselineNetwork, cfg: AgentConfig) -> dict:
    """One optimization step for both networks.

    Policy loss is -sum_t adv_t * log pi(a_t | o_t) with advantages
    fixed; baseline loss is the mean squared error between predicted
    values and discounted returns.  Each network takes one
    adaptive-moment step with its own optimizer state.
    """
    episodes = [ep for ep in batch.episodes if ep.num_steps > 0]
    if not episodes:
        raise DomainError("update batch contains no decision steps")
    returns = np.concatenate(
        [compute_returns(ep.rewards, cfg.discount) for ep in episodes])
    obs_matrix = np.ascontiguousarray(
        np.vstack([np.vstack(ep.observations) for ep in episodes]))
    values, value_caches = baseline.forward_batch(obs_matrix)
    advantages = normalize_advantages(returns, values, cfg.adv_epsilon)
    batch.returns, batch.baselines, batch.advantages = returns, values, advantages

    log_probs = np.concatenate([
        np.log(np.array([c[2][i] for c, i in zip(ep.caches, ep.action_indices)]))
        for ep in episodes])
    policy_loss = float(-(advantages * log_probs).sum())
    baseline_loss = float(np.mean((returns - values) ** 2))
    if not (np.isfinite(policy_loss) and np.isfinite(baseline_loss)):
        raise DomainError(
            f"non-finite loss (policy={policy_loss}, baseline={baseline_loss}); "
            "training aborted")

    policy.store.zero_grads()
    offset = 0
    for ep in episodes:
        n = ep.num_steps
        policy.backward_episode(ep.caches, advantages[offset:offset + n],
                                ep.action_indices)
        offset += n
    baseline.store.zero_grads()
    baseline.backward_batch(2.0 * (values - returns) / returns.size, value_caches)

    if cfg.grad_clip is not None:
        for store in (policy.store, baseline.store):
            norm = store.grad_norm()
            if norm > cfg.grad_clip:
                store.scale_grads(cfg.grad_clip / norm)
    policy.store.adam_step(cfg.learning_rate)
    baseline.store.adam_step(cfg.learning_rate)
    return {"policy_loss": policy_loss, "baseline_loss": baseline_loss}


@dataclass
class TrainedAgent:
    policy: PolicyNetwork
    baseline: BaselineNetwork
    config: AgentConfig
    curve: list[dict]


def train_agent(env: Environment, corpus, cfg: AgentConfig) -> TrainedAgent:
    """Sample batches of episodes from the train split and update after
    each batch; the curve holds one row of batch means per update."""
    train = corpus.train_sentences()
    if not train:
        raise DomainError("corpus has no training sentences")
    if cfg.discount != env.cfg.discount:
        raise DomainError(
            "agent and environment must share one discount factor: "
            f"{cfg.discount} vs {env.cfg.discount}")
    root = np.random.SeedSequence(cfg.seed)
    init_ss, action_ss, sentence_ss = root.spawn(3)
    policy = PolicyNetwork(env.observation_size(), cfg,
                           np.random.default_rng(init_ss))
    baseline = BaselineNetwork(env.observation_size(), cfg,
                               np.random.default_rng(init_ss.spawn(1)[0]))
    action_rng = np.random.default_rng(action_ss)
    sentence_rng = np.random.default_rng(sentence_ss)

    curve: list[dict] = []
    episodes_done = 0
    batch_index = 0
    while episodes_done < cfg.episodes:
        count = min(cfg.episodes_per_update, cfg.episodes - episodes_done)
        rollouts = []
        for _ in range(count):
            sent = train[int(sentence_rng.integers(len(train)))]
            rollouts.append(run_episode(env, sent, policy, action_rng))
        episodes_done += count
        losses = reinforce_update(TransitionBatch(rollouts), policy, baseline, cfg)
        traces = [ep.trace for ep in rollouts]
        curve.append({
            "batch": batch_index,
            "mean_return": sum(t.discounted_return for t in traces) / len(traces),
            "mean_d_T": sum(t.d_t for t in traces) / len(traces),
            "mean_mse": sum(t.mean_mse for t in traces) / len(traces),
            "policy_loss": losses["policy_loss"],
            "baseline_loss": losses["baseline_loss"],
        })
        batch_index += 1
    return TrainedAgent(policy=policy, baseline=baseline, config=cfg, curve=curve)


class AgentPolicy:
    """Evaluator-facing wrapper running the policy net greedily (or by
    sampling) with its own recurrent state."""

    def __init__(self, policy: PolicyNetwork, selection: str = "greedy",
                 rng: np.random.Generator | None = None,
                 name: str = "agent") -> None:
        self.name = name
        self._policy = policy
        self._selection = selection
        self._rng = rng
        self._state = policy.initial_state()

    def reset(self) -> None:
        self._state = self._policy.initial_state()

    def act(self, observation: Observation, counters) -> Action:
        probs, self._state, _ = self._policy.forward(
            observation.vector(), self._state)
        action, _ = select_action(probs, self._selection, self._rng, counters)
        return action
