"""Value-based training loop shared by the quantum and the classical agent.

Randomness comes from one root ``SeedSequence(seed)`` split into four child
streams, in this order: environment, exploration, replay sampling, model
init. Each stream is consumed a fixed number of times per iteration no
matter which agent is trained or which actions it picks:

* environment: 4 uniforms per slot, 4 more at every topology draw
* exploration: one uniform and one integer per action selection
* replay: ``batch_size`` integers per update once the buffer holds a batch

So two agents trained with the same seed see the same topologies, UE
realizations, exploration coin flips and replay indices; only the function
approximator differs. Scripted baselines reuse the environment stream.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from . import env as dsa
from .errors import ConfigError, UsageError, validated
from .mlp import adam_init, adam_step, build_mlp
from .vqc import GRADIENT_METHODS, VqcConfig, build_vqc, vqc_forward, vqc_gradient

PAPER_MLP_LAYERS = (4, 64, 64, 2)
STREAMS = ("env", "explore", "replay", "init")


class AgentKind(str, Enum):
    VQC = "VQC"
    MLP = "MLP"


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    iterations: int = 50_000
    gamma: float = 0.9
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 5_000
    batch_size: int = 32
    buffer_capacity: int = 10_000
    target_sync: int = 100
    lr_mlp: float = 1e-3
    lr_vqc: float = 1e-2
    episode_length: int = 200
    avg_window: int = 1_000
    # None: divide rewards by the episode's interference-free rate
    reward_scale_bps: float | None = None
    vqc_gradient_method: str = "adjoint"

    @model_validator(mode="after")
    def _check(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        for name in ("epsilon_start", "epsilon_end"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        for name in ("epsilon_decay_steps", "batch_size", "buffer_capacity", "target_sync", "episode_length", "avg_window"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.batch_size > self.buffer_capacity:
            raise ValueError("batch_size cannot exceed buffer_capacity")
        if self.lr_mlp <= 0 or self.lr_vqc <= 0:
            raise ValueError("learning rates must be positive")
        if self.reward_scale_bps is not None and not self.reward_scale_bps > 0:
            raise ValueError("reward_scale_bps must be positive")
        if self.vqc_gradient_method not in GRADIENT_METHODS:
            raise ValueError(f"vqc_gradient_method must be one of {GRADIENT_METHODS}")
        return self

    def epsilon(self, t: int) -> float:
        frac = min(t / self.epsilon_decay_steps, 1.0)
        return (1.0 - frac) * self.epsilon_start + frac * self.epsilon_end


class Transition(NamedTuple):
    observation: np.ndarray
    action: int
    reward: float
    next_observation: np.ndarray
    terminal: bool


@dataclass
class Batch:
    observations: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_observations: np.ndarray
    terminals: np.ndarray

    def __len__(self):
        return len(self.actions)


class ReplayBuffer:
    """Fixed-capacity FIFO ring of transitions."""

    def __init__(self, capacity: int, obs_dim: int = dsa.N_FEATURES):
        self.capacity = capacity
        self._obs = np.zeros((capacity, obs_dim))
        self._next = np.zeros((capacity, obs_dim))
        self._act = np.zeros(capacity, dtype=np.int64)
        self._rew = np.zeros(capacity)
        self._term = np.zeros(capacity, dtype=bool)
        self._head = 0  # next write slot
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, tr: Transition) -> None:
        i = self._head
        self._obs[i] = tr.observation
        self._act[i] = tr.action
        self._rew[i] = tr.reward
        self._next[i] = tr.next_observation
        self._term[i] = tr.terminal
        self._head = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _order(self) -> np.ndarray:
        # storage indices from oldest to newest
        start = self._head if self._size == self.capacity else 0
        return (start + np.arange(self._size)) % self.capacity

    def transitions(self) -> list[Transition]:
        return [
            Transition(self._obs[i].copy(), int(self._act[i]), float(self._rew[i]), self._next[i].copy(), bool(self._term[i]))
            for i in self._order()
        ]

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Uniform with replacement; positions index the buffer oldest-first."""
        pos = rng.integers(0, self._size, size=batch_size)
        idx = self._order()[pos]
        return Batch(self._obs[idx], self._act[idx], self._rew[idx], self._next[idx], self._term[idx])


def select_action(values, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy; greedy ties go to the lowest index."""
    values = np.asarray(values)
    explore = rng.random() < epsilon
    random_action = int(rng.integers(values.shape[-1]))
    return random_action if explore else int(np.argmax(values))


def td_targets(batch: Batch, target_forward: Callable[[np.ndarray], np.ndarray], gamma: float) -> np.ndarray:
    """``r + gamma * max_a Q_target(s', a)``, bootstrap term dropped on terminal transitions."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    if gamma == 0.0:
        return np.asarray(batch.rewards, dtype=float).copy()
    q_next = np.asarray(target_forward(batch.next_observations))
    return batch.rewards + gamma * np.where(batch.terminals, 0.0, q_next.max(axis=1))


def moving_average(series, window: int) -> np.ndarray:
    """Element i is the mean of ``series[max(0, i - window + 1) : i + 1]``."""
    if window < 1:
        raise UsageError(f"window must be >= 1, got {window}")
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        return x.copy()
    csum = np.concatenate([[0.0], np.cumsum(x)])
    i = np.arange(1, x.size + 1)
    lo = np.maximum(0, i - window)
    return (csum[i] - csum[lo]) / (i - lo)


@dataclass
class MetricsLog:
    agent: str
    seed: int
    reward_bps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    running_avg_bps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    epsilon: np.ndarray = field(default_factory=lambda: np.zeros(0))
    loss: np.ndarray = field(default_factory=lambda: np.zeros(0))
    actions: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __len__(self):
        return self.reward_bps.size

    @property
    def iterations(self) -> np.ndarray:
        return np.arange(1, len(self) + 1)

    @property
    def final_throughput(self) -> float:
        return float(self.running_avg_bps[-1]) if len(self) else float("nan")


def seed_streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.default_rng(s) for name, s in zip(STREAMS, children)}


class _Agent:
    """Forward / gradient / optimizer adapter over either model family."""

    def __init__(self, kind: AgentKind, train_config: TrainConfig, init_rng, vqc_config, mlp_layers):
        self.kind = kind
        seed = int(init_rng.integers(2**63))
        if kind is AgentKind.VQC:
            self.model = build_vqc(vqc_config, seed)
            method = train_config.vqc_gradient_method
            self.forward = lambda m, x: vqc_forward(m, x)
            self.gradient = lambda m, x, g: vqc_gradient(m, x, g, method=method)
            lr = train_config.lr_vqc
        else:
            self.model = build_mlp(mlp_layers or PAPER_MLP_LAYERS, seed)
            self.forward = lambda m, x: m.forward(x)
            self.gradient = lambda m, x, g: m.gradient(x, g)
            lr = train_config.lr_mlp
        self.target = self.model.copy()
        self.adam = adam_init(self.model.n_params, lr=lr)

    def update(self, batch: Batch, gamma: float) -> float:
        y = td_targets(batch, lambda s: self.forward(self.target, s), gamma)
        q = self.forward(self.model, batch.observations)
        rows = np.arange(len(batch))
        err = q[rows, batch.actions] - y
        # d/dQ of mean squared error, nonzero only on the taken action
        g = np.zeros_like(q)
        g[rows, batch.actions] = 2.0 * err / len(batch)
        grad = self.gradient(self.model, batch.observations, g)
        new, self.adam = adam_step(self.model.params, grad, self.adam)
        self.model.params[:] = new
        return float(np.mean(err**2))

    def sync(self):
        self.target = self.model.copy()


def train_run(
    env_config: dsa.NetworkConfig,
    agent_kind: AgentKind | str,
    train_config: TrainConfig,
    seed: int,
    vqc_config: VqcConfig | None = None,
    mlp_layers=None,
    return_agent: bool = False,
):
    """Train one agent for ``train_config.iterations`` slots and log every slot."""
    try:
        kind = AgentKind(agent_kind)
    except ValueError:
        raise ConfigError(f"agent_kind must be VQC or MLP, got {agent_kind!r}") from None
    env_config = validated(dsa.NetworkConfig, env_config)
    cfg = validated(TrainConfig, train_config)
    vqc_config = validated(VqcConfig, vqc_config)
    T = cfg.iterations
    rngs = seed_streams(seed)
    agent = _Agent(kind, cfg, rngs["init"], vqc_config, mlp_layers)
    env, obs = dsa.init_env(env_config, rngs["env"])
    buffer = ReplayBuffer(cfg.buffer_capacity)

    rewards = np.zeros(T)
    eps_log = np.zeros(T)
    losses = np.full(T, np.nan)
    actions = np.zeros(T, dtype=np.int64)
    for t in range(T):
        eps = cfg.epsilon(t)
        a = select_action(agent.forward(agent.model, obs), eps, rngs["explore"])
        out = dsa.step(env, a)
        terminal = (t + 1) % cfg.episode_length == 0
        scale = cfg.reward_scale_bps or env.topology.clear_rate_bps
        buffer.push(Transition(obs, a, out.reward / scale, out.observation, terminal))
        obs = dsa.resample_topology(env) if terminal else out.observation

        if len(buffer) >= cfg.batch_size:
            losses[t] = agent.update(buffer.sample(cfg.batch_size, rngs["replay"]), cfg.gamma)
        if (t + 1) % cfg.target_sync == 0:
            agent.sync()
        rewards[t], eps_log[t], actions[t] = out.reward, eps, a

    log = MetricsLog(kind.value, seed, rewards, moving_average(rewards, cfg.avg_window), eps_log, losses, actions)
    return (log, agent) if return_agent else log


BASELINES = ("always_idle", "always_transmit", "random")


def run_baseline(env_config: dsa.NetworkConfig, policy: str, train_config: TrainConfig, seed: int) -> MetricsLog:
    """Scripted policy on the same environment realization a trained agent with ``seed`` sees.

    The random policy draws from the exploration stream, one uniform action per slot.
    """
    if policy not in BASELINES:
        raise ConfigError(f"unknown baseline {policy!r}; expected one of {BASELINES}")
    env_config = validated(dsa.NetworkConfig, env_config)
    cfg = validated(TrainConfig, train_config)
    T = cfg.iterations
    rngs = seed_streams(seed)
    env, _ = dsa.init_env(env_config, rngs["env"])
    rewards = np.zeros(T)
    actions = np.zeros(T, dtype=np.int64)
    for t in range(T):
        if policy == "always_idle":
            a = dsa.IDLE
        elif policy == "always_transmit":
            a = dsa.TRANSMIT
        else:
            a = int(rngs["explore"].integers(2))
        rewards[t] = dsa.step(env, a).reward
        actions[t] = a
        if (t + 1) % cfg.episode_length == 0:
            dsa.resample_topology(env)
    return MetricsLog(policy, seed, rewards, moving_average(rewards, cfg.avg_window), np.zeros(T), np.full(T, np.nan), actions)
