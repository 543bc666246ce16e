"""Slotted D2D spectrum-sharing simulator.

One D2D pair shares a cellular channel with a UE. Every slot the UE either
uses the channel (probability ``alpha``) or not, and sits inside the base
station's protected area with probability ``beta``. The D2D transmitter
chooses IDLE or TRANSMIT and earns the Shannon rate of its link:

* channel idle: interference-free rate
* UE active and protected: rate with the BS downlink added as interference
* UE active and unprotected: collision, reward ``collision_reward``

UE activity and location are two-state Markov chains. With probability
``*_persistence`` a process keeps last slot's value, otherwise it is redrawn
from its Bernoulli(alpha) / Bernoulli(beta) law. The stationary marginals
are exactly alpha and beta for every persistence, and persistence 0 gives
i.i.d. slots.

Path loss is log-distance with a LoS/NLoS exponent, the link state drawn
once per topology with ``P(LoS) = exp(-d / los_decay_m)``.

Draw order per topology: d_bs, d_pair, LoS(pair link), LoS(BS link) (four
uniforms). Per slot: four uniforms (keep-access, access, keep-location,
location). Counts are fixed so trajectories stay aligned across policies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from .errors import UsageError, validated

IDLE = 0
TRANSMIT = 1
ACTIONS = (IDLE, TRANSMIT)
N_FEATURES = 4
SPEED_OF_LIGHT = 3e8


class NetworkConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    alpha: float = 0.7
    beta: float = 0.5
    d2d_bs_distance_range: tuple[float, float] = (100.0, 1000.0)
    d2d_pair_distance_range: tuple[float, float] = (20.0, 100.0)
    bs_power_dbm: float = 40.0
    d2d_power_dbm: float = 23.0
    noise_dbm: float = -114.0
    carrier_hz: float = 2e9
    bandwidth_hz: float = 20e6
    los_decay_m: float = 150.0
    pl_exponent_los: float = 2.0
    pl_exponent_nlos: float = 3.5
    collision_reward: float = -3e8
    access_persistence: float = 0.5
    location_persistence: float = 0.5

    @field_validator("alpha", "beta", "access_persistence", "location_persistence")
    @classmethod
    def _unit_interval(cls, v):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"must be in [0, 1], got {v}")
        return v

    @field_validator("d2d_bs_distance_range", "d2d_pair_distance_range")
    @classmethod
    def _distance_range(cls, v):
        lo, hi = v
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo <= 0 or lo > hi:
            raise ValueError(f"need 0 < min <= max, got {list(v)}")
        return v

    @model_validator(mode="after")
    def _finite(self):
        for name in ("bs_power_dbm", "d2d_power_dbm", "noise_dbm", "collision_reward", "pl_exponent_los", "pl_exponent_nlos"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        for name in ("carrier_hz", "bandwidth_hz", "los_decay_m"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")
        return self


def dbm_to_watts(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def los_probability(distance_m: float, config: NetworkConfig) -> float:
    return math.exp(-distance_m / config.los_decay_m)


def path_loss(distance_m: float, carrier_hz: float, los: bool, config: NetworkConfig) -> float:
    """Log-distance path loss in dB with a 1 m free-space reference; d < 1 m is clamped to 1 m."""
    d = max(float(distance_m), 1.0)
    fspl_ref = 20.0 * math.log10(4.0 * math.pi * carrier_hz / SPEED_OF_LIGHT)
    exponent = config.pl_exponent_los if los else config.pl_exponent_nlos
    return fspl_ref + 10.0 * exponent * math.log10(d)


def received_power_w(tx_power_dbm: float, distance_m: float, los: bool, config: NetworkConfig) -> float:
    return dbm_to_watts(tx_power_dbm - path_loss(distance_m, config.carrier_hz, los, config))


def link_rate(tx_power_dbm: float, distance_m: float, interference_w: float, config: NetworkConfig, los: bool) -> float:
    """Shannon rate in bit/s of a link at ``distance_m`` under additive interference."""
    if not distance_m > 0:
        raise UsageError(f"distance must be positive, got {distance_m}")
    signal = received_power_w(tx_power_dbm, distance_m, los, config)
    return config.bandwidth_hz * math.log2(1.0 + signal / (dbm_to_watts(config.noise_dbm) + interference_w))


@dataclass(frozen=True)
class Topology:
    d2d_bs_distance_m: float
    d2d_pair_distance_m: float
    pair_los: bool
    bs_los: bool
    clear_rate_bps: float  # TRANSMIT on an idle channel
    shared_rate_bps: float  # TRANSMIT next to a protected UE (BS downlink as interference)


@dataclass
class EnvState:
    config: NetworkConfig
    rng: np.random.Generator
    topology: Topology
    slot: int = 0
    last_action: int = IDLE
    last_busy: bool = False
    last_protected: bool = False
    # latent UE processes, carried between slots
    ue_active: bool = False
    ue_protected: bool = False


@dataclass(frozen=True)
class StepOutcome:
    observation: np.ndarray
    reward: float
    collision: bool
    channel_idle: bool
    ue_protected: bool


def _sample_topology(config: NetworkConfig, rng: np.random.Generator) -> Topology:
    u = rng.random(4)
    lo, hi = config.d2d_bs_distance_range
    d_bs = lo + (hi - lo) * u[0]
    lo, hi = config.d2d_pair_distance_range
    d_pair = lo + (hi - lo) * u[1]
    pair_los = bool(u[2] < los_probability(d_pair, config))
    bs_los = bool(u[3] < los_probability(d_bs, config))
    # BS interference reaches the D2D receiver over roughly the transmitter-to-BS distance
    interference = received_power_w(config.bs_power_dbm, d_bs, bs_los, config)
    return Topology(
        d2d_bs_distance_m=float(d_bs),
        d2d_pair_distance_m=float(d_pair),
        pair_los=pair_los,
        bs_los=bs_los,
        clear_rate_bps=link_rate(config.d2d_power_dbm, d_pair, 0.0, config, pair_los),
        shared_rate_bps=link_rate(config.d2d_power_dbm, d_pair, interference, config, pair_los),
    )


def observe(env: EnvState) -> np.ndarray:
    """(last_action, last_busy, last_protected, distance), the distance mapped linearly onto [-1, 1]."""
    lo, hi = env.config.d2d_bs_distance_range
    d = env.topology.d2d_bs_distance_m
    dist = 0.0 if hi == lo else 2.0 * (d - lo) / (hi - lo) - 1.0
    return np.array([float(env.last_action), float(env.last_busy), float(env.last_protected), dist])


def init_env(config: NetworkConfig | dict | None = None, seed=0) -> tuple[EnvState, np.ndarray]:
    """Fresh environment; ``seed`` may be an int, a SeedSequence or a Generator."""
    config = validated(NetworkConfig, config)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    env = EnvState(config, rng, _sample_topology(config, rng))
    # start the UE chains in their stationary law
    u = rng.random(2)
    env.ue_active = bool(u[0] < config.alpha)
    env.ue_protected = bool(u[1] < config.beta)
    return env, observe(env)


def resample_topology(env: EnvState) -> np.ndarray:
    """Start a new episode: new distances and LoS states, previous-slot fields cleared."""
    env.topology = _sample_topology(env.config, env.rng)
    env.last_action, env.last_busy, env.last_protected = IDLE, False, False
    return observe(env)


def step(env: EnvState, action: int) -> StepOutcome:
    if action not in ACTIONS:
        raise UsageError(f"action must be IDLE (0) or TRANSMIT (1), got {action!r}")
    c = env.config
    u = env.rng.random(4)
    if not u[0] < c.access_persistence:
        env.ue_active = bool(u[1] < c.alpha)
    if not u[2] < c.location_persistence:
        env.ue_protected = bool(u[3] < c.beta)
    active, protected = env.ue_active, env.ue_protected

    collision = False
    if action == IDLE:
        reward = 0.0
    elif not active:
        reward = env.topology.clear_rate_bps
    elif protected:
        reward = env.topology.shared_rate_bps
    else:
        reward = c.collision_reward
        collision = True

    env.slot += 1
    env.last_action = int(action)
    env.last_busy = active
    env.last_protected = protected
    return StepOutcome(observe(env), float(reward), collision, not active, protected)
