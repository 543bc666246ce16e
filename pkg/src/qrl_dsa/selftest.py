"""Fast invariant checks runnable without the test suite (``qrl-dsa selftest``)."""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import env as dsa
from . import quantum as qc
from .mlp import build_mlp, mlp_backward, mlp_forward
from .train import TrainConfig, train_run
from .vqc import VqcConfig, build_vqc, vqc_forward, vqc_gradient


def _random_gate(rng, n):
    kind = qc.GateKind(rng.choice([k.value for k in qc.GateKind]))
    target = int(rng.integers(n))
    if kind.is_two_qubit:
        control = int((target + 1 + rng.integers(n - 1)) % n)
        return qc.GateOp(kind, target, control=control)
    if kind.is_rotation:
        return qc.GateOp(kind, target, angle=float(rng.uniform(-2 * math.pi, 2 * math.pi)))
    return qc.GateOp(kind, target)


def check_norm() -> str:
    rng = np.random.default_rng(0)
    state = qc.new_state(4)
    drift = 0.0
    for _ in range(1000):
        state = qc.apply_gate(state, _random_gate(rng, 4))
        drift = max(drift, abs(state.norm - 1.0))
    assert drift < 1e-10, drift
    return f"norm drift over 1000 gates {drift:.1e}"


def check_bell() -> str:
    p = qc.probabilities(qc.bell_state())
    assert abs(p["00"] - 0.5) < 1e-12 and abs(p["11"] - 0.5) < 1e-12
    return "bell state probabilities"


def check_counts() -> str:
    n_vqc = build_vqc(VqcConfig(n_qubits=4, n_blocks=5, n_actions=2)).n_params
    n_mlp = build_mlp([4, 64, 64, 2]).n_params
    assert (n_vqc, n_mlp) == (94, 4610), (n_vqc, n_mlp)
    return "parameter counts 94 / 4610"


def check_vqc_gradient() -> str:
    rng = np.random.default_rng(1)
    model = build_vqc(seed=1)
    obs = rng.uniform(-1, 1, size=4)
    g = np.array([0.4, -1.1])
    grad = vqc_gradient(model, obs, g)
    h = 1e-5
    worst = 0.0
    for i in rng.choice(model.n_params, size=12, replace=False):
        p = model.params.copy()
        p[i] += h
        up = float(vqc_forward(type(model)(model.config, p), obs) @ g)
        p[i] -= 2 * h
        down = float(vqc_forward(type(model)(model.config, p), obs) @ g)
        worst = max(worst, abs((up - down) / (2 * h) - grad[i]))
    assert worst < 1e-5, worst
    return f"VQC shift gradient vs finite difference {worst:.1e}"


def check_mlp_gradient() -> str:
    rng = np.random.default_rng(2)
    model = build_mlp([4, 8, 2], seed=2)
    x = rng.normal(size=4)
    g = rng.normal(size=2)
    grad = mlp_backward(model, x, g)
    h = 1e-6
    fd = np.empty_like(grad)
    for i in range(model.n_params):
        p = model.params.copy()
        p[i] += h
        up = mlp_forward(type(model)(model.layer_sizes, p), x) @ g
        p[i] -= 2 * h
        fd[i] = (up - mlp_forward(type(model)(model.layer_sizes, p), x) @ g) / (2 * h)
    rel = np.max(np.abs(fd - grad)) / max(np.max(np.abs(fd)), 1e-12)
    assert rel < 1e-4, rel
    return f"MLP backprop vs finite difference {rel:.1e}"


def check_env() -> str:
    env, _ = dsa.init_env(dsa.NetworkConfig(), seed=3)
    n = 20_000
    busy = prot = 0
    for t in range(n):
        out = dsa.step(env, t % 2)
        if t % 2 == dsa.IDLE:
            assert out.reward == 0.0
        busy += not out.channel_idle
        prot += (not out.channel_idle) and out.ue_protected
    f_busy, f_prot = busy / n, prot / max(busy, 1)
    assert abs(f_busy - 0.7) < 0.03 and abs(f_prot - 0.5) < 0.03, (f_busy, f_prot)
    return f"UE access {f_busy:.3f}, protected {f_prot:.3f}"


def check_determinism() -> str:
    cfg = TrainConfig(iterations=60, batch_size=8)
    for kind in ("VQC", "MLP"):
        a = train_run(dsa.NetworkConfig(), kind, cfg, seed=5)
        b = train_run(dsa.NetworkConfig(), kind, cfg, seed=5)
        assert np.array_equal(a.reward_bps, b.reward_bps)
        assert np.array_equal(a.loss, b.loss, equal_nan=True)
    return "training runs repeat bit-identically"


CHECKS: list[Callable[[], str]] = [
    check_norm,
    check_bell,
    check_counts,
    check_vqc_gradient,
    check_mlp_gradient,
    check_env,
    check_determinism,
]


def run(echo=print) -> bool:
    ok = True
    for check in CHECKS:
        try:
            echo(f"PASS {check.__name__}: {check()}")
        except AssertionError as err:
            ok = False
            echo(f"FAIL {check.__name__}: {err}")
    return ok
