"""Layered variational circuit used as a Q-function approximator.

Circuit layout for ``n_blocks`` blocks on ``n_qubits`` qubits::

    |0..0> -> [V_1 -> ENT -> ENC_1] -> ... -> [V_B -> ENT -> ENC_B] -> V_final -> <Z_a>

* ``V_l``: per-qubit rotation triplet (default RZ, RY, RZ) with trainable angles.
* ``ENT``: ring of CNOT (or CZ) gates, control ``i`` -> target ``(i+1) % n``.
* ``ENC_b``: ``RX(lambda_{b,q} * arctan(s_q))`` on every qubit (data re-uploading).

Action values are ``Q_a = w_a * <Z_a>`` read from the first ``n_actions`` qubits.

Flat parameter order (also the checkpoint order):
``phi`` shaped (n_blocks + 1, n_qubits, 3), then ``lam`` shaped
(n_blocks, n_qubits), then ``w`` shaped (n_actions,), all C-ordered.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from . import quantum as qc
from .errors import UsageError, validated

_HALF_PI = math.pi / 2
_SHIFTS = (_HALF_PI, -_HALF_PI)


class Entangler(str, Enum):
    CNOT_RING = "CNOT_RING"
    CZ_RING = "CZ_RING"


class VqcConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_qubits: int = 4
    n_blocks: int = 5
    entangler: Entangler = Entangler.CNOT_RING
    n_actions: int = 2
    rotation_triplet: tuple[qc.GateKind, qc.GateKind, qc.GateKind] = (
        qc.GateKind.RZ,
        qc.GateKind.RY,
        qc.GateKind.RZ,
    )

    @model_validator(mode="after")
    def _check(self):
        if not 1 <= self.n_qubits <= qc.MAX_QUBITS:
            raise ValueError(f"n_qubits must be in [1, {qc.MAX_QUBITS}]")
        if self.n_blocks < 0:
            raise ValueError("n_blocks must be >= 0")
        if not 1 <= self.n_actions <= self.n_qubits:
            raise ValueError("n_actions must be in [1, n_qubits]")
        if not all(k.is_rotation for k in self.rotation_triplet):
            raise ValueError("rotation_triplet may only contain RX, RY, RZ")
        return self

    @property
    def n_variational(self) -> int:
        return 3 * self.n_qubits * (self.n_blocks + 1)

    @property
    def n_encoding(self) -> int:
        return self.n_qubits * self.n_blocks

    @property
    def n_params(self) -> int:
        return self.n_variational + self.n_encoding + self.n_actions


def _entangler_ops(config: VqcConfig) -> list[qc.GateOp]:
    n = config.n_qubits
    if n == 1:
        return []
    make = qc.cnot if config.entangler is Entangler.CNOT_RING else qc.cz
    return [make(i, (i + 1) % n) for i in range(n)]


def _ops_unitary(ops: list[qc.GateOp], n_qubits: int) -> np.ndarray:
    dim = 2**n_qubits
    cols = []
    for k in range(dim):
        amps = np.zeros(dim, dtype=complex)
        amps[k] = 1.0
        cols.append(qc.run_circuit(ops, n_qubits, qc.StateVector(n_qubits, amps)).amplitudes)
    return np.stack(cols, axis=1)


@dataclass
class VqcModel:
    config: VqcConfig
    params: np.ndarray
    _cache: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=float)
        if self.params.shape != (self.config.n_params,):
            raise UsageError(f"expected {self.config.n_params} parameters, got shape {self.params.shape}")

    @property
    def n_params(self) -> int:
        return self.params.size

    @property
    def phi(self) -> np.ndarray:
        c = self.config
        return self.params[: c.n_variational].reshape(c.n_blocks + 1, c.n_qubits, 3)

    @property
    def lam(self) -> np.ndarray:
        c = self.config
        return self.params[c.n_variational : c.n_variational + c.n_encoding].reshape(c.n_blocks, c.n_qubits)

    @property
    def w(self) -> np.ndarray:
        return self.params[self.config.n_variational + self.config.n_encoding :]

    def named_arrays(self) -> dict[str, np.ndarray]:
        return {"phi": self.phi, "lam": self.lam, "w": self.w}

    def copy(self) -> VqcModel:
        return VqcModel(self.config, self.params.copy())

    def forward(self, observations: np.ndarray) -> np.ndarray:
        return vqc_forward(self, observations)

    def gradient(self, observations: np.ndarray, loss_grad: np.ndarray) -> np.ndarray:
        return vqc_gradient(self, observations, loss_grad)


def build_vqc(config: VqcConfig | dict | None = None, seed: int = 0) -> VqcModel:
    """phi uniform in [-pi, pi], lam = 1, w = 1."""
    config = validated(VqcConfig, config)
    rng = np.random.default_rng(seed)
    phi = rng.uniform(-math.pi, math.pi, size=config.n_variational)
    lam = np.ones(config.n_encoding)
    w = np.ones(config.n_actions)
    return VqcModel(config, np.concatenate([phi, lam, w]))


def circuit_ops(model: VqcModel, observation) -> list[qc.GateOp]:
    """Gate-by-gate circuit for one observation (reference path, slow)."""
    c = model.config
    s = _check_observations(model, observation)
    if s.shape[0] != 1:
        raise UsageError("circuit_ops takes a single observation")
    enc = np.arctan(s[0])
    ops: list[qc.GateOp] = []

    def variational(layer):
        for q in range(c.n_qubits):
            for j, kind in enumerate(c.rotation_triplet):
                ops.append(qc.GateOp(kind, q, angle=float(model.phi[layer, q, j])))

    for b in range(c.n_blocks):
        variational(b)
        ops.extend(_entangler_ops(c))
        ops.extend(qc.rx(q, model.lam[b, q] * enc[q]) for q in range(c.n_qubits))
    variational(c.n_blocks)
    return ops


def _check_observations(model: VqcModel, observations) -> np.ndarray:
    s = np.asarray(observations, dtype=float)
    if s.ndim == 1:
        s = s[None, :]
    if s.ndim != 2 or s.shape[1] != model.config.n_qubits:
        raise UsageError(f"expected {model.config.n_qubits} features per observation, got shape {np.shape(observations)}")
    if not np.all(np.isfinite(s)):
        raise UsageError("observation features must be finite")
    return s


def _rotation_stack(kind: qc.GateKind, angles: np.ndarray) -> np.ndarray:
    """Vectorized ``rotation_matrix``: angles of any shape -> (..., 2, 2)."""
    c, s = np.cos(angles / 2), np.sin(angles / 2)
    out = np.empty(np.shape(angles) + (2, 2), dtype=complex)
    if kind is qc.GateKind.RX:
        out[..., 0, 0] = out[..., 1, 1] = c
        out[..., 0, 1] = out[..., 1, 0] = -1j * s
    elif kind is qc.GateKind.RY:
        out[..., 0, 0] = out[..., 1, 1] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
    else:
        out[..., 0, 0] = c - 1j * s
        out[..., 1, 1] = c + 1j * s
        out[..., 0, 1] = out[..., 1, 0] = 0
    return out


class _Bits:
    """Index tables for building register operators out of 2x2 blocks."""

    _cache: dict[int, "_Bits"] = {}

    def __init__(self, n: int):
        idx = np.arange(2**n)
        self.bits = np.stack([(idx >> q) & 1 for q in range(n)])  # (n, D)
        self.row = self.bits[:, :, None]
        self.col = self.bits[:, None, :]
        rest = idx[None, :] & ~(1 << np.arange(n))[:, None]  # index with bit q cleared
        self.same_rest = rest[:, :, None] == rest[:, None, :]  # (n, D, D)
        # cross[k * D + l, q * 4 + 2 * i + j] = 1 where k, l agree off qubit q and carry bits i, j on it
        dim = idx.size
        cross = np.zeros((dim * dim, n * 4))
        for q in range(n):
            k, l = np.nonzero(self.same_rest[q])
            cross[k * dim + l, q * 4 + 2 * self.bits[q, k] + self.bits[q, l]] = 1.0
        self.cross = cross
        self.flip = idx[None, :] ^ (1 << np.arange(n))[:, None]  # (n, D): index with bit q toggled
        self.xor = idx[:, None] ^ idx[None, :]

    @classmethod
    def get(cls, n: int) -> "_Bits":
        if n not in cls._cache:
            cls._cache[n] = cls(n)
        return cls._cache[n]


def _tensor_product(mats: np.ndarray) -> np.ndarray:
    """(..., n, 2, 2) per-qubit operators -> (..., D, D) register operator (qubit 0 least significant)."""
    n = mats.shape[-3]
    t = _Bits.get(n)
    out = mats[..., 0, t.row[0], t.col[0]]
    for q in range(1, n):
        out = out * mats[..., q, t.row[q], t.col[q]]
    return out


def _embed_each(mats: np.ndarray) -> np.ndarray:
    """(n, K, 2, 2) operators, group q acting on qubit q alone -> (n, K, D, D)."""
    n = mats.shape[0]
    t = _Bits.get(n)
    out = np.stack([mats[q][:, t.row[q], t.col[q]] for q in range(n)])
    return out * t.same_rest[:, None]


_PAULI = {qc.GateKind.RX: qc.PAULI_X, qc.GateKind.RY: qc.PAULI_Y, qc.GateKind.RZ: qc.PAULI_Z}

_SHIFT_MATS = {
    kind: np.stack([qc.rotation_matrix(kind, t) for t in _SHIFTS])
    for kind in (qc.GateKind.RX, qc.GateKind.RY, qc.GateKind.RZ)
}


class _Compiled:
    """Fused per-layer operators for one parameter snapshot."""

    def __init__(self, model: VqcModel):
        c = model.config
        self.n = n = c.n_qubits
        self.dim = 2**n
        self.triplet = c.rotation_triplet
        # (layers, n, 3, 2, 2)
        self.rots = np.stack(
            [_rotation_stack(kind, model.phi[:, :, j]) for j, kind in enumerate(c.rotation_triplet)], axis=2
        )
        per_qubit = self.rots[:, :, 2] @ self.rots[:, :, 1] @ self.rots[:, :, 0]
        self.var = _tensor_product(per_qubit)  # (layers, D, D)
        self.var_t = np.swapaxes(self.var, 1, 2).copy()
        self.ent = _entangler_unitary(c)
        self.z = np.stack([qc.z_signs(n, a) for a in range(c.n_actions)])

    def _tails(self, layer: int) -> tuple[np.ndarray, np.ndarray]:
        r = self.rots[layer]  # (n, 3, 2, 2)
        eye = np.broadcast_to(np.eye(2, dtype=complex), r[:, 0].shape)
        tails = np.stack([r[:, 2] @ r[:, 1], r[:, 2], eye], axis=1)  # (n, 3, 2, 2)
        return tails, np.swapaxes(tails, -1, -2).conj()

    def variational_shifts(self, layer: int) -> np.ndarray:
        """Operators turning the layer's output into the output with one angle moved by +-pi/2.

        Moving angle j of qubit q equals applying ``T R_j(+-pi/2) T^dagger`` after the
        layer, with T the rotations that follow position j on that qubit.
        Ordered (qubit, position, sign) -> (6 n, D, D).
        """
        tails, tails_h = self._tails(layer)
        shift = np.stack([_SHIFT_MATS[kind] for kind in self.triplet])  # (3, 2, 2, 2)
        kmats = tails[:, :, None] @ shift[None] @ tails_h[:, :, None]  # (n, 3, 2, 2, 2)
        return _embed_each(kmats.reshape(self.n, 6, 2, 2)).reshape(6 * self.n, self.dim, self.dim)


_ENT_CACHE: dict[tuple, np.ndarray] = {}


def _entangler_unitary(config: VqcConfig) -> np.ndarray:
    key = (config.n_qubits, config.entangler)
    if key not in _ENT_CACHE:
        _ENT_CACHE[key] = _ops_unitary(_entangler_ops(config), config.n_qubits)
    return _ENT_CACHE[key]


_RX_SHIFT_CACHE: dict[int, np.ndarray] = {}


def _rx_shift_operators(n: int) -> np.ndarray:
    if n not in _RX_SHIFT_CACHE:
        k = np.broadcast_to(_SHIFT_MATS[qc.GateKind.RX], (n, 2, 2, 2))
        _RX_SHIFT_CACHE[n] = _embed_each(k).reshape(2 * n, 2**n, 2**n)
    return _RX_SHIFT_CACHE[n]


def _compiled(model: VqcModel) -> _Compiled:
    # params mutate in place during training, so key the cache on their values
    if model._cache is None or not np.array_equal(model._cache[0], model.params):
        model._cache = (model.params.copy(), _Compiled(model))
    return model._cache[1]


def _encoding_angles(model: VqcModel, s: np.ndarray) -> np.ndarray:
    # (B, n_blocks, n_qubits)
    return model.lam[None, :, :] * np.arctan(s)[:, None, :]


def _encoding_unitaries(angles: np.ndarray) -> np.ndarray:
    """Per-sample RX encoding layers as matrices, angles (..., n) -> (..., D, D).

    A product of RX gates is ``sum_m prod_q (cos or -i sin) X^m``, so entry
    (k, l) depends on ``k xor l`` only. The result is symmetric and its
    adjoint is its complex conjugate.
    """
    n = angles.shape[-1]
    t = _Bits.get(n)
    half = angles / 2
    factors = np.stack([np.cos(half), -1j * np.sin(half)], axis=-1)  # (..., n, 2)
    coef = factors[..., 0, t.bits[0]]
    for q in range(1, n):
        coef = coef * factors[..., q, t.bits[q]]
    return coef[..., t.xor]


def _final_state(model: VqcModel, s: np.ndarray, comp: _Compiled, keep: bool = False):
    c = model.config
    B = s.shape[0]
    enc = _encoding_unitaries(_encoding_angles(model, s))  # (B, n_blocks, D, D), symmetric
    psi = np.zeros((B, comp.dim), dtype=complex)
    psi[:, 0] = 1.0
    after_var, after_enc = [], []
    for b in range(c.n_blocks):
        psi = psi @ comp.var_t[b]
        if keep:
            after_var.append(psi)
        psi = (psi @ comp.ent.T)[:, None, :] @ enc[:, b]
        psi = psi[:, 0, :]
        if keep:
            after_enc.append(psi)
    psi = psi @ comp.var_t[c.n_blocks]
    after_var.append(psi)
    return psi, after_var, after_enc, enc


def expectations(model: VqcModel, observations) -> np.ndarray:
    """<Z_a> for a in range(n_actions); shape (B, n_actions) or (n_actions,)."""
    s = _check_observations(model, observations)
    comp = _compiled(model)
    psi, *_ = _final_state(model, s, comp)
    ez = (psi.real**2 + psi.imag**2) @ comp.z.T
    return ez[0] if np.ndim(observations) == 1 else ez


def vqc_forward(model: VqcModel, observations) -> np.ndarray:
    """Action values ``w_a * <Z_a>``; one row per observation."""
    return expectations(model, observations) * model.w


def _shifted_readout(suffix: np.ndarray, psi_out: np.ndarray, kfull: np.ndarray, obs_diag: np.ndarray) -> np.ndarray:
    """Loss-weighted readout of every shifted circuit ``suffix @ K @ psi_out``.

    suffix: (B, D, D) unitary from this point to the end; psi_out: (B, D);
    kfull: (K, D, D) shift operators; obs_diag: (B, D). Returns (B, K).
    """
    phi = np.tensordot(psi_out, kfull, axes=([1], [2]))  # (B, K, D)
    final = suffix @ np.swapaxes(phi, 1, 2)  # (B, D, K): output states of the shifted circuits
    probs = final.real**2 + final.imag**2
    return (obs_diag[:, None, :] @ probs)[:, 0, :]


GRADIENT_METHODS = ("shift", "adjoint")


def vqc_gradient(model: VqcModel, observations, loss_grad, method: str = "shift") -> np.ndarray:
    """Parameter-shift gradient of ``sum_b sum_a loss_grad[b, a] * Q_a(s_b)``.

    Every rotation angle theta gets ``(F(theta + pi/2) - F(theta - pi/2)) / 2``
    where F is the loss-weighted readout of the circuit with only that angle
    shifted. Encoding scales pick up ``arctan(s_q)`` by the chain rule;
    output scales get ``<Z_a>``.

    ``method="shift"`` evaluates both shifted circuits for every angle. The
    shifted circuits share the unshifted prefix (cached from the forward
    pass) and suffix (accumulated backwards as one unitary per sample), so
    each shifted output state costs one matrix-vector product.

    ``method="adjoint"`` evaluates the same difference in closed form. With
    ``R(t) = exp(-i t G / 2)`` and ``G`` an involutory generator,
    ``(F(t + pi/2) - F(t - pi/2)) / 2 = Im <lam| G |psi>`` where ``psi`` is
    the state after the gate and ``lam`` the readout observable pulled back
    to that point. Only vectors are propagated, so it is several times
    cheaper; both methods agree to rounding error.
    """
    if method not in GRADIENT_METHODS:
        raise UsageError(f"method must be one of {GRADIENT_METHODS}, got {method!r}")
    c = model.config
    s = _check_observations(model, observations)
    B = s.shape[0]
    g = np.asarray(loss_grad, dtype=float)
    if g.size != B * c.n_actions:
        raise UsageError(f"loss_grad must have {c.n_actions} entries per observation, got shape {g.shape}")
    g = g.reshape(B, c.n_actions)
    comp = _compiled(model)
    psi, after_var, after_enc, enc = _final_state(model, s, comp, keep=True)

    ez = (psi.real**2 + psi.imag**2) @ comp.z.T
    grad_w = np.sum(g * ez, axis=0)
    obs_diag = (g * model.w) @ comp.z  # (B, D)
    backward = _shift_backward if method == "shift" else _adjoint_backward
    grad_phi, dtheta_enc = backward(model, comp, after_var, after_enc, enc, obs_diag)
    grad_lam = np.einsum("bkq,bq->kq", dtheta_enc, np.arctan(s)) if c.n_blocks else np.zeros((0, c.n_qubits))
    return np.concatenate([grad_phi.ravel(), grad_lam.ravel(), grad_w])


def _shift_backward(model, comp, after_var, after_enc, enc, obs_diag):
    c = model.config
    n = c.n_qubits
    B = obs_diag.shape[0]
    grad_phi = np.zeros_like(model.phi)
    dtheta_enc = np.zeros((B, c.n_blocks, n))
    rx_shift = _rx_shift_operators(n)
    suffix = np.broadcast_to(np.eye(comp.dim, dtype=complex), (B, comp.dim, comp.dim))
    for layer in range(c.n_blocks, -1, -1):
        f = _shifted_readout(suffix, after_var[layer], comp.variational_shifts(layer), obs_diag)
        f = f.reshape(B, n, 3, 2)
        grad_phi[layer] = 0.5 * np.sum(f[..., 0] - f[..., 1], axis=0)
        if layer == 0:
            break
        suffix = suffix @ comp.var[layer]
        b = layer - 1
        f = _shifted_readout(suffix, after_enc[b], rx_shift, obs_diag).reshape(B, n, 2)
        dtheta_enc[:, b] = 0.5 * (f[..., 0] - f[..., 1])
        suffix = suffix @ enc[:, b] @ comp.ent
    return grad_phi, dtheta_enc


def _batch_cross_terms(lam: np.ndarray, psi: np.ndarray, n: int) -> np.ndarray:
    """rho[q, i, j] = sum over samples and the other qubits of conj(lam[.., i, ..]) * psi[.., j, ..]."""
    outer = (lam.conj().T @ psi).reshape(-1)  # (D * D,)
    cross = _Bits.get(n).cross
    return (outer.real @ cross + 1j * (outer.imag @ cross)).reshape(n, 2, 2)


def _adjoint_backward(model, comp, after_var, after_enc, enc, obs_diag):
    c = model.config
    n = c.n_qubits
    B = obs_diag.shape[0]
    grad_phi = np.zeros_like(model.phi)
    dtheta_enc = np.zeros((B, c.n_blocks, n))
    paulis = np.stack([_PAULI[kind] for kind in c.rotation_triplet])  # (3, 2, 2)
    flip = _Bits.get(n).flip

    lam = obs_diag * after_var[c.n_blocks]
    for layer in range(c.n_blocks, -1, -1):
        tails, tails_h = comp._tails(layer)
        gens = tails @ paulis[None] @ tails_h  # (n, 3, 2, 2)
        rho = _batch_cross_terms(lam, after_var[layer], n)  # (n, 2, 2)
        grad_phi[layer] = np.einsum("qkij,qij->qk", gens, rho).imag
        if layer == 0:
            break
        lam = lam @ comp.var[layer].conj()  # V^dagger lam, row-vector form
        b = layer - 1
        flipped = after_enc[b][:, flip]  # (B, n, D): X_q |psi>
        dtheta_enc[:, b] = (flipped @ lam.conj()[:, :, None])[:, :, 0].imag  # Im <lam| X_q |psi>
        lam = ((lam[:, None, :] @ enc[:, b].conj())[:, 0, :]) @ comp.ent.conj()
    return grad_phi, dtheta_enc
