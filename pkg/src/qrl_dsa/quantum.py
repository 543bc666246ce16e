"""Dense statevector simulator for small registers.

Bit ordering is little-endian: qubit 0 is the least-significant bit of the
basis index, so the amplitude of ``|q2 q1 q0>`` lives at ``q0 + 2*q1 + 4*q2``.
Bitstrings returned by :func:`probabilities` are written most-significant
qubit first (qubit 0 is the rightmost character).

Rotations follow ``R_A(theta) = exp(-i theta A / 2)``. Global phase is not
tracked by any contract; everything observable goes through probabilities
and Pauli-Z expectations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError, UsageError

MAX_QUBITS = 12

_SQRT2_INV = 1.0 / math.sqrt(2.0)
_H = np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class GateKind(str, Enum):
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    H = "H"
    CNOT = "CNOT"
    CZ = "CZ"

    @property
    def is_rotation(self) -> bool:
        return self in (GateKind.RX, GateKind.RY, GateKind.RZ)

    @property
    def is_two_qubit(self) -> bool:
        return self in (GateKind.CNOT, GateKind.CZ)


@dataclass(frozen=True)
class GateOp:
    kind: GateKind
    target: int
    control: int | None = None
    angle: float | None = None

    def __post_init__(self):
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind.is_two_qubit:
            if self.control is None:
                raise UsageError(f"{kind.value} requires a control qubit")
            if self.control == self.target:
                raise UsageError(f"{kind.value} control and target must differ (both {self.target})")
        elif self.control is not None:
            raise UsageError(f"{kind.value} takes no control qubit")
        if kind.is_rotation:
            if self.angle is None:
                raise UsageError(f"{kind.value} requires an angle")
            if not math.isfinite(self.angle):
                raise UsageError(f"{kind.value} angle must be finite, got {self.angle}")
        elif self.angle is not None:
            raise UsageError(f"{kind.value} takes no angle")


def rx(target: int, angle: float) -> GateOp:
    return GateOp(GateKind.RX, target, angle=float(angle))


def ry(target: int, angle: float) -> GateOp:
    return GateOp(GateKind.RY, target, angle=float(angle))


def rz(target: int, angle: float) -> GateOp:
    return GateOp(GateKind.RZ, target, angle=float(angle))


def hadamard(target: int) -> GateOp:
    return GateOp(GateKind.H, target)


def cnot(control: int, target: int) -> GateOp:
    return GateOp(GateKind.CNOT, target, control=control)


def cz(control: int, target: int) -> GateOp:
    return GateOp(GateKind.CZ, target, control=control)


def rotation_matrix(kind: GateKind | str, angle: float) -> np.ndarray:
    """2x2 unitary ``exp(-i angle A / 2)`` for A in {X, Y, Z}."""
    kind = GateKind(kind)
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    if kind is GateKind.RX:
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if kind is GateKind.RY:
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind is GateKind.RZ:
        return np.array([[c - 1j * s, 0], [0, c + 1j * s]], dtype=complex)
    raise UsageError(f"{kind.value} is not a rotation")


def single_qubit_matrix(gate: GateOp) -> np.ndarray:
    if gate.kind is GateKind.H:
        return _H
    return rotation_matrix(gate.kind, gate.angle)


@dataclass(frozen=True)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2**self.n_qubits,):
            raise UsageError(
                f"expected {2**self.n_qubits} amplitudes for {self.n_qubits} qubits, got shape {amps.shape}"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


def new_state(n_qubits: int) -> StateVector:
    """The register ``|0...0>``."""
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigError(f"n_qubits must be an integer in [1, {MAX_QUBITS}], got {n_qubits!r}")
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(int(n_qubits), amps)


def _check_qubit(index: int, n_qubits: int, role: str) -> None:
    if not 0 <= index < n_qubits:
        raise UsageError(f"{role} qubit {index} out of range for {n_qubits}-qubit state")


def apply_1q(amps: np.ndarray, n_qubits: int, matrix: np.ndarray, qubit: int) -> np.ndarray:
    # axis layout (high bits, qubit bit, low bits) for little-endian ordering
    psi = amps.reshape(2 ** (n_qubits - 1 - qubit), 2, 2**qubit)
    return np.einsum("ij,ajb->aib", matrix, psi).reshape(-1)


def apply_gate(state: StateVector, gate: GateOp) -> StateVector:
    n = state.n_qubits
    _check_qubit(gate.target, n, "target")
    if gate.kind.is_two_qubit:
        _check_qubit(gate.control, n, "control")
        idx = np.arange(2**n)
        ctrl_set = (idx >> gate.control) & 1 == 1
        amps = state.amplitudes.copy()
        if gate.kind is GateKind.CNOT:
            amps[ctrl_set] = state.amplitudes[idx[ctrl_set] ^ (1 << gate.target)]
        else:
            both = ctrl_set & ((idx >> gate.target) & 1 == 1)
            amps[both] *= -1
        return StateVector(n, amps)
    return StateVector(n, apply_1q(state.amplitudes, n, single_qubit_matrix(gate), gate.target))


def run_circuit(ops, n_qubits: int, state: StateVector | None = None) -> StateVector:
    state = new_state(n_qubits) if state is None else state
    for op in ops:
        state = apply_gate(state, op)
    return state


def probabilities(state: StateVector) -> dict[str, float]:
    probs = np.abs(state.amplitudes) ** 2
    return {format(i, f"0{state.n_qubits}b"): float(p) for i, p in enumerate(probs)}


def z_signs(n_qubits: int, qubit: int) -> np.ndarray:
    """Eigenvalues of Z on ``qubit`` along the computational basis: +1 for bit 0, -1 for bit 1."""
    bits = (np.arange(2**n_qubits) >> qubit) & 1
    return 1.0 - 2.0 * bits


def expectation_z(state: StateVector, qubit: int) -> float:
    _check_qubit(qubit, state.n_qubits, "measured")
    probs = np.abs(state.amplitudes) ** 2
    return float(np.dot(z_signs(state.n_qubits, qubit), probs))


def bell_state() -> StateVector:
    """|Phi+> = (|00> + |11>)/sqrt(2), prepared by H on qubit 0 then CNOT(0 -> 1)."""
    return run_circuit([hadamard(0), cnot(0, 1)], 2)
