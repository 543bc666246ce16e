import math
from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrl_dsa import ConfigError, UsageError
from qrl_dsa import quantum as qc

ANGLE = st.floats(-4 * math.pi, 4 * math.pi, allow_nan=False)


# explicit 2^n x 2^n operators built independently of apply_gate
def _full_1q(m, q, n):
    # kron order: highest qubit leftmost, qubit 0 rightmost (little-endian index)
    mats = [m if k == q else np.eye(2) for k in reversed(range(n))]
    return reduce(np.kron, mats)


def _full_controlled(kind, control, target, n):
    dim = 2**n
    out = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        c_bit = (col >> control) & 1
        t_bit = (col >> target) & 1
        if kind is qc.GateKind.CNOT:
            row = col ^ (1 << target) if c_bit else col
            out[row, col] = 1
        else:
            out[col, col] = -1 if (c_bit and t_bit) else 1
    return out


def _matrix_oracle(gate, n):
    if gate.kind.is_two_qubit:
        return _full_controlled(gate.kind, gate.control, gate.target, n)
    if gate.kind is qc.GateKind.H:
        m = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    else:
        # exp(-i t A / 2) = cos(t/2) I - i sin(t/2) A
        a = {qc.GateKind.RX: qc.PAULI_X, qc.GateKind.RY: qc.PAULI_Y, qc.GateKind.RZ: qc.PAULI_Z}[gate.kind]
        m = math.cos(gate.angle / 2) * np.eye(2) - 1j * math.sin(gate.angle / 2) * a
    return _full_1q(m, gate.target, n)


@st.composite
def gates(draw, n):
    kind = draw(st.sampled_from(list(qc.GateKind)))
    target = draw(st.integers(0, n - 1))
    if kind.is_two_qubit:
        control = draw(st.integers(0, n - 1).filter(lambda c: c != target))
        return qc.GateOp(kind, target, control=control)
    if kind.is_rotation:
        return qc.GateOp(kind, target, angle=draw(ANGLE))
    return qc.GateOp(kind, target)


@st.composite
def states(draw, n):
    re = draw(st.lists(st.floats(-1, 1), min_size=2**n, max_size=2**n))
    im = draw(st.lists(st.floats(-1, 1), min_size=2**n, max_size=2**n))
    v = np.array(re) + 1j * np.array(im)
    norm = np.linalg.norm(v)
    if norm < 1e-3:
        v = np.zeros(2**n, dtype=complex)
        v[0] = 1
        norm = 1.0
    return qc.StateVector(n, v / norm)


class TestNewState:
    def test_one_qubit(self):
        assert np.array_equal(qc.new_state(1).amplitudes, [1, 0])

    def test_two_qubits(self):
        assert np.array_equal(qc.new_state(2).amplitudes, [1, 0, 0, 0])

    def test_four_qubits(self):
        s = qc.new_state(4)
        assert s.amplitudes.shape == (16,)
        assert s.norm == 1.0

    @pytest.mark.parametrize("n", [0, 13, -1, 2.5])
    def test_out_of_range(self, n):
        with pytest.raises(ConfigError):
            qc.new_state(n)

    def test_amplitudes_read_only(self):
        with pytest.raises(ValueError):
            qc.new_state(2).amplitudes[0] = 0


class TestApplyGate:
    def test_rx_zero_is_identity(self):
        s = qc.apply_gate(qc.new_state(1), qc.rx(0, 0.0))
        assert np.allclose(s.amplitudes, [1, 0], atol=1e-15)

    def test_rx_pi(self):
        s = qc.apply_gate(qc.new_state(1), qc.rx(0, math.pi))
        assert np.allclose(s.amplitudes, [0, -1j], atol=1e-15)
        assert qc.probabilities(s)["1"] == pytest.approx(1.0, abs=1e-15)

    def test_random_1000_gates_preserve_norm(self):
        rng = np.random.default_rng(7)
        s = qc.new_state(4)
        kinds = list(qc.GateKind)
        for _ in range(1000):
            kind = kinds[rng.integers(len(kinds))]
            t = int(rng.integers(4))
            if kind.is_two_qubit:
                g = qc.GateOp(kind, t, control=int((t + 1 + rng.integers(3)) % 4))
            elif kind.is_rotation:
                g = qc.GateOp(kind, t, angle=float(rng.uniform(-10, 10)))
            else:
                g = qc.GateOp(kind, t)
            s = qc.apply_gate(s, g)
            assert abs(s.norm - 1) < 1e-10

    def test_invalid_target(self):
        with pytest.raises(UsageError):
            qc.apply_gate(qc.new_state(2), qc.hadamard(2))

    def test_invalid_control(self):
        with pytest.raises(UsageError):
            qc.apply_gate(qc.new_state(2), qc.cnot(5, 0))

    @pytest.mark.parametrize("angle", [math.nan, math.inf, -math.inf])
    def test_non_finite_angle(self, angle):
        with pytest.raises(UsageError):
            qc.rx(0, angle)

    def test_gate_validation(self):
        with pytest.raises(UsageError):
            qc.GateOp(qc.GateKind.CNOT, 0)
        with pytest.raises(UsageError):
            qc.GateOp(qc.GateKind.CZ, 1, control=1)
        with pytest.raises(UsageError):
            qc.GateOp(qc.GateKind.H, 0, angle=0.3)
        with pytest.raises(UsageError):
            qc.GateOp(qc.GateKind.RY, 0)
        with pytest.raises(UsageError):
            qc.GateOp(qc.GateKind.RX, 0, control=1, angle=0.1)

    def test_cnot_flips_target_when_control_set(self):
        # |01> in little-endian: qubit 0 set, index 1
        s = qc.StateVector(2, np.array([0, 1, 0, 0]))
        out = qc.apply_gate(s, qc.cnot(0, 1))
        assert np.array_equal(out.amplitudes, [0, 0, 0, 1])


class TestMatrixOracle:
    @pytest.mark.parametrize("n", [1, 2, 3])
    @settings(max_examples=60, deadline=None)
    @given(data=st.data())
    def test_apply_gate_matches_explicit_matrix(self, n, data):
        s = data.draw(states(n))
        if n == 1:
            g = data.draw(gates(1).filter(lambda g: not g.kind.is_two_qubit))
        else:
            g = data.draw(gates(n))
        expected = _matrix_oracle(g, n) @ s.amplitudes
        assert np.max(np.abs(qc.apply_gate(s, g).amplitudes - expected)) < 1e-12


class TestIdentities:
    @settings(max_examples=50, deadline=None)
    @given(data=st.data())
    def test_cnot_involution(self, data):
        s = data.draw(states(3))
        c = data.draw(st.integers(0, 2))
        t = data.draw(st.integers(0, 2).filter(lambda t: t != c))
        twice = qc.run_circuit([qc.cnot(c, t), qc.cnot(c, t)], 3, s)
        assert np.max(np.abs(twice.amplitudes - s.amplitudes)) < 1e-12

    @settings(max_examples=50, deadline=None)
    @given(data=st.data(), kind=st.sampled_from(["RX", "RY", "RZ"]), theta=ANGLE)
    def test_rotation_inverse(self, data, kind, theta):
        s = data.draw(states(2))
        q = data.draw(st.integers(0, 1))
        back = qc.run_circuit([qc.GateOp(kind, q, angle=theta), qc.GateOp(kind, q, angle=-theta)], 2, s)
        assert np.max(np.abs(back.amplitudes - s.amplitudes)) < 1e-12

    @settings(max_examples=50, deadline=None)
    @given(data=st.data(), a=ANGLE, b=ANGLE)
    def test_rz_composition(self, data, a, b):
        s0 = qc.run_circuit([qc.hadamard(0), qc.ry(1, 0.7)], 2, data.draw(states(2)))
        two = qc.run_circuit([qc.rz(0, a), qc.rz(0, b)], 2, s0)
        one = qc.apply_gate(s0, qc.rz(0, a + b))
        p2, p1 = qc.probabilities(two), qc.probabilities(one)
        assert max(abs(p2[k] - p1[k]) for k in p1) < 1e-12
        for q in range(2):
            assert abs(abs(qc.expectation_z(two, q)) - abs(qc.expectation_z(one, q))) < 1e-12
        # global phase only: overlap has unit modulus
        assert abs(abs(np.vdot(one.amplitudes, two.amplitudes)) - 1) < 1e-12

    @settings(max_examples=50, deadline=None)
    @given(data=st.data())
    def test_norm_preserved_by_any_gate(self, data):
        s = data.draw(states(3))
        g = data.draw(gates(3))
        assert abs(qc.apply_gate(s, g).norm - 1) < 1e-10


class TestProbabilities:
    def test_zero_state(self):
        assert qc.probabilities(qc.new_state(1)) == {"0": 1.0, "1": 0.0}

    def test_bell(self):
        p = qc.probabilities(qc.bell_state())
        assert abs(p["00"] - 0.5) < 1e-12 and abs(p["11"] - 0.5) < 1e-12
        assert p["01"] < 1e-12 and p["10"] < 1e-12

    def test_hadamard_superposition(self):
        p = qc.probabilities(qc.apply_gate(qc.new_state(1), qc.hadamard(0)))
        assert p["0"] == pytest.approx(0.5, abs=1e-15) and p["1"] == pytest.approx(0.5, abs=1e-15)

    def test_bitstring_order_msb_first(self):
        # X on qubit 0 of |00> gives index 1, written "01"
        s = qc.apply_gate(qc.new_state(2), qc.rx(0, math.pi))
        assert qc.probabilities(s)["01"] == pytest.approx(1.0)

    @settings(max_examples=40, deadline=None)
    @given(data=st.data())
    def test_sums_to_one(self, data):
        assert abs(sum(qc.probabilities(data.draw(states(3))).values()) - 1) < 1e-10


class TestExpectationZ:
    def test_zero_state(self):
        assert qc.expectation_z(qc.new_state(1), 0) == 1.0

    def test_after_rx_pi(self):
        s = qc.apply_gate(qc.new_state(1), qc.rx(0, math.pi))
        assert qc.expectation_z(s, 0) == pytest.approx(-1.0, abs=1e-15)

    def test_bell_qubit0(self):
        assert abs(qc.expectation_z(qc.bell_state(), 0)) < 1e-12

    def test_invalid_qubit(self):
        with pytest.raises(UsageError):
            qc.expectation_z(qc.new_state(2), 2)

    @settings(max_examples=40, deadline=None)
    @given(data=st.data())
    def test_bounded(self, data):
        s = data.draw(states(3))
        for q in range(3):
            assert -1 - 1e-12 <= qc.expectation_z(s, q) <= 1 + 1e-12


class TestBellState:
    def test_amplitudes(self):
        r = 1 / math.sqrt(2)
        assert np.max(np.abs(qc.bell_state().amplitudes - [r, 0, 0, r])) < 1e-12

    def test_correlation(self):
        p = qc.probabilities(qc.bell_state())
        # P(q1 = 0 | q0 = 0): bitstrings are q1 q0
        p_q0_zero = p["00"] + p["10"]
        assert p["00"] / p_q0_zero == pytest.approx(1.0, abs=1e-12)
