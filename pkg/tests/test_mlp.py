import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrl_dsa import ConfigError, UsageError
from qrl_dsa.mlp import MlpModel, adam_init, adam_step, build_mlp, count_params, mlp_backward, mlp_forward

sizes = st.lists(st.integers(1, 9), min_size=2, max_size=4)


def fd_gradient(model, x, g, h=1e-6):
    out = np.empty(model.n_params)
    for i in range(model.n_params):
        p = model.params.copy()
        p[i] += h
        up = np.sum(mlp_forward(MlpModel(model.layer_sizes, p), x) * g)
        p[i] -= 2 * h
        down = np.sum(mlp_forward(MlpModel(model.layer_sizes, p), x) * g)
        out[i] = (up - down) / (2 * h)
    return out


class TestBuild:
    def test_paper_count(self):
        assert build_mlp([4, 64, 64, 2]).n_params == 4610

    def test_single_weight(self):
        assert build_mlp([1, 1]).n_params == 2

    @pytest.mark.parametrize("bad", [[4], [], [4, 0, 2], [4, -3], [2.5, 1]])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            build_mlp(bad)

    @settings(max_examples=30, deadline=None)
    @given(layer_sizes=sizes)
    def test_count_formula(self, layer_sizes):
        m = build_mlp(layer_sizes)
        assert m.n_params == count_params(layer_sizes) == sum(a.size for a in m.named_arrays().values())

    def test_glorot_bounds_and_zero_bias(self):
        m = build_mlp([4, 64, 64, 2], seed=1)
        for l, (a, b) in enumerate(zip(m.layer_sizes[:-1], m.layer_sizes[1:])):
            assert np.all(np.abs(m.weight(l)) <= np.sqrt(6 / (a + b)))
            assert m.weight(l).shape == (a, b)
            assert not np.any(m.bias(l))

    def test_deterministic(self):
        assert np.array_equal(build_mlp([4, 8, 2], 3).params, build_mlp([4, 8, 2], 3).params)


class TestForward:
    def test_zero_weights(self):
        m = MlpModel((4, 5, 2), np.zeros(count_params([4, 5, 2])))
        assert np.array_equal(mlp_forward(m, [1.0, -2.0, 3.0, 0.5]), [0.0, 0.0])

    def test_dot_product(self):
        m = MlpModel((2, 1), np.array([1.0, 1.0, 0.0]))
        assert mlp_forward(m, [3.0, 4.0])[0] == 7.0

    def test_relu_hidden_only(self):
        # hidden unit sees -1 and is clipped; output layer is linear and may go negative
        m = MlpModel((1, 1, 1), np.array([1.0, 0.0, 1.0, -2.0]))
        assert mlp_forward(m, [-1.0])[0] == -2.0
        assert mlp_forward(m, [3.0])[0] == 1.0

    def test_deterministic(self):
        m = build_mlp([4, 64, 64, 2], seed=9)
        x = np.array([0.1, 0.2, -0.3, 0.4])
        assert np.array_equal(mlp_forward(m, x), mlp_forward(build_mlp([4, 64, 64, 2], seed=9), x))

    def test_shape_mismatch(self):
        with pytest.raises(UsageError):
            mlp_forward(build_mlp([4, 2]), np.zeros(3))

    def test_non_finite(self):
        with pytest.raises(UsageError):
            mlp_forward(build_mlp([2, 2]), [np.nan, 0.0])


class TestBackward:
    def test_linear_model(self):
        m = MlpModel((3, 1), np.array([0.5, -1.0, 2.0, 0.1]))
        x = np.array([1.5, -2.0, 0.25])
        g = mlp_backward(m, x, [3.0])
        assert np.allclose(g[:3], x * 3.0)
        assert g[3] == 3.0

    def test_zero_loss_grad(self):
        m = build_mlp([4, 8, 2], seed=1)
        assert not np.any(mlp_backward(m, np.ones(4), np.zeros(2)))

    def test_random_4_8_2_finite_difference(self):
        rng = np.random.default_rng(0)
        for seed in range(10):
            m = build_mlp([4, 8, 2], seed=seed)
            m.params[:] += rng.normal(scale=0.1, size=m.n_params)  # nonzero biases too
            x = rng.normal(size=4)
            g = rng.normal(size=2)
            fd = fd_gradient(m, x, g)
            rel = np.max(np.abs(fd - mlp_backward(m, x, g))) / np.max(np.abs(fd))
            assert rel < 1e-4

    @settings(max_examples=20, deadline=None)
    @given(layer_sizes=sizes, seed=st.integers(0, 1000))
    def test_batch_matches_finite_difference(self, layer_sizes, seed):
        rng = np.random.default_rng(seed)
        m = build_mlp(layer_sizes, seed)
        m.params[:] += rng.normal(scale=0.1, size=m.n_params)
        x = rng.normal(size=(3, layer_sizes[0]))
        g = rng.normal(size=(3, layer_sizes[-1]))
        fd = fd_gradient(m, x, g)
        assert np.max(np.abs(fd - mlp_backward(m, x, g))) <= 1e-4 * max(np.max(np.abs(fd)), 1e-3)

    def test_bad_loss_grad(self):
        with pytest.raises(UsageError):
            mlp_backward(build_mlp([4, 2]), np.zeros(4), np.zeros(3))


class TestAdam:
    def test_zero_gradient(self):
        p = np.array([1.0, -2.0, 3.0])
        new, st_ = adam_step(p, np.zeros(3), adam_init(3))
        assert np.array_equal(new, p)
        assert st_.step == 1

    def test_first_step_magnitude(self):
        lr = 0.01
        p = np.zeros(4)
        g = np.array([1e-3, -5.0, 20.0, 0.3])
        new, _ = adam_step(p, g, adam_init(4, lr=lr))
        assert np.allclose(np.abs(new - p), lr, rtol=1e-4)
        assert np.all(np.sign(new - p) == -np.sign(g))

    def test_constant_gradient_monotone(self):
        p = np.array([0.0, 0.0])
        g = np.array([2.0, -0.5])
        state = adam_init(2, lr=1e-2)
        traj = [p]
        for _ in range(100):
            p, state = adam_step(p, g, state)
            traj.append(p)
        d = np.diff(np.array(traj), axis=0)
        assert np.all(d[:, 0] < 0) and np.all(d[:, 1] > 0)
        assert state.step == 100

    def test_inputs_not_modified(self):
        p = np.ones(3)
        state = adam_init(3)
        adam_step(p, np.ones(3), state)
        assert np.array_equal(p, np.ones(3)) and state.step == 0 and not np.any(state.m)

    def test_shape_mismatch(self):
        with pytest.raises(UsageError):
            adam_step(np.zeros(3), np.zeros(4), adam_init(3))
        with pytest.raises(UsageError):
            adam_step(np.zeros(3), np.zeros(3), adam_init(2))

    def test_invalid_hyperparameters(self):
        with pytest.raises(ConfigError):
            adam_init(3, lr=0.0)
