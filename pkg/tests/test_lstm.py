import math

import numpy as np
import pytest

from aeroadapt.nn import kernels
from aeroadapt.nn.lstm import (BiLstmLayerParams, LstmParams, LstmState,
                               bilstm_backward, bilstm_forward,
                               init_lstm_params, lstm_cell_forward, sigmoid)


def scalar_params(**overrides):
    """D=1, H=1 parameters, all zero unless overridden."""
    kw = {name: np.zeros((1, 1)) for name in
          ["W_xi", "W_xf", "W_xo", "W_xg", "W_hi", "W_hf", "W_ho", "W_hg"]}
    kw.update({f"b_{g}": np.zeros(1) for g in "ifog"})
    for key, val in overrides.items():
        kw[key] = np.array(val, dtype=float).reshape(kw[key].shape)
    return LstmParams(**kw)


def zero_state(H=1):
    return LstmState(h=np.zeros(H), c=np.zeros(H))


class TestCell:
    def test_hand_computed_step(self):
        # Scalar cell, one step from zero state; recompute with math.*.
        p = scalar_params(W_xi=0.5, W_xf=-0.3, W_xo=0.2, W_xg=0.7,
                          b_i=0.1, b_f=1.0, b_o=-0.2, b_g=0.05)
        x = np.array([0.8])
        s = lstm_cell_forward(x, zero_state(), p)
        i = 1 / (1 + math.exp(-(0.5 * 0.8 + 0.1)))
        g = math.tanh(0.7 * 0.8 + 0.05)
        o = 1 / (1 + math.exp(-(0.2 * 0.8 - 0.2)))
        c = i * g
        assert s.c[0] == pytest.approx(c, abs=1e-12)
        assert s.h[0] == pytest.approx(o * math.tanh(c), abs=1e-12)

    def test_second_step_uses_recurrence(self):
        p = scalar_params(W_xg=1.0, W_hg=0.5, b_i=10.0, b_f=10.0, b_o=10.0)
        s1 = lstm_cell_forward(np.array([0.3]), zero_state(), p)
        s2 = lstm_cell_forward(np.array([0.0]), s1, p)
        # i, f, o saturate near 1; candidate sees 0.5 * h_prev.
        g2 = math.tanh(0.5 * s1.h[0])
        assert s2.c[0] == pytest.approx(s1.c[0] + g2, abs=1e-4)

    def test_literal_candidate_ignores_hidden(self):
        p = scalar_params(W_xg=1.0, W_hg=99.0, b_i=10.0, b_f=10.0, b_o=10.0)
        s1 = lstm_cell_forward(np.array([0.3]), zero_state(), p,
                               literal_candidate=True)
        s2 = lstm_cell_forward(np.array([0.0]), s1, p, literal_candidate=True)
        assert s2.c[0] == pytest.approx(s1.c[0], abs=1e-4)

    def test_zero_everything_stays_zero(self):
        p = scalar_params()
        s = lstm_cell_forward(np.array([0.0]), zero_state(), p)
        assert s.h[0] == 0.0 and s.c[0] == 0.0

    def test_non_finite_input_rejected(self):
        with pytest.raises(ValueError):
            lstm_cell_forward(np.array([np.nan]), zero_state(), scalar_params())

    def test_memory_retention_with_saturated_gates(self):
        # Open forget gate, write an impulse, then feed zeros: the hidden
        # output should hold its value over many steps.
        p = scalar_params(W_xg=1.0, b_i=100.0, b_f=100.0, b_o=100.0)
        s = lstm_cell_forward(np.array([1.0]), zero_state(), p)
        first = s.h[0]
        for _ in range(50):
            s = lstm_cell_forward(np.array([0.0]), s, p)
        assert s.h[0] == pytest.approx(first, abs=1e-6)

    def test_sigmoid_extremes_stable(self):
        assert sigmoid(np.array([1000.0]))[0] == 1.0
        assert sigmoid(np.array([-1000.0]))[0] == 0.0
        assert sigmoid(np.array([0.0]))[0] == 0.5


def random_layer(rng, D, H, bidirectional=True):
    fwd = init_lstm_params(rng, D, H)
    bwd = init_lstm_params(rng, D, H) if bidirectional else None
    return BiLstmLayerParams(fwd, bwd)


class TestBiLstm:
    def test_output_shape(self):
        rng = np.random.default_rng(0)
        layer = random_layer(rng, 3, 4)
        out, _ = bilstm_forward(rng.random((2, 5, 3)), layer)
        assert out.shape == (2, 5, 8)

    def test_unidirectional_shape(self):
        rng = np.random.default_rng(1)
        layer = random_layer(rng, 3, 4, bidirectional=False)
        out, _ = bilstm_forward(rng.random((2, 5, 3)), layer)
        assert out.shape == (2, 5, 4)

    def test_forward_half_matches_cell_loop(self):
        rng = np.random.default_rng(2)
        layer = random_layer(rng, 2, 3)
        x = rng.random((4, 2))
        out, _ = bilstm_forward(x, layer)
        s = LstmState(h=np.zeros(3), c=np.zeros(3))
        for t in range(4):
            s = lstm_cell_forward(x[t], s, layer.forward)
            assert np.allclose(out[t, :3], s.h, atol=1e-12)

    def test_palindrome_symmetry_with_tied_directions(self):
        rng = np.random.default_rng(3)
        fwd = init_lstm_params(rng, 2, 3)
        layer = BiLstmLayerParams(fwd, fwd)
        half = rng.random((3, 2))
        x = np.concatenate([half, half[::-1]])  # palindromic in time
        out, _ = bilstm_forward(x, layer)
        T = len(x)
        for t in range(T):
            assert np.allclose(out[t, :3], out[T - 1 - t, 3:], atol=1e-12)

    def test_length_one_directions_agree_when_tied(self):
        rng = np.random.default_rng(4)
        fwd = init_lstm_params(rng, 2, 3)
        layer = BiLstmLayerParams(fwd, fwd)
        out, _ = bilstm_forward(rng.random((1, 2)), layer)
        assert np.allclose(out[0, :3], out[0, 3:], atol=1e-12)

    def test_backward_gradient_finite_difference(self):
        rng = np.random.default_rng(5)
        layer = random_layer(rng, 2, 3)
        x = rng.random((2, 4, 2))
        R = rng.random((2, 4, 6))

        def loss(inp):
            out, _ = bilstm_forward(inp, layer)
            return float(np.sum(out * R))

        out, cache = bilstm_forward(x, layer)
        dx, grads_f, grads_b = bilstm_backward(R, cache, layer)
        delta = 1e-6
        for idx in [(0, 0, 0), (1, 2, 1), (0, 3, 0)]:
            xp = x.copy(); xp[idx] += delta
            xm = x.copy(); xm[idx] -= delta
            numeric = (loss(xp) - loss(xm)) / (2 * delta)
            assert dx[idx] == pytest.approx(numeric, rel=1e-4, abs=1e-8)

    def test_weight_gradient_finite_difference(self):
        rng = np.random.default_rng(6)
        layer = random_layer(rng, 2, 2, bidirectional=False)
        x = rng.random((1, 3, 2))
        R = rng.random((1, 3, 2))
        out, cache = bilstm_forward(x, layer)
        _, grads_f, _ = bilstm_backward(R, cache, layer)
        delta = 1e-6
        for field in ["W_xi", "W_hg", "b_f"]:
            arr = getattr(layer.forward, field)
            it = (0,) * arr.ndim
            orig = arr[it]
            arr[it] = orig + delta
            hi, _ = bilstm_forward(x, layer)
            arr[it] = orig - delta
            lo, _ = bilstm_forward(x, layer)
            arr[it] = orig
            numeric = (np.sum(hi * R) - np.sum(lo * R)) / (2 * delta)
            assert grads_f[field][it] == pytest.approx(numeric, rel=1e-4, abs=1e-8)


class TestInit:
    def test_forget_bias_one(self):
        p = init_lstm_params(np.random.default_rng(0), 4, 8)
        assert np.all(p.b_f == 1.0)
        assert np.all(p.b_i == 0.0)

    def test_glorot_limit(self):
        p = init_lstm_params(np.random.default_rng(1), 100, 50)
        limit = np.sqrt(6.0 / 150)
        assert np.abs(p.W_xi).max() <= limit
        assert np.abs(p.W_xi).max() > 0.5 * limit

    def test_pack_unpack_round_trip(self):
        p = init_lstm_params(np.random.default_rng(2), 3, 4)
        Wx, Wh, b = p.pack()
        blocks = LstmParams.unpack_grads(Wx, Wh, b.copy() * 0 + b)
        for name in p.field_names():
            assert np.array_equal(blocks[name], getattr(p, name))


class TestKernelParity:
    @pytest.mark.parametrize("literal", [False, True])
    def test_compiled_matches_reference(self, literal):
        cy = pytest.importorskip("aeroadapt.nn._lstm_cy")
        rng = np.random.default_rng(7)
        B, T, D, H = 3, 6, 4, 5
        x = rng.standard_normal((B, T, D))
        Wx = rng.standard_normal((D, 4 * H)) * 0.3
        Wh = rng.standard_normal((H, 4 * H)) * 0.3
        b = rng.standard_normal(4 * H) * 0.1
        h_py, cache_py = kernels.lstm_seq_forward_py(x, Wx, Wh, b, literal)
        h_cy, cache_cy = cy.lstm_seq_forward(x, Wx, Wh, b, literal)
        assert np.allclose(h_py, h_cy, atol=1e-12)
        dH = rng.standard_normal((B, T, H))
        out_py = kernels.lstm_seq_backward_py(dH, cache_py, Wx, Wh, literal)
        out_cy = cy.lstm_seq_backward(dH, cache_cy, Wx, Wh, literal)
        for a, c in zip(out_py, out_cy):
            assert np.allclose(a, np.asarray(c), atol=1e-10)

    def test_active_kernel_exposed(self):
        assert kernels.KERNEL in ("cython", "python")
