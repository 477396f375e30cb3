"""LSTM cell and bidirectional layer built on the sequence kernels."""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .kernels import lstm_seq_backward, lstm_seq_forward


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class LstmParams:
    """All gate weights of one direction: input->gate, hidden->gate, biases."""

    W_xi: np.ndarray
    W_xf: np.ndarray
    W_xo: np.ndarray
    W_xg: np.ndarray
    W_hi: np.ndarray
    W_hf: np.ndarray
    W_ho: np.ndarray
    W_hg: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.W_xi.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.W_xi.shape[1]

    def field_names(self) -> list[str]:
        return [f.name for f in fields(self)]

    def pack(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Kernel layout: Wx (D,4H), Wh (H,4H), b (4H) in [i, f, o, g] order."""
        Wx = np.hstack([self.W_xi, self.W_xf, self.W_xo, self.W_xg])
        Wh = np.hstack([self.W_hi, self.W_hf, self.W_ho, self.W_hg])
        b = np.concatenate([self.b_i, self.b_f, self.b_o, self.b_g])
        return Wx, Wh, b

    @classmethod
    def unpack_grads(cls, dWx: np.ndarray, dWh: np.ndarray, db: np.ndarray
                     ) -> dict[str, np.ndarray]:
        H = dWh.shape[0]
        blocks = {}
        for k, gate in enumerate("ifog"):
            blocks[f"W_x{gate}"] = dWx[:, k * H:(k + 1) * H]
            blocks[f"W_h{gate}"] = dWh[:, k * H:(k + 1) * H]
            blocks[f"b_{gate}"] = db[k * H:(k + 1) * H]
        return blocks


@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray


@dataclass
class BiLstmLayerParams:
    """Forward and backward direction parameters; outputs are concatenated.
    backward is None for a unidirectional layer."""

    forward: LstmParams
    backward: Optional[LstmParams] = None

    @property
    def output_dim(self) -> int:
        H = self.forward.hidden_dim
        return 2 * H if self.backward is not None else H


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int
                   ) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_lstm_params(rng: np.random.Generator, input_dim: int, hidden_dim: int
                     ) -> LstmParams:
    """Glorot-uniform matrices, zero biases, forget-gate bias +1."""
    kw = {}
    for gate in "ifog":
        kw[f"W_x{gate}"] = glorot_uniform(rng, input_dim, hidden_dim)
        kw[f"W_h{gate}"] = glorot_uniform(rng, hidden_dim, hidden_dim)
        kw[f"b_{gate}"] = np.zeros(hidden_dim)
    kw["b_f"] = np.ones(hidden_dim)
    return LstmParams(**kw)


def lstm_cell_forward(x_t: np.ndarray, state_prev: LstmState,
                      params: LstmParams, *, literal_candidate: bool = False
                      ) -> LstmState:
    """One recurrence step: sigmoid gates, tanh candidate, cell and hidden
    update. ``literal_candidate`` drops the hidden term from the candidate."""
    x_t = np.asarray(x_t, dtype=float)
    if not np.all(np.isfinite(x_t)):
        raise ValueError("non-finite input to lstm_cell_forward")
    h_prev, c_prev = state_prev.h, state_prev.c
    i = sigmoid(x_t @ params.W_xi + h_prev @ params.W_hi + params.b_i)
    f = sigmoid(x_t @ params.W_xf + h_prev @ params.W_hf + params.b_f)
    o = sigmoid(x_t @ params.W_xo + h_prev @ params.W_ho + params.b_o)
    g_pre = x_t @ params.W_xg + params.b_g
    if not literal_candidate:
        g_pre = g_pre + h_prev @ params.W_hg
    c = f * c_prev + i * np.tanh(g_pre)
    h = o * np.tanh(c)
    return LstmState(h=h, c=c)


def bilstm_forward(x: np.ndarray, layer: BiLstmLayerParams, *,
                   literal_candidate: bool = False):
    """(B, T, D) -> (B, T, 2H) via forward pass, reversed backward pass, and
    per-step concatenation ((B, T, H) when unidirectional)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 2
    if single:
        x = x[None]
    hf, cache_f = lstm_seq_forward(x, *layer.forward.pack(),
                                   literal_candidate)
    if layer.backward is None:
        out, cache = hf, (cache_f, None)
    else:
        x_rev = np.ascontiguousarray(x[:, ::-1])
        hb_rev, cache_b = lstm_seq_forward(x_rev, *layer.backward.pack(),
                                           literal_candidate)
        out = np.concatenate([hf, hb_rev[:, ::-1]], axis=2)
        cache = (cache_f, cache_b)
    return (out[0] if single else out), cache


def bilstm_backward(dout: np.ndarray, cache, layer: BiLstmLayerParams, *,
                    literal_candidate: bool = False):
    """Backward of bilstm_forward: returns (dx, forward-grads dict,
    backward-grads dict or None)."""
    cache_f, cache_b = cache
    H = layer.forward.hidden_dim
    Wx_f, Wh_f, _ = layer.forward.pack()
    dx, dWx, dWh, db = lstm_seq_backward(
        np.ascontiguousarray(dout[:, :, :H]), cache_f, Wx_f, Wh_f,
        literal_candidate)
    grads_f = LstmParams.unpack_grads(dWx, dWh, db)
    if layer.backward is None:
        return dx, grads_f, None
    Wx_b, Wh_b, _ = layer.backward.pack()
    dout_b_rev = np.ascontiguousarray(dout[:, ::-1, H:])
    dx_b_rev, dWx_b, dWh_b, db_b = lstm_seq_backward(
        dout_b_rev, cache_b, Wx_b, Wh_b, literal_candidate)
    dx = dx + dx_b_rev[:, ::-1]
    grads_b = LstmParams.unpack_grads(dWx_b, dWh_b, db_b)
    return dx, grads_f, grads_b
