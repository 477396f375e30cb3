"""LSTM sequence kernels: forward and backpropagation-through-time.

Two interchangeable implementations exist: a compiled Cython extension
(``aeroadapt.nn._lstm_cy``) and the pure-numpy reference below. The compiled
kernel is used when available; set ``AEROADAPT_KERNEL=python`` or ``cython``
to force one. Both operate on packed parameters: ``Wx (D, 4H)``, ``Wh
(H, 4H)``, ``b (4H,)`` with gate blocks ordered [input, forget, output,
candidate].

When ``literal_candidate`` is set the candidate pre-activation omits the
hidden-recurrence term (the g block of Wh is ignored and receives zero
gradient).
"""

from __future__ import annotations

import os

import numpy as np


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_seq_forward_py(x: np.ndarray, Wx: np.ndarray, Wh: np.ndarray,
                        b: np.ndarray, literal_candidate: bool = False):
    """Run the LSTM over a (B, T, D) batch; returns ((B, T, H) hidden
    sequence, cache for backward)."""
    B, T, D = x.shape
    H = Wh.shape[0]
    Wh_eff = Wh
    if literal_candidate:
        Wh_eff = Wh.copy()
        Wh_eff[:, 3 * H:] = 0.0
    gates = np.empty((T, B, 4 * H))
    cells = np.empty((T, B, H))
    tanhc = np.empty((T, B, H))
    hidden = np.empty((T, B, H))
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    for t in range(T):
        pre = x[:, t] @ Wx + h @ Wh_eff + b
        i = _sigmoid(pre[:, :H])
        f = _sigmoid(pre[:, H:2 * H])
        o = _sigmoid(pre[:, 2 * H:3 * H])
        g = np.tanh(pre[:, 3 * H:])
        c = f * c + i * g
        h = o * np.tanh(c)
        gates[t, :, :H] = i
        gates[t, :, H:2 * H] = f
        gates[t, :, 2 * H:3 * H] = o
        gates[t, :, 3 * H:] = g
        cells[t] = c
        tanhc[t] = np.tanh(c)
        hidden[t] = h
    cache = (x, gates, cells, tanhc, hidden)
    return hidden.transpose(1, 0, 2), cache


def lstm_seq_backward_py(dH: np.ndarray, cache, Wx: np.ndarray, Wh: np.ndarray,
                         literal_candidate: bool = False):
    """Backprop through time. dH is (B, T, H) gradient w.r.t. the hidden
    sequence; returns (dx, dWx, dWh, db)."""
    x, gates, cells, tanhc, hidden = cache
    B, T, D = x.shape
    H = Wh.shape[0]
    Wh_eff = Wh
    if literal_candidate:
        Wh_eff = Wh.copy()
        Wh_eff[:, 3 * H:] = 0.0
    dx = np.empty_like(x)
    dWx = np.zeros_like(Wx)
    dWh = np.zeros_like(Wh)
    db = np.zeros_like(b_like(Wx))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        i = gates[t, :, :H]
        f = gates[t, :, H:2 * H]
        o = gates[t, :, 2 * H:3 * H]
        g = gates[t, :, 3 * H:]
        c_prev = cells[t - 1] if t > 0 else np.zeros((B, H))
        h_prev = hidden[t - 1] if t > 0 else np.zeros((B, H))
        dh = dH[:, t] + dh_next
        dc = dh * o * (1.0 - tanhc[t] ** 2) + dc_next
        dpre = np.empty((B, 4 * H))
        dpre[:, :H] = dc * g * i * (1.0 - i)
        dpre[:, H:2 * H] = dc * c_prev * f * (1.0 - f)
        dpre[:, 2 * H:3 * H] = dh * tanhc[t] * o * (1.0 - o)
        dpre[:, 3 * H:] = dc * i * (1.0 - g ** 2)
        dc_next = dc * f
        dWx += x[:, t].T @ dpre
        dWh += h_prev.T @ dpre
        db += dpre.sum(axis=0)
        dx[:, t] = dpre @ Wx.T
        dh_next = dpre @ Wh_eff.T
    if literal_candidate:
        dWh[:, 3 * H:] = 0.0
    return dx, dWx, dWh, db


def b_like(Wx: np.ndarray) -> np.ndarray:
    return np.zeros(Wx.shape[1])


def _load_compiled():
    try:
        from . import _lstm_cy  # type: ignore
        return _lstm_cy
    except ImportError:
        return None


_choice = os.environ.get("AEROADAPT_KERNEL", "auto").lower()
_compiled = None if _choice == "python" else _load_compiled()
if _choice == "cython" and _compiled is None:
    raise ImportError("AEROADAPT_KERNEL=cython but the compiled kernel is unavailable")

if _compiled is not None:
    KERNEL = "cython"

    def lstm_seq_forward(x, Wx, Wh, b, literal_candidate=False):
        return _compiled.lstm_seq_forward(
            np.ascontiguousarray(x, dtype=np.float64),
            np.ascontiguousarray(Wx, dtype=np.float64),
            np.ascontiguousarray(Wh, dtype=np.float64),
            np.ascontiguousarray(b, dtype=np.float64),
            literal_candidate)

    def lstm_seq_backward(dH, cache, Wx, Wh, literal_candidate=False):
        return _compiled.lstm_seq_backward(
            np.ascontiguousarray(dH, dtype=np.float64), cache,
            np.ascontiguousarray(Wx, dtype=np.float64),
            np.ascontiguousarray(Wh, dtype=np.float64),
            literal_candidate)
else:
    KERNEL = "python"
    lstm_seq_forward = lstm_seq_forward_py
    lstm_seq_backward = lstm_seq_backward_py
