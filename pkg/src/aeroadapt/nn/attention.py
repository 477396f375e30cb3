"""Additive attention over a hidden sequence: learned scalar scores,
softmax weights, weighted-sum context."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lstm import glorot_uniform


@dataclass
class AttentionParams:
    """Score network: scalar per step via one tanh hidden layer of size A."""

    V: np.ndarray   # (D, A)
    b1: np.ndarray  # (A,)
    v: np.ndarray   # (A,)
    b2: np.ndarray  # (1,)

    @property
    def input_dim(self) -> int:
        return self.V.shape[0]


def init_attention_params(rng: np.random.Generator, input_dim: int,
                          attention_size: int) -> AttentionParams:
    return AttentionParams(
        V=glorot_uniform(rng, input_dim, attention_size),
        b1=np.zeros(attention_size),
        v=glorot_uniform(rng, attention_size, 1)[:, 0],
        b2=np.zeros(1),
    )


def attention_forward(hidden: np.ndarray, params: AttentionParams):
    """(B, T, D) -> context (B, D), weights (B, T), cache.

    Scores are softmax-normalized with max-subtraction for stability; the
    context is the weights' convex combination of the hidden states.
    """
    hidden = np.asarray(hidden, dtype=float)
    single = hidden.ndim == 2
    if single:
        hidden = hidden[None]
    a = np.tanh(hidden @ params.V + params.b1)        # (B, T, A)
    z = a @ params.v + params.b2[0]                   # (B, T)
    z_shift = z - z.max(axis=1, keepdims=True)
    ez = np.exp(z_shift)
    w = ez / ez.sum(axis=1, keepdims=True)            # (B, T)
    context = np.einsum("bt,btd->bd", w, hidden)
    cache = (hidden, a, w)
    if single:
        return context[0], w[0], cache
    return context, w, cache


def attention_backward(dcontext: np.ndarray, cache, params: AttentionParams):
    """Backward through both the value path and the score path.

    Returns (dhidden (B, T, D), grads dict with keys V, b1, v, b2).
    """
    hidden, a, w = cache
    # Value path.
    dhidden = w[:, :, None] * dcontext[:, None, :]
    dw = np.einsum("bd,btd->bt", dcontext, hidden)
    # Softmax jacobian.
    dz = w * (dw - np.sum(w * dw, axis=1, keepdims=True))
    # Score network.
    da = dz[:, :, None] * params.v                    # (B, T, A)
    dpre = da * (1.0 - a ** 2)
    grads = {
        "V": np.einsum("btd,bta->da", hidden, dpre),
        "b1": dpre.sum(axis=(0, 1)),
        "v": np.einsum("bta,bt->a", a, dz),
        "b2": np.array([dz.sum()]),
    }
    dhidden += dpre @ params.V.T
    return dhidden, grads
