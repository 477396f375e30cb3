"""The forecasting network: stacked (Bi)LSTM layers, optional attention,
dropout, dense head, losses and full backpropagation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from ..core import NormalizationSpec, PollutantKind, n_classes
from ..features import TARGET_POLLUTANTS, FeatureSchema
from .attention import AttentionParams, attention_backward, attention_forward, \
    init_attention_params
from .lstm import BiLstmLayerParams, LstmParams, bilstm_backward, \
    bilstm_forward, glorot_uniform, init_lstm_params

PROB_FLOOR = 1e-12


@dataclass
class ModelConfig:
    hidden_sizes: list[int] = field(default_factory=lambda: [64])
    attention_size: int = 32
    bidirectional: bool = True
    use_attention: bool = True
    dropout_rate: float = 0.2
    task: str = "regression"
    # Fidelity switch: candidate pre-activation without hidden recurrence.
    literal_candidate: bool = False

    def __post_init__(self):
        if self.task not in ("regression", "classification"):
            raise ValueError(f"unknown task {self.task!r}")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ValueError("dropout_rate must be in [0, 1)")
        if not self.hidden_sizes:
            raise ValueError("need at least one recurrent layer")

    def to_dict(self) -> dict:
        return {
            "hidden_sizes": list(self.hidden_sizes),
            "attention_size": self.attention_size,
            "bidirectional": self.bidirectional,
            "use_attention": self.use_attention,
            "dropout_rate": self.dropout_rate,
            "task": self.task,
            "literal_candidate": self.literal_candidate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            hidden_sizes=[int(h) for h in d["hidden_sizes"]],
            attention_size=int(d["attention_size"]),
            bidirectional=bool(d["bidirectional"]),
            use_attention=bool(d["use_attention"]),
            dropout_rate=float(d["dropout_rate"]),
            task=str(d["task"]),
            literal_candidate=bool(d.get("literal_candidate", False)),
        )


class HeadLayout:
    """Flat layout of the dense head outputs, horizon-major.

    Regression: one value per (horizon, target). Classification: one logit
    group per (horizon, target), group width = that pollutant's class count.
    """

    def __init__(self, schema: FeatureSchema, task: str):
        self.task = task
        self.n_horizons = len(schema.horizons)
        self.targets = list(schema.targets)
        self.class_counts = [n_classes(k) for k in TARGET_POLLUTANTS[:len(self.targets)]]
        if task == "regression":
            self.width = self.n_horizons * len(self.targets)
        else:
            self.width = self.n_horizons * sum(self.class_counts)
        self.group_slices: list[tuple[int, int, slice]] = []
        off = 0
        if task == "classification":
            for hi in range(self.n_horizons):
                for pi, c in enumerate(self.class_counts):
                    self.group_slices.append((hi, pi, slice(off, off + c)))
                    off += c

    def regression_index(self, hi: int, pi: int) -> int:
        return hi * len(self.targets) + pi


@dataclass
class ModelParams:
    config: ModelConfig
    schema: FeatureSchema
    layers: list[BiLstmLayerParams]
    attention: Optional[AttentionParams]
    W_out: np.ndarray
    b_out: np.ndarray
    normalizer: Optional[NormalizationSpec] = None

    @property
    def head_layout(self) -> HeadLayout:
        return HeadLayout(self.schema, self.config.task)

    def named_arrays(self) -> Iterator[tuple[str, np.ndarray]]:
        for i, layer in enumerate(self.layers):
            for name in layer.forward.field_names():
                yield f"layers.{i}.fwd.{name}", getattr(layer.forward, name)
            if layer.backward is not None:
                for name in layer.backward.field_names():
                    yield f"layers.{i}.bwd.{name}", getattr(layer.backward, name)
        if self.attention is not None:
            for name in ("V", "b1", "v", "b2"):
                yield f"attention.{name}", getattr(self.attention, name)
        yield "head.W", self.W_out
        yield "head.b", self.b_out

    def get_array(self, name: str) -> np.ndarray:
        for key, arr in self.named_arrays():
            if key == name:
                return arr
        raise KeyError(name)

    def copy(self) -> "ModelParams":
        layers = []
        for layer in self.layers:
            fwd = LstmParams(**{n: getattr(layer.forward, n).copy()
                                for n in layer.forward.field_names()})
            bwd = None
            if layer.backward is not None:
                bwd = LstmParams(**{n: getattr(layer.backward, n).copy()
                                    for n in layer.backward.field_names()})
            layers.append(BiLstmLayerParams(fwd, bwd))
        att = None
        if self.attention is not None:
            att = AttentionParams(self.attention.V.copy(), self.attention.b1.copy(),
                                  self.attention.v.copy(), self.attention.b2.copy())
        return ModelParams(self.config, self.schema, layers, att,
                           self.W_out.copy(), self.b_out.copy(), self.normalizer)


def init_model(config: ModelConfig, schema: FeatureSchema,
               rng: np.random.Generator,
               normalizer: Optional[NormalizationSpec] = None) -> ModelParams:
    layers = []
    dim = schema.n_features
    for H in config.hidden_sizes:
        fwd = init_lstm_params(rng, dim, H)
        bwd = init_lstm_params(rng, dim, H) if config.bidirectional else None
        layers.append(BiLstmLayerParams(fwd, bwd))
        dim = 2 * H if config.bidirectional else H
    attention = None
    if config.use_attention:
        attention = init_attention_params(rng, dim, config.attention_size)
    layout = HeadLayout(schema, config.task)
    W_out = glorot_uniform(rng, dim, layout.width)
    b_out = np.zeros(layout.width)
    return ModelParams(config, schema, layers, attention, W_out, b_out, normalizer)


def forward_full(x: np.ndarray, params: ModelParams, mode: str = "eval",
                 rng: Optional[np.random.Generator] = None):
    """Full forward pass on a (B, W, F) batch; returns (head outputs, cache)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        x = x[None]
    B, W, F = x.shape
    if W != params.schema.window or F != params.schema.n_features:
        raise ValueError(
            f"window shape ({W}, {F}) does not match schema "
            f"({params.schema.window}, {params.schema.n_features})")
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")

    lc = params.config.literal_candidate
    h = x
    layer_caches = []
    for layer in params.layers:
        h, cache = bilstm_forward(h, layer, literal_candidate=lc)
        layer_caches.append(cache)

    if params.attention is not None:
        context, weights, att_cache = attention_forward(h, params.attention)
    else:
        context, weights, att_cache = h[:, -1, :], None, None

    rate = params.config.dropout_rate
    if mode == "train" and rate > 0.0:
        if rng is None:
            raise ValueError("train-mode dropout needs an rng")
        mask = (rng.random(context.shape) >= rate) / (1.0 - rate)
    else:
        mask = np.ones_like(context)
    dropped = context * mask

    out = dropped @ params.W_out + params.b_out
    cache = {"layer_caches": layer_caches, "att_cache": att_cache,
             "context": context, "mask": mask, "dropped": dropped,
             "weights": weights, "top_shape": h.shape}
    return out, cache


def group_softmax(logits: np.ndarray, layout: HeadLayout) -> np.ndarray:
    """Per-(horizon, pollutant) softmax over the grouped logits."""
    probs = np.empty_like(logits)
    for _hi, _pi, sl in layout.group_slices:
        z = logits[:, sl]
        z = z - z.max(axis=1, keepdims=True)
        ez = np.exp(z)
        probs[:, sl] = ez / ez.sum(axis=1, keepdims=True)
    return probs


def network_forward(window: np.ndarray, params: ModelParams,
                    mode: str = "eval",
                    rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Public forward: regression outputs, or per-group class probabilities
    for the classification task. Accepts one window (W, F) or a batch."""
    window = np.asarray(window, dtype=float)
    single = window.ndim == 2
    out, _ = forward_full(window, params, mode, rng)
    if params.config.task == "classification":
        out = group_softmax(out, params.head_layout)
    return out[0] if single else out


def regression_loss(out: np.ndarray, targets: np.ndarray) -> float:
    """Sum of squared errors over batch and outputs, divided by batch size."""
    B = out.shape[0]
    return float(np.sum((out - targets) ** 2) / B)


def classification_loss(logits: np.ndarray, class_targets: np.ndarray,
                        layout: HeadLayout) -> float:
    """Cross-entropy summed over (horizon, pollutant) groups, averaged over
    the batch; probabilities floored before the log."""
    B = logits.shape[0]
    probs = group_softmax(logits, layout)
    total = 0.0
    for hi, pi, sl in layout.group_slices:
        p = probs[np.arange(B), sl.start + class_targets[:, hi, pi]]
        total -= np.sum(np.log(np.maximum(p, PROB_FLOOR)))
    return float(total / B)


def loss_value(out: np.ndarray, targets: np.ndarray, params: ModelParams) -> float:
    if params.config.task == "regression":
        return regression_loss(out, targets)
    return classification_loss(out, targets, params.head_layout)


def _loss_grad_wrt_out(out: np.ndarray, targets: np.ndarray,
                       params: ModelParams) -> np.ndarray:
    B = out.shape[0]
    if params.config.task == "regression":
        return 2.0 * (out - targets) / B
    layout = params.head_layout
    probs = group_softmax(out, layout)
    dout = probs.copy()
    for hi, pi, sl in layout.group_slices:
        dout[np.arange(B), sl.start + targets[:, hi, pi]] -= 1.0
    return dout / B


def backward_full(params: ModelParams, cache: dict, dout: np.ndarray
                  ) -> dict[str, np.ndarray]:
    """Exact analytic gradients for every parameter given d(loss)/d(head
    outputs)."""
    grads: dict[str, np.ndarray] = {}
    grads["head.W"] = cache["dropped"].T @ dout
    grads["head.b"] = dout.sum(axis=0)
    dctx = (dout @ params.W_out.T) * cache["mask"]

    if params.attention is not None:
        dh, att_grads = attention_backward(dctx, cache["att_cache"],
                                           params.attention)
        for name, g in att_grads.items():
            grads[f"attention.{name}"] = g
    else:
        dh = np.zeros(cache["top_shape"])
        dh[:, -1, :] = dctx

    lc = params.config.literal_candidate
    for i in range(len(params.layers) - 1, -1, -1):
        dh, grads_f, grads_b = bilstm_backward(
            dh, cache["layer_caches"][i], params.layers[i],
            literal_candidate=lc)
        for name, g in grads_f.items():
            grads[f"layers.{i}.fwd.{name}"] = g
        if grads_b is not None:
            for name, g in grads_b.items():
                grads[f"layers.{i}.bwd.{name}"] = g
    return grads


def loss_and_grads(params: ModelParams, x: np.ndarray, targets: np.ndarray,
                   mode: str = "train",
                   rng: Optional[np.random.Generator] = None
                   ) -> tuple[float, dict[str, np.ndarray]]:
    out, cache = forward_full(x, params, mode, rng)
    loss = loss_value(out, targets, params)
    dout = _loss_grad_wrt_out(out, targets, params)
    grads = backward_full(params, cache, dout)
    return loss, grads


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float = 5.0
                   ) -> dict[str, np.ndarray]:
    """Scale all gradients so the global L2 norm is at most max_norm."""
    total = np.sqrt(sum(float(np.sum(g ** 2)) for g in grads.values()))
    if total <= max_norm or total == 0.0:
        return grads
    scale = max_norm / total
    return {name: g * scale for name, g in grads.items()}
