"""Versioned checkpoint container: magic string, JSON header, little-endian
float64 payload in header-declared order. Shared by network and forest
models."""

from __future__ import annotations

import json
import struct
from typing import Optional

import numpy as np

from ..baselines import Forest, ForestConfig, TreeNode
from ..core import NormalizationSpec
from ..features import FeatureSchema
from .attention import AttentionParams
from .lstm import BiLstmLayerParams, LstmParams
from .model import ModelConfig, ModelParams

MAGIC = b"AEROADAPT1"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _pack(header: dict, payload: np.ndarray) -> bytes:
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    body = np.ascontiguousarray(payload, dtype="<f8").tobytes()
    return MAGIC + struct.pack("<Q", len(raw)) + raw + body


def _unpack(blob: bytes) -> tuple[dict, np.ndarray]:
    if len(blob) < len(MAGIC) + 8 or not blob.startswith(MAGIC):
        raise CheckpointError("not an AEROADAPT1 checkpoint")
    off = len(MAGIC)
    (header_len,) = struct.unpack_from("<Q", blob, off)
    off += 8
    if len(blob) < off + header_len:
        raise CheckpointError("truncated checkpoint: header incomplete")
    try:
        header = json.loads(blob[off:off + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from exc
    if header.get("version") != VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {header.get('version')!r}")
    body = blob[off + header_len:]
    if len(body) % 8 != 0:
        raise CheckpointError("truncated checkpoint: payload not a whole "
                              "number of float64 values")
    return header, np.frombuffer(body, dtype="<f8")


def serialize_model(params: ModelParams) -> bytes:
    arrays = list(params.named_arrays())
    header = {
        "version": VERSION,
        "kind": "network",
        "model_config": params.config.to_dict(),
        "schema": params.schema.to_dict(),
        "normalizer": params.normalizer.to_dict() if params.normalizer else None,
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
    }
    payload = np.concatenate([a.ravel() for _, a in arrays])
    return _pack(header, payload)


def deserialize_model(blob: bytes) -> ModelParams:
    header, flat = _unpack(blob)
    if header.get("kind") != "network":
        raise CheckpointError(f"expected a network checkpoint, got "
                              f"{header.get('kind')!r}")
    config = ModelConfig.from_dict(header["model_config"])
    schema = FeatureSchema.from_dict(header["schema"])
    normalizer = None
    if header.get("normalizer"):
        normalizer = NormalizationSpec.from_dict(header["normalizer"])

    expected = sum(int(np.prod(e["shape"])) for e in header["arrays"])
    if len(flat) != expected:
        raise CheckpointError(
            f"payload length {len(flat)} does not match declared shapes "
            f"({expected} values)")
    by_name: dict[str, np.ndarray] = {}
    off = 0
    for entry in header["arrays"]:
        size = int(np.prod(entry["shape"]))
        by_name[entry["name"]] = flat[off:off + size].reshape(entry["shape"]).copy()
        off += size

    def lstm_from(prefix: str) -> LstmParams:
        try:
            return LstmParams(**{n: by_name[f"{prefix}.{n}"]
                                 for n in LstmParams.__dataclass_fields__})
        except KeyError as exc:
            raise CheckpointError(f"missing array {exc} in checkpoint") from exc

    layers = []
    for i in range(len(config.hidden_sizes)):
        fwd = lstm_from(f"layers.{i}.fwd")
        bwd = lstm_from(f"layers.{i}.bwd") if config.bidirectional else None
        layers.append(BiLstmLayerParams(fwd, bwd))
    attention = None
    if config.use_attention:
        try:
            attention = AttentionParams(by_name["attention.V"], by_name["attention.b1"],
                                        by_name["attention.v"], by_name["attention.b2"])
        except KeyError as exc:
            raise CheckpointError(f"missing array {exc} in checkpoint") from exc
    try:
        params = ModelParams(config, schema, layers, attention,
                             by_name["head.W"], by_name["head.b"], normalizer)
    except KeyError as exc:
        raise CheckpointError(f"missing array {exc} in checkpoint") from exc

    # Shape sanity: run the declared shapes against the schema dimensions.
    if params.layers[0].forward.input_dim != schema.n_features:
        raise CheckpointError("layer-0 input width does not match the schema")
    return params


def _serialize_tree(node: TreeNode, out: list[float], leaf_width: int) -> None:
    if node.is_leaf:
        out.append(1.0)
        values = list(np.asarray(node.value, dtype=float).ravel())
        if len(values) != leaf_width:
            raise CheckpointError("leaf width mismatch while serializing forest")
        out.extend(values)
    else:
        out.extend([0.0, float(node.feature), float(node.threshold),
                    float(node.gain)])
        _serialize_tree(node.left, out, leaf_width)
        _serialize_tree(node.right, out, leaf_width)


def _deserialize_tree(flat: np.ndarray, pos: int, leaf_width: int
                      ) -> tuple[TreeNode, int]:
    if pos >= len(flat):
        raise CheckpointError("truncated forest payload")
    tag = flat[pos]
    if tag == 1.0:
        if pos + 1 + leaf_width > len(flat):
            raise CheckpointError("truncated forest payload")
        value = flat[pos + 1:pos + 1 + leaf_width].copy()
        return TreeNode(value=value), pos + 1 + leaf_width
    if tag != 0.0:
        raise CheckpointError(f"corrupt forest payload: bad node tag {tag}")
    feature = int(flat[pos + 1])
    threshold = float(flat[pos + 2])
    gain = float(flat[pos + 3])
    left, pos = _deserialize_tree(flat, pos + 4, leaf_width)
    right, pos = _deserialize_tree(flat, pos, leaf_width)
    return TreeNode(feature=feature, threshold=threshold, gain=gain,
                    left=left, right=right), pos


def serialize_forest(forest: Forest,
                     schema: Optional[FeatureSchema] = None,
                     normalizer: Optional[NormalizationSpec] = None) -> bytes:
    leaf_width = 1 if forest.task == "regression" else forest.n_classes
    payload: list[float] = []
    lengths = []
    for tree in forest.trees:
        before = len(payload)
        _serialize_tree(tree, payload, leaf_width)
        lengths.append(len(payload) - before)
    header = {
        "version": VERSION,
        "kind": "forest",
        "task": forest.task,
        "n_features": forest.n_features,
        "n_classes": forest.n_classes,
        "leaf_width": leaf_width,
        "tree_lengths": lengths,
        "forest_config": {
            "n_trees": forest.config.n_trees,
            "max_depth": forest.config.max_depth,
            "min_samples_leaf": forest.config.min_samples_leaf,
            "features_per_split": forest.config.features_per_split,
            "bootstrap": forest.config.bootstrap,
            "seed": forest.config.seed,
        },
        "schema": schema.to_dict() if schema else None,
        "normalizer": normalizer.to_dict() if normalizer else None,
    }
    return _pack(header, np.array(payload))


def deserialize_forest(blob: bytes
                       ) -> tuple[Forest, Optional[FeatureSchema],
                                  Optional[NormalizationSpec]]:
    header, flat = _unpack(blob)
    if header.get("kind") != "forest":
        raise CheckpointError(f"expected a forest checkpoint, got "
                              f"{header.get('kind')!r}")
    leaf_width = int(header["leaf_width"])
    trees = []
    pos = 0
    for length in header["tree_lengths"]:
        tree, end = _deserialize_tree(flat, pos, leaf_width)
        if end != pos + length:
            raise CheckpointError("forest tree length mismatch")
        pos = end
        trees.append(tree)
    if pos != len(flat):
        raise CheckpointError("trailing data in forest payload")
    fc = header["forest_config"]
    config = ForestConfig(
        n_trees=int(fc["n_trees"]), max_depth=int(fc["max_depth"]),
        min_samples_leaf=int(fc["min_samples_leaf"]),
        features_per_split=fc["features_per_split"],
        bootstrap=bool(fc["bootstrap"]), seed=int(fc["seed"]))
    forest = Forest(trees, header["task"], int(header["n_features"]),
                    int(header["n_classes"]), config)
    schema = FeatureSchema.from_dict(header["schema"]) if header.get("schema") else None
    normalizer = (NormalizationSpec.from_dict(header["normalizer"])
                  if header.get("normalizer") else None)
    return forest, schema, normalizer
