"""From-scratch recurrent network core: LSTM/BiLSTM kernels, attention,
dense heads, losses, backpropagation through time, Adam and checkpoints."""

from .kernels import KERNEL
from .lstm import (BiLstmLayerParams, LstmParams, LstmState, bilstm_forward,
                   lstm_cell_forward)
from .attention import AttentionParams, attention_forward
from .model import (ModelConfig, ModelParams, classification_loss,
                    clip_gradients, init_model, loss_and_grads, loss_value,
                    network_forward, regression_loss)
from .optim import AdamState, adam_step
from .checkpoint import (CheckpointError, deserialize_forest,
                         deserialize_model, serialize_forest, serialize_model)

__all__ = [
    "KERNEL", "LstmParams", "LstmState", "BiLstmLayerParams",
    "lstm_cell_forward", "bilstm_forward", "AttentionParams",
    "attention_forward", "ModelConfig", "ModelParams", "init_model",
    "network_forward", "loss_and_grads", "loss_value", "regression_loss",
    "classification_loss", "clip_gradients", "AdamState", "adam_step",
    "CheckpointError", "serialize_model", "deserialize_model",
    "serialize_forest", "deserialize_forest",
]
