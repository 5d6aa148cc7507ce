"""Numerical core: LSTM, MLP, and linear classifiers with exact gradients."""

from misseq.nn.checkpoint import load_checkpoint, save_checkpoint
from misseq.nn.feedforward import LinearModel, MlpModel
from misseq.nn.gradcheck import max_relative_error, numeric_gradients
from misseq.nn.losses import log_loss, sequence_loss, step_losses
from misseq.nn.lstm import (
    LstmModel,
    lstm_backward,
    lstm_cell_step,
    lstm_forward,
    lstm_objective,
    make_dropout_masks,
)
from misseq.nn.train import TrainConfig, TrainResult, train

__all__ = [
    "LinearModel",
    "LstmModel",
    "MlpModel",
    "TrainConfig",
    "TrainResult",
    "load_checkpoint",
    "log_loss",
    "lstm_backward",
    "lstm_cell_step",
    "lstm_forward",
    "lstm_objective",
    "make_dropout_masks",
    "max_relative_error",
    "numeric_gradients",
    "save_checkpoint",
    "sequence_loss",
    "step_losses",
    "train",
]
