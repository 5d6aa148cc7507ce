"""Momentum SGD training loop with validation-based checkpoint selection.

The update is v <- mu * v - eta * grad; w <- w + v, with the squared-norm
weight penalty folded into the gradients (weight matrices only, never
biases) and the full gradient clipped at a global norm of 5.0 to keep long
unrolled sequences stable.  After the last epoch the model is rolled back
to the parameters of the epoch with the lowest validation loss.  Given the
same seed, two runs produce bitwise-identical trajectories.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from misseq.errors import ConfigError, NumericError

GRAD_CLIP_NORM = 5.0


@dataclass
class TrainConfig:
    """Hyperparameters shared by all three model families."""

    epochs: int = 100
    learning_rate: float = 0.1
    momentum: float = 0.9
    dropout: float = 0.5
    weight_decay: float = 1e-6
    batch_size: int = 16
    seed: int = 0
    alpha: float = 0.5

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout probability must lie in [0, 1)")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must lie in [0, 1]")
        if self.batch_size < 1:
            raise ConfigError("batch size must be >= 1")


@dataclass
class TrainResult:
    """Per-epoch losses plus which epoch's parameters were kept."""

    history: list = field(default_factory=list)  # (epoch, train_loss, val_loss)
    best_epoch: int = 0
    best_val_loss: float = math.inf


def train(model, train_data, val_data, cfg):
    """Run momentum SGD and keep the best-validation-epoch parameters.

    ``model`` supplies ``params()``, ``minibatches``, ``loss_and_grads``,
    and ``mean_loss``; the three families share this protocol.  Epoch 0 in
    the history records the untrained losses before any update.
    """
    rng = np.random.default_rng(cfg.seed)
    params = model.params()
    velocity = {name: np.zeros_like(p) for name, p in params.items()}

    result = TrainResult()
    result.best_val_loss = _eval_epoch(model, train_data, val_data, 0, result)
    result.best_epoch = 0
    best_params = {name: p.copy() for name, p in params.items()}

    for epoch in range(1, cfg.epochs + 1):
        for batch in model.minibatches(train_data, cfg.batch_size, rng):
            loss, grads = model.loss_and_grads(
                batch, cfg.dropout, rng, cfg.weight_decay
            )
            if not math.isfinite(loss):
                raise NumericError(
                    f"non-finite training loss at epoch {epoch}; "
                    "try a smaller learning rate"
                )
            _clip_global_norm(grads)
            for name, p in params.items():
                v = velocity[name]
                v *= cfg.momentum
                v -= cfg.learning_rate * grads[name]
                p += v
        val_loss = _eval_epoch(model, train_data, val_data, epoch, result)
        if val_loss < result.best_val_loss:
            result.best_val_loss = val_loss
            result.best_epoch = epoch
            for name, p in params.items():
                best_params[name][...] = p

    for name, p in params.items():
        p[...] = best_params[name]
    return result


def _eval_epoch(model, train_data, val_data, epoch, result):
    train_loss = model.mean_loss(train_data)
    val_loss = model.mean_loss(val_data)
    if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
        raise NumericError(
            f"non-finite loss at epoch {epoch}; try a smaller learning rate"
        )
    result.history.append((epoch, train_loss, val_loss))
    return val_loss


def _clip_global_norm(grads, max_norm=GRAD_CLIP_NORM):
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
