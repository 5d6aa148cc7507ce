"""Classification losses: per-step log loss and its replicated-target form."""

import numpy as np

EPS = 1e-12


def log_loss(predictions, targets):
    """Mean binary cross-entropy across labels (and any leading axes).

    Predictions are clipped to [EPS, 1 - EPS] inside the loss only, so a
    saturated output cannot produce an infinity; reported scores elsewhere
    use the raw predictions.
    """
    p = np.clip(predictions, EPS, 1.0 - EPS)
    t = np.asarray(targets, dtype=np.float64)
    return float(np.mean(-(t * np.log(p) + (1.0 - t) * np.log1p(-p))))


def step_losses(step_predictions, targets):
    """Per-step mean log loss for stacked predictions.

    ``step_predictions`` has shape (..., T, K) and ``targets`` (..., K);
    returns an array of shape (..., T).
    """
    p = np.clip(step_predictions, EPS, 1.0 - EPS)
    t = np.asarray(targets, dtype=np.float64)[..., None, :]
    return np.mean(-(t * np.log(p) + (1.0 - t) * np.log1p(-p)), axis=-1)


def sequence_loss(step_predictions, targets, alpha):
    """Convex mix of the mean per-step loss and the final-step loss.

    With targets replicated at every step, ``alpha`` weights the average of
    the per-step losses against the loss at the last step:
    alpha * mean_t loss_t + (1 - alpha) * loss_T.  Batched inputs
    (B, T, K) return the mean over the batch.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    per_step = step_losses(step_predictions, targets)
    per_seq = alpha * per_step.mean(axis=-1) + (1.0 - alpha) * per_step[..., -1]
    return float(np.mean(per_seq))
