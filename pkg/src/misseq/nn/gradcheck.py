"""Finite-difference verification of the analytic gradients.

The numeric side perturbs each parameter entry by +/- step and differences
the forward objective, which exercises none of the backward code; agreement
between the two is the correctness check for the reverse-mode
implementation.
"""

import numpy as np

REL_ERR_FLOOR = 1e-6


def numeric_gradients(objective, params, step=1e-5):
    """Central-difference gradient of ``objective()`` for every entry.

    ``objective`` is a zero-argument callable that reads the (in-place
    perturbed) parameter arrays.
    """
    grads = {}
    for name, p in params.items():
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + step
            upper = objective()
            flat[idx] = original - step
            lower = objective()
            flat[idx] = original
            gflat[idx] = (upper - lower) / (2.0 * step)
        grads[name] = g
    return grads


def max_relative_error(analytic, numeric):
    """Worst elementwise relative disagreement across all parameter tensors.

    The denominator is floored so exact zeros on both sides compare as
    equal instead of dividing by zero.
    """
    worst = 0.0
    for name, a in analytic.items():
        n = numeric[name]
        denom = np.maximum(np.abs(a) + np.abs(n), REL_ERR_FLOOR)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def relative_errors_by_param(analytic, numeric):
    """Per-tensor maximum relative error, for diagnostic printing."""
    out = {}
    for name, a in analytic.items():
        n = numeric[name]
        denom = np.maximum(np.abs(a) + np.abs(n), REL_ERR_FLOOR)
        out[name] = float(np.max(np.abs(a - n) / denom)) if a.size else 0.0
    return out
