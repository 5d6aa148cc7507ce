"""Imputation strategies and missing-data indicator augmentation.

Two fill strategies are supported on a scaled grid:

* ``zero``  -- unobserved cells become 0.
* ``ffill`` -- unobserved cells take the most recent observed value of the
  same variable; cells before the first observation (or for a variable never
  observed in the episode) take the per-variable training median.

Indicator augmentation appends, per step, one binary column per variable that
is 1 exactly where the cell was imputed (the complement of the observation
mask).  Zero-filling counts as imputation for indicator purposes.
"""

from dataclasses import dataclass

import numpy as np

from misseq.errors import ConfigError
from misseq.ingest import Grid, scale_values

ZERO = "zero"
FORWARD_FILL = "ffill"


@dataclass(frozen=True)
class ImputePolicy:
    """Fill strategy plus the per-variable medians forward fill needs."""

    kind: str
    medians: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (ZERO, FORWARD_FILL):
            raise ConfigError(f"unknown imputation kind {self.kind!r}")
        if self.kind == FORWARD_FILL and self.medians is None:
            raise ConfigError("forward fill requires per-variable medians")


@dataclass
class AugmentedSequence:
    """Model-ready input sequence: T x D' matrix plus the label vector.

    D' is D without indicators and 2D with them; indicator column d + D is 1
    exactly where mask[t, d] was 0.
    """

    episode_id: str
    inputs: np.ndarray
    labels: np.ndarray
    num_variables: int
    has_indicators: bool

    @property
    def num_steps(self):
        return self.inputs.shape[0]


def compute_medians(episodes, specs):
    """Per-variable median of all scaled observations in the training set.

    Scaling matches the episode pipeline (clamped range scaling), so imputed
    values live in [0, 1] like everything else.  A variable with no training
    observations at all falls back to 0.5, the scaled mid-range.
    """
    if not episodes:
        raise ConfigError("median estimation needs a nonempty training set")
    num_variables = episodes[0].num_variables
    per_var = [[] for _ in range(num_variables)]
    for ep in episodes:
        for var, _, value in ep.observations:
            per_var[var].append(value)
    medians = np.full(num_variables, 0.5)
    for d, raw in enumerate(per_var):
        if raw:
            scaled = scale_values(raw, np.full(len(raw), d), specs, num_variables)
            medians[d] = np.median(scaled)
    return medians


def impute(grid, policy):
    """Fill every unobserved cell of a scaled grid; the mask is preserved."""
    values = grid.values.copy()
    mask = grid.mask
    if policy.kind == ZERO:
        values[mask == 0] = 0.0
    else:
        num_steps = grid.num_steps
        steps = np.arange(num_steps)
        for d in range(grid.num_variables):
            observed = mask[:, d] > 0
            if not observed.any():
                values[:, d] = policy.medians[d]
                continue
            # index of the most recent observed step, -1 before the first
            last_obs = np.maximum.accumulate(np.where(observed, steps, -1))
            col = values[np.maximum(last_obs, 0), d]
            values[:, d] = np.where(last_obs >= 0, col, policy.medians[d])
    return Grid(grid.episode_id, values, mask.copy(), grid.labels.copy())


def augment_with_indicators(grid, use_indicators):
    """Build the model input sequence, optionally appending indicator columns."""
    if use_indicators:
        inputs = np.concatenate([grid.values, 1.0 - grid.mask], axis=1)
    else:
        inputs = grid.values.copy()
    return AugmentedSequence(
        grid.episode_id,
        inputs,
        grid.labels.copy(),
        grid.num_variables,
        bool(use_indicators),
    )


def linear_score_with_indicators(weights, indicator_weights, x, m):
    """Linear pre-activation for a zero-filled input with indicator columns.

    Returns ``sum_i w_i x_i + sum_i theta_i m_i``.  For any such scorer there
    is an indicator-free scorer with identical outputs on inputs sharing the
    same missingness pattern: substitute x_i := theta_i / w_i wherever
    m_i = 1 (coordinates with w_i = 0 cannot be substituted and are skipped
    by the equivalence check).
    """
    weights = np.asarray(weights, dtype=np.float64)
    indicator_weights = np.asarray(indicator_weights, dtype=np.float64)
    return float(weights @ np.asarray(x, dtype=np.float64)
                 + indicator_weights @ np.asarray(m, dtype=np.float64))
