"""Fixed-width feature construction for the non-recurrent baselines.

Two representations are built from a discretized episode:

* raw windowed -- three 12-step slices (beginning, middle, end of the stay)
  of the imputed value sequence and, when present, the indicator sequence,
  concatenated step by step.  With 13 variables and indicators this is
  2 x 3 x 12 x 13 = 936 features.
* hand engineered -- per window and variable, 12 summary statistics of the
  observed values and 8 statistics of the missingness pattern, over four
  windows (whole stay, first 12, middle, last 12): 4 x 12 x 13 = 624
  measurement and 4 x 8 x 13 = 416 missingness features.
"""

from dataclasses import dataclass

import numpy as np

from misseq.errors import ConfigError

WINDOW_FULL = "full"
WINDOW_FIRST = "first12"
WINDOW_MIDDLE = "middle12"
WINDOW_LAST = "last12"

RAW3 = "raw3"
HE4 = "he4"

WINDOW_STEPS = 12

MEASUREMENT_FEATURE_NAMES = (
    "first",
    "last",
    "diff",
    "max",
    "min",
    "mean",
    "std",
    "median",
    "p25",
    "p75",
    "slope",
    "intercept",
)

MISSINGNESS_FEATURE_NAMES = (
    "measured_any",
    "missing_mean",
    "missing_std",
    "switch_rate",
    "switch_to_missing",
    "switch_to_measured",
    "first_measured_frac",
    "last_measured_frac",
)


@dataclass(frozen=True)
class Window:
    start: int
    end: int
    tag: str

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ConfigError(f"bad window [{self.start}, {self.end})")


@dataclass(frozen=True)
class FeatureVector:
    """Flat feature values plus the matching per-entry layout names."""

    values: np.ndarray
    names: tuple

    def __post_init__(self):
        if self.values.shape != (len(self.names),):
            raise ConfigError("feature vector length does not match its layout")


def make_windows(num_steps, mode):
    """Build the time windows for a sequence of ``num_steps`` steps.

    The first and last windows cover up to 12 steps from each end.  The
    middle window is the interval between them when the sequence is longer
    than 24 steps, otherwise the centered 12-step window clamped to the
    sequence; for short sequences the three windows may overlap.  ``he4``
    mode prepends a window over the whole sequence.
    """
    if num_steps < 1:
        raise ConfigError("windows need at least one step")
    t = num_steps
    first = Window(0, min(WINDOW_STEPS, t), WINDOW_FIRST)
    last = Window(max(0, t - WINDOW_STEPS), t, WINDOW_LAST)
    if t > 2 * WINDOW_STEPS:
        middle = Window(WINDOW_STEPS, t - WINDOW_STEPS, WINDOW_MIDDLE)
    else:
        start = max(0, (t - WINDOW_STEPS) // 2)
        middle = Window(start, min(t, start + WINDOW_STEPS), WINDOW_MIDDLE)
    if mode == RAW3:
        return [first, middle, last]
    if mode == HE4:
        return [Window(0, t, WINDOW_FULL), first, middle, last]
    raise ConfigError(f"unknown window mode {mode!r}")


def raw_concat_features(seq, windows):
    """Concatenate windowed slices of an input sequence into a flat vector.

    Each window is expanded to exactly 12 steps by repeating its last
    available step, then flattened step by step: the value columns first,
    followed by the indicator columns when the sequence carries them.
    """
    d = seq.num_variables
    pieces = []
    names = []
    for window in windows:
        block = _pad_window(seq.inputs[window.start:window.end], WINDOW_STEPS)
        pieces.append(block[:, :d].ravel())
        names.extend(
            f"{window.tag}/t{step:02d}/x{var}"
            for step in range(WINDOW_STEPS)
            for var in range(d)
        )
        if seq.has_indicators:
            pieces.append(block[:, d:].ravel())
            names.extend(
                f"{window.tag}/t{step:02d}/m{var}"
                for step in range(WINDOW_STEPS)
                for var in range(d)
            )
    return FeatureVector(np.concatenate(pieces), tuple(names))


def measurement_features(values, mask):
    """12 summary statistics of the observed values, per variable.

    Statistics are computed over observed cells only (population standard
    deviation; percentiles by linear interpolation; slope and intercept from
    a least-squares line against the within-window step index).  A variable
    with no observations in the window yields all zeros; a single
    observation yields slope 0 and intercept equal to that value.
    """
    num_steps, d = values.shape
    out = np.zeros((d, len(MEASUREMENT_FEATURE_NAMES)))
    steps = np.arange(num_steps, dtype=np.float64)
    for var in range(d):
        observed = mask[:, var] > 0
        if not observed.any():
            continue
        v = values[observed, var]
        s = steps[observed]
        slope, intercept = _least_squares_line(s, v)
        p25, median, p75 = np.percentile(v, [25, 50, 75])
        out[var] = (
            v[0],
            v[-1],
            v[-1] - v[0],
            v.max(),
            v.min(),
            v.mean(),
            v.std(),
            median,
            p25,
            p75,
            slope,
            intercept,
        )
    return out


def missingness_features(indicators):
    """8 statistics of one variable's indicator sequence (missing = 1).

    Features: whether the variable was measured at all; mean and population
    standard deviation of the indicator sequence (the latter peaks when a
    variable is missing exactly half the time); the rate of switches between
    measured and missing across adjacent steps, total and split by
    direction; and the positions of the first and last measurements divided
    by the window length (1.0 when never measured).
    """
    m = np.asarray(indicators, dtype=np.float64)
    length = m.size
    if length < 1:
        raise ConfigError("missingness features need a nonempty window")
    measured = m == 0
    measured_any = 1.0 if measured.any() else 0.0
    if length > 1:
        diff = np.diff(m)
        switch_rate = np.count_nonzero(diff) / (length - 1)
        to_missing = np.count_nonzero(diff > 0) / (length - 1)
        to_measured = np.count_nonzero(diff < 0) / (length - 1)
    else:
        switch_rate = to_missing = to_measured = 0.0
    if measured.any():
        measured_steps = np.flatnonzero(measured)
        first_frac = measured_steps[0] / length
        last_frac = measured_steps[-1] / length
    else:
        first_frac = last_frac = 1.0
    return np.array(
        [
            measured_any,
            m.mean(),
            m.std(),
            switch_rate,
            to_missing,
            to_measured,
            first_frac,
            last_frac,
        ]
    )


def he_feature_vector(grid, include_measurement=True, include_missingness=True):
    """Hand-engineered features over the four standard windows.

    Layout order is window, then variable, then the measurement block
    followed by the missingness block (when both are enabled).
    """
    if not (include_measurement or include_missingness):
        raise ConfigError("select at least one hand-engineered feature block")
    windows = make_windows(grid.num_steps, HE4)
    d = grid.num_variables
    pieces = []
    names = []
    for window in windows:
        values = grid.values[window.start:window.end]
        mask = grid.mask[window.start:window.end]
        if include_measurement:
            stats = measurement_features(values, mask)
        for var in range(d):
            if include_measurement:
                pieces.append(stats[var])
                names.extend(
                    f"{window.tag}/x{var}/{f}" for f in MEASUREMENT_FEATURE_NAMES
                )
            if include_missingness:
                pieces.append(missingness_features(1.0 - mask[:, var]))
                names.extend(
                    f"{window.tag}/m{var}/{f}" for f in MISSINGNESS_FEATURE_NAMES
                )
    return FeatureVector(np.concatenate(pieces), tuple(names))


def _pad_window(block, target_steps):
    if block.shape[0] >= target_steps:
        return block[:target_steps]
    pad = np.repeat(block[-1:], target_steps - block.shape[0], axis=0)
    return np.concatenate([block, pad], axis=0)


def _least_squares_line(steps, values):
    if values.size < 2:
        return 0.0, float(values.mean())
    s_mean = steps.mean()
    v_mean = values.mean()
    denom = np.sum((steps - s_mean) ** 2)
    if denom == 0.0:
        return 0.0, float(v_mean)
    slope = float(np.sum((steps - s_mean) * (values - v_mean)) / denom)
    return slope, float(v_mean - slope * s_mean)
