"""Episode ingestion: parse irregular observation streams and discretize them
onto a fixed-width (hourly) grid with an observation mask.

Episodes arrive as line-delimited JSON, one record per line::

    {"id": "ep0001", "obs": [[0, 0.25, 118.0], [2, 1.5, 7.31]], "labels": [0, 1, 0]}

Each ``obs`` entry is a ``[variable_index, time_in_hours, value]`` triple.
Times are measured from an arbitrary origin; the grid is anchored at the
first recorded observation, so adding a constant to every timestamp leaves
the output unchanged.
"""

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from misseq.errors import ConfigError, ParseError, SchemaError


@dataclass(frozen=True)
class VariableSpec:
    """Scaling range for one observed variable (low < high)."""

    index: int
    name: str
    low: float
    high: float

    def __post_init__(self):
        if not self.low < self.high:
            raise ConfigError(
                f"variable {self.name!r}: range_low must be < range_high "
                f"({self.low} >= {self.high})"
            )


@dataclass
class RawEpisode:
    """One stay: irregular timestamped observations plus a multilabel target.

    ``observations`` holds ``(variable_index, time_hours, value)`` triples.
    """

    episode_id: str
    observations: list
    labels: np.ndarray
    num_variables: int

    def validate(self):
        if len(self.observations) == 0:
            raise SchemaError(f"episode {self.episode_id!r} has no observations")
        for var, time, value in self.observations:
            if not (0 <= var < self.num_variables):
                raise SchemaError(
                    f"episode {self.episode_id!r}: variable_index {var} out of "
                    f"range [0, {self.num_variables})"
                )
            if not math.isfinite(time) or time < 0:
                raise SchemaError(
                    f"episode {self.episode_id!r}: negative timestamp or "
                    f"non-finite time {time!r}"
                )
            if not math.isfinite(value):
                raise SchemaError(
                    f"episode {self.episode_id!r}: non-finite value {value!r}"
                )
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or not np.isin(labels, (0, 1)).all():
            raise SchemaError(
                f"episode {self.episode_id!r}: labels must be a flat 0/1 vector"
            )


@dataclass
class Grid:
    """Discretized episode: a T x D value matrix plus a T x D observation mask.

    ``mask[t, d] == 1`` iff at least one raw observation fell into bin ``t``
    for variable ``d``.  Unobserved cells hold the sentinel 0 until an
    imputation pass fills them; nothing should read those cells except
    through the mask.
    """

    episode_id: str
    values: np.ndarray
    mask: np.ndarray
    labels: np.ndarray

    @property
    def num_steps(self):
        return self.values.shape[0]

    @property
    def num_variables(self):
        return self.values.shape[1]


def parse_episodes(lines, num_variables):
    """Parse line-delimited JSON episode records.

    Parameters
    ----------
    lines : iterable of str
        One JSON object per line; blank lines are skipped.
    num_variables : int
        Number of variables D; any record referencing an index >= D fails.

    Returns
    -------
    list of RawEpisode, in input order.
    """
    episodes = []
    num_labels = None
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {lineno}: malformed record: {exc}") from exc
        try:
            episode_id = str(record["id"])
            obs = [(int(v), float(t), float(x)) for v, t, x in record["obs"]]
            labels = np.asarray(record["labels"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"line {lineno}: bad record structure: {exc}") from exc
        episode = RawEpisode(episode_id, obs, labels, num_variables)
        try:
            episode.validate()
        except SchemaError as exc:
            raise SchemaError(f"line {lineno}: {exc}") from exc
        if num_labels is None:
            num_labels = labels.size
        elif labels.size != num_labels:
            raise SchemaError(
                f"line {lineno}: label vector length {labels.size} differs "
                f"from earlier records ({num_labels})"
            )
        episodes.append(episode)
    return episodes


def load_episodes(path, num_variables):
    """Read an episode JSONL file from disk."""
    with open(path) as fh:
        return parse_episodes(fh, num_variables)


def load_variable_specs(path):
    """Read the variable-spec table (CSV columns: index, name, low, high)."""
    specs = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                specs.append(
                    VariableSpec(
                        index=int(row["index"]),
                        name=row["name"],
                        low=float(row["low"]),
                        high=float(row["high"]),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"bad variable spec row {row!r}: {exc}") from exc
    return specs


def discretize(episode, bin_width=1.0):
    """Map an episode onto fixed-width time bins, averaging within each bin.

    The earliest observation defines bin 0; bin t covers
    [t * bin_width, (t + 1) * bin_width), closed on the left.  Multiple
    measurements of the same variable in one bin are averaged.  The grid
    ends at the last occupied bin.
    """
    if bin_width <= 0:
        raise ConfigError(f"bin_width must be positive, got {bin_width}")
    episode.validate()
    d = episode.num_variables
    times = np.array([t for _, t, _ in episode.observations])
    origin = times.min()
    bins = np.floor((times - origin) / bin_width).astype(int)
    num_steps = int(bins.max()) + 1

    totals = np.zeros((num_steps, d))
    counts = np.zeros((num_steps, d))
    for (var, _, value), b in zip(episode.observations, bins):
        totals[b, var] += value
        counts[b, var] += 1.0

    mask = (counts > 0).astype(np.float64)
    values = np.divide(totals, counts, out=np.zeros_like(totals), where=counts > 0)
    return Grid(episode.episode_id, values, mask, np.asarray(episode.labels, dtype=np.float64))


def scale_grid(grid, specs):
    """Rescale every observed cell to [0, 1] using per-variable ranges.

    Values are mapped by (v - low) / (high - low) and clamped to [0, 1];
    out-of-range clinical outliers are common, so clamping (rather than
    rejection) keeps them.  Unobserved cells are untouched.
    """
    low, high = _range_arrays(specs, grid.num_variables)
    scaled = (grid.values - low) / (high - low)
    np.clip(scaled, 0.0, 1.0, out=scaled)
    values = np.where(grid.mask > 0, scaled, grid.values)
    return Grid(grid.episode_id, values, grid.mask.copy(), grid.labels.copy())


def scale_values(values, variable_indices, specs, num_variables):
    """Scale a flat array of raw values for the given variable indices."""
    low, high = _range_arrays(specs, num_variables)
    idx = np.asarray(variable_indices, dtype=int)
    scaled = (np.asarray(values, dtype=np.float64) - low[idx]) / (high[idx] - low[idx])
    return np.clip(scaled, 0.0, 1.0)


def truncate_grid(grid, max_steps):
    """Optionally cut a grid to its first ``max_steps`` rows."""
    if max_steps is None or grid.num_steps <= max_steps:
        return grid
    return Grid(
        grid.episode_id,
        grid.values[:max_steps].copy(),
        grid.mask[:max_steps].copy(),
        grid.labels.copy(),
    )


def _range_arrays(specs, num_variables):
    by_index = {s.index: s for s in specs}
    low = np.empty(num_variables)
    high = np.empty(num_variables)
    for d in range(num_variables):
        spec = by_index.get(d)
        if spec is None:
            raise ConfigError(f"no variable spec for index {d}")
        low[d] = spec.low
        high[d] = spec.high
    return low, high
