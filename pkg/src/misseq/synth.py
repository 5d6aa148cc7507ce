"""Synthetic episode generator with controllable missing-not-at-random structure.

Episodes are built from a sparse multilabel vector y:

* per-variable latent trajectories follow a bounded random walk with a
  label-dependent drift, mapped through the logistic into the variable's
  range, so values stay plausible without modeling physiology;
* observation times are Bernoulli per hour with probability
  clip(base_rate * exp(beta * s), 0, 1), where s is a fixed random
  projection of y per variable.  With beta = 0 the missingness pattern is
  independent of the labels; raising beta makes the pattern itself
  predictive (sicker patients get measured more or less often).

Default per-variable rates mimic a pediatric ICU profile: vitals nearly
every hour, blood-draw labs mostly absent from the hourly grid, and a few
variables frequently missing from entire stays.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from misseq.errors import ConfigError
from misseq.ingest import RawEpisode, VariableSpec

# name, measurements/hour, P(missing from the whole episode), fraction of
# grid cells missing, value range (low, high)
DEFAULT_VARIABLES = (
    ("diastolic_bp", 0.5162, 0.0135, 0.1571, 0.0, 150.0),
    ("systolic_bp", 0.5158, 0.0135, 0.1569, 0.0, 250.0),
    ("capillary_refill", 1.0419, 0.0140, 0.5250, 0.0, 10.0),
    ("end_tidal_co2", 0.9318, 0.5710, 0.5727, 0.0, 100.0),
    ("fio2", 1.3004, 0.1545, 0.7873, 0.2, 1.0),
    ("glasgow_coma_scale", 1.0394, 0.0149, 0.5250, 3.0, 15.0),
    ("glucose", 1.4359, 0.1323, 0.9265, 0.0, 500.0),
    ("heart_rate", 0.2477, 0.0133, 0.0329, 0.0, 250.0),
    ("ph", 1.4580, 0.3053, 0.9384, 6.5, 8.0),
    ("respiratory_rate", 0.2523, 0.0147, 0.0465, 0.0, 100.0),
    ("pulse_oximetry", 0.1937, 0.0022, 0.0326, 0.0, 100.0),
    ("temperature", 1.0210, 0.0137, 0.5235, 30.0, 45.0),
    ("urine_output", 1.1160, 0.0353, 0.5980, 0.0, 1000.0),
)

WALK_SIGMA = 0.15
OBS_NOISE_SIGMA = 0.2
MNAR_PROJECTION_SCALE = 0.25


@dataclass
class SynthConfig:
    """Generator knobs; probabilities default to the ICU-style profile."""

    num_episodes: int = 1000
    num_variables: int = 13
    num_labels: int = 20
    min_hours: int = 12
    max_hours: int = 96
    obs_prob: np.ndarray | None = None
    extra_obs_rate: np.ndarray | None = None
    missing_entirely_prob: np.ndarray | None = None
    label_base_rates: np.ndarray | None = None
    value_coupling: float = 1.0
    beta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_episodes < 1:
            raise ConfigError("num_episodes must be >= 1")
        if self.beta < 0:
            raise ConfigError("beta must be >= 0")
        if not 1 <= self.min_hours <= self.max_hours:
            raise ConfigError("need 1 <= min_hours <= max_hours")
        defaults = _tiled_defaults(self.num_variables)
        if self.obs_prob is None:
            # hourly observation probability for episodes where the variable
            # is present at all: solve overall_missing = me + (1 - me) * (1 - p)
            frac_missing = defaults[:, 2]
            me = defaults[:, 1]
            conditional = np.clip((frac_missing - me) / (1.0 - me), 0.0, 1.0)
            self.obs_prob = 1.0 - conditional
        if self.extra_obs_rate is None:
            self.extra_obs_rate = np.maximum(0.0, defaults[:, 0] - 1.0)
        if self.missing_entirely_prob is None:
            self.missing_entirely_prob = defaults[:, 1].copy()
        if self.label_base_rates is None:
            self.label_base_rates = np.linspace(0.04, 0.20, self.num_labels)
        for name in ("obs_prob", "missing_entirely_prob", "label_base_rates"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            setattr(self, name, arr)
            if arr.min() < 0.0 or arr.max() > 1.0:
                raise ConfigError(f"{name} entries must lie in [0, 1]")
        self.extra_obs_rate = np.asarray(self.extra_obs_rate, dtype=np.float64)
        if self.obs_prob.size != self.num_variables:
            raise ConfigError("obs_prob length must equal num_variables")


def variable_specs_for(config):
    """Scaling ranges matching the generator's value model."""
    defaults = _tiled_defaults(config.num_variables)
    names = _tiled_names(config.num_variables)
    return [
        VariableSpec(d, names[d], float(defaults[d, 3]), float(defaults[d, 4]))
        for d in range(config.num_variables)
    ]


def generate(config):
    """Sample a list of episodes; deterministic given the config seed.

    Each episode gets its own child generator (spawned from the config
    seed), so episode i is unchanged by generating more or fewer episodes.
    """
    root = np.random.SeedSequence(config.seed)
    global_rng = np.random.default_rng(root.spawn(1)[0])
    d, k = config.num_variables, config.num_labels
    expected_positives = max(1.0, float(config.label_base_rates.sum()))
    # fixed random projections: one row per variable
    mnar_proj = (
        global_rng.normal(size=(d, k)) * MNAR_PROJECTION_SCALE
        / np.sqrt(expected_positives)
    )
    drift_proj = global_rng.normal(size=(d, k)) / np.sqrt(expected_positives)
    specs = variable_specs_for(config)
    low = np.array([s.low for s in specs])
    high = np.array([s.high for s in specs])

    episodes = []
    children = root.spawn(config.num_episodes + 1)[1:]
    for index, child in enumerate(children):
        rng = np.random.default_rng(child)
        labels = (rng.random(k) < config.label_base_rates).astype(np.float64)
        hours = int(rng.integers(config.min_hours, config.max_hours + 1))

        rates = np.clip(
            config.obs_prob * np.exp(config.beta * (mnar_proj @ labels)),
            0.0,
            1.0,
        )
        drift = config.value_coupling * (drift_proj @ labels) / 24.0
        steps = drift + WALK_SIGMA * rng.normal(size=(hours, d))
        z = rng.normal(size=d) + np.cumsum(steps, axis=0)

        present = rng.random(d) >= config.missing_entirely_prob
        measured = (rng.random((hours, d)) < rates) & present

        # every episode shares one sub-hour offset: the first observation of
        # a measured hour lands exactly at hour + delta, extras later in the
        # same hour, so grid bins coincide with the sampled hours.  delta is
        # dyadic, making hour + delta exactly representable and keeping the
        # bin arithmetic free of float boundary slop.
        delta = float(rng.integers(0, 1024)) / 1024.0
        hour_idx, var_idx = np.nonzero(measured)
        counts = 1 + rng.poisson(config.extra_obs_rate[var_idx])
        hour_rep = np.repeat(hour_idx, counts)
        var_rep = np.repeat(var_idx, counts)
        u = rng.random(hour_rep.size) * (1.0 - 1e-9)
        starts = np.concatenate(([0], np.cumsum(counts)[:-1])) if counts.size else []
        u[starts] = 0.0
        times = hour_rep + delta + (1.0 - delta) * u
        noise = OBS_NOISE_SIGMA * rng.normal(size=hour_rep.size)
        values = low[var_rep] + (high[var_rep] - low[var_rep]) * _logistic(
            z[hour_rep, var_rep] + noise
        )
        observations = list(
            zip(var_rep.tolist(), times.tolist(), values.tolist())
        )
        if not observations:
            # keep the ingest invariant: every episode has at least one
            # observation (pin the most frequent variable at hour zero)
            var = int(np.argmax(config.obs_prob))
            value = low[var] + (high[var] - low[var]) * _logistic(z[0, var])
            observations.append((var, 0.0, float(value)))
        episodes.append(
            RawEpisode(f"ep{index:06d}", observations, labels, d)
        )
    return episodes


def summarize_missingness(episodes, bin_width=1.0):
    """Per-variable sampling statistics computed on the discretized grids.

    Returns one dict per variable with: measurements per hour averaged over
    episodes where the variable appears, the fraction of episodes where it
    never appears, and the fraction of grid cells missing across all
    episodes.
    """
    from misseq.ingest import discretize

    if not episodes:
        raise ConfigError("summary needs a nonempty episode list")
    d = episodes[0].num_variables
    rate_sum = np.zeros(d)
    rate_count = np.zeros(d)
    missing_entirely = np.zeros(d)
    missing_cells = np.zeros(d)
    total_cells = np.zeros(d)
    for episode in episodes:
        grid = discretize(episode, bin_width)
        counts = np.zeros(d)
        for var, _, _ in episode.observations:
            counts[var] += 1
        seen = counts > 0
        rate_sum[seen] += counts[seen] / grid.num_steps
        rate_count[seen] += 1
        missing_entirely[~seen] += 1
        missing_cells += grid.num_steps - grid.mask.sum(axis=0)
        total_cells += grid.num_steps
    names = _tiled_names(d)
    summary = []
    for var in range(d):
        per_hour = rate_sum[var] / rate_count[var] if rate_count[var] else 0.0
        summary.append(
            {
                "variable": names[var],
                "measurements_per_hour": float(per_hour),
                "missing_entirely": float(missing_entirely[var] / len(episodes)),
                "fraction_missing": float(missing_cells[var] / total_cells[var]),
            }
        )
    return summary


def write_episodes(path, episodes):
    """Write episodes in the JSONL format the ingest parser reads."""
    with open(path, "w") as fh:
        for episode in episodes:
            record = {
                "id": episode.episode_id,
                "obs": [[v, t, x] for v, t, x in episode.observations],
                "labels": [int(y) for y in episode.labels],
            }
            fh.write(json.dumps(record) + "\n")


def write_variable_specs(path, specs):
    """Write the variable-spec table (CSV columns: index, name, low, high)."""
    with open(path, "w") as fh:
        fh.write("index,name,low,high\n")
        for spec in specs:
            fh.write(f"{spec.index},{spec.name},{spec.low},{spec.high}\n")


def _tiled_defaults(num_variables):
    base = np.array([row[1:] for row in DEFAULT_VARIABLES])
    reps = -(-num_variables // base.shape[0])
    return np.tile(base, (reps, 1))[:num_variables]


def _tiled_names(num_variables):
    base = [row[0] for row in DEFAULT_VARIABLES]
    names = []
    for i in range(num_variables):
        suffix = "" if i < len(base) else f"_{i // len(base)}"
        names.append(base[i % len(base)] + suffix)
    return names


def _logistic(x):
    return expit(np.asarray(x, dtype=np.float64))
