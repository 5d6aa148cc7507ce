import numpy as np
import numpy.testing as npt
import pytest

from misseq.errors import ConfigError, ParseError, SchemaError
from misseq.ingest import (
    Grid,
    RawEpisode,
    VariableSpec,
    discretize,
    parse_episodes,
    scale_grid,
    truncate_grid,
)

SPECS = [
    VariableSpec(0, "a", 0.0, 100.0),
    VariableSpec(1, "b", -10.0, 10.0),
]


def _episode(observations, labels=(1.0, 0.0, 1.0), num_variables=2):
    return RawEpisode("ep", list(observations), np.array(labels), num_variables)


class TestParse:
    def test_roundtrip_record(self):
        lines = ['{"id": "e1", "obs": [[0, 0.5, 3.0], [1, 1.5, 4.0]], "labels": [1, 1, 1]}']
        episodes = parse_episodes(lines, num_variables=2)
        assert len(episodes) == 1
        ep = episodes[0]
        assert ep.episode_id == "e1"
        assert len(ep.observations) == 2
        assert ep.labels.sum() == 3

    def test_order_preserved(self):
        lines = [
            '{"id": "x", "obs": [[0, 0.0, 1.0]], "labels": [0]}',
            '{"id": "y", "obs": [[0, 0.0, 2.0]], "labels": [1]}',
        ]
        episodes = parse_episodes(lines, num_variables=1)
        assert [ep.episode_id for ep in episodes] == ["x", "y"]

    def test_malformed_line_reports_line_number(self):
        lines = ['{"id": "ok", "obs": [[0, 0.0, 1.0]], "labels": [0]}', "{nope"]
        with pytest.raises(ParseError, match="line 2"):
            parse_episodes(lines, num_variables=1)

    def test_variable_index_out_of_range(self):
        lines = ['{"id": "e", "obs": [[5, 0.0, 1.0]], "labels": [0]}']
        with pytest.raises(SchemaError, match="out of range"):
            parse_episodes(lines, num_variables=2)

    def test_empty_observations_rejected(self):
        lines = ['{"id": "e", "obs": [], "labels": [0]}']
        with pytest.raises(SchemaError, match="no observations"):
            parse_episodes(lines, num_variables=2)

    def test_negative_time_rejected(self):
        lines = ['{"id": "e", "obs": [[0, -0.5, 1.0]], "labels": [0]}']
        with pytest.raises(SchemaError, match="negative timestamp"):
            parse_episodes(lines, num_variables=2)

    def test_non_binary_labels_rejected(self):
        lines = ['{"id": "e", "obs": [[0, 0.0, 1.0]], "labels": [0, 2]}']
        with pytest.raises(SchemaError, match="0/1"):
            parse_episodes(lines, num_variables=2)

    def test_inconsistent_label_lengths_rejected(self):
        lines = [
            '{"id": "x", "obs": [[0, 0.0, 1.0]], "labels": [0]}',
            '{"id": "y", "obs": [[0, 0.0, 1.0]], "labels": [0, 1]}',
        ]
        with pytest.raises(SchemaError, match="length"):
            parse_episodes(lines, num_variables=1)


class TestDiscretize:
    def test_same_bin_values_averaged(self):
        grid = discretize(_episode([(0, 10.4, 120.0), (0, 10.9, 130.0)]))
        assert grid.num_steps == 1
        assert grid.values[0, 0] == 125.0
        assert grid.mask[0, 0] == 1.0

    def test_bin_arithmetic_with_gap(self):
        grid = discretize(_episode([(0, 0.0, 5.0), (1, 2.5, 7.0)]))
        assert grid.num_steps == 3
        npt.assert_array_equal(grid.mask, [[1, 0], [0, 0], [0, 1]])

    def test_single_observation_anchors_at_zero(self):
        grid = discretize(_episode([(0, 3.5, 9.0)]))
        assert grid.num_steps == 1
        assert grid.values[0, 0] == 9.0

    def test_time_shift_invariance(self):
        rng = np.random.default_rng(42)
        for _ in range(30):
            obs = [
                (int(rng.integers(0, 2)), float(rng.random() * 20), float(rng.normal()))
                for _ in range(int(rng.integers(1, 15)))
            ]
            shift = float(rng.random() * 50)
            base = discretize(_episode(obs))
            moved = discretize(_episode([(v, t + shift, x) for v, t, x in obs]))
            npt.assert_array_equal(base.mask, moved.mask)
            npt.assert_allclose(base.values, moved.values, rtol=0, atol=1e-9)

    def test_mask_matches_bin_occupancy(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            obs = [
                (int(rng.integers(0, 3)), float(rng.random() * 10), float(rng.normal()))
                for _ in range(int(rng.integers(1, 25)))
            ]
            grid = discretize(_episode(obs, labels=(0,), num_variables=3))
            origin = min(t for _, t, _ in obs)
            expected = np.zeros_like(grid.mask)
            for v, t, _ in obs:
                expected[int(np.floor(t - origin)), v] = 1.0
            npt.assert_array_equal(grid.mask, expected)

    def test_lone_observations_survive_scaling_unchanged(self):
        # with at most one observation per bin, scaled grid cells equal the
        # scaled raw observations
        obs = [(0, 0.2, 50.0), (1, 1.7, 0.0), (0, 2.3, 25.0)]
        grid = scale_grid(discretize(_episode(obs)), SPECS)
        assert grid.values[0, 0] == 0.5
        assert grid.values[1, 1] == 0.5
        assert grid.values[2, 0] == 0.25

    def test_bin_width_respected(self):
        grid = discretize(_episode([(0, 0.0, 1.0), (0, 3.0, 2.0)]), bin_width=2.0)
        assert grid.num_steps == 2

    def test_bad_bin_width(self):
        with pytest.raises(ConfigError):
            discretize(_episode([(0, 0.0, 1.0)]), bin_width=0.0)


class TestScale:
    def test_endpoints(self):
        grid = discretize(_episode([(0, 0.0, 0.0), (1, 0.4, 10.0)]))
        scaled = scale_grid(grid, SPECS)
        assert scaled.values[0, 0] == 0.0
        assert scaled.values[0, 1] == 1.0

    def test_overflow_clamped(self):
        grid = discretize(_episode([(0, 0.0, 110.0)]))
        assert scale_grid(grid, SPECS).values[0, 0] == 1.0

    def test_unobserved_cells_untouched(self):
        grid = discretize(_episode([(0, 0.0, 50.0), (0, 2.5, 80.0)]))
        scaled = scale_grid(grid, SPECS)
        assert scaled.values[1, 0] == 0.0
        assert scaled.mask[1, 0] == 0.0

    def test_missing_spec_is_config_error(self):
        grid = discretize(_episode([(0, 0.0, 1.0), (1, 0.0, 1.0)]))
        with pytest.raises(ConfigError, match="no variable spec"):
            scale_grid(grid, SPECS[:1])

    def test_monotone_and_bounded(self):
        rng = np.random.default_rng(3)
        raw = np.sort(rng.normal(50, 80, size=40))
        grids = [
            scale_grid(discretize(_episode([(0, 0.0, float(v))])), SPECS)
            for v in raw
        ]
        scaled = np.array([g.values[0, 0] for g in grids])
        assert (np.diff(scaled) >= 0).all()
        assert scaled.min() >= 0.0 and scaled.max() <= 1.0


class TestTruncate:
    def test_truncates_long_grids(self):
        grid = discretize(_episode([(0, 0.0, 1.0), (0, 9.5, 2.0)]))
        cut = truncate_grid(grid, 4)
        assert cut.num_steps == 4
        assert truncate_grid(grid, None).num_steps == 10

    def test_short_grid_unchanged(self):
        grid = discretize(_episode([(0, 0.0, 1.0)]))
        assert truncate_grid(grid, 5).num_steps == 1


def test_bad_variable_spec_range():
    with pytest.raises(ConfigError):
        VariableSpec(0, "bad", 1.0, 1.0)
