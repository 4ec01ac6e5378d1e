import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import flat_trajectory, make_entry, make_repertoire
from sapt.errors import (
    CorruptRepertoireError,
    EmptyRepertoireError,
    InvalidDescriptorError,
    RepertoireFormatError,
    RepertoireVersionError,
)
from sapt.repertoire import (
    GridSpec,
    InsertOutcome,
    Repertoire,
    RepertoireEntry,
    discretize,
)


class TestDiscretize:
    def test_lower_boundary(self):
        assert discretize([0.0], GridSpec((10,), (0.0,), (1.0,))) == 0

    def test_upper_boundary_clamps_to_last_bin(self):
        assert discretize([1.0], GridSpec((10,), (0.0,), (1.0,))) == 9

    def test_row_major_2d(self):
        grid = GridSpec((10, 10), (0.0, 0.0), (1.0, 1.0))
        # floor(0.34*10)=3, floor(0.71*10)=7 -> 3*10 + 7
        assert discretize([0.34, 0.71], grid) == 37

    def test_out_of_range_clamps(self):
        grid = GridSpec((10,), (0.0,), (1.0,))
        assert discretize([-3.0], grid) == 0
        assert discretize([7.2], grid) == 9

    def test_non_finite_rejected(self):
        grid = GridSpec((10,), (0.0,), (1.0,))
        with pytest.raises(InvalidDescriptorError):
            discretize([np.nan], grid)
        with pytest.raises(InvalidDescriptorError):
            discretize([np.inf], grid)

    def test_wrong_dimension_rejected(self):
        with pytest.raises(InvalidDescriptorError):
            discretize([0.1, 0.2], GridSpec((10,), (0.0,), (1.0,)))

    @given(
        st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=2),
        st.integers(1, 9),
        st.integers(1, 9),
    )
    def test_index_always_in_range(self, coords, b0, b1):
        grid = GridSpec((b0, b1), (-1.0, -1.0), (1.0, 1.0))
        assert 0 <= discretize(coords, grid) < grid.n_cells


class TestTryInsert:
    def test_empty_cell_inserted(self):
        rep = make_repertoire([])
        assert rep.try_insert(make_entry([0.15], 2.0)) is InsertOutcome.INSERTED

    def test_higher_safety_replaces(self):
        rep = make_repertoire([make_entry([0.15], 2.0)])
        assert rep.try_insert(make_entry([0.18], 3.0)) is InsertOutcome.REPLACED
        assert rep.cells[1].safety_prior == 3.0

    def test_lower_safety_discarded(self):
        rep = make_repertoire([make_entry([0.15], 3.0)])
        assert rep.try_insert(make_entry([0.18], 2.0)) is InsertOutcome.DISCARDED
        assert rep.cells[1].safety_prior == 3.0

    def test_tie_keeps_incumbent(self):
        first = make_entry([0.15], 2.0)
        rep = make_repertoire([first])
        assert rep.try_insert(make_entry([0.18], 2.0)) is InsertOutcome.DISCARDED
        assert rep.cells[1] is first

    def test_safety_monotone_and_cells_consistent(self):
        rng = np.random.default_rng(3)
        rep = make_repertoire([])
        best: dict[int, float] = {}
        for _ in range(300):
            e = make_entry([rng.uniform(0, 1)], rng.normal())
            cell = discretize(e.descriptor, rep.grid)
            rep.try_insert(e)
            prev = best.get(cell, -np.inf)
            best[cell] = max(prev, e.safety_prior)
            assert rep.cells[cell].safety_prior == best[cell]
        for cell, entry in rep.cells.items():
            assert discretize(entry.descriptor, rep.grid) == cell


class TestAssignRewards:
    def reward_fn(self, traj, goal):
        # same normalized form as the lander, 100-unit scale
        return 1.0 / (1.0 + abs(traj.states[-1, 0] - goal) / 100.0)

    def test_trajectory_ending_at_goal_scores_one(self):
        rep = make_repertoire([make_entry([0.5], 1.0, trajectory=flat_trajectory(60.0))])
        rep.assign_rewards(60.0, self.reward_fn)
        assert rep.entries()[0].reward_prior == 1.0

    def test_hover_at_60_goal_100(self):
        rep = make_repertoire([make_entry([0.5], 1.0, trajectory=flat_trajectory(60.0))])
        rep.assign_rewards(100.0, self.reward_fn)
        assert rep.entries()[0].reward_prior == pytest.approx(1.0 / 1.4)

    def test_two_goals_change_rewards_not_safety(self):
        entries = [make_entry([x], 5.0 + x, trajectory=flat_trajectory(100 * x)) for x in (0.2, 0.8)]
        rep = make_repertoire(entries)
        rep.assign_rewards(20.0, self.reward_fn)
        first = rep.reward_priors().copy()
        safeties = rep.safety_priors().copy()
        rep.assign_rewards(80.0, self.reward_fn)
        assert not np.allclose(first, rep.reward_priors())
        assert np.array_equal(safeties, rep.safety_priors())

    def test_idempotent_for_fixed_goal(self):
        rep = make_repertoire([make_entry([0.3], 1.0, trajectory=flat_trajectory(30.0))])
        rep.assign_rewards(50.0, self.reward_fn)
        once = rep.reward_priors().copy()
        rep.assign_rewards(50.0, self.reward_fn)
        assert np.array_equal(once, rep.reward_priors())

    def test_missing_trajectory_errors(self):
        rep = make_repertoire([make_entry([0.3], 1.0)])
        rep.entries()[0].trajectory = None
        with pytest.raises(CorruptRepertoireError):
            rep.assign_rewards(50.0, self.reward_fn)


class TestRandomElite:
    def test_single_cell_always_returned(self):
        entry = make_entry([0.5], 1.0)
        rep = make_repertoire([entry])
        rng = np.random.default_rng(0)
        assert all(rep.random_elite(rng) is entry for _ in range(20))

    def test_uniform_over_two_cells(self):
        a, b = make_entry([0.05], 1.0), make_entry([0.95], 2.0)
        rep = make_repertoire([a, b])
        rng = np.random.default_rng(7)
        hits = sum(rep.random_elite(rng) is a for _ in range(10_000))
        assert 0.45 <= hits / 10_000 <= 0.55

    def test_empty_errors(self):
        with pytest.raises(EmptyRepertoireError):
            make_repertoire([]).random_elite(np.random.default_rng(0))


class TestPersistence:
    def _rich_repertoire(self):
        rng = np.random.default_rng(11)
        rep = Repertoire(
            GridSpec((5, 5), (0.0, -1.0), (1.0, 1.0)),
            env_id="test",
            dynamics_conditions=rng.normal(size=(3, 2)),
        )
        for _ in range(8):
            entry = RepertoireEntry(
                policy=rng.normal(size=4),
                trajectory=flat_trajectory(rng.normal(), n_steps=5, state_dim=2),
                descriptor=rng.uniform([0, -1], [1, 1]),
                safety_prior=rng.normal(),
            )
            rep.try_insert(entry)
        return rep

    def test_round_trip_is_bit_exact(self, tmp_path):
        rep = self._rich_repertoire()
        path = tmp_path / "rep.jsonl"
        rep.save(path)
        loaded = Repertoire.load(path)
        assert loaded.env_id == rep.env_id
        assert loaded.grid == rep.grid
        assert loaded.dynamics_conditions == rep.dynamics_conditions
        assert loaded.occupied_cells() == rep.occupied_cells()
        for cell in rep.occupied_cells():
            a, b = rep.cells[cell], loaded.cells[cell]
            assert np.array_equal(a.policy, b.policy)
            assert np.array_equal(a.descriptor, b.descriptor)
            assert a.safety_prior == b.safety_prior
            assert np.array_equal(a.trajectory.states, b.trajectory.states)
            assert np.array_equal(a.trajectory.actions, b.trajectory.actions)
            assert a.trajectory.dt == b.trajectory.dt

    def test_save_is_deterministic(self, tmp_path):
        rep = self._rich_repertoire()
        rep.save(tmp_path / "a.jsonl")
        rep.save(tmp_path / "b.jsonl")
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()

    def test_truncated_file_rejected_entirely(self, tmp_path):
        rep = self._rich_repertoire()
        path = tmp_path / "rep.jsonl"
        rep.save(path)
        full = path.read_text().splitlines()
        # cut mid-line
        (tmp_path / "cut.jsonl").write_text("\n".join(full[:-1]) + "\n" + full[-1][:20])
        with pytest.raises(RepertoireFormatError):
            Repertoire.load(tmp_path / "cut.jsonl")
        # cut at a line boundary: caught via the header entry count
        (tmp_path / "short.jsonl").write_text("\n".join(full[:-1]) + "\n")
        with pytest.raises(RepertoireFormatError):
            Repertoire.load(tmp_path / "short.jsonl")

    def test_parse_error_reports_line_number(self, tmp_path):
        rep = self._rich_repertoire()
        path = tmp_path / "rep.jsonl"
        rep.save(path)
        lines = path.read_text().splitlines()
        lines[2] = lines[2][:10] + "#!garbage"
        (tmp_path / "bad.jsonl").write_text("\n".join(lines) + "\n")
        with pytest.raises(RepertoireFormatError, match="line 3"):
            Repertoire.load(tmp_path / "bad.jsonl")

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "rep.jsonl"
        path.write_text('{"format_version": 99, "env_id": "x", "grid": {"bins": [2], "lower": [0], "upper": [1]}}\n')
        with pytest.raises(RepertoireVersionError):
            Repertoire.load(path)

    def test_empty_repertoire_round_trips(self, tmp_path):
        rep = Repertoire(GridSpec((4,), (0.0,), (1.0,)), env_id="test")
        path = tmp_path / "empty.jsonl"
        rep.save(path)
        loaded = Repertoire.load(path)
        assert len(loaded) == 0
        assert loaded.grid == rep.grid


class TestGridSpec:
    def test_normalize_maps_to_unit_cube(self):
        grid = GridSpec((4,), (100.0,), (300.0,))
        assert grid.normalize([200.0]) == pytest.approx([0.5])
        assert grid.normalize([50.0]) == pytest.approx([0.0])
        assert grid.normalize([400.0]) == pytest.approx([1.0])

    def test_invalid_specs_rejected(self):
        from sapt.errors import ConfigError

        with pytest.raises(ConfigError):
            GridSpec((0,), (0.0,), (1.0,))
        with pytest.raises(ConfigError):
            GridSpec((4,), (1.0,), (0.0,))
        with pytest.raises(ConfigError):
            GridSpec((4, 4), (0.0,), (1.0,))
