"""Partitions, roster recipe, timelines, manifest round-trips."""

import numpy as np
import pytest

from tlrids.errors import ScenarioError
from tlrids.scenarios import (
    Scenario,
    assemble_timeline,
    build_roster,
    partition_twofold,
    read_roster,
    single_session_timeline,
    write_roster,
)
from tlrids.sessions import SessionLabel

from helpers import make_session


def _normals(n):
    return [
        make_session(f"n{i:02d}", syscalls=[(0, i % 5)], duration_ns=10**9)
        for i in range(n)
    ]


def _attacks():
    return {
        kind: make_session(kind, label=SessionLabel.ATTACK, syscalls=[(0, 30)])
        for kind in ("success01", "success02", "success03", "success04")
    }


def _failed():
    return make_session("failure01", label=SessionLabel.FAILED_ATTACK)


class TestPartition:
    def test_55_splits_27_28(self):
        plan = partition_twofold(_normals(55), np.random.default_rng(1))
        assert len(plan.fold_a) == 27 and len(plan.fold_b) == 28
        assert set(plan.fold_a) | set(plan.fold_b) == {s.id for s in _normals(55)}
        assert not set(plan.fold_a) & set(plan.fold_b)

    def test_same_seed_same_split(self):
        a = partition_twofold(_normals(10), np.random.default_rng(9))
        b = partition_twofold(_normals(10), np.random.default_rng(9))
        assert (a.fold_a, a.fold_b) == (b.fold_a, b.fold_b)

    def test_two_sessions(self):
        plan = partition_twofold(_normals(2), np.random.default_rng(0))
        assert len(plan.fold_a) == len(plan.fold_b) == 1

    def test_single_session_rejected(self):
        with pytest.raises(ScenarioError):
            partition_twofold(_normals(1), np.random.default_rng(0))


class TestRoster:
    def test_default_recipe_counts(self):
        roster = build_roster(
            _normals(55), _attacks(), _failed(), np.random.default_rng(3)
        )
        assert len(roster.scenarios) == 40
        normal = [s for s in roster.scenarios if not s.ground_truth_attack]
        attack = [s for s in roster.scenarios if s.ground_truth_attack]
        assert len(normal) == 20 and len(attack) == 20
        plain = [s for s in normal if s.id.startswith("normal-")]
        failures = [s for s in normal if s.id.startswith("failure-")]
        assert len(plain) == 16 and len(failures) == 4
        for kind, count in (
            ("success01", 6), ("success02", 6), ("success03", 4), ("success04", 4)
        ):
            assert sum(kind in s.id for s in attack) == count

    def test_failure_scenarios_contain_failure01(self):
        roster = build_roster(
            _normals(12), _attacks(), _failed(), np.random.default_rng(3),
            n_partitions=2,
            attack_multiplicity={"success01": 1, "success02": 1,
                                 "success03": 1, "success04": 1},
            n_failure=2,
        )
        failures = [s for s in roster.scenarios if s.id.startswith("failure-")]
        assert len(failures) == 2
        for s in failures:
            assert "failure01" in s.session_ids
            assert not s.ground_truth_attack

    def test_no_scenario_uses_its_training_fold(self):
        roster = build_roster(
            _normals(55), _attacks(), _failed(), np.random.default_rng(3)
        )
        for s in roster.scenarios:
            assert not set(s.session_ids) & set(s.training_fold)

    def test_pauses_in_range(self):
        roster = build_roster(
            _normals(20), _attacks(), _failed(), np.random.default_rng(3),
            n_partitions=2,
        )
        for s in roster.scenarios:
            *body, last = s.members
            assert all(1 <= pause <= 10 for _, pause in body)
            assert last[1] == 0

    def test_missing_attack_kind(self):
        attacks = _attacks()
        del attacks["success03"]
        with pytest.raises(ScenarioError, match="success03"):
            build_roster(_normals(12), attacks, _failed(), np.random.default_rng(0))

    def test_insertion_slot_uniformity(self):
        # chi-square over 1e4 seeded draws on a 5-session fold: the attack
        # lands uniformly over the 6 possible insertion slots
        normals = _normals(10)  # folds of 5
        attacks = _attacks()
        counts = np.zeros(6, dtype=int)
        for seed in range(2500):
            roster = build_roster(
                normals, attacks, _failed(), np.random.default_rng(seed),
                n_partitions=0,
                attack_multiplicity={"success01": 4},
                n_failure=0,
            )
            for s in roster.scenarios:
                counts[s.session_ids.index("success01")] += 1
        n = counts.sum()
        assert n == 10_000
        expected = n / 6
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        # df=5, alpha=0.001 critical value
        assert chi2 < 20.52, counts


class TestTimeline:
    def test_span_arithmetic(self):
        a = make_session("a", syscalls=[(0, 1)], duration_ns=10 * 10**9)
        b = make_session("b", syscalls=[(0, 2)], duration_ns=10 * 10**9)
        scenario = Scenario(
            id="sc",
            members=(("a", 3), ("b", 0)),
            train_ref="",
            training_fold=(),
            ground_truth_attack=False,
        )
        timeline = assemble_timeline(scenario, {"a": a, "b": b})
        assert timeline.span_ns == 23 * 10**9
        assert timeline.events_t_ns.tolist() == [0, 13 * 10**9]

    def test_single_session_identity(self):
        s = make_session(
            "a",
            syscalls=[(5, 1), (10, 2)],
            readings=[(0, "rss", 7)],
            duration_ns=10**9,
        )
        timeline = single_session_timeline(s)
        assert timeline.events_t_ns.tolist() == [5, 10]
        assert timeline.span_ns == 10**9

    def test_intra_session_spacing_preserved(self):
        a = make_session("a", syscalls=[(100, 1), (250, 2)], duration_ns=10**9)
        b = make_session("b", syscalls=[(40, 3)], duration_ns=10**9)
        scenario = Scenario(
            id="sc", members=(("a", 2), ("b", 0)), train_ref="",
            training_fold=(), ground_truth_attack=False,
        )
        timeline = assemble_timeline(scenario, {"a": a, "b": b})
        assert timeline.events_t_ns[1] - timeline.events_t_ns[0] == 150
        assert timeline.events_sys.tolist() == [1, 2, 3]

    def test_readings_merged_in_time_order(self):
        s = make_session(
            "a",
            readings=[(0, "rss", 1), (200, "rss", 2), (100, "num_files", 9)],
            duration_ns=10**9,
        )
        timeline = single_session_timeline(s)
        assert timeline.readings_t_ns.tolist() == [0, 100, 200]

    def test_bad_pause_rejected(self):
        scenario = Scenario(
            id="sc", members=(("a", 11), ("b", 0)), train_ref="",
            training_fold=(), ground_truth_attack=False,
        )
        with pytest.raises(ScenarioError, match="pause"):
            scenario.validate()

    def test_member_in_training_fold_rejected(self):
        scenario = Scenario(
            id="sc", members=(("a", 0),), train_ref="p0.A",
            training_fold=("a",), ground_truth_attack=False,
        )
        with pytest.raises(ScenarioError, match="training fold"):
            scenario.validate()

    def test_unknown_member_rejected(self):
        scenario = Scenario(
            id="sc", members=(("ghost", 0),), train_ref="",
            training_fold=(), ground_truth_attack=False,
        )
        with pytest.raises(ScenarioError, match="ghost"):
            assemble_timeline(scenario, {})


class TestRosterManifest:
    def test_roundtrip(self, tmp_path):
        roster = build_roster(
            _normals(12), _attacks(), _failed(), np.random.default_rng(3),
            seed=17, n_partitions=2,
            attack_multiplicity={"success01": 2, "success02": 1,
                                 "success03": 1, "success04": 1},
            n_failure=1,
        )
        path = tmp_path / "roster.manifest"
        write_roster(roster, path, header="seed=17")
        loaded = read_roster(path)
        assert loaded.seed == roster.seed
        assert loaded.scenarios == roster.scenarios
        assert loaded.partitions == roster.partitions

    def test_write_deterministic(self, tmp_path):
        roster = build_roster(
            _normals(8), _attacks(), _failed(), np.random.default_rng(3),
            n_partitions=1, attack_multiplicity={"success01": 1}, n_failure=0,
        )
        write_roster(roster, tmp_path / "r1")
        write_roster(roster, tmp_path / "r2")
        assert (tmp_path / "r1").read_bytes() == (tmp_path / "r2").read_bytes()
