"""Training, cell-cycle behaviour, detector variants, scenario runs."""

import numpy as np
import pytest

from tlrids import _kernels as K
from tlrids.engine import (
    VARIANTS,
    TrainedProfile,
    build_detector,
    train,
)
from tlrids.errors import (
    EmptyPermissibleSetError,
    TlridsError,
    TrainingLabelError,
)
from tlrids.scenarios import Scenario, assemble_timeline
from tlrids.sessions import SessionLabel

from helpers import (
    install_atc,
    install_dc,
    make_context,
    make_session,
    set_idc,
    set_ntc_locks,
    small_params,
    small_tissue,
    step_n,
)


def _toy_sessions():
    readings = [(i * 100_000_000, "rss", 100 + (i % 2)) for i in range(20)]
    return [
        make_session("n0", syscalls=[(0, 0), (10, 1)], readings=readings,
                     duration_ns=2 * 10**9),
        make_session("n1", syscalls=[(5, 1), (15, 2)], readings=readings,
                     duration_ns=2 * 10**9),
    ]


class TestTrain:
    def test_set_arithmetic(self):
        sessions = [make_session("a", syscalls=[(0, 3), (1, 4), (2, 5)])]
        profile = train(sessions, VARIANTS["negsel"], universe_size=350)
        assert profile.normal_antigen == {3, 4, 5}
        assert len(profile.permissible) == 347
        assert set(profile.permissible) | profile.normal_antigen == set(range(350))

    def test_empty_training_set(self):
        profile = train([], VARIANTS["tlr1"], universe_size=10)
        assert profile.normal_antigen == frozenset()
        assert len(profile.permissible) == 10
        assert profile.normal_levels == {"rss": frozenset()}

    def test_levels_collected_per_monitored_signal(self):
        sessions = _toy_sessions()
        profile = train(sessions, VARIANTS["tlr1"], universe_size=10)
        assert profile.normal_levels["rss"] == {100, 101}

    def test_unmonitored_signals_ignored(self):
        sessions = [
            make_session("a", readings=[(0, "rss", 5), (0, "num_files", 9)])
        ]
        profile = train(sessions, VARIANTS["tlr1"], universe_size=10)
        assert "num_files" not in profile.normal_levels

    def test_attack_session_rejected(self):
        bad = make_session("x", label=SessionLabel.ATTACK)
        with pytest.raises(TrainingLabelError):
            train([bad], VARIANTS["tlr1"])

    def test_failed_attack_rejected(self):
        bad = make_session("x", label=SessionLabel.FAILED_ATTACK)
        with pytest.raises(TrainingLabelError):
            train([bad], VARIANTS["tlr1"])

    def test_tlr_fires_only_on_unseen_level(self):
        sessions = [
            make_session("a", readings=[(0, "rss", 676), (100_000_000, "rss", 680)])
        ]
        profile = train(sessions, VARIANTS["tlr1"], universe_size=10)
        assert 681 not in profile.normal_levels["rss"]
        assert 676 in profile.normal_levels["rss"]

    def test_profile_roundtrip(self, tmp_path):
        profile = train(_toy_sessions(), VARIANTS["tlr1"], universe_size=12)
        path = tmp_path / "p.txt"
        profile.save(path)
        loaded = TrainedProfile.load(path)
        assert loaded == profile
        assert loaded.digest() == profile.digest()


class TestImmatureDcStep:
    def test_lifespan_with_antigen_becomes_semimature(self):
        tissue = small_tissue()
        set_idc(tissue, 0, [5], iterations=10)  # lifespan_1 = 10
        report = tissue.step()
        assert report.populations["smDC"] == 1
        assert report.populations["iDC"] == 10  # fresh replacement in slot
        assert tissue.idc_count[0] == 0
        assert tissue.dc_pres[0, 5]

    def test_lifespan_without_antigen_replaced(self):
        tissue = small_tissue()
        tissue.idc_iter[:] = 10
        report = tissue.step()
        assert report.populations["smDC"] == 0
        assert report.populations["iDC"] == 10
        # replacement resets the age, so next migration is a lifespan away
        assert int(tissue.idc_iter.max()) == 0

    def test_tlr_activation_matures_early(self):
        tissue = small_tissue(signals=("rss",))
        set_idc(tissue, 3, [7], iterations=5)
        tissue.set_signal("rss", 999)  # not in trained levels {100,101,102}
        report = tissue.step()
        assert report.populations["mDC"] == 1
        assert report.populations["smDC"] == 0

    def test_seen_level_does_not_mature(self):
        tissue = small_tissue(signals=("rss",))
        set_idc(tissue, 3, [7], iterations=5)
        tissue.set_signal("rss", 100)  # trained level
        report = tissue.step()
        assert report.populations["mDC"] == 0

    def test_tlr_without_antigen_keeps_collecting(self):
        tissue = small_tissue(signals=("rss",))
        tissue.set_signal("rss", 999)
        report = tissue.step()
        assert report.populations["mDC"] == 0

    def test_negsel_ignores_signals(self):
        tissue = small_tissue(
            signals=(), levels={}, tlr_enabled=False, sm_as_mature=True
        )
        set_idc(tissue, 0, [7], iterations=5)
        report = tissue.step()
        assert report.populations["mDC"] == 0


class TestNaiveTcStep:
    def test_semimature_match_is_tolerance(self):
        tissue = small_tissue()
        d = install_dc(tissue, "smDC", [9], iterations=4)
        for slot in range(10):
            set_ntc_locks(tissue, slot, [9])
        report = tissue.step()
        assert report.alerts == ()
        assert report.tolerance_deletions == 10
        assert report.populations["nTC"] == 10
        assert tissue.dc_iter[d] == 1  # stay-alive

    def test_mature_match_activates_and_alerts(self):
        tissue = small_tissue()
        d = install_dc(tissue, "mDC", [9], iterations=4)
        set_ntc_locks(tissue, 0, [9])
        for slot in range(1, 10):
            set_ntc_locks(tissue, slot, [11])  # no match: 11 not presented
        report = tissue.step()
        assert report.alerts == (9,)
        assert report.activations == 1
        assert report.populations["aTC"] == 1
        assert report.populations["nTC"] == 10
        assert tissue.dc_iter[d] == 1
        assert tissue.atc_lock[0] == 9  # retains the triggering lock

    def test_negsel_semimature_acts_mature(self):
        tissue = small_tissue(
            signals=(), levels={}, tlr_enabled=False, sm_as_mature=True
        )
        install_dc(tissue, "smDC", [9])
        set_ntc_locks(tissue, 0, [9])
        for slot in range(1, 10):
            set_ntc_locks(tissue, slot, [11])
        report = tissue.step()
        assert report.alerts == (9,)
        assert report.tolerance_deletions == 0

    def test_lifespan_expiry_redraws_locks(self):
        tissue = small_tissue()
        before = tissue.ntc_locks.copy()
        tissue.ntc_iter[:] = 5  # lifespan_2
        tissue.step()
        assert not np.array_equal(before, tissue.ntc_locks)
        assert int(tissue.ntc_iter.max()) == 0

    def test_mature_draw_probability(self):
        # 3 mDCs + 1 smDC all presenting the same value: a binding naive TC
        # activates with probability 3/4
        activations = tolerances = 0
        for seed in range(200):
            tissue = small_tissue(context=make_context(seed=seed))
            for _ in range(3):
                install_dc(tissue, "mDC", [9])
            install_dc(tissue, "smDC", [9])
            for slot in range(10):
                set_ntc_locks(tissue, slot, [9])
            report = tissue.step()
            activations += report.activations
            tolerances += report.tolerance_deletions
        total = activations + tolerances
        assert total == 2000
        assert abs(activations / total - 0.75) < 0.05

    def test_empty_lymph_node_skips_binding(self):
        tissue = small_tissue()
        state_before = int(tissue.rng[0])
        tissue.step()
        # no lymph DCs and no expiries: the rng stream is untouched
        assert int(tissue.rng[0]) == state_before


class TestDcLifespans:
    def test_semimature_removed_at_lifespan(self):
        tissue = small_tissue()
        install_dc(tissue, "smDC", [9], iterations=10)  # lifespan_3 = 10
        report = tissue.step()
        assert report.populations["smDC"] == 0

    def test_semimature_survives_below_lifespan(self):
        tissue = small_tissue()
        install_dc(tissue, "smDC", [9], iterations=9)
        report = tissue.step()
        assert report.populations["smDC"] == 1

    def test_stay_alive_restarts_clock(self):
        # matched at tick t (iterations -> 1): survives >= lifespan-1 more ticks
        tissue = small_tissue()
        d = install_dc(tissue, "smDC", [9], iterations=9)
        set_ntc_locks(tissue, 0, [9])
        report = tissue.step()
        assert report.tolerance_deletions == 1
        assert tissue.dc_iter[d] == 1  # start of next tick
        reports = step_n(tissue, 9)  # lifespan_3 - 1 = 9 further ticks
        assert all(r.populations["smDC"] == 1 for r in reports)
        assert tissue.step().populations["smDC"] == 0

    def test_mature_removed_at_lifespan(self):
        tissue = small_tissue(small_params(cell_lifespan_4=7))
        install_dc(tissue, "mDC", [9], iterations=7)
        assert tissue.step().populations["mDC"] == 0


class TestActivatedTcStep:
    def test_matching_store_token_resets_age(self):
        tissue = small_tissue()
        a = install_atc(tissue, lock=5, iterations=8)
        # 50 copies: collection capacity is 10 cells x 4 receptors, so
        # tokens remain in the store when the activated TC scans it
        for _ in range(5):
            tissue.inject_antigen(5)
        tissue.step()
        assert tissue.atc_iter[a] == 0

    def test_expires_without_matching_antigen(self):
        tissue = small_tissue()
        install_atc(tissue, lock=5, iterations=0)
        reports = step_n(tissue, 11)  # lifespan_5 = 10
        assert reports[-1].populations["aTC"] == 0

    def test_empty_store_just_ages(self):
        tissue = small_tissue()
        a = install_atc(tissue, lock=5, iterations=3)
        tissue.step()
        assert tissue.atc_iter[a] == 4


class TestBuildDetector:
    def test_locks_avoid_trained_antigen(self):
        sessions = [make_session("a", syscalls=[(0, v)]) for v in (3, 4, 5)]
        profile = train(sessions, VARIANTS["negsel"], universe_size=40)
        detector = build_detector(profile, "negsel", small_params(), seed=1,
                                  backend=False)
        tissue = detector.new_tissue()
        assert not set(tissue.ntc_locks.ravel().tolist()) & {3, 4, 5}

    def test_empty_permissible_rejected(self):
        sessions = [
            make_session("a", syscalls=[(t, v) for t, v in enumerate(range(5))])
        ]
        profile = train(sessions, VARIANTS["negsel"], universe_size=5)
        with pytest.raises(EmptyPermissibleSetError):
            build_detector(profile, "negsel", small_params())

    def test_variant_profile_mismatch(self):
        profile = train(_toy_sessions(), VARIANTS["tlr1"], universe_size=12)
        with pytest.raises(TlridsError, match="retrain"):
            build_detector(profile, "tlr3", small_params())

    def test_unknown_variant(self):
        profile = train(_toy_sessions(), VARIANTS["tlr1"], universe_size=12)
        with pytest.raises(TlridsError, match="unknown variant"):
            build_detector(profile, "tlr9", small_params())

    def test_signal_capacity_follows_variant(self):
        profile = train(_toy_sessions(), VARIANTS["tlr1"], universe_size=12)
        detector = build_detector(profile, "tlr1", backend=False)
        assert detector.params.max_cytokines == 1
        assert detector.params.num_cytokine_receptors_1 == 1

    def test_exhaustive_sweep_covers_permissible(self):
        sessions = [make_session("a", syscalls=[(0, 0), (1, 1), (2, 2)])]
        profile = train(sessions, VARIANTS["negsel"], universe_size=40)
        detector = build_detector(profile, "negsel", small_params(), seed=9,
                                  exhaustive=True, backend=False)
        tissue = detector.new_tissue()
        rng = np.random.default_rng(1)
        for t in range(40):
            if rng.random() < 0.5:
                tissue.inject_antigen(int(rng.integers(0, 40)))
            tissue.step()
            live = set(tissue.ntc_locks.ravel().tolist())
            assert live == set(profile.permissible)


def _toy_timeline(events, readings, duration_ns=3 * 10**9, session_id="t0"):
    session = make_session(
        session_id, syscalls=events, readings=readings, duration_ns=duration_ns
    )
    scenario = Scenario(
        id="sc-" + session_id,
        members=((session.id, 0),),
        train_ref="",
        training_fold=(),
        ground_truth_attack=False,
    )
    return assemble_timeline(scenario, {session.id: session})


class TestRunScenario:
    GRID = [(i * 100_000_000, "rss", 100) for i in range(30)]

    def _profile(self):
        # toy universe of 5 syscalls: training sees {0,1,2}, rss level 100
        sessions = [
            make_session("n0", syscalls=[(0, 0), (10, 1), (20, 2)],
                         readings=self.GRID, duration_ns=3 * 10**9)
        ]
        return sessions, train(sessions, VARIANTS["tlr1"], universe_size=5)

    def test_training_replay_is_silent(self):
        sessions, profile = self._profile()
        for name in ("tlr1", "negsel"):
            detector = build_detector(profile, name, small_params(), seed=3,
                                      exhaustive=True, backend=False)
            timeline = _toy_timeline(
                [(0, 0), (10, 1), (20, 2)], self.GRID
            )
            result = detector.run_scenario(timeline)
            assert result.verdict == "normal"
            assert result.alerts == ()

    def test_unseen_syscall_with_unseen_level_alerts(self):
        _, profile = self._profile()
        detector = build_detector(profile, "tlr1", small_params(), seed=3,
                                  exhaustive=True, backend=False)
        readings = [(0, "rss", 100), (100_000_000, "rss", 777)]
        timeline = _toy_timeline([(50_000_000, 4), (150_000_000, 4)], readings)
        result = detector.run_scenario(timeline)
        assert result.verdict == "attack"
        assert all(a.syscall == 4 for a in result.alerts)
        assert all(a.source == "mDC" for a in result.alerts)

    def test_unseen_syscall_with_seen_levels_stays_normal(self):
        _, profile = self._profile()
        detector = build_detector(profile, "tlr1", small_params(), seed=3,
                                  exhaustive=True, backend=False)
        timeline = _toy_timeline([(50_000_000, 4), (150_000_000, 4)], self.GRID)
        result = detector.run_scenario(timeline)
        assert result.verdict == "normal"
        assert result.tolerance_deletions > 0  # censored peripherally instead

    def test_negsel_alerts_without_signals(self):
        _, profile = self._profile()
        detector = build_detector(profile, "negsel", small_params(), seed=3,
                                  exhaustive=True, backend=False)
        timeline = _toy_timeline([(50_000_000, 4)], self.GRID)
        result = detector.run_scenario(timeline)
        assert result.verdict == "attack"
        assert result.tolerance_deletions == 0
        assert all(a.source == "smDC" for a in result.alerts)

    def test_verdict_iff_alerts(self):
        _, profile = self._profile()
        detector = build_detector(profile, "negsel", small_params(), seed=3,
                                  backend=False)
        timeline = _toy_timeline([(0, 0)], self.GRID)
        result = detector.run_scenario(timeline)
        assert result.is_attack == bool(result.alerts)

    def test_alert_count_equals_activations(self):
        _, profile = self._profile()
        detector = build_detector(profile, "negsel", small_params(), seed=5,
                                  exhaustive=True, backend=False)
        timeline = _toy_timeline([(0, 3), (10, 4), (1_000_000_000, 4)], self.GRID)
        result = detector.run_scenario(timeline)
        assert len(result.alerts) == result.activations > 0

    def test_determinism_across_runs(self):
        _, profile = self._profile()
        timeline = _toy_timeline([(0, 3), (500_000_000, 4)], self.GRID)
        results = []
        for _ in range(2):
            detector = build_detector(profile, "negsel", small_params(), seed=11,
                                      backend=False)
            results.append(detector.run_scenario(timeline).alerts)
        assert results[0] == results[1]

    def test_population_trace_recorded(self):
        _, profile = self._profile()
        detector = build_detector(profile, "tlr1", small_params(), seed=3,
                                  backend=False)
        timeline = _toy_timeline([(0, 0)], self.GRID)
        result = detector.run_scenario(timeline, record_populations=True)
        assert result.pop_trace is not None
        assert result.pop_trace.shape[0] == result.n_ticks
        assert (result.pop_trace[:, 0] == 10).all()
        assert (result.pop_trace[:, 3] == 10).all()

    def test_pacing_mode_matches_virtual_replay(self):
        _, profile = self._profile()
        params = small_params(cell_update_rate_us=500)  # 0.5 ms per tick
        timeline = _toy_timeline([(0, 3)], [(0, "rss", 100)], duration_ns=2_000)
        paced = build_detector(profile, "tlr1", params, seed=3, exhaustive=True,
                               backend=False).run_scenario(timeline, pacing=True)
        fast = build_detector(profile, "tlr1", params, seed=3, exhaustive=True,
                              backend=False).run_scenario(timeline)
        assert paced.alerts == fast.alerts
