"""End-to-end benchmark: roster construction, training, scoring.

Runs any mix of systems over the 40-scenario roster: the syscall
whitelist (``systrace``), exact-level signal whitelists (``sig1..3``),
and the tissue-based detectors (``negsel``, ``tlr1..3``). Every
scenario trains its systems on its own fold, so no scenario ever sees
its training sessions.

Scenario runs are independent; the tissue systems fan out over a
thread pool (the compiled kernel releases the GIL). Results are keyed
by scenario id and aggregated in sorted order, so reports are
byte-stable regardless of scheduling, and every per-run seed is derived
from (bench seed, system, scenario id) rather than execution order.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import baselines
from ._rng import derive_seed
from .engine import VARIANTS, TrainedProfile, build_detector, train
from .errors import DatasetError, TlridsError
from .report import BenchReport, MetricsRow, confusion, gmean, REFERENCE_ROWS
from .scenarios import (
    ATTACK_KINDS,
    FAILED_KIND,
    Roster,
    Scenario,
    Timeline,
    assemble_timeline,
    build_roster,
)
from .sessions import Dataset, Session, SessionLabel
from .signals import SIGNAL_INDEX
from .tissue import TissueParams

SYSTEM_ORDER = ("systrace", "negsel", "sig1", "sig2", "sig3", "tlr1", "tlr2", "tlr3")

_TICK_SYSTEMS = ("negsel", "tlr1", "tlr2", "tlr3")


@dataclass
class BenchConfig:
    systems: tuple[str, ...] = SYSTEM_ORDER
    seed: int = 0
    params: TissueParams = field(default_factory=TissueParams)
    jobs: int = 0  # 0 -> min(cpu_count, 8)
    exhaustive: bool = False
    backend: bool | None = None
    n_partitions: int = 8
    attack_multiplicity: Mapping[str, int] | None = None
    n_failure: int = 4
    include_reference: bool = True

    def resolved_jobs(self) -> int:
        if self.jobs > 0:
            return self.jobs
        return max(1, min(os.cpu_count() or 1, 8))


@dataclass
class BenchOutcome:
    roster: Roster
    report: BenchReport
    verdicts: dict[str, dict[str, str]]  # system -> scenario id -> verdict
    truths: dict[str, str]
    seed: int
    params: TissueParams

    def verdict_lines(self) -> list[str]:
        lines = ["scenario\ttruth\tsystem\tverdict"]
        for system in sorted(self.verdicts):
            for sid in sorted(self.verdicts[system]):
                lines.append(
                    f"{sid}\t{self.truths[sid]}\t{system}\t"
                    f"{self.verdicts[system][sid]}"
                )
        return lines


def roster_from_dataset(
    dataset: Dataset,
    seed: int,
    n_partitions: int = 8,
    attack_multiplicity: Mapping[str, int] | None = None,
    n_failure: int = 4,
) -> Roster:
    normals = dataset.by_label(SessionLabel.NORMAL)
    if len(normals) < 2:
        raise DatasetError("need at least two normal sessions")
    attacks: dict[str, Session] = {}
    for kind in ATTACK_KINDS:
        try:
            attacks[kind] = dataset.get(kind)
        except DatasetError:
            raise DatasetError(f"dataset lacks attack session {kind!r}")
    try:
        failed = dataset.get(FAILED_KIND)
    except DatasetError:
        raise DatasetError(f"dataset lacks failed-attack session {FAILED_KIND!r}")
    rng = np.random.default_rng(derive_seed(seed, 0x5EED))
    return build_roster(
        normals,
        attacks,
        failed,
        rng,
        seed=seed,
        n_partitions=n_partitions,
        attack_multiplicity=attack_multiplicity,
        n_failure=n_failure,
    )


def _filter_timeline(timeline: Timeline, names: Sequence[str]) -> Timeline:
    wanted = np.zeros(len(SIGNAL_INDEX), dtype=bool)
    for n in names:
        wanted[SIGNAL_INDEX[n]] = True
    keep = wanted[timeline.readings_sig]
    return Timeline(
        scenario_id=timeline.scenario_id,
        events_t_ns=timeline.events_t_ns,
        events_pid=timeline.events_pid,
        events_sys=timeline.events_sys,
        readings_t_ns=timeline.readings_t_ns[keep],
        readings_sig=timeline.readings_sig[keep],
        readings_level=timeline.readings_level[keep],
        span_ns=timeline.span_ns,
    )


def _needed_signals(systems: Sequence[str]) -> tuple[str, ...]:
    names: list[str] = []
    for system in systems:
        if system in baselines.SIG_VARIANTS:
            source = baselines.SIG_VARIANTS[system]
        elif system in VARIANTS:
            source = VARIANTS[system].signals
        else:
            source = ()
        for n in source:
            if n not in names:
                names.append(n)
    return tuple(names)


def run_bench(dataset: Dataset, config: BenchConfig) -> BenchOutcome:
    for system in config.systems:
        if system not in SYSTEM_ORDER:
            raise TlridsError(
                f"unknown system {system!r}; choose from {SYSTEM_ORDER}"
            )
    roster = roster_from_dataset(
        dataset,
        config.seed,
        n_partitions=config.n_partitions,
        attack_multiplicity=config.attack_multiplicity,
        n_failure=config.n_failure,
    )
    return score_roster(dataset, roster, config)


def score_roster(
    dataset: Dataset, roster: Roster, config: BenchConfig
) -> BenchOutcome:
    by_id = {s.id: s for s in dataset.sessions}
    signal_names = _needed_signals(config.systems)
    timelines: dict[str, Timeline] = {}
    for sc in roster.scenarios:
        timelines[sc.id] = _filter_timeline(
            assemble_timeline(sc, by_id), signal_names
        )
    truths = {
        sc.id: "attack" if sc.ground_truth_attack else "normal"
        for sc in roster.scenarios
    }

    fold_sessions: dict[str, list[Session]] = {}
    for sc in roster.scenarios:
        if sc.train_ref not in fold_sessions:
            fold_sessions[sc.train_ref] = [by_id[sid] for sid in sc.training_fold]

    verdicts: dict[str, dict[str, str]] = {}

    # whitelist baselines: cheap, run serially
    syscall_wls = {
        ref: baselines.train_syscall_whitelist(sess)
        for ref, sess in fold_sessions.items()
        if "systrace" in config.systems
    }
    for system in config.systems:
        if system == "systrace":
            verdicts[system] = {
                sc.id: baselines.classify_systrace(
                    syscall_wls[sc.train_ref], timelines[sc.id]
                )
                for sc in roster.scenarios
            }
        elif system in baselines.SIG_VARIANTS:
            wls = {
                ref: baselines.train_signal_whitelist(sess, system)
                for ref, sess in fold_sessions.items()
            }
            verdicts[system] = {
                sc.id: baselines.classify_sig(wls[sc.train_ref], timelines[sc.id])
                for sc in roster.scenarios
            }

    # tissue systems: train per fold, fan scenario runs over threads
    tick_systems = [s for s in config.systems if s in _TICK_SYSTEMS]
    profiles: dict[tuple[str, str], TrainedProfile] = {}
    for system in tick_systems:
        for ref, sess in fold_sessions.items():
            profiles[(system, ref)] = train(
                sess, VARIANTS[system], dataset.universe_size
            )

    def run_one(system: str, sc: Scenario) -> tuple[str, str, str]:
        seed = derive_seed(
            config.seed,
            zlib.crc32(system.encode()),
            zlib.crc32(sc.id.encode()),
        )
        detector = build_detector(
            profiles[(system, sc.train_ref)],
            VARIANTS[system],
            params=config.params,
            seed=seed,
            exhaustive=config.exhaustive,
            backend=config.backend,
        )
        result = detector.run_scenario(timelines[sc.id])
        return system, sc.id, result.verdict

    tasks = [(system, sc) for system in tick_systems for sc in roster.scenarios]
    if tasks:
        jobs = config.resolved_jobs()
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                outcomes = list(pool.map(lambda t: run_one(*t), tasks))
        else:
            outcomes = [run_one(*t) for t in tasks]
        for system, sid, verdict in outcomes:
            verdicts.setdefault(system, {})[sid] = verdict

    ordered_ids = sorted(truths)
    rows = []
    for system in config.systems:
        counts = confusion(
            [verdicts[system][sid] for sid in ordered_ids],
            [truths[sid] for sid in ordered_ids],
        )
        rows.append(MetricsRow.from_counts(system, counts))
    if config.include_reference:
        for name, t, f in REFERENCE_ROWS:
            if name == "DCA":
                rows.append(MetricsRow(name, t, f, gmean(t, f), computed=False))
    return BenchOutcome(
        roster=roster,
        report=BenchReport(rows=rows),
        verdicts=verdicts,
        truths=truths,
        seed=config.seed,
        params=config.params,
    )
