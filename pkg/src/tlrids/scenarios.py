"""Benchmark protocol: crossvalidation partitions, scenarios, rosters.

A scenario is a sequence of sessions replayed back to back with random
1..10 s pauses, scored as a single classification instance against the
training fold drawn from the opposite half of a two-fold partition of
the normal corpus. The default roster is 40 scenarios: 16 plain-normal
(eight partitions, both fold directions), 4 normal-with-failed-attack,
and 20 attack (success01 and success02 six times each, success03 and
success04 four times each), every attack spliced into a random point of
a fresh partition's test fold.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ScenarioError
from .sessions import Dataset, Session, SessionLabel
from .signals import SIGNAL_INDEX, SIGNAL_NAMES

ATTACK_KINDS = ("success01", "success02", "success03", "success04")
FAILED_KIND = "failure01"

DEFAULT_ATTACK_MULTIPLICITY: dict[str, int] = {
    "success01": 6,
    "success02": 6,
    "success03": 4,
    "success04": 4,
}

PAUSE_RANGE_S = (1, 10)


@dataclass(frozen=True)
class PartitionPlan:
    name: str
    fold_a: tuple[str, ...]
    fold_b: tuple[str, ...]
    replicate: int
    seed: int

    def fold(self, label: str) -> tuple[str, ...]:
        if label == "A":
            return self.fold_a
        if label == "B":
            return self.fold_b
        raise ScenarioError(f"fold label must be A or B, got {label!r}")


@dataclass(frozen=True)
class Scenario:
    id: str
    members: tuple[tuple[str, int], ...]  # (session id, pause after in s)
    train_ref: str  # "<partition>.<fold>": the fold the detector trains on
    training_fold: tuple[str, ...]
    ground_truth_attack: bool

    def validate(self) -> None:
        if not self.members:
            raise ScenarioError(f"{self.id}: empty scenario")
        lo, hi = PAUSE_RANGE_S
        for sid, pause in self.members[:-1]:
            if not lo <= pause <= hi:
                raise ScenarioError(
                    f"{self.id}: pause after {sid} must be in [{lo}, {hi}] s"
                )
        if self.members[-1][1] != 0:
            raise ScenarioError(f"{self.id}: last member must have pause 0")
        overlap = set(sid for sid, _ in self.members) & set(self.training_fold)
        if overlap:
            raise ScenarioError(
                f"{self.id}: members {sorted(overlap)} appear in the training fold"
            )

    @property
    def session_ids(self) -> tuple[str, ...]:
        return tuple(sid for sid, _ in self.members)


@dataclass
class Roster:
    seed: int
    partitions: list[PartitionPlan]
    scenarios: list[Scenario]

    def validate(self) -> None:
        for sc in self.scenarios:
            sc.validate()
        ids = [sc.id for sc in self.scenarios]
        if len(set(ids)) != len(ids):
            raise ScenarioError("duplicate scenario ids in roster")


def partition_twofold(
    sessions: Sequence[Session | str],
    rng: np.random.Generator,
    name: str = "p0",
    replicate: int = 0,
    seed: int = 0,
) -> PartitionPlan:
    """Random disjoint split into folds of size floor(N/2) and ceil(N/2)."""
    ids = [s if isinstance(s, str) else s.id for s in sessions]
    if len(ids) < 2:
        raise ScenarioError("need at least two sessions to partition")
    if len(set(ids)) != len(ids):
        raise ScenarioError("duplicate session ids in partition input")
    order = rng.permutation(len(ids))
    half = len(ids) // 2
    fold_a = tuple(ids[i] for i in order[:half])
    fold_b = tuple(ids[i] for i in order[half:])
    return PartitionPlan(name, fold_a, fold_b, replicate, seed)


def _pauses(rng: np.random.Generator, n_members: int) -> list[int]:
    lo, hi = PAUSE_RANGE_S
    gaps = [int(v) for v in rng.integers(lo, hi + 1, size=max(0, n_members - 1))]
    return gaps + [0]


def _sequence_scenario(
    scenario_id: str,
    test_ids: Sequence[str],
    train_ref: str,
    training_fold: tuple[str, ...],
    rng: np.random.Generator,
    insert: str | None = None,
    ground_truth_attack: bool = False,
) -> Scenario:
    order = [test_ids[i] for i in rng.permutation(len(test_ids))]
    if insert is not None:
        slot = int(rng.integers(0, len(order) + 1))
        order.insert(slot, insert)
    pauses = _pauses(rng, len(order))
    scenario = Scenario(
        id=scenario_id,
        members=tuple(zip(order, pauses)),
        train_ref=train_ref,
        training_fold=training_fold,
        ground_truth_attack=ground_truth_attack,
    )
    scenario.validate()
    return scenario


def build_roster(
    normals: Sequence[Session],
    attacks: Mapping[str, Session],
    failed: Session,
    rng: np.random.Generator,
    seed: int = 0,
    n_partitions: int = 8,
    attack_multiplicity: Mapping[str, int] | None = None,
    n_failure: int = 4,
) -> Roster:
    """Assemble the benchmark roster (defaults give the 40-scenario set)."""
    attack_multiplicity = dict(attack_multiplicity or DEFAULT_ATTACK_MULTIPLICITY)
    for s in normals:
        if s.label is not SessionLabel.NORMAL:
            raise ScenarioError(f"{s.id} is not a normal session")
    for kind in attack_multiplicity:
        if kind not in attacks:
            raise ScenarioError(f"missing attack session for kind {kind!r}")
        if attacks[kind].label is not SessionLabel.ATTACK:
            raise ScenarioError(f"{kind} session must carry the attack label")
    if failed.label is not SessionLabel.FAILED_ATTACK:
        raise ScenarioError("failed session must carry the failed_attack label")

    partitions: list[PartitionPlan] = []
    scenarios: list[Scenario] = []
    part_no = 0

    def new_partition(replicate: int) -> PartitionPlan:
        nonlocal part_no
        plan = partition_twofold(
            normals, rng, name=f"p{part_no:02d}", replicate=replicate, seed=seed
        )
        part_no += 1
        partitions.append(plan)
        return plan

    # plain-normal scenarios: two per partition, one per fold direction
    for rep in range(n_partitions):
        plan = new_partition(rep)
        for train_label, test_label in (("A", "B"), ("B", "A")):
            scenarios.append(
                _sequence_scenario(
                    f"normal-{plan.name}{train_label.lower()}",
                    plan.fold(test_label),
                    f"{plan.name}.{train_label}",
                    plan.fold(train_label),
                    rng,
                )
            )

    # attack scenarios: fresh partition each, attack spliced at random
    for kind in sorted(attack_multiplicity):
        for rep in range(attack_multiplicity[kind]):
            plan = new_partition(rep)
            train_label, test_label = ("A", "B") if rng.integers(2) == 0 else ("B", "A")
            scenarios.append(
                _sequence_scenario(
                    f"attack-{kind}-{rep}",
                    plan.fold(test_label),
                    f"{plan.name}.{train_label}",
                    plan.fold(train_label),
                    rng,
                    insert=attacks[kind].id,
                    ground_truth_attack=True,
                )
            )

    # failed-attack scenarios: ground truth stays normal
    for rep in range(n_failure):
        plan = new_partition(rep)
        train_label, test_label = ("A", "B") if rng.integers(2) == 0 else ("B", "A")
        scenarios.append(
            _sequence_scenario(
                f"failure-{FAILED_KIND}-{rep}",
                plan.fold(test_label),
                f"{plan.name}.{train_label}",
                plan.fold(train_label),
                rng,
                insert=failed.id,
                ground_truth_attack=False,
            )
        )

    roster = Roster(seed=seed, partitions=partitions, scenarios=scenarios)
    roster.validate()
    return roster


# ---------------------------------------------------------------------------
# Timeline assembly
# ---------------------------------------------------------------------------


@dataclass
class Timeline:
    """Flat replay schedule: absolute-offset events and readings."""

    scenario_id: str
    events_t_ns: np.ndarray
    events_pid: np.ndarray
    events_sys: np.ndarray
    readings_t_ns: np.ndarray
    readings_sig: np.ndarray  # catalog index into SIGNAL_NAMES
    readings_level: np.ndarray
    span_ns: int


def assemble_timeline(
    scenario: Scenario, sessions: Dataset | Mapping[str, Session]
) -> Timeline:
    """Concatenate member sessions with pause gaps into one schedule.

    Intra-session event order and spacing are preserved exactly; pauses
    contribute no events and no readings.
    """
    scenario.validate()
    if isinstance(sessions, Dataset):
        lookup = {s.id: s for s in sessions.sessions}
    else:
        lookup = dict(sessions)
    ev_t: list[int] = []
    ev_pid: list[int] = []
    ev_sys: list[int] = []
    rd_t: list[int] = []
    rd_sig: list[int] = []
    rd_level: list[int] = []
    cursor = 0
    for sid, pause_s in scenario.members:
        try:
            session = lookup[sid]
        except KeyError:
            raise ScenarioError(f"{scenario.id}: unknown session {sid!r}")
        for ev in session.events:
            ev_t.append(cursor + ev.t_ns)
            ev_pid.append(ev.pid)
            ev_sys.append(ev.syscall)
        for rd in session.readings:
            rd_t.append(cursor + rd.t_ns)
            rd_sig.append(SIGNAL_INDEX[rd.name])
            rd_level.append(rd.level)
        cursor += session.duration_ns + pause_s * 1_000_000_000

    events_t = np.asarray(ev_t, dtype=np.int64)
    readings_t = np.asarray(rd_t, dtype=np.int64)
    # sessions store readings grouped by signal; the replay pointer needs
    # global time order (stable, so same-tick file order still wins last)
    ev_order = np.argsort(events_t, kind="stable")
    rd_order = np.argsort(readings_t, kind="stable")
    return Timeline(
        scenario_id=scenario.id,
        events_t_ns=events_t[ev_order],
        events_pid=np.asarray(ev_pid, dtype=np.int32)[ev_order],
        events_sys=np.asarray(ev_sys, dtype=np.int32)[ev_order],
        readings_t_ns=readings_t[rd_order],
        readings_sig=np.asarray(rd_sig, dtype=np.int64)[rd_order],
        readings_level=np.asarray(rd_level, dtype=np.int64)[rd_order],
        span_ns=cursor,
    )


def single_session_timeline(session: Session) -> Timeline:
    """Identity timeline for one session (used by baselines and detect)."""
    sc = Scenario(
        id=session.id,
        members=((session.id, 0),),
        train_ref="",
        training_fold=(),
        ground_truth_attack=session.label is SessionLabel.ATTACK,
    )
    return assemble_timeline(sc, {session.id: session})


# ---------------------------------------------------------------------------
# Roster manifest IO
# ---------------------------------------------------------------------------


def write_roster(roster: Roster, path: str | Path, header: str = "") -> None:
    lines = [f"# {h}" for h in header.splitlines() if h]
    lines.append(f"roster_seed {roster.seed}")
    for p in roster.partitions:
        lines.append(
            f"partition {p.name} replicate {p.replicate} seed {p.seed} "
            f"foldA {','.join(p.fold_a)} foldB {','.join(p.fold_b)}"
        )
    for sc in roster.scenarios:
        members = ",".join(f"{sid}:{pause}" for sid, pause in sc.members)
        truth = "attack" if sc.ground_truth_attack else "normal"
        lines.append(
            f"scenario {sc.id} truth {truth} train {sc.train_ref} members {members}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_roster(path: str | Path) -> Roster:
    seed = 0
    partitions: dict[str, PartitionPlan] = {}
    scenarios: list[Scenario] = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "roster_seed":
            seed = int(parts[1])
        elif parts[0] == "partition":
            name = parts[1]
            fields = dict(zip(parts[2::2], parts[3::2]))
            partitions[name] = PartitionPlan(
                name=name,
                fold_a=tuple(fields["foldA"].split(",")),
                fold_b=tuple(fields["foldB"].split(",")),
                replicate=int(fields["replicate"]),
                seed=int(fields["seed"]),
            )
        elif parts[0] == "scenario":
            fields = dict(zip(parts[2::2], parts[3::2]))
            raise_if = [k for k in ("truth", "train", "members") if k not in fields]
            if raise_if:
                raise ScenarioError(f"roster line missing {raise_if}: {line!r}")
            pname, fold_label = fields["train"].split(".")
            plan = partitions[pname]
            members = tuple(
                (sid_pause.split(":")[0], int(sid_pause.split(":")[1]))
                for sid_pause in fields["members"].split(",")
            )
            scenarios.append(
                Scenario(
                    id=parts[1],
                    members=members,
                    train_ref=fields["train"],
                    training_fold=plan.fold(fold_label),
                    ground_truth_attack=fields["truth"] == "attack",
                )
            )
    roster = Roster(seed=seed, partitions=list(partitions.values()), scenarios=scenarios)
    roster.validate()
    return roster
