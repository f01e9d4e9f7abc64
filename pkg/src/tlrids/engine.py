"""Training, detector variants, and scenario-level detection.

Training extracts what "normal" looks like from normal sessions only:
the set of syscall numbers seen (``normal_antigen``) and, per monitored
signal, the set of levels seen (``normal_levels``). The lock-value pool
for naive TCs is the complement of the antigen set over the syscall
universe, so no lock can ever match a trained syscall.

Variants:

* ``tlr1`` monitors rss; ``tlr2`` adds num_files; ``tlr3`` adds num_reg.
* ``negsel`` disables the context receptors entirely and lets
  semimature DCs activate TCs (no peripheral tolerance), which reduces
  the system to pure negative selection over syscall numbers.

A detector replays a scenario timeline tick by tick and returns the
alert list; the scenario verdict is "attack" exactly when at least one
alert fired.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import _kernels as K
from .errors import (
    EmptyPermissibleSetError,
    TlridsError,
    TrainingLabelError,
    UnknownSignalError,
)
from .sessions import DEFAULT_UNIVERSE_SIZE, Session, SessionLabel
from .signals import SIGNAL_INDEX
from .tissue import Tissue, TissueContext, TissueParams, replay_schedule


@dataclass(frozen=True)
class DetectorVariant:
    name: str
    signals: tuple[str, ...]
    tlr_enabled: bool
    tolerance: bool

    def __post_init__(self):
        for s in self.signals:
            if s not in SIGNAL_INDEX:
                raise UnknownSignalError(f"unknown signal {s!r}")


VARIANTS: dict[str, DetectorVariant] = {
    "tlr1": DetectorVariant("tlr1", ("rss",), True, True),
    "tlr2": DetectorVariant("tlr2", ("rss", "num_files"), True, True),
    "tlr3": DetectorVariant("tlr3", ("rss", "num_files", "num_reg"), True, True),
    "negsel": DetectorVariant("negsel", (), False, False),
}


@dataclass(frozen=True)
class TrainedProfile:
    universe_size: int
    signal_names: tuple[str, ...]
    normal_antigen: frozenset[int]
    normal_levels: Mapping[str, frozenset[int]]
    training_ids: tuple[str, ...] = ()

    @property
    def permissible(self) -> tuple[int, ...]:
        return tuple(
            v for v in range(self.universe_size) if v not in self.normal_antigen
        )

    def canonical(self) -> str:
        lines = [f"universe_size {self.universe_size}"]
        lines.append("signals " + " ".join(self.signal_names))
        lines.append("sessions " + " ".join(self.training_ids))
        lines.append("antigen " + " ".join(str(v) for v in sorted(self.normal_antigen)))
        for name in self.signal_names:
            levels = " ".join(str(v) for v in sorted(self.normal_levels.get(name, ())))
            lines.append(f"levels {name} {levels}".rstrip())
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.canonical())

    @classmethod
    def load(cls, path: str | Path) -> "TrainedProfile":
        universe = DEFAULT_UNIVERSE_SIZE
        signal_names: tuple[str, ...] = ()
        training: tuple[str, ...] = ()
        antigen: frozenset[int] = frozenset()
        levels: dict[str, frozenset[int]] = {}
        for raw in Path(path).read_text().splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            key = parts[0]
            if key == "universe_size":
                universe = int(parts[1])
            elif key == "signals":
                signal_names = tuple(parts[1:])
            elif key == "sessions":
                training = tuple(parts[1:])
            elif key == "antigen":
                antigen = frozenset(int(v) for v in parts[1:])
            elif key == "levels":
                levels[parts[1]] = frozenset(int(v) for v in parts[2:])
            else:
                raise TlridsError(f"{path}: unknown profile key {key!r}")
        return cls(universe, signal_names, antigen, levels, training)


def train(
    sessions: Sequence[Session],
    variant: DetectorVariant,
    universe_size: int = DEFAULT_UNIVERSE_SIZE,
) -> TrainedProfile:
    """Build a normal-behaviour profile from normal sessions only."""
    antigen: set[int] = set()
    levels: dict[str, set[int]] = {name: set() for name in variant.signals}
    ids = []
    for s in sessions:
        if s.label is not SessionLabel.NORMAL:
            raise TrainingLabelError(
                f"session {s.id!r} is {s.label.value}; training takes normal only"
            )
        ids.append(s.id)
        for ev in s.events:
            antigen.add(ev.syscall)
        for rd in s.readings:
            if rd.name in levels:
                levels[rd.name].add(rd.level)
    return TrainedProfile(
        universe_size=universe_size,
        signal_names=variant.signals,
        normal_antigen=frozenset(antigen),
        normal_levels={k: frozenset(v) for k, v in levels.items()},
        training_ids=tuple(ids),
    )


@dataclass(frozen=True)
class Alert:
    tick: int
    syscall: int
    source: str  # kind of the matched DC: "mDC", or "smDC" under negsel


@dataclass
class DetectionResult:
    scenario_id: str
    alerts: tuple[Alert, ...]
    n_ticks: int
    activations: int
    tolerance_deletions: int
    blocked_spawns: int
    seed: int
    pop_trace: np.ndarray | None = None

    @property
    def is_attack(self) -> bool:
        return len(self.alerts) > 0

    @property
    def verdict(self) -> str:
        return "attack" if self.is_attack else "normal"


def write_alert_log(result: DetectionResult, path: str | Path, header: str = "") -> None:
    """Alert log: one ``tick syscall`` line per alert."""
    lines = [f"# {h}" for h in header.splitlines() if h]
    lines.extend(f"{a.tick} {a.syscall}" for a in result.alerts)
    Path(path).write_text("\n".join(lines) + "\n" if lines else "")


class Detector:
    """A trained detector: owns profile, variant, params, and a seed.

    Each ``run_scenario`` call builds a fresh tissue, so a detector can
    be reused across scenarios; runs are deterministic functions of
    (profile, variant, params, seed, timeline).
    """

    def __init__(
        self,
        profile: TrainedProfile,
        variant: DetectorVariant,
        params: TissueParams | None = None,
        seed: int = 0,
        exhaustive: bool = False,
        backend: bool | None = None,
    ):
        missing = [s for s in variant.signals if s not in profile.signal_names]
        if missing:
            raise UnknownSignalError(
                f"profile lacks trained levels for {missing}; retrain for "
                f"variant {variant.name!r}"
            )
        permissible = profile.permissible
        if not permissible:
            raise EmptyPermissibleSetError(
                "training saw the whole universe; no lock values remain"
            )
        params = params or TissueParams()
        if variant.signals:
            # context-receptor count tracks the monitored signal list
            params = params.with_overrides(
                max_cytokines=len(variant.signals),
                num_cytokine_receptors_1=len(variant.signals),
            )
        params.validate()
        self.profile = profile
        self.variant = variant
        self.params = params
        self.seed = seed
        self.exhaustive = exhaustive
        self.backend = backend
        self._context = TissueContext(
            universe_size=profile.universe_size,
            signal_names=variant.signals,
            normal_levels={s: profile.normal_levels[s] for s in variant.signals},
            permissible=permissible,
            tlr_enabled=variant.tlr_enabled,
            sm_as_mature=not variant.tolerance,
            lock_sweep=exhaustive,
            seed=seed,
        )

    def new_tissue(self) -> Tissue:
        return Tissue(self.params, self._context, backend=self.backend)

    @property
    def drain_ticks(self) -> int:
        """Extra ticks after the last event so in-flight antigen can
        finish the DC -> TC pipeline (collect, migrate, get inspected)."""
        return self.params.cell_lifespan_1 + self.params.cell_lifespan_3 + 100

    def _schedule(self, timeline) -> tuple[np.ndarray, ...]:
        tick_ns = self.params.tick_ns
        ev_tick = timeline.events_t_ns // tick_ns
        ev_sys = timeline.events_sys
        # keep only monitored signals: datasets carry the full catalog,
        # a detector consumes its own subset
        slot_of = np.full(len(SIGNAL_INDEX), -1, dtype=np.int64)
        for i, name in enumerate(self.variant.signals):
            slot_of[SIGNAL_INDEX[name]] = i
        slots = slot_of[timeline.readings_sig]
        keep = slots >= 0
        rd_tick = timeline.readings_t_ns[keep] // tick_ns
        rd_sig = slots[keep]
        rd_level = timeline.readings_level[keep]
        return ev_tick, ev_sys, rd_tick, rd_sig, rd_level

    def run_scenario(
        self,
        timeline,
        record_populations: bool = False,
        pacing: bool = False,
    ) -> DetectionResult:
        """Replay a timeline and return alerts plus tick-level counters."""
        tissue = self.new_tissue()
        ev_tick, ev_sys, rd_tick, rd_sig, rd_level = self._schedule(timeline)
        n_ticks = int(timeline.span_ns // self.params.tick_ns) + 1 + self.drain_ticks
        if pacing:
            alert_rows = self._run_paced(
                tissue, ev_tick, ev_sys, rd_tick, rd_sig, rd_level, n_ticks
            )
            pops = None
        else:
            at, asys, asrc, pop_trace = replay_schedule(
                tissue, ev_tick, ev_sys, rd_tick, rd_sig, rd_level, n_ticks
            )
            alert_rows = list(zip(at.tolist(), asys.tolist(), asrc.tolist()))
            pops = pop_trace if record_populations else None
        alerts = tuple(
            Alert(t, s, "smDC" if src == K.KIND_SEMIMATURE else "mDC")
            for t, s, src in alert_rows
        )
        for a in alerts:
            assert a.syscall not in self.profile.normal_antigen, (
                f"soundness violation: alert on trained syscall {a.syscall}"
            )
        return DetectionResult(
            scenario_id=getattr(timeline, "scenario_id", ""),
            alerts=alerts,
            n_ticks=n_ticks,
            activations=int(tissue.scal[K.S_ACTIVATIONS]),
            tolerance_deletions=int(tissue.scal[K.S_TOLERANCE]),
            blocked_spawns=int(tissue.scal[K.S_BLOCKED]),
            seed=self.seed,
            pop_trace=pops,
        )

    def _run_paced(
        self, tissue, ev_tick, ev_sys, rd_tick, rd_sig, rd_level, n_ticks
    ) -> list[tuple[int, int, int]]:
        """Wall-clock replay: one cell_update_rate interval per tick."""
        period_s = self.params.cell_update_rate_us / 1e6
        names = self.variant.signals
        alert_rows: list[tuple[int, int, int]] = []
        ei = ri = 0
        for t in range(n_ticks):
            start = time.monotonic()
            while ei < len(ev_tick) and ev_tick[ei] <= t:
                tissue.inject_antigen(int(ev_sys[ei]))
                ei += 1
            while ri < len(rd_tick) and rd_tick[ri] <= t:
                tissue.set_signal(names[int(rd_sig[ri])], int(rd_level[ri]))
                ri += 1
            before = tissue.total_alerts
            tissue.step()
            for j in range(before, tissue.total_alerts):
                alert_rows.append(
                    (int(tissue.alerts_tick[j]), int(tissue.alerts_sys[j]),
                     int(tissue.alerts_src[j]))
                )
            leftover = period_s - (time.monotonic() - start)
            if leftover > 0:
                time.sleep(leftover)
        return alert_rows


def build_detector(
    profile: TrainedProfile,
    variant: DetectorVariant | str,
    params: TissueParams | None = None,
    seed: int = 0,
    exhaustive: bool = False,
    backend: bool | None = None,
) -> Detector:
    if isinstance(variant, str):
        try:
            variant = VARIANTS[variant]
        except KeyError:
            raise TlridsError(
                f"unknown variant {variant!r}; choose from {sorted(VARIANTS)}"
            )
    return Detector(profile, variant, params, seed, exhaustive, backend)


def write_probe_log(result: DetectionResult, path: str | Path,
                    probe_interval: int, header: str = "") -> None:
    """Population probe log sampled every probe interval.

    Columns: tick iDC smDC mDC nTC aTC alerts_so_far.
    """
    if result.pop_trace is None:
        raise TlridsError("run with record_populations=True to emit probes")
    lines = [f"# {h}" for h in header.splitlines() if h]
    lines.append("# tick iDC smDC mDC nTC aTC alerts")
    alert_ticks = np.array([a.tick for a in result.alerts], dtype=np.int64)
    for t in range(0, result.pop_trace.shape[0], probe_interval):
        row = result.pop_trace[t]
        seen = int((alert_ticks <= t).sum())
        lines.append(
            f"{t} {row[0]} {row[1]} {row[2]} {row[3]} {row[4]} {seen}"
        )
    Path(path).write_text("\n".join(lines) + "\n")
