"""Session trace model: syscall events, signal readings, file formats.

A session is one monitored FTP-style interaction: an ordered syscall
stream plus sampled signal readings, labelled normal / attack /
failed_attack. Sessions live on disk as three plain-text files so they
diff cleanly and golden-file easily:

* syscall trace -- lines ``t_ns pid syscall``
* signal log    -- lines ``t_ns name level``
* manifest      -- ``key value`` lines naming id, label, the two trace
  files and the session duration

``#`` starts a comment in every format. A dataset is a manifest-list
file (``universe_size`` header plus one ``session <path>`` line per
session).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    DatasetError,
    SessionValidationError,
    SignalSchemaError,
    SyscallRangeError,
    TraceParseError,
)
from .signals import SIGNAL_INDEX

DEFAULT_UNIVERSE_SIZE = 350

#: nominal spacing of signal readings: one tenth of a second, in ns
READING_SPACING_NS = 100_000_000


class SessionLabel(str, Enum):
    NORMAL = "normal"
    ATTACK = "attack"
    FAILED_ATTACK = "failed_attack"

    @property
    def is_attack_truth(self) -> bool:
        """Ground truth for scoring: failed attacks count as normal."""
        return self is SessionLabel.ATTACK


@dataclass(frozen=True)
class SyscallEvent:
    t_ns: int
    pid: int
    syscall: int


@dataclass(frozen=True)
class SignalReading:
    t_ns: int
    name: str
    level: int


@dataclass(frozen=True)
class Session:
    id: str
    label: SessionLabel
    events: tuple[SyscallEvent, ...]
    readings: tuple[SignalReading, ...]
    duration_ns: int

    def validate(self, universe_size: int = DEFAULT_UNIVERSE_SIZE) -> None:
        if not self.id:
            raise SessionValidationError("session id must be non-empty")
        if self.duration_ns < 0:
            raise SessionValidationError(f"{self.id}: negative duration")
        last_t = -1
        for ev in self.events:
            if ev.t_ns < last_t:
                raise SessionValidationError(
                    f"{self.id}: events not sorted by time at t={ev.t_ns}"
                )
            last_t = ev.t_ns
            if not 0 <= ev.syscall < universe_size:
                raise SessionValidationError(
                    f"{self.id}: syscall {ev.syscall} outside universe "
                    f"[0, {universe_size})"
                )
            if ev.t_ns > self.duration_ns:
                raise SessionValidationError(
                    f"{self.id}: event at t={ev.t_ns} past duration "
                    f"{self.duration_ns}"
                )
        per_name_last: dict[str, int] = {}
        for rd in self.readings:
            if rd.name not in SIGNAL_INDEX:
                raise SessionValidationError(
                    f"{self.id}: unknown signal name {rd.name!r}"
                )
            if rd.t_ns < per_name_last.get(rd.name, -1):
                raise SessionValidationError(
                    f"{self.id}: readings for {rd.name} not sorted by time"
                )
            per_name_last[rd.name] = rd.t_ns
            if rd.t_ns > self.duration_ns:
                raise SessionValidationError(
                    f"{self.id}: reading at t={rd.t_ns} past duration "
                    f"{self.duration_ns}"
                )

    def syscall_set(self) -> frozenset[int]:
        return frozenset(ev.syscall for ev in self.events)

    def levels(self, name: str) -> list[int]:
        return [rd.level for rd in self.readings if rd.name == name]


@dataclass
class Dataset:
    universe_size: int
    sessions: list[Session] = field(default_factory=list)

    def validate(self) -> None:
        seen: set[str] = set()
        for s in self.sessions:
            if s.id in seen:
                raise DatasetError(f"duplicate session id {s.id!r}")
            seen.add(s.id)
            s.validate(self.universe_size)

    def by_label(self, label: SessionLabel) -> list[Session]:
        return [s for s in self.sessions if s.label == label]

    def get(self, session_id: str) -> Session:
        for s in self.sessions:
            if s.id == session_id:
                return s
        raise DatasetError(f"no session {session_id!r} in dataset")


# ---------------------------------------------------------------------------
# Line-oriented parsing / serialization
# ---------------------------------------------------------------------------


def _data_lines(text: str) -> Iterable[tuple[int, str]]:
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield no, line


def parse_syscall_trace(
    text: str, universe_size: int = DEFAULT_UNIVERSE_SIZE
) -> list[SyscallEvent]:
    """Parse ``t_ns pid syscall`` lines into events, enforcing order."""
    events: list[SyscallEvent] = []
    last_t = -1
    for no, line in _data_lines(text):
        parts = line.split()
        if len(parts) != 3:
            raise TraceParseError(
                f"expected 't_ns pid syscall', got {line!r}", line_no=no
            )
        try:
            t, pid, sc = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError:
            raise TraceParseError(f"non-integer field in {line!r}", line_no=no)
        if t < 0 or pid < 0:
            raise TraceParseError(f"negative field in {line!r}", line_no=no)
        if not 0 <= sc < universe_size:
            raise SyscallRangeError(
                f"syscall {sc} outside universe [0, {universe_size})", line_no=no
            )
        if t < last_t:
            raise TraceParseError(
                f"events out of order: t={t} after t={last_t}", line_no=no
            )
        last_t = t
        events.append(SyscallEvent(t, pid, sc))
    return events


def serialize_syscall_trace(events: Sequence[SyscallEvent]) -> str:
    return "".join(f"{e.t_ns} {e.pid} {e.syscall}\n" for e in events)


def parse_signal_log(text: str) -> list[SignalReading]:
    """Parse ``t_ns name level`` lines; names must be catalog signals."""
    readings: list[SignalReading] = []
    per_name_last: dict[str, int] = {}
    for no, line in _data_lines(text):
        parts = line.split()
        if len(parts) != 3:
            raise TraceParseError(
                f"expected 't_ns name level', got {line!r}", line_no=no
            )
        try:
            t, level = int(parts[0]), int(parts[2])
        except ValueError:
            raise TraceParseError(f"non-integer field in {line!r}", line_no=no)
        name = parts[1]
        if name not in SIGNAL_INDEX:
            raise SignalSchemaError(f"unknown signal name {name!r}", line_no=no)
        if t < 0:
            raise TraceParseError(f"negative timestamp in {line!r}", line_no=no)
        if t < per_name_last.get(name, -1):
            raise TraceParseError(
                f"readings for {name} out of order at t={t}", line_no=no
            )
        per_name_last[name] = t
        readings.append(SignalReading(t, name, level))
    return readings


def serialize_signal_log(readings: Sequence[SignalReading]) -> str:
    return "".join(f"{r.t_ns} {r.name} {r.level}\n" for r in readings)


def group_readings(readings: Sequence[SignalReading]) -> dict[str, list[SignalReading]]:
    groups: dict[str, list[SignalReading]] = {}
    for r in readings:
        groups.setdefault(r.name, []).append(r)
    return groups


# ---------------------------------------------------------------------------
# Manifest / dataset IO
# ---------------------------------------------------------------------------

_MANIFEST_KEYS = ("id", "label", "syscalls", "signals", "duration_ns")


def _parse_kv(text: str, what: str) -> dict[str, list[str]]:
    fields: dict[str, list[str]] = {}
    for no, line in _data_lines(text):
        parts = line.split(None, 1)
        if len(parts) != 2:
            raise DatasetError(f"{what}: malformed line {no}: {line!r}")
        fields.setdefault(parts[0], []).append(parts[1].strip())
    return fields


def load_session(
    manifest_path: str | Path, universe_size: int = DEFAULT_UNIVERSE_SIZE
) -> Session:
    """Load and validate one session from its manifest file."""
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise DatasetError(f"missing manifest {manifest_path}")
    fields = _parse_kv(manifest_path.read_text(), str(manifest_path))
    for key in _MANIFEST_KEYS:
        if key not in fields:
            raise DatasetError(f"{manifest_path}: missing {key!r}")
        if len(fields[key]) > 1:
            raise DatasetError(f"{manifest_path}: duplicate {key!r}")
    label_raw = fields["label"][0]
    try:
        label = SessionLabel(label_raw)
    except ValueError:
        raise DatasetError(f"{manifest_path}: bad label {label_raw!r}")
    base = manifest_path.parent
    sys_path = base / fields["syscalls"][0]
    sig_path = base / fields["signals"][0]
    for p in (sys_path, sig_path):
        if not p.is_file():
            raise DatasetError(f"{manifest_path}: missing trace file {p}")
    try:
        duration = int(fields["duration_ns"][0])
    except ValueError:
        raise DatasetError(f"{manifest_path}: bad duration_ns")
    session = Session(
        id=fields["id"][0],
        label=label,
        events=tuple(parse_syscall_trace(sys_path.read_text(), universe_size)),
        readings=tuple(parse_signal_log(sig_path.read_text())),
        duration_ns=duration,
    )
    session.validate(universe_size)
    return session


def save_session(session: Session, directory: str | Path) -> Path:
    """Write a session directory; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "events.trace").write_text(serialize_syscall_trace(session.events))
    (directory / "signals.trace").write_text(serialize_signal_log(session.readings))
    manifest = directory / "session.manifest"
    manifest.write_text(
        f"id {session.id}\n"
        f"label {session.label.value}\n"
        "syscalls events.trace\n"
        "signals signals.trace\n"
        f"duration_ns {session.duration_ns}\n"
    )
    return manifest


def load_dataset(path: str | Path) -> Dataset:
    """Load a dataset from its manifest-list file (or directory)."""
    path = Path(path)
    if path.is_dir():
        path = path / "dataset.manifest"
    if not path.is_file():
        raise DatasetError(f"missing dataset manifest {path}")
    fields = _parse_kv(path.read_text(), str(path))
    if "universe_size" not in fields:
        raise DatasetError(f"{path}: missing universe_size")
    universe = int(fields["universe_size"][0])
    sessions = [
        load_session(path.parent / rel, universe) for rel in fields.get("session", [])
    ]
    ds = Dataset(universe_size=universe, sessions=sessions)
    ds.validate()
    return ds


def save_dataset(dataset: Dataset, directory: str | Path, header: str = "") -> Path:
    """Write all sessions plus the dataset manifest; returns its path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    lines.append(f"universe_size {dataset.universe_size}")
    for session in dataset.sessions:
        rel = Path("sessions") / session.id / "session.manifest"
        save_session(session, directory / rel.parent)
        lines.append(f"session {rel.as_posix()}")
    manifest = directory / "dataset.manifest"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


def dataset_hash(path: str | Path) -> str:
    """Content hash of a dataset on disk (manifest plus session files)."""
    path = Path(path)
    if path.is_dir():
        path = path / "dataset.manifest"
    if not path.is_file():
        raise DatasetError(f"missing dataset manifest {path}")
    h = hashlib.sha256()
    h.update(path.read_bytes())
    fields = _parse_kv(path.read_text(), str(path))
    for rel in fields.get("session", []):
        mp = path.parent / rel
        h.update(mp.read_bytes())
        mf = _parse_kv(mp.read_text(), str(mp))
        for key in ("syscalls", "signals"):
            h.update((mp.parent / mf[key][0]).read_bytes())
    return h.hexdigest()[:16]


# ---------------------------------------------------------------------------
# Deduplication
# ---------------------------------------------------------------------------


def _near_duplicate(a: Session, b: Session, tol_ns: int) -> bool:
    if len(a.events) != len(b.events):
        return False
    for ea, eb in zip(a.events, b.events):
        if ea.syscall != eb.syscall:
            return False
        if abs(ea.t_ns - eb.t_ns) > tol_ns:
            return False
    return True


def dedup_sessions(
    sessions: Sequence[Session], tolerance_s: float = 1.0
) -> list[Session]:
    """Drop near-duplicate sessions, keeping the first of each group by id.

    Two sessions are near-duplicates when their syscall-number sequences
    are identical and every pair of corresponding event times differs by
    at most the tolerance. Representatives are chosen greedily in id
    order, which makes the operation idempotent.
    """
    if tolerance_s < 0:
        raise ValueError("tolerance must be >= 0")
    tol_ns = int(tolerance_s * 1e9)
    reps: list[Session] = []
    for session in sorted(sessions, key=lambda s: s.id):
        if not any(_near_duplicate(session, rep, tol_ns) for rep in reps):
            reps.append(session)
    return reps
