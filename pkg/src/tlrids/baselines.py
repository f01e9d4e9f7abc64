"""Whitelist baseline classifiers.

``systrace``-style: permit every syscall observed during normal usage,
flag a scenario when any unlisted syscall appears. ``sig1``/``sig2``/
``sig3``: the same idea over exact signal levels (rss; rss+num_files;
rss+num_files+num_reg). Verdicts ignore session labels; scoring deals
with ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .errors import TrainingLabelError, UnknownSignalError
from .sessions import Session, SessionLabel
from .signals import SIGNAL_INDEX

SIG_VARIANTS: dict[str, tuple[str, ...]] = {
    "sig1": ("rss",),
    "sig2": ("rss", "num_files"),
    "sig3": ("rss", "num_files", "num_reg"),
}


def _check_normal(sessions: Sequence[Session]) -> None:
    for s in sessions:
        if s.label is not SessionLabel.NORMAL:
            raise TrainingLabelError(
                f"session {s.id!r} is {s.label.value}; whitelists train on "
                "normal sessions only"
            )


@dataclass(frozen=True)
class SyscallWhitelist:
    allowed: frozenset[int]

    def export_text(self) -> str:
        return "".join(f"{v}\n" for v in sorted(self.allowed))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.export_text())

    @classmethod
    def load(cls, path: str | Path) -> "SyscallWhitelist":
        values = frozenset(
            int(line.split("#", 1)[0])
            for line in Path(path).read_text().splitlines()
            if line.split("#", 1)[0].strip()
        )
        return cls(values)


def train_syscall_whitelist(sessions: Sequence[Session]) -> SyscallWhitelist:
    _check_normal(sessions)
    allowed: set[int] = set()
    for s in sessions:
        allowed.update(ev.syscall for ev in s.events)
    return SyscallWhitelist(frozenset(allowed))


def classify_systrace(wl: SyscallWhitelist, timeline) -> str:
    """Attack iff the timeline contains any unlisted syscall."""
    for sc in timeline.events_sys:
        if int(sc) not in wl.allowed:
            return "attack"
    return "normal"


@dataclass(frozen=True)
class SignalWhitelist:
    signal_names: tuple[str, ...]
    allowed: Mapping[str, frozenset[int]]

    def export_text(self) -> str:
        lines = []
        for name in self.signal_names:
            levels = " ".join(str(v) for v in sorted(self.allowed.get(name, ())))
            lines.append(f"{name} {levels}".rstrip())
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.export_text())

    @classmethod
    def load(cls, path: str | Path) -> "SignalWhitelist":
        names: list[str] = []
        allowed: dict[str, frozenset[int]] = {}
        for raw in Path(path).read_text().splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] not in SIGNAL_INDEX:
                raise UnknownSignalError(f"unknown signal {parts[0]!r}")
            names.append(parts[0])
            allowed[parts[0]] = frozenset(int(v) for v in parts[1:])
        return cls(tuple(names), allowed)


def train_signal_whitelist(
    sessions: Sequence[Session], variant: str | Sequence[str]
) -> SignalWhitelist:
    if isinstance(variant, str):
        try:
            names = SIG_VARIANTS[variant]
        except KeyError:
            raise UnknownSignalError(
                f"unknown signal-whitelist variant {variant!r}; "
                f"choose from {sorted(SIG_VARIANTS)}"
            )
    else:
        names = tuple(variant)
        for n in names:
            if n not in SIGNAL_INDEX:
                raise UnknownSignalError(f"unknown signal {n!r}")
        if not names:
            raise UnknownSignalError("signal list must be non-empty")
    _check_normal(sessions)
    allowed: dict[str, set[int]] = {n: set() for n in names}
    for s in sessions:
        for rd in s.readings:
            if rd.name in allowed:
                allowed[rd.name].add(rd.level)
    return SignalWhitelist(names, {k: frozenset(v) for k, v in allowed.items()})


def classify_sig(wl: SignalWhitelist, timeline) -> str:
    """Attack iff any monitored reading shows a level not whitelisted."""
    monitored = {SIGNAL_INDEX[name]: name for name in wl.signal_names}
    for idx, level in zip(timeline.readings_sig, timeline.readings_level):
        name = monitored.get(int(idx))
        if name is not None and int(level) not in wl.allowed[name]:
            return "attack"
    return "normal"
