"""Synthetic session generator: a desk-scale stand-in corpus.

The generator mimics the statistical shape that makes the detection
problem interesting rather than any particular server:

* every normal session draws its syscall vocabulary from a shared pool
  with rank-tapered inclusion probabilities, so a random training fold
  usually misses a few rare-but-normal syscalls (these drive whitelist
  and negative-selection false positives);
* signal levels sit in per-signal integer bands that training covers
  almost completely, with a small jitter probability of emitting a
  fresh out-of-band level (these drive exact-level whitelist false
  positives, and the occasional context-signal false alarm);
* attack sessions add syscalls from a disjoint vocabulary in short
  bursts and push the interesting signals into an attack band that
  overlaps the normal band by a configurable fraction, mirroring the
  crossover seen in real resident-set-size traces.

All draws come from the caller's numpy Generator in a fixed order, so
one seed reproduces a dataset bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ProfileError
from .sessions import (
    READING_SPACING_NS,
    Dataset,
    Session,
    SessionLabel,
    SignalReading,
    SyscallEvent,
)
from .signals import SIGNAL_NAMES

ATTACK_KINDS = ("success01", "success02", "success03", "success04")
FAILED_KIND = "failure01"
ALL_KINDS = ATTACK_KINDS + (FAILED_KIND,)

#: per attack kind: indexes into attack_extra_vocab, and which of the
#: interesting signals show excursions (success04 is a scan: it moves
#: file/socket counts but barely touches memory)
_KIND_SPECS: dict[str, tuple[tuple[int, ...], tuple[str, ...]]] = {
    "success01": ((0, 1), ("rss", "num_files", "num_reg")),
    "success02": ((2, 3, 4), ("rss", "num_files", "num_reg")),
    "success03": ((5, 6, 7), ("rss", "num_files", "num_reg")),
    "success04": ((0, 5), ("num_files", "num_reg")),
}

_CONSTANT_SIGNALS: tuple[tuple[str, int], ...] = (
    ("processes", 3),
    ("cpu", 1),
    ("mem", 2),
    ("size", 1024),
    ("sz", 256),
    ("vsz", 2048),
    ("num_dir", 4),
    ("num_chr", 2),
    ("num_ipv4", 1),
    ("num_sock", 0),
    ("num_unix", 1),
    ("num_unknown", 0),
)


@dataclass(frozen=True)
class SignalBand:
    lo: int
    hi: int

    @property
    def width(self) -> int:
        return self.hi - self.lo + 1

    def contains(self, level: int) -> bool:
        return self.lo <= level <= self.hi


def derive_attack_band(normal: SignalBand, overlap_fraction: float) -> SignalBand:
    """Attack band of equal width sharing the requested level fraction."""
    shared = round(overlap_fraction * normal.width)
    lo = normal.hi - shared + 1
    return SignalBand(lo, lo + normal.width - 1)


@dataclass(frozen=True)
class SignalModel:
    name: str
    normal: SignalBand
    attack: SignalBand
    jitter: SignalBand


@dataclass(frozen=True)
class SynthProfile:
    universe_size: int = 350
    normal_vocab: tuple[int, ...] = tuple(range(3, 123, 2))
    attack_extra_vocab: tuple[int, ...] = tuple(range(160, 240, 10))
    overlap_fraction: float = 0.25
    events_per_session: tuple[int, int] = (240, 600)
    duration_s: tuple[int, int] = (30, 60)
    attack_events_per_session: tuple[int, int] = (4000, 9000)
    attack_duration_s: tuple[int, int] = (150, 250)
    attack_event_fraction: float = 0.02
    jitter_prob: float = 0.00025
    vocab_common_range: tuple[float, float] = (0.95, 0.30)
    vocab_rare_range: tuple[float, float] = (0.12, 0.03)
    n_rare_vocab: int = 6
    signal_models: tuple[SignalModel, ...] = ()
    constant_signals: tuple[tuple[str, int], ...] = _CONSTANT_SIGNALS

    def validate(self) -> None:
        if self.universe_size <= 0:
            raise ProfileError("universe_size must be positive")
        if not 0.0 <= self.overlap_fraction <= 1.0:
            raise ProfileError("overlap_fraction must be in [0, 1]")
        if not self.normal_vocab:
            raise ProfileError("normal_vocab must be non-empty")
        if set(self.normal_vocab) & set(self.attack_extra_vocab):
            raise ProfileError("attack_extra_vocab must be disjoint from normal_vocab")
        for v in (*self.normal_vocab, *self.attack_extra_vocab):
            if not 0 <= v < self.universe_size:
                raise ProfileError(f"vocab value {v} outside universe")
        if len(self.attack_extra_vocab) < 8:
            raise ProfileError("attack_extra_vocab needs >= 8 values (kind specs)")
        for lo, hi in (
            self.events_per_session,
            self.duration_s,
            self.attack_events_per_session,
            self.attack_duration_s,
        ):
            if not 0 < lo <= hi:
                raise ProfileError(f"bad range ({lo}, {hi})")
        if not 0.0 <= self.jitter_prob < 1.0:
            raise ProfileError("jitter_prob must be in [0, 1)")
        if not 0.0 < self.attack_event_fraction <= 1.0:
            raise ProfileError("attack_event_fraction must be in (0, 1]")
        if self.n_rare_vocab >= len(self.normal_vocab):
            raise ProfileError("n_rare_vocab must leave common vocabulary")
        if not self.signal_models:
            raise ProfileError("signal_models must be non-empty")
        known = {name for name, _ in self.constant_signals}
        for m in self.signal_models:
            if m.name in known:
                raise ProfileError(f"signal {m.name} both modelled and constant")
            if m.normal.lo > m.normal.hi or m.attack.lo > m.attack.hi:
                raise ProfileError(f"signal {m.name}: empty band")
            shared = max(
                0, min(m.normal.hi, m.attack.hi) - max(m.normal.lo, m.attack.lo) + 1
            )
            want = round(self.overlap_fraction * m.attack.width)
            if abs(shared - want) > 1:
                raise ProfileError(
                    f"signal {m.name}: band overlap {shared} inconsistent with "
                    f"overlap_fraction {self.overlap_fraction}"
                )

    def vocab_probs(self) -> np.ndarray:
        """Per-rank inclusion probability for each normal_vocab value."""
        n_common = len(self.normal_vocab) - self.n_rare_vocab
        common = np.geomspace(*self.vocab_common_range, num=n_common)
        rare = np.geomspace(*self.vocab_rare_range, num=self.n_rare_vocab)
        return np.concatenate([common, rare])

    def model(self, name: str) -> SignalModel:
        for m in self.signal_models:
            if m.name == name:
                return m
        raise ProfileError(f"no signal model for {name!r}")


def default_profile(
    universe_size: int = 350,
    overlap_fraction: float = 0.25,
    **tweaks,
) -> SynthProfile:
    """The standard benchmark profile at the requested overlap."""
    bands = {
        "rss": SignalBand(660, 760),
        "num_files": SignalBand(30, 54),
        "num_reg": SignalBand(18, 38),
    }
    models = []
    for name, normal in bands.items():
        attack = derive_attack_band(normal, overlap_fraction)
        jitter = SignalBand(attack.hi + 1, attack.hi + normal.width)
        models.append(SignalModel(name, normal, attack, jitter))
    profile = SynthProfile(
        universe_size=universe_size,
        overlap_fraction=overlap_fraction,
        signal_models=tuple(models),
        **tweaks,
    )
    profile.validate()
    return profile


def _session_vocab(rng: np.random.Generator, profile: SynthProfile):
    vocab = np.asarray(profile.normal_vocab, dtype=np.int64)
    probs = profile.vocab_probs()
    mask = rng.random(len(vocab)) < probs
    if not mask.any():
        mask[0] = True
    weights = probs[mask]
    return vocab[mask], weights / weights.sum()


def _event_block(
    rng: np.random.Generator,
    n_events: int,
    duration_ns: int,
    pid: int,
    values: np.ndarray,
    weights: np.ndarray,
) -> list[SyscallEvent]:
    times = np.sort(rng.integers(0, duration_ns, size=n_events))
    calls = rng.choice(values, size=n_events, p=weights)
    return [SyscallEvent(int(t), pid, int(c)) for t, c in zip(times, calls)]


def _readings(
    rng: np.random.Generator,
    profile: SynthProfile,
    duration_ns: int,
    attack_phase: tuple[int, int] | None,
    excursions: tuple[str, ...],
    jitter: bool,
    boundary_phase: tuple[int, int] | None = None,
) -> list[SignalReading]:
    readings: list[SignalReading] = []
    grid = np.arange(0, duration_ns, READING_SPACING_NS, dtype=np.int64)
    for name in SIGNAL_NAMES:
        constant = dict(profile.constant_signals).get(name)
        if constant is not None:
            readings.extend(SignalReading(int(t), name, constant) for t in grid)
            continue
        m = profile.model(name)
        levels = rng.integers(m.normal.lo, m.normal.hi + 1, size=len(grid))
        if attack_phase is not None and name in excursions:
            in_phase = (grid >= attack_phase[0]) & (grid < attack_phase[1])
            levels[in_phase] = rng.integers(
                m.attack.lo, m.attack.hi + 1, size=int(in_phase.sum())
            )
        if boundary_phase is not None:
            in_phase = (grid >= boundary_phase[0]) & (grid < boundary_phase[1])
            levels[in_phase] = m.normal.hi
        if jitter and profile.jitter_prob > 0:
            mask = rng.random(len(grid)) < profile.jitter_prob
            if mask.any():
                levels[mask] = rng.integers(
                    m.jitter.lo, m.jitter.hi + 1, size=int(mask.sum())
                )
        readings.extend(
            SignalReading(int(t), name, int(v)) for t, v in zip(grid, levels)
        )
    return readings


def _auto_id(rng: np.random.Generator, prefix: str) -> str:
    return f"{prefix}-{int(rng.integers(0, 2**32)):08x}"


def synth_normal_session(
    rng: np.random.Generator,
    profile: SynthProfile,
    session_id: str | None = None,
) -> Session:
    """One normal-usage session; syscalls stay inside normal_vocab."""
    profile.validate()
    if session_id is None:
        session_id = _auto_id(rng, "normal")
    duration_ns = int(rng.integers(*_scale_s(profile.duration_s)))
    n_events = int(rng.integers(profile.events_per_session[0],
                                profile.events_per_session[1] + 1))
    pid = int(rng.integers(100, 32768))
    values, weights = _session_vocab(rng, profile)
    events = _event_block(rng, n_events, duration_ns, pid, values, weights)
    readings = _readings(rng, profile, duration_ns, None, (), jitter=True)
    session = Session(
        id=session_id,
        label=SessionLabel.NORMAL,
        events=tuple(events),
        readings=tuple(readings),
        duration_ns=duration_ns,
    )
    session.validate(profile.universe_size)
    return session


def _scale_s(range_s: tuple[int, int]) -> tuple[int, int]:
    return range_s[0] * 1_000_000_000, range_s[1] * 1_000_000_000 + 1


def synth_attack_session(
    rng: np.random.Generator,
    profile: SynthProfile,
    kind: str,
    session_id: str | None = None,
) -> Session:
    """One attack-attempt session of the given kind.

    Success kinds inject bursts of out-of-vocabulary syscalls and hold
    the excursion signals in the attack band for most of the session;
    failure01 stays inside the normal vocabulary and briefly pins the
    interesting signals at the top of their normal bands.
    """
    profile.validate()
    if kind not in ALL_KINDS:
        raise ProfileError(f"unknown attack kind {kind!r}; one of {ALL_KINDS}")
    if session_id is None:
        session_id = _auto_id(rng, kind)
    duration_ns = int(rng.integers(*_scale_s(profile.attack_duration_s)))
    n_events = int(rng.integers(profile.attack_events_per_session[0],
                                profile.attack_events_per_session[1] + 1))
    pid = int(rng.integers(100, 32768))
    values, weights = _session_vocab(rng, profile)
    events = _event_block(rng, n_events, duration_ns, pid, values, weights)

    if kind == FAILED_KIND:
        boundary = (int(0.40 * duration_ns), int(0.45 * duration_ns))
        readings = _readings(
            rng, profile, duration_ns, None, (), jitter=False,
            boundary_phase=boundary,
        )
        label = SessionLabel.FAILED_ATTACK
    else:
        value_idx, excursions = _KIND_SPECS[kind]
        attack_values = np.asarray(
            [profile.attack_extra_vocab[i] for i in value_idx], dtype=np.int64
        )
        phase = (int(0.30 * duration_ns), int(0.90 * duration_ns))
        n_attack = max(1, round(profile.attack_event_fraction * n_events))
        burst_centres = (0.35, 0.55, 0.80)
        burst_width = 0.02 * duration_ns
        per_burst = np.array_split(np.arange(n_attack), len(burst_centres))
        attack_events = []
        for centre, chunk in zip(burst_centres, per_burst):
            if len(chunk) == 0:
                continue
            base = centre * duration_ns
            times = rng.integers(int(base), int(base + burst_width), size=len(chunk))
            calls = rng.choice(attack_values, size=len(chunk))
            attack_events.extend(
                SyscallEvent(int(t), pid, int(c)) for t, c in zip(times, calls)
            )
        merged = sorted(events + attack_events, key=lambda e: e.t_ns)
        events = merged
        readings = _readings(
            rng, profile, duration_ns, phase, excursions, jitter=False
        )
        label = SessionLabel.ATTACK

    session = Session(
        id=session_id,
        label=label,
        events=tuple(events),
        readings=tuple(readings),
        duration_ns=duration_ns,
    )
    session.validate(profile.universe_size)
    return session


def synth_dataset(
    rng: np.random.Generator,
    profile: SynthProfile,
    n_normal: int = 55,
) -> Dataset:
    """Full corpus: n_normal normal sessions plus the five attack kinds."""
    sessions = [
        synth_normal_session(rng, profile, session_id=f"normal-{i:03d}")
        for i in range(n_normal)
    ]
    sessions.extend(
        synth_attack_session(rng, profile, kind, session_id=kind)
        for kind in ALL_KINDS
    )
    ds = Dataset(universe_size=profile.universe_size, sessions=sessions)
    ds.validate()
    return ds
