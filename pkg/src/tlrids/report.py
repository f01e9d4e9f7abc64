"""Confusion counting, rate metrics, comparison tables, scatter data.

The benchmark scores at scenario granularity: a true positive is an
attack scenario flagged as attack; failed-attack scenarios count as
ground-truth normal, so flagging one is a false positive. The combined
score is the g-mean, sqrt(TPR * (1 - FPR)).

Reports can carry reference rows alongside computed ones: published
results for the original wuftpd traces (which are not reproducible at
desk scale), included for comparison and clearly flagged as
non-computed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import TlridsError, UnknownSignalError
from .sessions import Session
from .signals import SIGNAL_INDEX

#: Published wuftpd-study results carried as comparison data only.
#: (system, TPR, FPR); the DCA row came from a separate study on the
#: same traces.
REFERENCE_ROWS: tuple[tuple[str, float, float], ...] = (
    ("systrace", 0.90, 0.60),
    ("tlr-negsel", 0.90, 0.60),
    ("sig1", 1.00, 1.00),
    ("sig2", 1.00, 1.00),
    ("sig3", 1.00, 1.00),
    ("tlr1", 0.70, 0.20),
    ("tlr2", 0.60, 0.20),
    ("tlr3", 0.75, 0.15),
    ("DCA", 1.00, 0.83),
)

#: Published G column, for the metric-reproduction check.
REFERENCE_G: dict[str, float] = {
    "systrace": 0.60,
    "tlr-negsel": 0.60,
    "sig1": 0.00,
    "sig2": 0.00,
    "sig3": 0.00,
    "tlr1": 0.75,
    "tlr2": 0.69,
    "tlr3": 0.80,
    "DCA": 0.41,
}


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        for v in (self.tp, self.fp, self.tn, self.fn):
            if v < 0:
                raise TlridsError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def _as_attack(v) -> bool:
    if isinstance(v, bool):
        return v
    if v in ("attack", "normal"):
        return v == "attack"
    raise TlridsError(f"verdict must be bool or 'attack'/'normal', got {v!r}")


def confusion(verdicts: Sequence, truths: Sequence) -> ConfusionCounts:
    """Count TP/FP/TN/FN over aligned verdict/ground-truth lists."""
    if len(verdicts) != len(truths):
        raise TlridsError(
            f"length mismatch: {len(verdicts)} verdicts vs {len(truths)} truths"
        )
    tp = fp = tn = fn = 0
    for v, t in zip(verdicts, truths):
        pv, pt = _as_attack(v), _as_attack(t)
        if pv and pt:
            tp += 1
        elif pv and not pt:
            fp += 1
        elif not pv and pt:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, tn, fn)


def tpr(counts: ConfusionCounts) -> float | None:
    """TP / (TP + FN); None when no attack scenarios were scored."""
    denom = counts.tp + counts.fn
    if denom == 0:
        return None
    return counts.tp / denom


def fpr(counts: ConfusionCounts) -> float | None:
    """FP / (FP + TN); None when no normal scenarios were scored."""
    denom = counts.fp + counts.tn
    if denom == 0:
        return None
    return counts.fp / denom


def gmean(tpr_value: float, fpr_value: float) -> float:
    """sqrt(TPR * (1 - FPR)): the combined classification score."""
    for v in (tpr_value, fpr_value):
        if not 0.0 <= v <= 1.0:
            raise TlridsError(f"rate {v} outside [0, 1]")
    return math.sqrt(tpr_value * (1.0 - fpr_value))


@dataclass(frozen=True)
class MetricsRow:
    system: str
    tpr: float | None
    fpr: float | None
    gmean: float | None
    computed: bool = True
    counts: ConfusionCounts | None = None

    @classmethod
    def from_counts(cls, system: str, counts: ConfusionCounts) -> "MetricsRow":
        t, f = tpr(counts), fpr(counts)
        g = gmean(t, f) if t is not None and f is not None else None
        return cls(system, t, f, g, computed=True, counts=counts)


@dataclass
class BenchReport:
    rows: list[MetricsRow]

    def row(self, system: str) -> MetricsRow:
        for r in self.rows:
            if r.system == system:
                return r
        raise TlridsError(f"no row for system {system!r}")


def reference_report() -> BenchReport:
    """The published comparison table, recomputing G from its rates."""
    return BenchReport(
        rows=[
            MetricsRow(name, t, f, gmean(t, f), computed=False)
            for name, t, f in REFERENCE_ROWS
        ]
    )


def _fmt(v: float | None) -> str:
    return " n/a" if v is None else f"{v:.2f}"


def emit_table(report: BenchReport, header: str = "") -> str:
    """Fixed-width comparison table; reference rows are starred."""
    lines = [f"# {h}" for h in header.splitlines() if h]
    width = max([len("System")] + [len(r.system) for r in report.rows])
    lines.append(f"{'System':<{width}}  {'TPR':>5} {'FPR':>5} {'G':>5}")
    any_reference = False
    for r in report.rows:
        star = ""
        if not r.computed:
            star = " *"
            any_reference = True
        lines.append(
            f"{r.system:<{width}}  {_fmt(r.tpr):>5} {_fmt(r.fpr):>5} "
            f"{_fmt(r.gmean):>5}{star}"
        )
    if any_reference:
        lines.append("* reference row (not computed in this run)")
    return "\n".join(lines) + "\n"


def emit_machine(report: BenchReport, header: str = "") -> str:
    """Tab-separated full-precision report for downstream tooling."""
    lines = [f"# {h}" for h in header.splitlines() if h]
    lines.append("system\ttp\tfp\ttn\tfn\ttpr\tfpr\tgmean\tcomputed")
    for r in report.rows:
        c = r.counts or ConfusionCounts()
        lines.append(
            "\t".join(
                [
                    r.system,
                    str(c.tp), str(c.fp), str(c.tn), str(c.fn),
                    "n/a" if r.tpr is None else repr(r.tpr),
                    "n/a" if r.fpr is None else repr(r.fpr),
                    "n/a" if r.gmean is None else repr(r.gmean),
                    "1" if r.computed else "0",
                ]
            )
        )
    return "\n".join(lines) + "\n"


def emit_scatter(sessions: Sequence[Session], signal: str, header: str = "") -> str:
    """Rows of ``session_index level class`` for plotting one signal."""
    if signal not in SIGNAL_INDEX:
        raise UnknownSignalError(f"unknown signal {signal!r}")
    lines = [f"# {h}" for h in header.splitlines() if h]
    lines.append("# session_index level class")
    for i, s in enumerate(sessions):
        for rd in s.readings:
            if rd.name == signal:
                lines.append(f"{i} {rd.level} {s.label.value}")
    return "\n".join(lines) + "\n"
