"""Catalog of per-process runtime statistics used as context signals.

Every signal log line and every synthetic reading uses one of these
names. The interesting trio for detection is ``rss``, ``num_files`` and
``num_reg``; the rest exist so datasets look like full monitor output
and so scatter emission has boring columns to show.
"""

SIGNAL_NAMES: tuple[str, ...] = (
    "processes",
    "cpu",
    "mem",
    "rss",
    "size",
    "sz",
    "vsz",
    "num_files",
    "num_reg",
    "num_dir",
    "num_chr",
    "num_ipv4",
    "num_sock",
    "num_unix",
    "num_unknown",
)

SIGNAL_INDEX: dict[str, int] = {name: i for i, name in enumerate(SIGNAL_NAMES)}


def is_signal(name: str) -> bool:
    return name in SIGNAL_INDEX
