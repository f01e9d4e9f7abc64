"""Kernel backend selection: numba-compiled vs plain numpy/Python.

The environment variable ``TLRIDS_NUMBA`` picks the path:

* unset or ``1``/``true`` -- compile the tick kernel with numba when it
  is importable (errors if forced on but unavailable)
* ``0``/``false``/``off`` -- run the identical kernel source uncompiled

Both backends produce bit-identical results (asserted by the parity
tests); the fallback exists for portability and debugging and is two to
three orders of magnitude slower on full replays.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

from ._kernels import build_kernels

ENV_FLAG = "TLRIDS_NUMBA"

_cache: dict[bool, SimpleNamespace] = {}


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def resolve_backend(choice: bool | str | None = None) -> bool:
    """Decide whether to use numba; ``None`` defers to the env flag."""
    if choice is None:
        choice = os.environ.get(ENV_FLAG)
    if choice is None or choice == "":
        return numba_available()
    if isinstance(choice, bool):
        wanted = choice
    else:
        lowered = str(choice).strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            wanted = True
        elif lowered in ("0", "false", "no", "off"):
            wanted = False
        else:
            raise ValueError(f"bad {ENV_FLAG} value {choice!r}")
    if wanted and not numba_available():
        raise RuntimeError(f"{ENV_FLAG} forces numba but it is not importable")
    return wanted


def get_kernels(use_numba: bool | None = None) -> SimpleNamespace:
    """Build (once) and return the kernel set for the chosen backend."""
    resolved = resolve_backend(use_numba)
    if resolved not in _cache:
        _cache[resolved] = build_kernels(resolved)
    return _cache[resolved]
