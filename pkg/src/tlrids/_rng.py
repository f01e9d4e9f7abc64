"""Deterministic splitmix64 stream shared by both kernel backends.

The tick kernel must produce bit-identical traces whether it runs
compiled (numba) or as plain Python, so it cannot use np.random (the
two runtimes disagree on bounded-draw algorithms). Instead all kernel
randomness flows through this tiny generator, implemented twice:

* a uint64 version that numba compiles cleanly, and
* a masked-Python-int version with no numpy scalar overflow warnings.

``tests/test_kernel_parity.py`` asserts the two produce equal streams.
State is a one-element uint64 array so the kernel can mutate it.
"""

from __future__ import annotations

import numpy as np

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK = 0xFFFFFFFFFFFFFFFF


def new_state(seed: int) -> np.ndarray:
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed & _MASK)
    return state


def _next_u64_py(state):
    s = (int(state[0]) + _GAMMA) & _MASK
    state[0] = s
    z = ((s ^ (s >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return (z ^ (z >> 31)) & _MASK


def _rand_below_py(state, n):
    # modulo bias is < 2**-44 for every n used here (n <= ~1e6);
    # int(n) because numpy int64 scalars reject huge Python operands
    return _next_u64_py(state) % int(n)


def derive_seed(*parts: int) -> int:
    """Mix several integers into one 64-bit sub-stream seed."""
    state = new_state(parts[0] if parts else 0)
    out = 0
    for p in parts:
        state[0] = np.uint64((int(state[0]) ^ (p & _MASK)))
        out = _next_u64_py(state)
    return out


def build_rng(jit):
    """Return (next_u64, rand_below) under the given jit decorator.

    ``jit`` is either a numba njit wrapper or the identity function.
    The numba flavour keeps every intermediate in uint64 to avoid the
    signed/unsigned promotion to float64.
    """
    if jit is None:
        return _next_u64_py, _rand_below_py

    from numba import uint64, int64

    @jit
    def next_u64(state):
        state[0] = state[0] + uint64(_GAMMA)
        s = state[0]
        z = (s ^ (s >> uint64(30))) * uint64(_MIX1)
        z = (z ^ (z >> uint64(27))) * uint64(_MIX2)
        return z ^ (z >> uint64(31))

    @jit
    def rand_below(state, n):
        return int64(next_u64(state) % uint64(n))

    return next_u64, rand_below
