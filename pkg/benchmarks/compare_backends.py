"""Benchmark the compiled tick kernel against the pure-numpy fallback.

Both backends execute the identical kernel source and produce
bit-identical results; this script measures what the numba compilation
buys. Run from the repository root:

    PYTHONPATH=src python3 benchmarks/compare_backends.py

The workload replays a steady mixed schedule (antigen injections plus
signal readings) through a reference-sized tissue. The fallback gets a
shorter slice of the same schedule because it runs a few hundred times
slower; rates are ticks per second either way.
"""

import time

import numpy as np

from tlrids.backend import get_kernels, numba_available
from tlrids.engine import VARIANTS, build_detector, train
from tlrids.scenarios import Scenario, assemble_timeline
from tlrids.synth import default_profile, synth_normal_session
from tlrids.tissue import replay_schedule


def build_workload(n_sessions: int = 6):
    profile = default_profile()
    rng = np.random.default_rng(2024)
    sessions = {}
    for i in range(n_sessions):
        s = synth_normal_session(rng, profile, session_id=f"w{i}")
        sessions[s.id] = s
    train_sessions = [
        synth_normal_session(rng, profile, session_id=f"t{i}") for i in range(8)
    ]
    ids = list(sessions)
    scenario = Scenario(
        id="workload",
        members=tuple((sid, 2 if i < len(ids) - 1 else 0) for i, sid in enumerate(ids)),
        train_ref="",
        training_fold=(),
        ground_truth_attack=False,
    )
    timeline = assemble_timeline(scenario, sessions)
    profile3 = train(train_sessions, VARIANTS["tlr3"], profile.universe_size)
    return profile3, timeline


def run_backend(profile, timeline, use_numba: bool, n_ticks: int) -> float:
    detector = build_detector(profile, "tlr3", seed=7, backend=use_numba)
    tissue = detector.new_tissue()
    ev_tick, ev_sys, rd_tick, rd_sig, rd_level = detector._schedule(timeline)
    start = time.perf_counter()
    replay_schedule(tissue, ev_tick, ev_sys, rd_tick, rd_sig, rd_level, n_ticks)
    return time.perf_counter() - start


def main() -> None:
    profile, timeline = build_workload()
    total_ticks = int(timeline.span_ns // 100_000_000) + 1
    print(f"workload: {len(timeline.events_t_ns)} events, "
          f"{len(timeline.readings_t_ns)} readings, {total_ticks} ticks available")

    numpy_ticks = min(1500, total_ticks)
    t_numpy = run_backend(profile, timeline, use_numba=False, n_ticks=numpy_ticks)
    rate_numpy = numpy_ticks / t_numpy
    print(f"numpy fallback : {numpy_ticks:6d} ticks in {t_numpy:7.2f}s "
          f"({rate_numpy:10.0f} ticks/s)")

    if not numba_available():
        print("numba unavailable: install it to benchmark the compiled path")
        return

    get_kernels(True)
    warm = time.perf_counter()
    run_backend(profile, timeline, use_numba=True, n_ticks=10)
    print(f"numba compile + warmup: {time.perf_counter() - warm:.1f}s (one-time)")

    t_numba = run_backend(profile, timeline, use_numba=True, n_ticks=total_ticks)
    rate_numba = total_ticks / t_numba
    print(f"numba compiled : {total_ticks:6d} ticks in {t_numba:7.2f}s "
          f"({rate_numba:10.0f} ticks/s)")
    print(f"speedup: {rate_numba / rate_numpy:.0f}x")


if __name__ == "__main__":
    main()
