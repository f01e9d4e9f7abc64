"""Shared builders for tests: sessions, contexts, tiny tissues."""

from __future__ import annotations

import numpy as np

from tlrids.sessions import Session, SessionLabel, SignalReading, SyscallEvent
from tlrids.tissue import Tissue, TissueContext, TissueParams

SMALL_PARAMS = dict(
    max_antigen=60,
    max_cytokines=3,
    max_cells=300,
    cell_update_rate_us=100_000,
    antigen_multiplier=10,
    num_cells_1=10,
    cell_lifespan_1=10,
    num_antigen_1=12,
    num_antigen_receptors_1=4,
    num_antigen_producers_1=12,
    num_cytokine_receptors_1=3,
    antigen_producer_action_time=5,
    num_cells_2=10,
    cell_lifespan_2=5,
    num_cell_receptors_2=60,
    num_vr_receptors_2=6,
    cell_lifespan_3=10,
    cell_lifespan_4=10,
    cell_lifespan_5=10,
    probe_rate_us=1_000_000,
)


def small_params(**overrides) -> TissueParams:
    cfg = dict(SMALL_PARAMS)
    cfg.update(overrides)
    return TissueParams(**cfg)


def make_context(
    universe: int = 40,
    signals: tuple[str, ...] = ("rss",),
    levels: dict[str, frozenset[int]] | None = None,
    normal_antigen: tuple[int, ...] = (),
    seed: int = 7,
    **kw,
) -> TissueContext:
    if levels is None:
        levels = {s: frozenset({100, 101, 102}) for s in signals}
    permissible = tuple(v for v in range(universe) if v not in set(normal_antigen))
    return TissueContext(
        universe_size=universe,
        signal_names=signals,
        normal_levels=levels,
        permissible=permissible,
        seed=seed,
        **kw,
    )


def small_tissue(params=None, context=None, **ctx_kw) -> Tissue:
    return Tissue(
        params or small_params(),
        context or make_context(**ctx_kw),
        backend=False,
    )


def make_session(
    session_id: str = "s0",
    label: SessionLabel = SessionLabel.NORMAL,
    syscalls: list[tuple[int, int]] | None = None,  # (t_ns, syscall)
    readings: list[tuple[int, str, int]] | None = None,  # (t_ns, name, level)
    duration_ns: int = 10_000_000_000,
    pid: int = 811,
) -> Session:
    return Session(
        id=session_id,
        label=label,
        events=tuple(SyscallEvent(t, pid, sc) for t, sc in (syscalls or [])),
        readings=tuple(SignalReading(t, n, lv) for t, n, lv in (readings or [])),
        duration_ns=duration_ns,
    )


def step_n(tissue: Tissue, n: int):
    reports = []
    for _ in range(n):
        reports.append(tissue.step())
    return reports


def install_dc(tissue: Tissue, kind: str, presented, iterations: int = 0) -> int:
    """Plant a lymph-node DC directly in the array state (test surgery)."""
    from tlrids import _kernels as K

    d = int(tissue.scal[K.S_LYMPH_N])
    tissue.dc_kind[d] = K.KIND_SEMIMATURE if kind == "smDC" else K.KIND_MATURE
    tissue.dc_iter[d] = iterations
    tissue.dc_dirty[d] = False
    vals = list(presented)
    tissue.dc_store[d, : len(vals)] = vals
    tissue.dc_scount[d] = len(vals)
    tissue.dc_off[d] = 0
    tissue.dc_since[d] = 0
    tissue.dc_pres[d, :] = False
    for v in set(vals):
        tissue.dc_pres[d, v] = True
        tissue.pres_count[v] += 1
    tissue.scal[K.S_LYMPH_N] = d + 1
    tissue.scal[K.S_SM_N if kind == "smDC" else K.S_M_N] += 1
    return d


def install_atc(tissue: Tissue, lock: int, iterations: int = 0) -> int:
    from tlrids import _kernels as K

    a = int(tissue.scal[K.S_ATC_N])
    tissue.atc_iter[a] = iterations
    tissue.atc_dirty[a] = False
    tissue.atc_lock[a] = lock
    tissue.scal[K.S_ATC_N] = a + 1
    return a


def set_ntc_locks(tissue: Tissue, slot: int, locks, iterations: int = 0) -> None:
    vals = list(locks)
    n = tissue.ntc_locks.shape[1]
    tissue.ntc_locks[slot, :] = [vals[i % len(vals)] for i in range(n)]
    tissue.ntc_iter[slot] = iterations
    tissue.ntc_dirty[slot] = False


def set_idc(tissue: Tissue, slot: int, antigen, iterations: int = 0) -> None:
    vals = list(antigen)
    tissue.idc_ag[slot, : len(vals)] = vals
    tissue.idc_count[slot] = len(vals)
    tissue.idc_iter[slot] = iterations
    tissue.idc_dirty[slot] = False


def default_rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)
