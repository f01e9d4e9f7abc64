"""Compartmentalised agent runtime: populations, antigen store, tick loop.

A ``Tissue`` owns the full array state driven by the tick kernel. The
extralymphoid compartment holds the immature-DC slots, the antigen
store and the activated-TC pool; the lymph node holds semimature and
mature DCs plus the naive-TC slots. Immature DCs and naive TCs are
kept at constant population by slot reuse, so homeostasis holds by
construction.

One Tissue is single-threaded: callers serialise inject/set_signal/step.
Independent instances (one per scenario) can run on parallel threads;
the compiled kernel releases the GIL.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace
from typing import Mapping

import numpy as np

from . import _kernels as K
from .backend import get_kernels
from .errors import (
    SignalCapacityError,
    TlridsError,
    UnknownSignalError,
)
from ._rng import new_state
from .signals import SIGNAL_INDEX

CELL_KINDS = ("iDC", "smDC", "mDC", "nTC", "aTC")

_POP_INDEX = {name: i for i, name in enumerate(CELL_KINDS)}


@dataclass(frozen=True)
class TissueParams:
    """Runtime parameter set; defaults are the reference configuration."""

    max_antigen: int = 1000
    max_cytokines: int = 3
    max_cells: int = 10000
    cell_update_rate_us: int = 100_000
    antigen_multiplier: int = 10
    num_cells_1: int = 100
    cell_lifespan_1: int = 100
    num_antigen_1: int = 100
    num_antigen_receptors_1: int = 10
    num_antigen_producers_1: int = 100
    num_cytokine_receptors_1: int = 3
    antigen_producer_action_time: int = 10
    num_cells_2: int = 100
    cell_lifespan_2: int = 10
    num_cell_receptors_2: int = 1000
    num_vr_receptors_2: int = 100
    cell_lifespan_3: int = 100
    cell_lifespan_4: int = 100
    cell_lifespan_5: int = 100
    probe_rate_us: int = 1_000_000

    def validate(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, int) or v <= 0:
                raise TlridsError(f"parameter {f.name} must be a positive int")
        if self.num_cytokine_receptors_1 > self.max_cytokines:
            raise TlridsError(
                "num_cytokine_receptors_1 exceeds max_cytokines"
            )
        if self.num_cells_1 + self.num_cells_2 > self.max_cells:
            raise TlridsError("num_cells_1 + num_cells_2 exceeds max_cells")

    def with_overrides(self, **overrides: int) -> "TissueParams":
        return replace(self, **overrides)

    @property
    def tick_ns(self) -> int:
        """One tick of virtual time, in nanoseconds."""
        return self.cell_update_rate_us * 1000

    @property
    def probe_interval_ticks(self) -> int:
        return max(1, self.probe_rate_us // self.cell_update_rate_us)

    def canonical(self) -> str:
        return ",".join(f"{f.name}={getattr(self, f.name)}" for f in fields(self))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


@dataclass(frozen=True)
class TissueContext:
    """Detector-side configuration a tissue runs under.

    ``normal_levels`` maps each monitored signal to the level set seen
    in training; ``permissible`` is the lock-value pool (antigen values
    never seen in training). ``sm_as_mature`` makes semimature DCs
    activate TCs instead of tolerising them (the negative-selection
    ablation); ``lock_sweep`` replaces random lock draws with a
    deterministic rotation that keeps every permissible value covered.
    """

    universe_size: int
    signal_names: tuple[str, ...] = ()
    normal_levels: Mapping[str, frozenset[int]] = field(default_factory=dict)
    permissible: tuple[int, ...] = ()
    tlr_enabled: bool = True
    sm_as_mature: bool = False
    lock_sweep: bool = False
    seed: int = 0

    def validate(self, params: TissueParams) -> None:
        if self.universe_size <= 0:
            raise TlridsError("universe_size must be positive")
        for name in self.signal_names:
            if name not in SIGNAL_INDEX:
                raise UnknownSignalError(f"unknown signal {name!r}")
        if len(self.signal_names) > params.max_cytokines:
            raise SignalCapacityError(
                f"{len(self.signal_names)} monitored signals exceed "
                f"max_cytokines={params.max_cytokines}"
            )
        if self.tlr_enabled:
            missing = [n for n in self.signal_names if n not in self.normal_levels]
            if missing:
                raise UnknownSignalError(
                    f"no trained levels for monitored signals {missing}"
                )
        if not self.permissible:
            raise TlridsError("permissible lock set is empty")
        if self.lock_sweep:
            slots = params.num_cells_2 * params.num_vr_receptors_2
            if slots < len(self.permissible):
                raise TlridsError(
                    f"full-coverage mode needs num_cells_2 * num_vr_receptors_2 "
                    f">= {len(self.permissible)} permissible values, have {slots}"
                )
        prev = -1
        for v in self.permissible:
            if not 0 <= v < self.universe_size:
                raise TlridsError(f"permissible value {v} outside universe")
            if v <= prev:
                raise TlridsError("permissible values must be sorted and unique")
            prev = v


@dataclass(frozen=True)
class TickReport:
    """Observable outcome of one tick."""

    tick: int
    populations: dict[str, int]
    alerts: tuple[int, ...]
    tolerance_deletions: int
    activations: int
    blocked_spawns: int


def new_tissue(
    params: TissueParams, context: TissueContext, backend: bool | None = None
) -> "Tissue":
    return Tissue(params, context, backend=backend)


class Tissue:
    def __init__(
        self,
        params: TissueParams,
        context: TissueContext,
        backend: bool | None = None,
    ):
        params.validate()
        context.validate(params)
        self.params = params
        self.context = context
        self.kernels = get_kernels(backend)
        p, c = params, context

        self.par = np.zeros(K.N_PAR, dtype=np.int64)
        self.par[K.P_MAX_ANTIGEN] = p.max_antigen
        self.par[K.P_MAX_CYTOKINES] = p.max_cytokines
        self.par[K.P_MAX_CELLS] = p.max_cells
        self.par[K.P_ANTIGEN_MULT] = p.antigen_multiplier
        self.par[K.P_NUM_CELLS_1] = p.num_cells_1
        self.par[K.P_LIFESPAN_1] = p.cell_lifespan_1
        self.par[K.P_NUM_ANTIGEN_1] = p.num_antigen_1
        self.par[K.P_NUM_AG_RECEPTORS_1] = p.num_antigen_receptors_1
        self.par[K.P_NUM_AG_PRODUCERS_1] = p.num_antigen_producers_1
        self.par[K.P_NUM_CYT_RECEPTORS_1] = p.num_cytokine_receptors_1
        self.par[K.P_AGP_ACTION_TIME] = p.antigen_producer_action_time
        self.par[K.P_NUM_CELLS_2] = p.num_cells_2
        self.par[K.P_LIFESPAN_2] = p.cell_lifespan_2
        self.par[K.P_NUM_CELL_RECEPTORS_2] = p.num_cell_receptors_2
        self.par[K.P_NUM_VR_RECEPTORS_2] = p.num_vr_receptors_2
        self.par[K.P_LIFESPAN_3] = p.cell_lifespan_3
        self.par[K.P_LIFESPAN_4] = p.cell_lifespan_4
        self.par[K.P_LIFESPAN_5] = p.cell_lifespan_5
        self.par[K.P_UNIVERSE] = c.universe_size
        self.par[K.P_TLR_ENABLED] = 1 if c.tlr_enabled else 0
        self.par[K.P_SM_AS_MATURE] = 1 if c.sm_as_mature else 0
        self.par[K.P_LOCK_SWEEP] = 1 if c.lock_sweep else 0

        self.scal = np.zeros(K.N_SCAL, dtype=np.int64)
        self.rng = new_state(c.seed)

        n1, n2 = p.num_cells_1, p.num_cells_2
        universe = c.universe_size
        budget = max(0, p.max_cells - n1 - n2)

        self.st_sys = np.zeros(p.max_antigen, dtype=np.int32)
        self.st_vcount = np.zeros(universe, dtype=np.int32)
        self.st_alive = np.zeros(p.max_antigen, dtype=np.int32)
        self.st_keep = np.zeros(p.max_antigen, dtype=np.bool_)

        self.idc_iter = np.zeros(n1, dtype=np.int64)
        self.idc_dirty = np.zeros(n1, dtype=np.bool_)
        self.idc_ag = np.zeros((n1, p.num_antigen_1), dtype=np.int32)
        self.idc_count = np.zeros(n1, dtype=np.int32)

        self.dc_kind = np.zeros(budget, dtype=np.int8)
        self.dc_iter = np.zeros(budget, dtype=np.int64)
        self.dc_dirty = np.zeros(budget, dtype=np.bool_)
        self.dc_store = np.zeros((budget, p.num_antigen_1), dtype=np.int32)
        self.dc_scount = np.zeros(budget, dtype=np.int32)
        self.dc_off = np.zeros(budget, dtype=np.int32)
        self.dc_since = np.zeros(budget, dtype=np.int64)
        self.dc_pres = np.zeros((budget, universe), dtype=np.bool_)
        self.pres_count = np.zeros(universe, dtype=np.int32)

        self.ntc_iter = np.zeros(n2, dtype=np.int64)
        self.ntc_dirty = np.zeros(n2, dtype=np.bool_)
        self.ntc_locks = np.zeros((n2, p.num_vr_receptors_2), dtype=np.int32)

        self.atc_iter = np.zeros(budget, dtype=np.int64)
        self.atc_dirty = np.zeros(budget, dtype=np.bool_)
        self.atc_lock = np.zeros(budget, dtype=np.int32)

        ns = len(c.signal_names)
        self.held = np.zeros(ns, dtype=np.int64)
        self.held_known = np.zeros(ns, dtype=np.bool_)
        nl_chunks = []
        self.nl_off = np.zeros(ns + 1, dtype=np.int64)
        for i, name in enumerate(c.signal_names):
            levels = np.array(sorted(c.normal_levels.get(name, ())), dtype=np.int64)
            nl_chunks.append(levels)
            self.nl_off[i + 1] = self.nl_off[i] + len(levels)
        self.nl_values = (
            np.concatenate(nl_chunks) if nl_chunks else np.zeros(0, dtype=np.int64)
        )

        self.perm = np.array(c.permissible, dtype=np.int32)

        self._alert_cap = 4096
        self.alerts_tick = np.zeros(self._alert_cap, dtype=np.int64)
        self.alerts_sys = np.zeros(self._alert_cap, dtype=np.int32)
        self.alerts_src = np.zeros(self._alert_cap, dtype=np.int8)

        self._board: dict[str, int] = {}
        self._sig_slot = {name: i for i, name in enumerate(c.signal_names)}
        self._tick = 0

        self.kernels.init_locks(self.par, self.scal, self.rng, self.perm,
                                self.ntc_locks)

    # -- operations --------------------------------------------------------

    def inject_antigen(self, syscall: int) -> None:
        """Store antigen_multiplier copies, evicting oldest past capacity."""
        if not 0 <= syscall < self.context.universe_size:
            raise TlridsError(
                f"syscall {syscall} outside universe "
                f"[0, {self.context.universe_size})"
            )
        self.kernels.store_inject(self.par, self.scal, self.st_sys,
                                  self.st_vcount, syscall)

    def set_signal(self, name: str, level: int) -> None:
        """Record the current level for a signal (sample-and-hold)."""
        if name not in SIGNAL_INDEX:
            raise UnknownSignalError(f"unknown signal {name!r}")
        if name not in self._board and len(self._board) >= self.params.max_cytokines:
            raise SignalCapacityError(
                f"cannot track {name!r}: max_cytokines="
                f"{self.params.max_cytokines} signals already set"
            )
        self._board[name] = level
        slot = self._sig_slot.get(name)
        if slot is not None:
            self.held[slot] = level
            self.held_known[slot] = True

    def read_signal(self, name: str) -> int | None:
        return self._board.get(name)

    def step(self) -> TickReport:
        """Advance one tick; every live cell runs exactly one callback."""
        if self.scal[K.S_ALERT_N] + self.params.num_cells_2 > self._alert_cap:
            self._grow_alert_buffers()
        before_alerts = int(self.scal[K.S_ALERT_N])
        before_tol = int(self.scal[K.S_TOLERANCE])
        before_act = int(self.scal[K.S_ACTIVATIONS])
        before_blocked = int(self.scal[K.S_BLOCKED])
        pop = np.zeros(K.N_POPS, dtype=np.int32)
        self.kernels.tissue_tick(
            self.par, self.scal, self.rng, self._tick,
            self.st_sys, self.st_vcount, self.st_alive, self.st_keep,
            self.idc_iter, self.idc_dirty, self.idc_ag, self.idc_count,
            self.dc_kind, self.dc_iter, self.dc_dirty, self.dc_store,
            self.dc_scount, self.dc_off, self.dc_since, self.dc_pres,
            self.pres_count,
            self.ntc_iter, self.ntc_dirty, self.ntc_locks,
            self.atc_iter, self.atc_dirty, self.atc_lock,
            self.held, self.held_known, self.nl_values, self.nl_off,
            self.perm,
            self.alerts_tick, self.alerts_sys, self.alerts_src,
            pop,
        )
        after_alerts = int(self.scal[K.S_ALERT_N])
        report = TickReport(
            tick=self._tick,
            populations={k: int(pop[i]) for i, k in enumerate(CELL_KINDS)},
            alerts=tuple(
                int(v) for v in self.alerts_sys[before_alerts:after_alerts]
            ),
            tolerance_deletions=int(self.scal[K.S_TOLERANCE]) - before_tol,
            activations=int(self.scal[K.S_ACTIVATIONS]) - before_act,
            blocked_spawns=int(self.scal[K.S_BLOCKED]) - before_blocked,
        )
        self._tick += 1
        return report

    def population(self, kind: str) -> int:
        if kind not in _POP_INDEX:
            raise TlridsError(f"unknown cell kind {kind!r}")
        if kind == "iDC":
            return self.params.num_cells_1
        if kind == "nTC":
            return self.params.num_cells_2
        if kind == "smDC":
            return int(self.scal[K.S_SM_N])
        if kind == "mDC":
            return int(self.scal[K.S_M_N])
        return int(self.scal[K.S_ATC_N])

    def populations(self) -> dict[str, int]:
        return {k: self.population(k) for k in CELL_KINDS}

    def antigen_store(self) -> np.ndarray:
        """Current store contents in FIFO order (copy)."""
        return self.st_sys[: int(self.scal[K.S_STORE_N])].copy()

    @property
    def tick_count(self) -> int:
        return self._tick

    @property
    def total_alerts(self) -> int:
        return int(self.scal[K.S_ALERT_N])

    def _grow_alert_buffers(self) -> None:
        new_cap = self._alert_cap * 2
        for attr in ("alerts_tick", "alerts_sys", "alerts_src"):
            old = getattr(self, attr)
            grown = np.zeros(new_cap, dtype=old.dtype)
            grown[: old.shape[0]] = old
            setattr(self, attr, grown)
        self._alert_cap = new_cap

    def check_invariants(self) -> None:
        """Debug-level consistency sweep over the array state."""
        p = self.params
        lymph = int(self.scal[K.S_LYMPH_N])
        atc = int(self.scal[K.S_ATC_N])
        store_n = int(self.scal[K.S_STORE_N])
        assert store_n <= p.max_antigen
        assert int(self.scal[K.S_SM_N]) + int(self.scal[K.S_M_N]) == lymph
        total = p.num_cells_1 + p.num_cells_2 + lymph + atc
        assert total <= p.max_cells, f"cell budget exceeded: {total}"
        counts = np.bincount(
            self.st_sys[:store_n], minlength=self.context.universe_size
        )
        assert np.array_equal(counts, self.st_vcount), "store value counts drifted"
        pres = self.dc_pres[:lymph].sum(axis=0).astype(np.int32)
        assert np.array_equal(pres, self.pres_count), "presented counts drifted"
        for i in range(p.num_cells_1):
            assert 0 <= int(self.idc_count[i]) <= p.num_antigen_1
        locks = self.ntc_locks.ravel()
        perm_set = set(int(v) for v in self.perm)
        assert all(int(v) in perm_set for v in locks), "lock outside permissible set"


def replay_schedule(
    tissue: Tissue,
    ev_tick: np.ndarray,
    ev_sys: np.ndarray,
    rd_tick: np.ndarray,
    rd_sig: np.ndarray,
    rd_level: np.ndarray,
    n_ticks: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Run a precomputed tick schedule through the fast kernel path.

    Returns (alert_ticks, alert_syscalls, alert_sources, pop_trace).
    The alert buffers are sized for the worst case (one activation per
    naive-TC slot per tick) so a single pass always suffices.
    """
    cap = int(tissue.scal[K.S_ALERT_N]) + int(n_ticks) * tissue.params.num_cells_2 + 1
    if cap > tissue._alert_cap:
        for attr in ("alerts_tick", "alerts_sys", "alerts_src"):
            old = getattr(tissue, attr)
            grown = np.zeros(cap, dtype=old.dtype)
            grown[: old.shape[0]] = old
            setattr(tissue, attr, grown)
        tissue._alert_cap = cap
    pop_trace = np.zeros((n_ticks, K.N_POPS), dtype=np.int32)
    err = tissue.kernels.run_ticks(
        tissue.par, tissue.scal, tissue.rng,
        tissue.st_sys, tissue.st_vcount, tissue.st_alive, tissue.st_keep,
        tissue.idc_iter, tissue.idc_dirty, tissue.idc_ag, tissue.idc_count,
        tissue.dc_kind, tissue.dc_iter, tissue.dc_dirty, tissue.dc_store,
        tissue.dc_scount, tissue.dc_off, tissue.dc_since, tissue.dc_pres,
        tissue.pres_count,
        tissue.ntc_iter, tissue.ntc_dirty, tissue.ntc_locks,
        tissue.atc_iter, tissue.atc_dirty, tissue.atc_lock,
        tissue.held, tissue.held_known, tissue.nl_values, tissue.nl_off,
        tissue.perm,
        tissue.alerts_tick, tissue.alerts_sys, tissue.alerts_src,
        np.ascontiguousarray(ev_tick, dtype=np.int64),
        np.ascontiguousarray(ev_sys, dtype=np.int32),
        np.ascontiguousarray(rd_tick, dtype=np.int64),
        np.ascontiguousarray(rd_sig, dtype=np.int64),
        np.ascontiguousarray(rd_level, dtype=np.int64),
        tissue._tick, n_ticks, pop_trace,
    )
    if err != 0:
        raise TlridsError(f"tissue kernel error {err}")
    tissue._tick += n_ticks
    n_alerts = int(tissue.scal[K.S_ALERT_N])
    return (
        tissue.alerts_tick[:n_alerts].copy(),
        tissue.alerts_sys[:n_alerts].copy(),
        tissue.alerts_src[:n_alerts].copy(),
        pop_trace,
    )
