"""Tick kernel for the tissue runtime, shared by both backends.

Cells live in flat numpy arrays rather than objects so the whole tick
fits in one compiled function. ``build_kernels(use_numba=True)`` wraps
every function in ``numba.njit`` (nogil, so scenario fleets can run on
threads); ``build_kernels(use_numba=False)`` returns the same source
uncompiled. Both paths consume randomness through the splitmix64
stream in ``_rng``, so their outputs are bit-identical; the numpy path
is the portability/debugging fallback and is much slower.

Array layout (capacities fixed at tissue construction):

* store: ``st_sys`` in FIFO order, plus a per-value token count
* immature DCs: fixed slots, one per ``num_cells_1`` (replacement
  reuses the slot, which keeps the population constant by construction)
* lymph DCs (semimature/mature): dense array with swap-removal, plus a
  per-DC presented-value bitmap and a global presented-value count
* naive TCs: fixed slots with per-slot lock rows
* activated TCs: dense array with swap-removal

Iteration counters age at the end of the tick; any cell whose counter
was explicitly set during the tick (creation, migration reset,
stay-alive, re-stimulation) skips that aging, so a stay-alive really
leaves the cell at iteration 1 when the next tick starts.

Cell creation is soft-gated at ``max_cells``: a blocked migration is
retried on later ticks and a blocked activation is dropped (counted in
``S_BLOCKED``), never an error. Sustained anomalous input saturates
the activated-TC pool at roughly ``num_cells_2 * (cell_lifespan_5+1)``,
which exceeds the default cell budget by design of the parameter set,
so a hard error here would make long replays impossible.
"""

from __future__ import annotations

from types import SimpleNamespace

from ._rng import build_rng

# --- parameter vector indices (see TissueParams.to_array) ---
P_MAX_ANTIGEN = 0
P_MAX_CYTOKINES = 1
P_MAX_CELLS = 2
P_ANTIGEN_MULT = 3
P_NUM_CELLS_1 = 4
P_LIFESPAN_1 = 5
P_NUM_ANTIGEN_1 = 6
P_NUM_AG_RECEPTORS_1 = 7
P_NUM_AG_PRODUCERS_1 = 8
P_NUM_CYT_RECEPTORS_1 = 9
P_AGP_ACTION_TIME = 10
P_NUM_CELLS_2 = 11
P_LIFESPAN_2 = 12
P_NUM_CELL_RECEPTORS_2 = 13
P_NUM_VR_RECEPTORS_2 = 14
P_LIFESPAN_3 = 15
P_LIFESPAN_4 = 16
P_LIFESPAN_5 = 17
P_UNIVERSE = 18
P_TLR_ENABLED = 19
P_SM_AS_MATURE = 20
P_LOCK_SWEEP = 21
N_PAR = 22

# --- mutable scalar state indices ---
S_STORE_N = 0
S_LYMPH_N = 1
S_SM_N = 2
S_M_N = 3
S_ATC_N = 4
S_ALERT_N = 5
S_ACTIVATIONS = 6
S_TOLERANCE = 7
S_BLOCKED = 8
N_SCAL = 9

# --- DC kinds in the lymph array ---
KIND_SEMIMATURE = 0
KIND_MATURE = 1

# --- population row layout: iDC, smDC, mDC, nTC, aTC ---
POP_IDC = 0
POP_SMDC = 1
POP_MDC = 2
POP_NTC = 3
POP_ATC = 4
N_POPS = 5


def build_kernels(use_numba: bool) -> SimpleNamespace:
    if use_numba:
        import numba

        jit = numba.njit(cache=False, nogil=True)
        next_u64, rand_below = build_rng(jit)
    else:
        def jit(f):
            return f

        next_u64, rand_below = build_rng(None)

    @jit
    def store_inject(par, scal, st_sys, st_vcount, syscall):
        """Append antigen_multiplier copies, evicting oldest on overflow."""
        cap = par[P_MAX_ANTIGEN]
        add = par[P_ANTIGEN_MULT]
        if add > cap:
            add = cap
        n = scal[S_STORE_N]
        drop = n + add - cap
        if drop > 0:
            for i in range(drop):
                st_vcount[st_sys[i]] -= 1
            for i in range(drop, n):
                st_sys[i - drop] = st_sys[i]
            n -= drop
        for _ in range(add):
            st_sys[n] = syscall
            st_vcount[syscall] += 1
            n += 1
        scal[S_STORE_N] = n

    @jit
    def _member(values, lo, hi, v):
        h = hi
        while lo < h:
            mid = (lo + h) >> 1
            if values[mid] < v:
                lo = mid + 1
            else:
                h = mid
        return lo < hi and values[lo] == v

    @jit
    def tlr_active(held, held_known, nl_values, nl_off):
        """Any monitored signal holding a level never seen in training."""
        for s in range(held.shape[0]):
            if held_known[s]:
                if not _member(nl_values, nl_off[s], nl_off[s + 1], held[s]):
                    return True
        return False

    @jit
    def draw_locks(par, scal, rng, perm, ntc_locks, slot):
        nv = par[P_NUM_VR_RECEPTORS_2]
        npm = perm.shape[0]
        if par[P_LOCK_SWEEP] == 1:
            # full-coverage mode: each slot owns a fixed wrapped window of
            # the permissible values, so the live population covers every
            # value at every instant (requires slots * locks >= values,
            # checked at construction)
            pos = slot * nv
            for l in range(nv):
                ntc_locks[slot, l] = perm[(pos + l) % npm]
        else:
            for l in range(nv):
                ntc_locks[slot, l] = perm[rand_below(rng, npm)]

    @jit
    def init_locks(par, scal, rng, perm, ntc_locks):
        for slot in range(par[P_NUM_CELLS_2]):
            draw_locks(par, scal, rng, perm, ntc_locks, slot)

    @jit
    def _unpresent(dc_pres, pres_count, d, universe):
        for v in range(universe):
            if dc_pres[d, v]:
                dc_pres[d, v] = False
                pres_count[v] -= 1

    @jit
    def _present_window(par, dc_store, dc_scount, dc_off, dc_pres, pres_count, d):
        cnt = dc_scount[d]
        w = par[P_NUM_AG_PRODUCERS_1]
        if cnt < w:
            w = cnt
        off = dc_off[d]
        for j in range(w):
            v = dc_store[d, (off + j) % cnt]
            if not dc_pres[d, v]:
                dc_pres[d, v] = True
                pres_count[v] += 1

    @jit
    def _migrate(par, scal, slot, kind,
                 idc_ag, idc_count,
                 dc_kind, dc_iter, dc_dirty, dc_store, dc_scount, dc_off,
                 dc_since, dc_pres, pres_count):
        """Move an immature DC's antigen into a new lymph-node DC.

        Returns False when the cell budget is exhausted; the caller
        leaves the immature DC in place to retry on a later tick.
        """
        total = (par[P_NUM_CELLS_1] + par[P_NUM_CELLS_2]
                 + scal[S_LYMPH_N] + scal[S_ATC_N])
        if total + 1 > par[P_MAX_CELLS]:
            scal[S_BLOCKED] += 1
            return False
        d = scal[S_LYMPH_N]
        dc_kind[d] = kind
        dc_iter[d] = 0
        dc_dirty[d] = True
        cnt = idc_count[slot]
        for j in range(cnt):
            dc_store[d, j] = idc_ag[slot, j]
        dc_scount[d] = cnt
        dc_off[d] = 0
        dc_since[d] = 0
        for v in range(par[P_UNIVERSE]):
            dc_pres[d, v] = False
        _present_window(par, dc_store, dc_scount, dc_off, dc_pres, pres_count, d)
        scal[S_LYMPH_N] = d + 1
        if kind == KIND_SEMIMATURE:
            scal[S_SM_N] += 1
        else:
            scal[S_M_N] += 1
        return True

    @jit
    def _remove_dc(par, scal, d,
                   dc_kind, dc_iter, dc_dirty, dc_store, dc_scount, dc_off,
                   dc_since, dc_pres, pres_count):
        _unpresent(dc_pres, pres_count, d, par[P_UNIVERSE])
        if dc_kind[d] == KIND_SEMIMATURE:
            scal[S_SM_N] -= 1
        else:
            scal[S_M_N] -= 1
        last = scal[S_LYMPH_N] - 1
        if d != last:
            dc_kind[d] = dc_kind[last]
            dc_iter[d] = dc_iter[last]
            dc_dirty[d] = dc_dirty[last]
            dc_scount[d] = dc_scount[last]
            dc_off[d] = dc_off[last]
            dc_since[d] = dc_since[last]
            dc_store[d, :] = dc_store[last, :]
            dc_pres[d, :] = dc_pres[last, :]
        scal[S_LYMPH_N] = last

    @jit
    def tissue_tick(par, scal, rng, tick_no,
                    st_sys, st_vcount, st_alive, st_keep,
                    idc_iter, idc_dirty, idc_ag, idc_count,
                    dc_kind, dc_iter, dc_dirty, dc_store, dc_scount, dc_off,
                    dc_since, dc_pres, pres_count,
                    ntc_iter, ntc_dirty, ntc_locks,
                    atc_iter, atc_dirty, atc_lock,
                    held, held_known, nl_values, nl_off,
                    perm,
                    alerts_tick, alerts_sys, alerts_src,
                    pop_out):
        """Run one tick: every live cell gets exactly one callback.

        Order: immature DCs (slot order), naive TCs (slot order),
        semimature DCs, mature DCs, activated TCs, then aging. Cells
        created during the tick run their first callback next tick, but
        freshly migrated DCs are already visible to later binding.
        """
        n1 = par[P_NUM_CELLS_1]
        n2 = par[P_NUM_CELLS_2]
        producers = par[P_NUM_AG_PRODUCERS_1]

        tlr_on = False
        if par[P_TLR_ENABLED] == 1:
            tlr_on = tlr_active(held, held_known, nl_values, nl_off)

        # --- immature DC phase -------------------------------------------
        store_n = scal[S_STORE_N]
        for i in range(store_n):
            st_alive[i] = i
            st_keep[i] = True
        alive_n = store_n

        for i in range(n1):
            if idc_iter[i] >= par[P_LIFESPAN_1]:
                if idc_count[i] > 0:
                    if _migrate(par, scal, i, KIND_SEMIMATURE,
                                idc_ag, idc_count,
                                dc_kind, dc_iter, dc_dirty, dc_store,
                                dc_scount, dc_off, dc_since, dc_pres,
                                pres_count):
                        idc_iter[i] = 0
                        idc_count[i] = 0
                        idc_dirty[i] = True
                else:
                    idc_iter[i] = 0
                    idc_dirty[i] = True
                continue
            if tlr_on and idc_count[i] > 0:
                if _migrate(par, scal, i, KIND_MATURE,
                            idc_ag, idc_count,
                            dc_kind, dc_iter, dc_dirty, dc_store,
                            dc_scount, dc_off, dc_since, dc_pres,
                            pres_count):
                    idc_iter[i] = 0
                    idc_count[i] = 0
                    idc_dirty[i] = True
                continue
            # collect antigen: up to receptor count, capped by cell space
            k = par[P_NUM_AG_RECEPTORS_1]
            cap_left = par[P_NUM_ANTIGEN_1] - idc_count[i]
            if k > cap_left:
                k = cap_left
            if k > alive_n:
                k = alive_n
            for _ in range(k):
                r = rand_below(rng, alive_n)
                idx = st_alive[r]
                alive_n -= 1
                st_alive[r] = st_alive[alive_n]
                st_keep[idx] = False
                v = st_sys[idx]
                idc_ag[i, idc_count[i]] = v
                idc_count[i] += 1
                st_vcount[v] -= 1

        if alive_n != store_n:
            w = 0
            for i in range(store_n):
                if st_keep[i]:
                    st_sys[w] = st_sys[i]
                    w += 1
            scal[S_STORE_N] = w

        # --- naive TC phase ----------------------------------------------
        nv = par[P_NUM_VR_RECEPTORS_2]
        for i in range(n2):
            if ntc_iter[i] >= par[P_LIFESPAN_2]:
                draw_locks(par, scal, rng, perm, ntc_locks, i)
                ntc_iter[i] = 0
                ntc_dirty[i] = True
                continue
            lym = scal[S_LYMPH_N]
            if lym == 0:
                continue
            # randomness is only consumed when some lymph DC presents a
            # locked value; matchless draws would have no effect anyway
            possible = False
            for l in range(nv):
                if pres_count[ntc_locks[i, l]] > 0:
                    possible = True
                    break
            if not possible:
                continue
            for _ in range(par[P_NUM_CELL_RECEPTORS_2]):
                d = rand_below(rng, lym)
                matched = -1
                for l in range(nv):
                    v = ntc_locks[i, l]
                    if dc_pres[d, v]:
                        matched = v
                        break
                if matched < 0:
                    continue
                if dc_kind[d] == KIND_MATURE or par[P_SM_AS_MATURE] == 1:
                    total = n1 + n2 + scal[S_LYMPH_N] + scal[S_ATC_N]
                    if total + 1 > par[P_MAX_CELLS]:
                        scal[S_BLOCKED] += 1
                        break
                    dc_iter[d] = 1
                    dc_dirty[d] = True
                    a = scal[S_ATC_N]
                    atc_iter[a] = 0
                    atc_dirty[a] = True
                    atc_lock[a] = matched
                    scal[S_ATC_N] = a + 1
                    na = scal[S_ALERT_N]
                    if na < alerts_sys.shape[0]:
                        alerts_tick[na] = tick_no
                        alerts_sys[na] = matched
                        alerts_src[na] = dc_kind[d]
                    scal[S_ALERT_N] = na + 1
                    scal[S_ACTIVATIONS] += 1
                else:
                    dc_iter[d] = 1
                    dc_dirty[d] = True
                    scal[S_TOLERANCE] += 1
                draw_locks(par, scal, rng, perm, ntc_locks, i)
                ntc_iter[i] = 0
                ntc_dirty[i] = True
                break

        # --- semimature then mature DC lifespan sweeps --------------------
        d = scal[S_LYMPH_N] - 1
        while d >= 0:
            if dc_kind[d] == KIND_SEMIMATURE and dc_iter[d] >= par[P_LIFESPAN_3]:
                _remove_dc(par, scal, d, dc_kind, dc_iter, dc_dirty, dc_store,
                           dc_scount, dc_off, dc_since, dc_pres, pres_count)
            d -= 1
        d = scal[S_LYMPH_N] - 1
        while d >= 0:
            if dc_kind[d] == KIND_MATURE and dc_iter[d] >= par[P_LIFESPAN_4]:
                _remove_dc(par, scal, d, dc_kind, dc_iter, dc_dirty, dc_store,
                           dc_scount, dc_off, dc_since, dc_pres, pres_count)
            d -= 1

        # --- activated TC phase -------------------------------------------
        a = scal[S_ATC_N] - 1
        while a >= 0:
            if atc_iter[a] >= par[P_LIFESPAN_5]:
                last = scal[S_ATC_N] - 1
                if a != last:
                    atc_iter[a] = atc_iter[last]
                    atc_dirty[a] = atc_dirty[last]
                    atc_lock[a] = atc_lock[last]
                scal[S_ATC_N] = last
            elif st_vcount[atc_lock[a]] > 0:
                # matching antigen still in the tissue store: re-stimulated
                atc_iter[a] = 0
                atc_dirty[a] = True
            a -= 1

        # --- aging and presentation-window rotation -----------------------
        for i in range(n1):
            if idc_dirty[i]:
                idc_dirty[i] = False
            else:
                idc_iter[i] += 1
        for i in range(n2):
            if ntc_dirty[i]:
                ntc_dirty[i] = False
            else:
                ntc_iter[i] += 1
        for a in range(scal[S_ATC_N]):
            if atc_dirty[a]:
                atc_dirty[a] = False
            else:
                atc_iter[a] += 1
        action = par[P_AGP_ACTION_TIME]
        for d in range(scal[S_LYMPH_N]):
            if dc_dirty[d]:
                dc_dirty[d] = False
            else:
                dc_iter[d] += 1
            dc_since[d] += 1
            if dc_scount[d] > producers and dc_since[d] % action == 0:
                _unpresent(dc_pres, pres_count, d, par[P_UNIVERSE])
                dc_off[d] = (dc_off[d] + producers) % dc_scount[d]
                _present_window(par, dc_store, dc_scount, dc_off, dc_pres,
                                pres_count, d)

        pop_out[POP_IDC] = n1
        pop_out[POP_SMDC] = scal[S_SM_N]
        pop_out[POP_MDC] = scal[S_M_N]
        pop_out[POP_NTC] = n2
        pop_out[POP_ATC] = scal[S_ATC_N]
        return 0

    @jit
    def run_ticks(par, scal, rng,
                  st_sys, st_vcount, st_alive, st_keep,
                  idc_iter, idc_dirty, idc_ag, idc_count,
                  dc_kind, dc_iter, dc_dirty, dc_store, dc_scount, dc_off,
                  dc_since, dc_pres, pres_count,
                  ntc_iter, ntc_dirty, ntc_locks,
                  atc_iter, atc_dirty, atc_lock,
                  held, held_known, nl_values, nl_off,
                  perm,
                  alerts_tick, alerts_sys, alerts_src,
                  ev_tick, ev_sys, rd_tick, rd_sig, rd_level,
                  start_tick, n_ticks, pop_trace):
        """Replay a schedule: inject events, hold signals, tick repeatedly.

        Event/reading arrays carry tick indices (precomputed from
        timestamps) and must be sorted; the latest reading in a window
        wins. Populations land in pop_trace, one row per tick.
        """
        ei = 0
        ri = 0
        ne = ev_tick.shape[0]
        nr = rd_tick.shape[0]
        for t in range(start_tick, start_tick + n_ticks):
            while ei < ne and ev_tick[ei] <= t:
                store_inject(par, scal, st_sys, st_vcount, ev_sys[ei])
                ei += 1
            while ri < nr and rd_tick[ri] <= t:
                s = rd_sig[ri]
                held[s] = rd_level[ri]
                held_known[s] = True
                ri += 1
            err = tissue_tick(par, scal, rng, t,
                              st_sys, st_vcount, st_alive, st_keep,
                              idc_iter, idc_dirty, idc_ag, idc_count,
                              dc_kind, dc_iter, dc_dirty, dc_store, dc_scount,
                              dc_off, dc_since, dc_pres, pres_count,
                              ntc_iter, ntc_dirty, ntc_locks,
                              atc_iter, atc_dirty, atc_lock,
                              held, held_known, nl_values, nl_off,
                              perm,
                              alerts_tick, alerts_sys, alerts_src,
                              pop_trace[t - start_tick])
            if err != 0:
                return err
        return 0

    return SimpleNamespace(
        use_numba=use_numba,
        next_u64=next_u64,
        rand_below=rand_below,
        store_inject=store_inject,
        tlr_active=tlr_active,
        draw_locks=draw_locks,
        init_locks=init_locks,
        tissue_tick=tissue_tick,
        run_ticks=run_ticks,
    )
