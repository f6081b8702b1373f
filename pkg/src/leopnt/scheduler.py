"""Greedy and randomized schedulers for periodic ranging bursts.

Both schedulers assign, for every cell, one burst per signal index: the
first from the cell's primary (broadband-serving, zenith-most) SV and the
rest from SVs picked for geometric diversity.  All placements go through
the TX/RX reservation cubes plus per-beam and per-cell set-up trackers, so
any emitted schedule satisfies the full constraint set by construction; the
independent checker in :mod:`leopnt.feasibility` verifies this.

The greedy scheduler walks candidate SVs in goal-alignment order and scans
the time wheel earliest-fit from a per-(cell, signal) hash offset, which
spreads load around the period.  The randomized scheduler draws
(SV, beam, channel, time) tuples uniformly and rejection-samples until the
reservations succeed; every draw costs one step, making the step count an
empirical probe of scheduling complexity.

Cells whose signals cannot all be placed are reported as failures and
contribute no assignments (their partial reservations are retained in the
cubes, which is conservative).
"""

from __future__ import annotations

import math
import time
from bisect import bisect_left, insort
from dataclasses import dataclass, field

import numpy as np

from .cells import CellGrid, SPEED_OF_LIGHT_KM_S, sweep_time
from .cells import _unit_vectors as _cells_unit_vectors
from .constellation import (
    BeamChannelMap,
    ConstellationConfig,
    GEO_ARC_SAMPLES,
    GEO_RADIUS_KM,
    MASK_GUARD_DEG,
    goal_directions_enu,
    propagate_arrays,
)
from .cubes import (
    BURST,
    EXCLUDE,
    RxCube,
    SWITCH,
    TxCube,
    rx_intervals_for,
    tx_intervals_for,
    wrap_interval,
)
from .errors import ParameterError, SaturationError
from .schedule import PRIMARY, SECONDARY, Assignment, GnssSchedule, TimingParams


@dataclass(frozen=True)
class SchedulerConfig:
    mode: str = "greedy"                 # greedy | randomized
    rng_seed: int = 0
    max_attempts_per_signal: int = 1000
    epoch_s: float = 0.0
    cell_order: str = "id"               # id | random | geo
    goal_elevation_deg: float = 45.0
    geo_mask_halfwidth_deg: float = 5.0
    block_size: int = 1024

    def __post_init__(self):
        if self.max_attempts_per_signal < 1:
            raise ParameterError("max_attempts_per_signal must be >= 1")
        if self.mode not in ("greedy", "randomized"):
            raise ParameterError(f"unknown scheduler mode {self.mode!r}")
        if self.cell_order not in ("id", "random", "geo"):
            raise ParameterError(f"unknown cell order {self.cell_order!r}")


@dataclass
class ScheduleStats:
    total_steps: int = 0
    conflicts_tx: int = 0
    conflicts_rx: int = 0
    cells_failed: list = field(default_factory=list)
    failure_reasons: dict = field(default_factory=dict)
    wall_time_s: float = 0.0

    def to_json_dict(self) -> dict:
        # wall time is intentionally left out: emitted artifacts must be
        # byte-stable for a fixed (scenario, seed)
        return {
            "total_steps": self.total_steps,
            "conflicts_tx": self.conflicts_tx,
            "conflicts_rx": self.conflicts_rx,
            "cells_failed": list(self.cells_failed),
            "failure_reasons": {str(k): v for k, v in sorted(self.failure_reasons.items())},
        }


def complexity_bound(n: int, n_cells: int, r_tx: float, r_rx: float) -> float:
    """Expected rejection-sampling step count: n*N_cells / (1-2R_TX-2R_RX)."""
    denom = 1.0 - 2.0 * r_tx - 2.0 * r_rx
    if denom <= 0.0:
        raise SaturationError(
            f"cube reservations too dense for the sampling bound: "
            f"1 - 2*{r_tx} - 2*{r_rx} <= 0"
        )
    return n * n_cells / denom


def _stable_offset(cell_id: int, s: int, period: int) -> int:
    h = (cell_id * 2654435761 + s * 0x9E3779B1) & 0xFFFFFFFF
    h ^= h >> 13
    return (h * 2246822519 & 0xFFFFFFFF) % period


class _SetupTracker:
    """Sorted per-key event times enforcing a circular minimum gap."""

    __slots__ = ("_events", "period")

    def __init__(self, period: int):
        self._events = {}
        self.period = period

    def check(self, key, ev: int, min_gap: int):
        """None if ``ev`` keeps the gap to all existing events, else the
        advance (us) needed to clear the earliest violated window."""
        lst = self._events.get(key)
        if not lst:
            return None
        P = self.period
        i = bisect_left(lst, ev)
        prev = lst[i - 1] if i else lst[-1] - P
        nxt = lst[i] if i < len(lst) else lst[0] + P
        if ev - prev < min_gap:
            return prev + min_gap - ev
        if nxt - ev < min_gap:
            return nxt + min_gap - ev
        return None

    def commit(self, key, ev: int):
        lst = self._events.setdefault(key, [])
        insort(lst, ev)


class _Workspace:
    def __init__(self, grid: CellGrid, config: ConstellationConfig,
                 timing: TimingParams, cfg: SchedulerConfig):
        self.grid = grid
        self.config = config
        self.timing = timing
        self.cfg = cfg
        R = grid.params.earth_radius_km
        self.sv_pos, _ = propagate_arrays(config, cfg.epoch_s, R)
        self.channel_map = BeamChannelMap(config.n_beams, config.n_channels,
                                          config.n_beam_channels)
        self.tx = TxCube(config.n_sats, config.n_beams, config.n_channels,
                         config.n_beam_channels, timing.t_period_us)
        self.rx = RxCube(grid.n_cells, config.n_channels, timing.t_period_us)
        self.tx_setup = _SetupTracker(timing.t_period_us)
        self.rx_setup = _SetupTracker(timing.t_period_us)
        self.schedule = GnssSchedule(t_period_us=timing.t_period_us)
        self.stats = ScheduleStats()
        self.t_sweep_us = int(round(sweep_time(grid.params) * 1e6))
        self._cell_pts = {}

    def _observer_points(self, cell_id: int) -> np.ndarray:
        """Cell center plus hexagon vertices as surface points, (7, 3) km."""
        pts = self._cell_pts.get(cell_id)
        if pts is None:
            R = self.grid.params.earth_radius_km
            lat = float(self.grid.lats_deg[cell_id])
            lon = float(self.grid.lons_deg[cell_id])
            ll = [(lat, lon)] + self.grid.cell_vertices(cell_id)
            pts = R * _cells_unit_vectors(*np.array(ll).T)
            self._cell_pts[cell_id] = pts
        return pts

    def flight_time_us(self, cell_id: int, sv_id: int) -> int:
        d = self.sv_pos[sv_id] - self._observer_points(cell_id)
        rng_km = math.sqrt((d * d).sum(axis=1).min())
        return int(round(rng_km / SPEED_OF_LIGHT_KM_S * 1e6))

    # -- single placement attempt ---------------------------------------

    def attempt(self, a: Assignment):
        """Try to reserve everything an assignment needs, atomically.

        Returns None on success (reservations committed) or
        ``(source, advance_us)`` where source is 'tx' or 'rx' and advance is
        how far the transmit time must move to clear the earliest blocker.
        """
        timing = self.timing
        period = timing.t_period_us
        tx_checks = []
        for start, length, status, beam_wide in tx_intervals_for(a, timing):
            for s, e in wrap_interval(start, length, period):
                tx_checks.append((s, e, status, beam_wide))
        for s, e, status, beam_wide in tx_checks:
            if beam_wide:
                c = self.tx.check_beam(a.sv_id, a.beam_id, s, e, status)
            else:
                c = self.tx.check_channel(a.sv_id, a.beam_id, a.channel_id, s, e, status)
            if c:
                return "tx", (c.blocking_end - c.attempted_start) % period or period

        rx_checks = []
        for start, length, status in rx_intervals_for(a, timing):
            for s, e in wrap_interval(start, length, period):
                rx_checks.append((a.cell_id, s, e, status))
        t_arr = a.t_tx_us + a.t_flight_us
        window = timing.t_burst_us + a.t_sweep_us
        for nbr in self.grid.neighbors(a.cell_id):
            for s, e in wrap_interval(t_arr, window, period):
                rx_checks.append((int(nbr), s, e, EXCLUDE))
        for cell, s, e, status in rx_checks:
            c = self.rx.check(cell, a.channel_id, s, e, status)
            if c:
                return "rx", (c.blocking_end - c.attempted_start) % period or period

        ev_tx = ev_rx = None
        if a.kind == SECONDARY:
            ev_tx = (a.t_tx_us - timing.t_switch_tx_us) % period
            adv = self.tx_setup.check((a.sv_id, a.beam_id), ev_tx, timing.t_setup_tx_us)
            if adv:
                return "tx", adv
            ev_rx = (t_arr - timing.t_switch_rx_us) % period
            adv = self.rx_setup.check(a.cell_id, ev_rx, timing.t_setup_rx_us)
            if adv:
                return "rx", adv

        for s, e, status, beam_wide in tx_checks:
            if beam_wide:
                self.tx.commit_beam(a.sv_id, a.beam_id, s, e, status)
            else:
                self.tx.commit_channel(a.sv_id, a.beam_id, a.channel_id, s, e, status)
        for cell, s, e, status in rx_checks:
            self.rx.commit(cell, a.channel_id, s, e, status)
        if ev_tx is not None:
            self.tx_setup.commit((a.sv_id, a.beam_id), ev_tx)
        if ev_rx is not None:
            self.rx_setup.commit(a.cell_id, ev_rx)
        return None


# -- per-block visibility -----------------------------------------------------

def _block_visibility(grid: CellGrid, cell_ids, sv_pos, phi0_deg,
                      geo_halfwidth_deg, n_goal_dirs, goal_elevation_deg):
    """Usable SVs, elevations, and goal-alignment scores for a cell block.

    Returns a list (one entry per cell) of dicts with keys ``ids`` (usable
    sv ids), ``elev``, and ``scores`` of shape (n_goal_dirs, n_usable).
    """
    R = grid.params.earth_radius_km
    lats = np.radians(grid.lats_deg[cell_ids])
    lons = np.radians(grid.lons_deg[cell_ids])
    up = grid.unit_vectors(cell_ids)                              # (B, 3)
    east = np.stack([-np.sin(lons), np.cos(lons), np.zeros_like(lons)], axis=-1)
    north = np.stack([-np.sin(lats) * np.cos(lons),
                      -np.sin(lats) * np.sin(lons),
                      np.cos(lats)], axis=-1)
    E = east @ sv_pos.T                                           # (B, N)
    N = north @ sv_pos.T
    U = up @ sv_pos.T - R
    rng = np.sqrt(E * E + N * N + U * U)
    sin_el = U / rng
    above = sin_el >= np.sin(np.radians(phi0_deg + MASK_GUARD_DEG))

    goals = goal_directions_enu(n_goal_dirs, goal_elevation_deg)  # (G, 3)

    out = []
    cos_half = np.cos(np.radians(geo_halfwidth_deg + MASK_GUARD_DEG))
    geo_lam = np.linspace(-90.0, 90.0, GEO_ARC_SAMPLES)
    for b in range(len(cell_ids)):
        cand = np.nonzero(above[b])[0]
        if cand.shape[0]:
            # geostationary-arc mask, evaluated only above the elevation mask
            obs = R * up[b]
            los = sv_pos[cand] - obs
            los /= np.linalg.norm(los, axis=-1, keepdims=True)
            lam = np.radians(float(grid.lons_deg[cell_ids[b]]) + geo_lam)
            arc = GEO_RADIUS_KM * np.stack(
                [np.cos(lam), np.sin(lam), np.zeros_like(lam)], axis=-1) - obs
            arc /= np.linalg.norm(arc, axis=-1, keepdims=True)
            near_geo = (los @ arc.T).max(axis=1) >= cos_half
            cand = cand[~near_geo]
        enu_e = E[b, cand] / rng[b, cand]
        enu_n = N[b, cand] / rng[b, cand]
        enu_u = U[b, cand] / rng[b, cand]
        scores = (goals[:, 0:1] * enu_e[None, :]
                  + goals[:, 1:2] * enu_n[None, :]
                  + goals[:, 2:3] * enu_u[None, :])
        out.append({"ids": cand, "elev": np.degrees(np.arcsin(sin_el[b, cand])),
                    "scores": scores})
    return out


def _cell_order(grid: CellGrid, cfg: SchedulerConfig, rng) -> np.ndarray:
    ids = np.arange(grid.n_cells)
    if cfg.cell_order == "id":
        return ids
    if cfg.cell_order == "random":
        return rng.permutation(ids)
    order = np.lexsort((grid.lats_deg, grid.lons_deg))
    return ids[order]


def _iter_blocks(seq, size):
    for i in range(0, len(seq), size):
        yield seq[i:i + size]


def _run(grid: CellGrid, config: ConstellationConfig, timing: TimingParams,
         cfg: SchedulerConfig, randomized: bool):
    t0 = time.perf_counter()
    ws = _Workspace(grid, config, timing, cfg)
    rng = np.random.default_rng(cfg.rng_seed)
    n = timing.n_signals
    order = _cell_order(grid, cfg, rng)
    for block in _iter_blocks(order, cfg.block_size):
        vis = _block_visibility(grid, block, ws.sv_pos,
                                grid.params.min_elevation_deg,
                                cfg.geo_mask_halfwidth_deg, n,
                                cfg.goal_elevation_deg)
        for local, cell_id in enumerate(block):
            cell_id = int(cell_id)
            v = vis[local]
            if v["ids"].shape[0] < n:
                ws.stats.cells_failed.append(cell_id)
                ws.stats.failure_reasons[cell_id] = (
                    f"insufficient visibility: {v['ids'].shape[0]} usable SVs")
                continue
            if randomized:
                placed = _place_cell_randomized(ws, cell_id, v, rng)
            else:
                placed = _place_cell_greedy(ws, cell_id, v)
            if placed is None:
                ws.stats.cells_failed.append(cell_id)
            else:
                primary_sv, assignments = placed
                ws.schedule.primary_map[cell_id] = primary_sv
                ws.schedule.assignments.extend(assignments)
    ws.stats.wall_time_s = time.perf_counter() - t0
    return ws


def _pick_primary(v) -> int:
    # the zenith-alignment score (goal 0) is sin(elevation), so its argmax
    # is the zenith-most SV; using the same key as the s=1 candidate walk
    # keeps the primary pick and the first candidate identical under ties
    ids = v["ids"]
    best = np.lexsort((ids, -v["scores"][0]))[0]
    return int(ids[best])


def _place_cell_greedy(ws: _Workspace, cell_id: int, v):
    timing = ws.timing
    period = timing.t_period_us
    n = timing.n_signals
    primary_sv = _pick_primary(v)
    cmap = ws.channel_map
    used = set()
    placed = []
    for s in range(1, n + 1):
        ranked = v["ids"][np.lexsort((v["ids"], -v["scores"][s - 1]))]
        success = None
        for sv in ranked:
            sv = int(sv)
            if sv in used:
                continue
            kind = PRIMARY if sv == primary_sv else SECONDARY
            t_flight = ws.flight_time_us(cell_id, sv)
            offset = _stable_offset(cell_id, s, period)
            success = _scan_candidate(ws, cell_id, s, sv, kind, t_flight, offset)
            if success is not None:
                break
        if success is None:
            ws.stats.failure_reasons[cell_id] = f"no feasible slot for signal {s}"
            return None
        used.add(success.sv_id)
        placed.append(success)
    return primary_sv, placed


def _scan_candidate(ws: _Workspace, cell_id, s, sv, kind, t_flight, offset):
    """Earliest-fit scan of the time wheel over the SV's beam-channels."""
    timing = ws.timing
    period = timing.t_period_us
    for beam in range(ws.config.n_beams):
        for ch in ws.channel_map.channels_of_beam(beam):
            t = offset
            scanned = 0
            while scanned < period:
                a = Assignment(cell_id=cell_id, s=s, sv_id=sv, beam_id=beam,
                               channel_id=ch, t_tx_us=t, t_flight_us=t_flight,
                               t_sweep_us=ws.t_sweep_us, kind=kind)
                ws.stats.total_steps += 1
                res = ws.attempt(a)
                if res is None:
                    return a
                source, advance = res
                if source == "tx":
                    ws.stats.conflicts_tx += 1
                else:
                    ws.stats.conflicts_rx += 1
                t = (t + advance) % period
                scanned += advance
            if kind == SECONDARY:
                # whole-beam search failed; channels of this beam share the
                # same beam-level blockers, so move on to the next beam
                break
    return None


def _place_cell_randomized(ws: _Workspace, cell_id: int, v, rng):
    timing = ws.timing
    period = timing.t_period_us
    n = timing.n_signals
    primary_sv = _pick_primary(v)
    cmap = ws.channel_map
    ids = [int(i) for i in v["ids"]]
    used = set()
    placed = []
    for s in range(1, n + 1):
        success = None
        avail = [i for i in ids if i not in used]
        for _ in range(ws.cfg.max_attempts_per_signal):
            ws.stats.total_steps += 1
            if s == 1:
                sv = primary_sv
            else:
                sv = avail[rng.integers(0, len(avail))]
            beam = int(rng.integers(0, ws.config.n_beams))
            chans = cmap.channels_of_beam(beam)
            ch = int(chans[rng.integers(0, len(chans))])
            t = int(rng.integers(0, period))
            kind = PRIMARY if sv == primary_sv else SECONDARY
            a = Assignment(cell_id=cell_id, s=s, sv_id=sv, beam_id=beam,
                           channel_id=ch, t_tx_us=t,
                           t_flight_us=ws.flight_time_us(cell_id, sv),
                           t_sweep_us=ws.t_sweep_us, kind=kind)
            res = ws.attempt(a)
            if res is None:
                success = a
                break
            if res[0] == "tx":
                ws.stats.conflicts_tx += 1
            else:
                ws.stats.conflicts_rx += 1
        if success is None:
            ws.stats.failure_reasons[cell_id] = (
                f"signal {s}: no acceptance in {ws.cfg.max_attempts_per_signal} draws")
            return None
        used.add(success.sv_id)
        placed.append(success)
    return primary_sv, placed


def greedy_schedule(grid: CellGrid, config: ConstellationConfig,
                    timing: TimingParams, cfg: SchedulerConfig):
    """Deterministic goal-direction scheduler.

    Returns ``(schedule, stats, tx_cube, rx_cube)``; failed cells appear in
    ``stats.cells_failed`` and contribute no assignments.
    """
    ws = _run(grid, config, timing, cfg, randomized=False)
    return ws.schedule, ws.stats, ws.tx, ws.rx


def randomized_schedule(grid: CellGrid, config: ConstellationConfig,
                        timing: TimingParams, cfg: SchedulerConfig):
    """Rejection-sampling scheduler; ``stats.total_steps`` counts every draw."""
    ws = _run(grid, config, timing, cfg, randomized=True)
    return ws.schedule, ws.stats, ws.tx, ws.rx
