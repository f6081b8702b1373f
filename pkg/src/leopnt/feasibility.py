"""Independent feasibility oracle for ranging-burst schedules.

The checker rebuilds per-transmitter and per-receiver timelines directly
from the raw schedule tuples, at the 1 us scheduling quantum, without using
the reservation cubes, and verifies:

  1. every served cell gets exactly n bursts per period, one per signal
     index, with the primary/secondary kind matching the primary map;
  2. bursts on one beam-channel of an SV never overlap (a cross-cell burst
     steers the whole beam and therefore collides with any use of any
     channel of that beam, switch margins included);
  3. bursts from one beam to different cells are separated by the transmit
     switch interval whenever a cross-cell burst is involved (two primary
     bursts on different channels ride the broadband pointing schedule and
     are not constrained here);
  4. burst windows on one cell-channel never overlap from any viewpoint in
     the cell (windows are padded with the full cell sweep time);
  5. bursts from different SVs to one cell-channel are separated by the
     receive switch interval;
  6. transmit coefficient set-up events on one beam are separated by the
     transmit set-up interval (switching back to the held coefficient set
     is exempt);
  7. receive set-up events in one cell are likewise separated;
  8. bursts to neighboring cells on the same channel never overlap.

It also verifies mutual visibility: each burst must arrive from above the
minimum elevation mask and outside the geostationary exclusion mask.
Violations are data, not errors; an empty list means the schedule is
feasible.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .cells import CellGrid
from .constellation import (
    ConstellationConfig,
    SvState,
    geo_arc_directions,
    geo_arc_min_angle_deg,
    line_of_sight_arrays,
    _enu_basis,
)
from .schedule import PRIMARY, SECONDARY, GnssSchedule, TimingParams


@dataclass(frozen=True)
class Violation:
    constraint: str           # "1".."8", "structure", or "visibility"
    message: str
    cell_id: int | None = None
    sv_id: int | None = None
    times_us: tuple = ()

    def to_json_dict(self):
        return {
            "constraint": self.constraint,
            "message": self.message,
            "cell_id": self.cell_id,
            "sv_id": self.sv_id,
            "times_us": list(self.times_us),
        }


@dataclass
class FeasibilityReport:
    violations: list[Violation] = field(default_factory=list)
    n_assignments: int = 0
    n_cells_served: int = 0

    @property
    def feasible(self) -> bool:
        return not self.violations

    def counts(self) -> dict:
        out: dict[str, int] = {}
        for v in self.violations:
            out[v.constraint] = out.get(v.constraint, 0) + 1
        return out

    def to_json_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "n_assignments": self.n_assignments,
            "n_cells_served": self.n_cells_served,
            "violation_counts": dict(sorted(self.counts().items())),
            "violations": [v.to_json_dict() for v in self.violations],
        }

    def to_json(self, path):
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f, indent=1, sort_keys=True)
            f.write("\n")


def _circular_pairs(items, period, reach):
    """Yield ordered pairs (a, b) whose starts are within ``reach`` on the
    circular timeline; items are (start, end, payload) with start in
    [0, period)."""
    if len(items) < 2:
        return
    items = sorted(items, key=lambda x: (x[0], x[1]))
    n = len(items)
    ext = items + [(s + period, e + period, p) for s, e, p in items]
    for i in range(n):
        s_i, e_i, p_i = items[i]
        j = i + 1
        while j < i + n:
            s_j, e_j, p_j = ext[j]
            if s_j - s_i > reach:
                break
            yield (s_i, e_i, p_i), (s_j, e_j, p_j)
            j += 1


def _overlap(s1, e1, s2, e2):
    return s1 < e2 and s2 < e1


def _gap(s1, e1, s2, e2):
    """Gap between two non-overlapping intervals (later start minus earlier
    end); negative if they overlap."""
    if s1 <= s2:
        return s2 - e1
    return s1 - e2


def check_feasibility(schedule: GnssSchedule, grid: CellGrid, sv_states,
                      config: ConstellationConfig, timing: TimingParams,
                      geo_mask_halfwidth_deg: float = 5.0,
                      check_visibility: bool = True) -> FeasibilityReport:
    """Verify every scheduling constraint of a ranging schedule.

    ``sv_states`` is either a list of :class:`SvState` or an (N, 3) array of
    Earth-fixed positions indexed by sv_id.
    """
    report = FeasibilityReport(n_assignments=len(schedule.assignments))
    viol = report.violations
    period = schedule.t_period_us
    n = timing.n_signals

    # structural validation first: garbage in any field is reported rather
    # than crashing the timeline rebuild
    ok = []
    for a in schedule.assignments:
        problems = []
        if not 0 <= a.beam_id < config.n_beams:
            problems.append(f"beam_id {a.beam_id}")
        if not 0 <= a.channel_id < config.n_channels:
            problems.append(f"channel_id {a.channel_id}")
        if not 0 <= a.t_tx_us < period:
            problems.append(f"t_tx {a.t_tx_us}")
        if not 0 <= a.cell_id < grid.n_cells:
            problems.append(f"cell_id {a.cell_id}")
        if a.t_flight_us < 0 or a.t_sweep_us < 0:
            problems.append("negative duration")
        if problems:
            viol.append(Violation("structure", "bad fields: " + ", ".join(problems),
                                  cell_id=a.cell_id, sv_id=a.sv_id))
        else:
            ok.append(a)

    by_cell: dict[int, list] = defaultdict(list)
    for a in ok:
        by_cell[a.cell_id].append(a)
    report.n_cells_served = len(by_cell)

    # 1: per-cell signal count and kind consistency
    for cell_id, items in sorted(by_cell.items()):
        sigs = sorted(a.s for a in items)
        if sigs != list(range(1, n + 1)):
            viol.append(Violation(
                "1", f"cell {cell_id}: signal indices {sigs} != 1..{n}",
                cell_id=cell_id))
        primary_sv = schedule.primary_map.get(cell_id)
        for a in items:
            want = PRIMARY if a.sv_id == primary_sv else SECONDARY
            if a.kind != want:
                viol.append(Violation(
                    "1", f"cell {cell_id} s={a.s}: kind {a.kind}, expected {want}",
                    cell_id=cell_id, sv_id=a.sv_id))

    sw_tx = timing.t_switch_tx_us
    sw_rx = timing.t_switch_rx_us
    burst = timing.t_burst_us

    # 2 and 3: transmit-side overlap and switch separation per (sv, beam)
    by_beam: dict[tuple, list] = defaultdict(list)
    for a in ok:
        by_beam[(a.sv_id, a.beam_id)].append(
            (a.t_tx_us, a.t_tx_us + burst, a))
    reach_tx = burst + 2 * sw_tx + 1
    for (sv, beam), items in sorted(by_beam.items()):
        for (s1, e1, a1), (s2, e2, a2) in _circular_pairs(items, period, reach_tx):
            scopes_collide = (
                a1.kind == SECONDARY or a2.kind == SECONDARY
                or a1.channel_id == a2.channel_id
            )
            if not scopes_collide:
                continue
            if _overlap(s1, e1, s2, e2):
                viol.append(Violation(
                    "2", f"SV {sv} beam {beam}: bursts to cells "
                         f"{a1.cell_id} and {a2.cell_id} overlap",
                    sv_id=sv, times_us=(s1 % period, s2 % period)))
            elif (a1.cell_id != a2.cell_id
                  and (a1.kind == SECONDARY or a2.kind == SECONDARY)
                  and _gap(s1, e1, s2, e2) < sw_tx):
                viol.append(Violation(
                    "3", f"SV {sv} beam {beam}: bursts to cells "
                         f"{a1.cell_id} and {a2.cell_id} closer than the TX "
                         f"switch interval",
                    sv_id=sv, times_us=(s1 % period, s2 % period)))

    # 4 and 5: receive-side overlap and switch separation per (cell, channel)
    by_cell_ch: dict[tuple, list] = defaultdict(list)
    for a in ok:
        t_arr = (a.t_tx_us + a.t_flight_us) % period
        by_cell_ch[(a.cell_id, a.channel_id)].append(
            (t_arr, t_arr + burst + a.t_sweep_us, a))
    max_sweep = max((a.t_sweep_us for a in ok), default=0)
    reach_rx = burst + max_sweep + 2 * sw_rx + 1
    for (cell, ch), items in sorted(by_cell_ch.items()):
        for (s1, e1, a1), (s2, e2, a2) in _circular_pairs(items, period, reach_rx):
            if _overlap(s1, e1, s2, e2):
                viol.append(Violation(
                    "4", f"cell {cell} channel {ch}: burst windows of SVs "
                         f"{a1.sv_id} and {a2.sv_id} overlap",
                    cell_id=cell, times_us=(s1 % period, s2 % period)))
            elif a1.sv_id != a2.sv_id and _gap(s1, e1, s2, e2) < sw_rx:
                viol.append(Violation(
                    "5", f"cell {cell} channel {ch}: bursts from SVs "
                         f"{a1.sv_id} and {a2.sv_id} closer than the RX "
                         f"switch interval",
                    cell_id=cell, times_us=(s1 % period, s2 % period)))

    # 6: transmit set-up separation (secondary switch-to events per beam)
    setup_tx = timing.t_setup_tx_us
    for (sv, beam), items in sorted(by_beam.items()):
        events = sorted((s - sw_tx) % period for s, _, a in items
                        if a.kind == SECONDARY)
        for t1, t2 in _circular_consecutive(events, period):
            if t2 - t1 < setup_tx:
                viol.append(Violation(
                    "6", f"SV {sv} beam {beam}: TX set-up events {t1 % period} "
                         f"and {t2 % period} closer than the set-up interval",
                    sv_id=sv, times_us=(t1 % period, t2 % period)))

    # 7: receive set-up separation (secondary arrival events per cell)
    setup_rx = timing.t_setup_rx_us
    for cell_id, items in sorted(by_cell.items()):
        events = sorted(
            (a.t_tx_us + a.t_flight_us - sw_rx) % period
            for a in items if a.kind == SECONDARY)
        for t1, t2 in _circular_consecutive(events, period):
            if t2 - t1 < setup_rx:
                viol.append(Violation(
                    "7", f"cell {cell_id}: RX set-up events {t1 % period} and "
                         f"{t2 % period} closer than the set-up interval",
                    cell_id=cell_id, times_us=(t1 % period, t2 % period)))

    # 8: neighbor-cell same-channel non-overlap
    for (cell, ch), items in sorted(by_cell_ch.items()):
        for nbr in grid.neighbors(cell):
            nbr = int(nbr)
            if nbr <= cell:
                continue
            other = by_cell_ch.get((nbr, ch))
            if not other:
                continue
            for (s1, e1, a1) in items:
                for (s2, e2, a2) in other:
                    if _circular_overlap(s1, e1, s2, e2, period):
                        viol.append(Violation(
                            "8", f"cells {cell} and {nbr} (neighbors) channel "
                                 f"{ch}: burst windows overlap",
                            cell_id=cell, times_us=(s1, s2)))

    if check_visibility and ok:
        _check_visibility(ok, grid, sv_states, geo_mask_halfwidth_deg, viol)

    return report


def _circular_consecutive(sorted_events, period):
    """Consecutive pairs on the circular timeline, including the wrap pair."""
    n = len(sorted_events)
    if n < 2:
        return
    for i in range(n - 1):
        yield sorted_events[i], sorted_events[i + 1]
    yield sorted_events[-1], sorted_events[0] + period


def _circular_overlap(s1, e1, s2, e2, period):
    for shift in (-period, 0, period):
        if _overlap(s1 + shift, e1 + shift, s2, e2):
            return True
    return False


def _check_visibility(assignments, grid, sv_states, geo_halfwidth_deg, viol):
    if sv_states is None:
        return
    if isinstance(sv_states, (list, tuple)) and sv_states and isinstance(sv_states[0], SvState):
        positions = np.array([s.position_km for s in sv_states])
        index = {s.sv_id: i for i, s in enumerate(sv_states)}
    else:
        positions = np.asarray(sv_states)
        index = None
    R = grid.params.earth_radius_km
    phi0 = grid.params.min_elevation_deg
    by_cell = defaultdict(list)
    for a in assignments:
        by_cell[a.cell_id].append(a)
    for cell_id, items in sorted(by_cell.items()):
        rows = [index[a.sv_id] if index else a.sv_id for a in items]
        pos = positions[rows]
        lat = float(grid.lats_deg[cell_id])
        lon = float(grid.lons_deg[cell_id])
        elev, _, _ = line_of_sight_arrays(pos, lat, lon, R)
        _, _, up = _enu_basis(lat, lon)
        los = pos - R * up
        los /= np.linalg.norm(los, axis=-1, keepdims=True)
        geo_angle = geo_arc_min_angle_deg(los, geo_arc_directions(lat, lon, R))
        for k, a in enumerate(items):
            if elev[k] < phi0:
                viol.append(Violation(
                    "visibility",
                    f"cell {cell_id} s={a.s}: SV {a.sv_id} at elevation "
                    f"{elev[k]:.2f} deg, below the {phi0} deg mask",
                    cell_id=cell_id, sv_id=a.sv_id))
            elif geo_angle[k] < geo_halfwidth_deg:
                viol.append(Violation(
                    "visibility",
                    f"cell {cell_id} s={a.s}: SV {a.sv_id} within "
                    f"{geo_angle[k]:.2f} deg of the geostationary arc",
                    cell_id=cell_id, sv_id=a.sv_id))
