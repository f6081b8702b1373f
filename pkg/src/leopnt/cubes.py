"""Sparse time-interval reservation cubes for transmitters and receivers.

The TX cube tracks, per (SV, beam, channel), when a transmit slot is
reserved for ranging; whole-beam reservations (used by cross-cell bursts,
which steer the entire beam away from its broadband pointing) are kept at a
per-(SV, beam) level and block every channel of that beam.  The RX cube
tracks per (cell, channel) reservations, including exclusion marks placed on
neighboring cells that share a channel.

Statuses carry a rank (Exclude < Switch < Burst) and two overlapping
reservations conflict exactly when their ranks sum to at least 2: bursts
conflict with everything, switch margins conflict with bursts and other
switch margins, and exclusion marks conflict only with bursts.  Overlapping
compatible reservations are stored as disjoint intervals keeping the
higher-ranked status, which preserves all future conflict answers.

Storage is flat integer arrays behind plain dicts, sized so that a
constellation-scale schedule (millions of reservations) stays within a few
hundred megabytes.  Cubes are single-writer structures; reads may run
concurrently between write batches.  A rejected reservation leaves a cube
unchanged.
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass

from .schedule import PRIMARY, Assignment, TimingParams

EXCLUDE = 0
SWITCH = 1
BURST = 2

STATUS_NAMES = {EXCLUDE: "Exclude", SWITCH: "Switch", BURST: "Burst"}


def statuses_conflict(a: int, b: int) -> bool:
    return a + b >= 2


@dataclass(frozen=True)
class Conflict:
    """A rejected reservation: which existing interval blocked it."""

    key: tuple
    attempted_start: int
    attempted_end: int
    blocking_start: int
    blocking_end: int
    blocking_status: int

    def __str__(self):
        return (
            f"{self.key}: [{self.attempted_start}, {self.attempted_end}) blocked by "
            f"{STATUS_NAMES[self.blocking_status]} [{self.blocking_start}, {self.blocking_end})"
        )


def wrap_interval(start_us: int, length_us: int, period_us: int):
    """Split a modular interval into 1 or 2 in-range [start, end) pieces."""
    if length_us <= 0:
        return []
    if length_us >= period_us:
        return [(0, period_us)]
    s = start_us % period_us
    e = s + length_us
    if e <= period_us:
        return [(s, e)]
    return [(s, period_us), (0, e - period_us)]


def _merged_pieces(existing, start, end, status):
    """Disjoint max-status pieces replacing the overlapped window.

    ``existing`` holds the stored (start, end, status) entries that overlap
    [start, end); none of them conflicts with ``status``.
    """
    pieces = []
    cur = start
    for os_, oe, orank in existing:
        if os_ < start:
            pieces.append((os_, start, orank))
        if cur < os_:
            pieces.append((cur, os_, status))
            cur = os_
        seg_end = min(oe, end)
        pieces.append((max(os_, start), seg_end, max(orank, status)))
        cur = seg_end
        if oe > end:
            pieces.append((end, oe, orank))
    if cur < end:
        pieces.append((cur, end, status))
    pieces.sort()
    merged = []
    for p in pieces:
        if merged and merged[-1][2] == p[2] and merged[-1][1] == p[0]:
            merged[-1] = (merged[-1][0], p[1], p[2])
        else:
            merged.append(p)
    return merged


class IntervalList:
    """Sorted disjoint [start, end) intervals with an integer status each.

    Stored as a flat int64 array of (start, end, status) triplets to keep
    per-entry overhead small at constellation scale.
    """

    __slots__ = ("_d",)

    def __init__(self):
        self._d = array("q")

    def __len__(self):
        return len(self._d) // 3

    def entries(self):
        d = self._d
        return [(d[i], d[i + 1], d[i + 2]) for i in range(0, len(d), 3)]

    def total_length(self) -> int:
        d = self._d
        return sum(d[i + 1] - d[i] for i in range(0, len(d), 3))

    def _first_ending_after(self, t: int) -> int:
        # first entry index whose end > t (entries sorted, disjoint)
        d = self._d
        lo, hi = 0, len(d) // 3
        while lo < hi:
            mid = (lo + hi) // 2
            if d[3 * mid + 1] > t:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def find_conflict(self, start: int, end: int, status: int):
        """First stored interval overlapping [start, end) that conflicts."""
        d = self._d
        n = len(d) // 3
        i = self._first_ending_after(start)
        while i < n and d[3 * i] < end:
            if statuses_conflict(d[3 * i + 2], status):
                return (d[3 * i], d[3 * i + 1], d[3 * i + 2])
            i += 1
        return None

    def insert(self, start: int, end: int, status: int):
        """Insert a compatible interval, resolving overlaps by max status.

        The caller must have established (via :meth:`find_conflict`) that no
        conflicting interval overlaps.
        """
        if end <= start:
            return
        d = self._d
        n = len(d) // 3
        i0 = self._first_ending_after(start)
        i1 = i0
        while i1 < n and d[3 * i1] < end:
            i1 += 1
        if i0 == i1:
            d[3 * i0:3 * i0] = array("q", (start, end, status))
            return
        existing = [(d[3 * i], d[3 * i + 1], d[3 * i + 2]) for i in range(i0, i1)]
        flat = array("q")
        for piece in _merged_pieces(existing, start, end, status):
            flat.extend(piece)
        d[3 * i0:3 * i1] = flat


class TxCube:
    """Per-(SV, beam, channel) transmit reservations with whole-beam level."""

    def __init__(self, n_sats: int, n_beams: int, n_channels: int, n_bc: int,
                 t_period_us: int):
        self.n_sats = n_sats
        self.n_beams = n_beams
        self.n_channels = n_channels
        self.n_bc = n_bc
        self.t_period_us = t_period_us
        self._beam: dict[int, IntervalList] = {}
        self._chan: dict[int, IntervalList] = {}
        self._chans_of_beam: dict[int, list] = {}

    def _bkey(self, sv, beam):
        return sv * self.n_beams + beam

    # checks ------------------------------------------------------------

    def check_channel(self, sv: int, beam: int, ch: int, start: int, end: int,
                      status: int):
        bkey = sv * self.n_beams + beam
        lst = self._chan.get(bkey * self.n_channels + ch)
        if lst is not None:
            hit = lst.find_conflict(start, end, status)
            if hit:
                return Conflict((sv, beam, ch), start, end, *hit)
        blst = self._beam.get(bkey)
        if blst is not None:
            hit = blst.find_conflict(start, end, status)
            if hit:
                return Conflict((sv, beam), start, end, *hit)
        return None

    def check_beam(self, sv: int, beam: int, start: int, end: int, status: int):
        bkey = sv * self.n_beams + beam
        blst = self._beam.get(bkey)
        if blst is not None:
            hit = blst.find_conflict(start, end, status)
            if hit:
                return Conflict((sv, beam), start, end, *hit)
        for ch in self._chans_of_beam.get(bkey, ()):
            hit = self._chan[bkey * self.n_channels + ch].find_conflict(start, end, status)
            if hit:
                return Conflict((sv, beam, ch), start, end, *hit)
        return None

    # commits (caller must have checked) ---------------------------------

    def commit_channel(self, sv, beam, ch, start, end, status):
        bkey = sv * self.n_beams + beam
        key = bkey * self.n_channels + ch
        lst = self._chan.get(key)
        if lst is None:
            lst = self._chan[key] = IntervalList()
            self._chans_of_beam.setdefault(bkey, []).append(ch)
        lst.insert(start, end, status)

    def commit_beam(self, sv, beam, start, end, status):
        key = sv * self.n_beams + beam
        lst = self._beam.get(key)
        if lst is None:
            lst = self._beam[key] = IntervalList()
        lst.insert(start, end, status)

    # high-level --------------------------------------------------------

    def reserve_channel(self, sv, beam, ch, interval, status):
        """Atomically reserve one wrapped interval on a beam-channel."""
        pieces = wrap_interval(interval[0], interval[1] - interval[0], self.t_period_us)
        for s, e in pieces:
            c = self.check_channel(sv, beam, ch, s, e, status)
            if c:
                return c
        for s, e in pieces:
            self.commit_channel(sv, beam, ch, s, e, status)
        return None

    def reserve_beam(self, sv, beam, interval, status):
        pieces = wrap_interval(interval[0], interval[1] - interval[0], self.t_period_us)
        for s, e in pieces:
            c = self.check_beam(sv, beam, s, e, status)
            if c:
                return c
        for s, e in pieces:
            self.commit_beam(sv, beam, s, e, status)
        return None

    def occupancy(self) -> float:
        """Non-idle fraction over all N_bc * N_sats beam-channel planes.

        Whole-beam reservations weigh in at the mean number of channels per
        beam (N_bc / N_beams); per-beam bandwidth differences are ignored.
        """
        chan_len = sum(l.total_length() for l in self._chan.values())
        beam_len = sum(l.total_length() for l in self._beam.values())
        volume = self.n_bc * self.n_sats * self.t_period_us
        return (chan_len + beam_len * (self.n_bc / self.n_beams)) / volume


class RxCube:
    """Per-(cell, channel) receive reservations with neighbor exclusions.

    One flat array per cell holds (channel, start, end, status) quads sorted
    by (channel, start); channels of a cell are contiguous runs, so lookups
    bisect twice and edits splice the run in place.
    """

    def __init__(self, n_cells: int, n_channels: int, t_period_us: int):
        self.n_cells = n_cells
        self.n_channels = n_channels
        self.t_period_us = t_period_us
        self._cells: dict[int, array] = {}

    def _run_bounds(self, d, ch):
        # quad index range holding this channel, by binary search on
        # (channel, start) with sentinel starts
        def bisect(key):
            lo, hi = 0, len(d) // 4
            while lo < hi:
                mid = (lo + hi) // 2
                if (d[4 * mid], d[4 * mid + 1]) < key:
                    lo = mid + 1
                else:
                    hi = mid
            return lo
        return bisect((ch, -1)), bisect((ch + 1, -1))

    def check(self, cell: int, ch: int, start: int, end: int, status: int):
        d = self._cells.get(cell)
        if d is None:
            return None
        lo, hi = self._run_bounds(d, ch)
        for i in range(lo, hi):
            s, e, st = d[4 * i + 1], d[4 * i + 2], d[4 * i + 3]
            if s < end and e > start and statuses_conflict(st, status):
                return Conflict((cell, ch), start, end, s, e, st)
        return None

    def commit(self, cell, ch, start, end, status):
        if end <= start:
            return
        d = self._cells.get(cell)
        if d is None:
            d = self._cells[cell] = array("q")
        lo, hi = self._run_bounds(d, ch)
        # overlapped sub-window within the channel's run
        i0 = lo
        while i0 < hi and d[4 * i0 + 2] <= start:
            i0 += 1
        i1 = i0
        while i1 < hi and d[4 * i1 + 1] < end:
            i1 += 1
        if i0 == i1:
            d[4 * i0:4 * i0] = array("q", (ch, start, end, status))
            return
        existing = [(d[4 * i + 1], d[4 * i + 2], d[4 * i + 3]) for i in range(i0, i1)]
        flat = array("q")
        for s, e, st in _merged_pieces(existing, start, end, status):
            flat.extend((ch, s, e, st))
        d[4 * i0:4 * i1] = flat

    def reserve(self, cell, ch, interval, status):
        pieces = wrap_interval(interval[0], interval[1] - interval[0], self.t_period_us)
        for s, e in pieces:
            c = self.check(cell, ch, s, e, status)
            if c:
                return c
        for s, e in pieces:
            self.commit(cell, ch, s, e, status)
        return None

    def entries(self, cell, ch):
        d = self._cells.get(cell)
        if d is None:
            return []
        lo, hi = self._run_bounds(d, ch)
        return [(d[4 * i + 1], d[4 * i + 2], d[4 * i + 3]) for i in range(lo, hi)]

    def occupancy(self) -> float:
        total = 0
        for d in self._cells.values():
            for i in range(0, len(d), 4):
                total += d[i + 2] - d[i + 1]
        return total / (self.n_cells * self.n_channels * self.t_period_us)


# -- assignment-level reservation helpers -------------------------------------

def tx_intervals_for(a: Assignment, timing: TimingParams):
    """(start, length, status, beam_wide) pieces an assignment needs at TX.

    Primary bursts occupy one beam-channel for the burst only: the beam is
    already pointed at its primary cell for broadband service, so the burst
    rides the existing pointing schedule.  Cross-cell (secondary) bursts
    steer the whole beam away and back, so they reserve every channel of the
    beam and pay a switch margin on each side.
    """
    t = a.t_tx_us
    if a.kind == PRIMARY:
        return [(t, timing.t_burst_us, BURST, False)]
    sw = timing.t_switch_tx_us
    return [
        (t - sw, sw, SWITCH, True),
        (t, timing.t_burst_us, BURST, True),
        (t + timing.t_burst_us, sw, SWITCH, True),
    ]


def rx_intervals_for(a: Assignment, timing: TimingParams):
    """(start, length, status) pieces on the target cell's channel, in the
    arrival-time frame; the burst window covers the full sweep of the cell."""
    t_arr = a.t_tx_us + a.t_flight_us
    window = timing.t_burst_us + a.t_sweep_us
    out = [(t_arr, window, BURST)]
    if a.kind != PRIMARY:
        sw = timing.t_switch_rx_us
        out.append((t_arr - sw, sw, SWITCH))
        out.append((t_arr + window, sw, SWITCH))
    return out


def tx_reserve_assignment(cube: TxCube, a: Assignment, timing: TimingParams):
    """Atomically reserve an assignment's transmit-side intervals."""
    period = cube.t_period_us
    checks = []
    for start, length, status, beam_wide in tx_intervals_for(a, timing):
        for s, e in wrap_interval(start, length, period):
            checks.append((s, e, status, beam_wide))
    for s, e, status, beam_wide in checks:
        if beam_wide:
            c = cube.check_beam(a.sv_id, a.beam_id, s, e, status)
        else:
            c = cube.check_channel(a.sv_id, a.beam_id, a.channel_id, s, e, status)
        if c:
            return c
    for s, e, status, beam_wide in checks:
        if beam_wide:
            cube.commit_beam(a.sv_id, a.beam_id, s, e, status)
        else:
            cube.commit_channel(a.sv_id, a.beam_id, a.channel_id, s, e, status)
    return None


def rx_reserve_assignment(cube: RxCube, grid, a: Assignment, timing: TimingParams):
    """Atomically reserve the receive side: the burst window (plus switch
    margins for secondary bursts) on the target cell's channel, and
    exclusion marks on every neighbor cell sharing the channel."""
    period = cube.t_period_us
    checks = []
    for start, length, status in rx_intervals_for(a, timing):
        for s, e in wrap_interval(start, length, period):
            checks.append((a.cell_id, s, e, status))
    t_arr = a.t_tx_us + a.t_flight_us
    window = timing.t_burst_us + a.t_sweep_us
    for nbr in grid.neighbors(a.cell_id):
        for s, e in wrap_interval(t_arr, window, period):
            checks.append((int(nbr), s, e, EXCLUDE))
    for cell, s, e, status in checks:
        c = cube.check(cell, a.channel_id, s, e, status)
        if c:
            return c
    for cell, s, e, status in checks:
        cube.commit(cell, a.channel_id, s, e, status)
    return None
