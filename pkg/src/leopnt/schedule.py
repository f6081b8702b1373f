"""Ranging-burst schedule data model, serialization, and bit-packed codec.

All schedule times are integer microseconds (the scheduling quantum is
fixed at 1 us); transmit times are taken modulo the schedule period.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, asdict

from .errors import EncodingError, ParameterError, ParseError

TIME_QUANTUM_US = 1

PRIMARY = "primary"
SECONDARY = "secondary"


@dataclass(frozen=True)
class TimingParams:
    """Burst, switching, set-up, and period durations, in microseconds."""

    t_burst_us: int = 500
    t_switch_tx_us: int = 100
    t_switch_rx_us: int = 100
    t_setup_tx_us: int = 5000
    t_setup_rx_us: int = 5000
    t_period_us: int = 1_000_000
    n_signals: int = 5

    def __post_init__(self):
        for name in ("t_burst_us", "t_switch_tx_us", "t_switch_rx_us",
                     "t_setup_tx_us", "t_setup_rx_us", "t_period_us"):
            v = getattr(self, name)
            if not isinstance(v, int) or v <= 0:
                raise ParameterError(f"{name} must be a positive integer of microseconds")
        if self.t_burst_us + 2 * self.t_switch_tx_us >= self.t_period_us:
            raise ParameterError("t_burst + 2*t_switch_tx must be < t_period")
        if self.n_signals < 4:
            raise ParameterError("n_signals must be >= 4")


@dataclass(frozen=True, slots=True)
class Assignment:
    """One periodic ranging burst: who transmits, where, and when."""

    cell_id: int
    s: int                 # signal index, 1..n
    sv_id: int
    beam_id: int
    channel_id: int
    t_tx_us: int           # departure time modulo the period
    t_flight_us: int
    t_sweep_us: int
    kind: str              # PRIMARY or SECONDARY

    def __post_init__(self):
        if self.kind not in (PRIMARY, SECONDARY):
            raise ParameterError(f"bad assignment kind {self.kind!r}")


@dataclass
class GnssSchedule:
    t_period_us: int
    assignments: list[Assignment] = field(default_factory=list)
    primary_map: dict[int, int] = field(default_factory=dict)  # cell -> sv

    def validate(self, n_sats: int, n_beams: int, n_channels: int):
        for a in self.assignments:
            if not 0 <= a.sv_id < n_sats:
                raise ParameterError(f"sv_id {a.sv_id} out of range")
            if not 0 <= a.beam_id < n_beams:
                raise ParameterError(f"beam_id {a.beam_id} out of range")
            if not 0 <= a.channel_id < n_channels:
                raise ParameterError(f"channel_id {a.channel_id} out of range")
            if not 0 <= a.t_tx_us < self.t_period_us:
                raise ParameterError(f"t_tx {a.t_tx_us} outside [0, period)")
            want = PRIMARY if self.primary_map.get(a.cell_id) == a.sv_id else SECONDARY
            if a.kind != want:
                raise ParameterError(
                    f"cell {a.cell_id} s={a.s}: kind {a.kind} inconsistent with primary map"
                )

    def to_json_dict(self) -> dict:
        return {
            "t_period_us": self.t_period_us,
            "primary_map": {str(k): v for k, v in sorted(self.primary_map.items())},
            "assignments": [asdict(a) for a in self.assignments],
        }

    def to_json(self, path):
        # streamed record by record: full-constellation schedules hold
        # millions of assignments
        with open(path, "w") as f:
            f.write('{\n"assignments": [')
            for i, a in enumerate(self.assignments):
                f.write(",\n " if i else "\n ")
                json.dump(asdict(a), f, sort_keys=True)
            f.write('\n],\n"primary_map": ')
            json.dump({str(k): v for k, v in sorted(self.primary_map.items())}, f,
                      sort_keys=True)
            f.write(f',\n"t_period_us": {self.t_period_us}\n}}\n')

    @classmethod
    def from_json_dict(cls, d: dict) -> "GnssSchedule":
        try:
            sched = cls(
                t_period_us=int(d["t_period_us"]),
                assignments=[Assignment(**a) for a in d["assignments"]],
                primary_map={int(k): int(v) for k, v in d["primary_map"].items()},
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad schedule JSON: {exc}") from None
        return sched

    @classmethod
    def from_json(cls, path) -> "GnssSchedule":
        with open(path) as f:
            try:
                d = json.load(f)
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad JSON: {exc}", path=path) from None
        return cls.from_json_dict(d)


# -- fixed-width bit layout ---------------------------------------------------

@dataclass(frozen=True)
class BitLayout:
    """Ordered fixed-width fields, packed least-significant-bit first.

    The sweep duration is a per-grid constant, so it travels as a one-bit
    flag (set: the shared reference value applies; clear: zero sweep).  The
    cell id, signal index, and primary/secondary kind travel out of band:
    each SV receives only tuples involving itself or its primary cells.
    """

    fields: tuple[tuple[str, int], ...] = (
        ("sv_id", 14),
        ("beam_id", 4),
        ("channel_id", 7),
        ("t_tx_us", 20),
        ("t_flight_us", 13),
        ("sweep_flag", 1),
    )

    @property
    def total_bits(self) -> int:
        return sum(w for _, w in self.fields)


DEFAULT_LAYOUT = BitLayout()


def encode_assignment(a: Assignment, layout: BitLayout = DEFAULT_LAYOUT,
                      sweep_reference_us: int | None = None) -> int:
    """Pack an assignment into a single integer word."""
    if sweep_reference_us is None:
        sweep_reference_us = a.t_sweep_us
    if a.t_sweep_us == sweep_reference_us and sweep_reference_us != 0:
        sweep_flag = 1
    elif a.t_sweep_us == 0:
        sweep_flag = 0
    else:
        raise EncodingError(
            f"t_sweep {a.t_sweep_us} is neither 0 nor the shared reference "
            f"{sweep_reference_us}"
        )
    values = {
        "sv_id": a.sv_id,
        "beam_id": a.beam_id,
        "channel_id": a.channel_id,
        "t_tx_us": a.t_tx_us,
        "t_flight_us": a.t_flight_us,
        "sweep_flag": sweep_flag,
    }
    word = 0
    shift = 0
    for name, width in layout.fields:
        v = values[name]
        if not 0 <= v < (1 << width):
            raise EncodingError(f"{name}={v} does not fit in {width} bits")
        word |= v << shift
        shift += width
    return word


def decode_word(word: int, layout: BitLayout = DEFAULT_LAYOUT) -> dict:
    if not 0 <= word < (1 << layout.total_bits):
        raise EncodingError(f"word does not fit in {layout.total_bits} bits")
    out = {}
    shift = 0
    for name, width in layout.fields:
        out[name] = (word >> shift) & ((1 << width) - 1)
        shift += width
    return out


def decode_assignment(word: int, layout: BitLayout = DEFAULT_LAYOUT,
                      sweep_reference_us: int = 0, cell_id: int = -1,
                      s: int = 0, kind: str = SECONDARY) -> Assignment:
    """Unpack a word; out-of-band fields are supplied by the caller."""
    f = decode_word(word, layout)
    return Assignment(
        cell_id=cell_id,
        s=s,
        sv_id=f["sv_id"],
        beam_id=f["beam_id"],
        channel_id=f["channel_id"],
        t_tx_us=f["t_tx_us"],
        t_flight_us=f["t_flight_us"],
        t_sweep_us=sweep_reference_us if f["sweep_flag"] else 0,
        kind=kind,
    )


# -- packed binary schedule files ---------------------------------------------
#
# Layout (all integers little-endian):
#   magic   4 bytes  b"LPNT"
#   version u8       1
#   count   u32      number of assignments
#   period  u32      schedule period, us
#   sweep   u32      shared sweep reference, us
#   nprim   u32      number of primary-map entries
#   words   ceil(count*W/8) bytes; assignment words packed W bits each,
#           little-endian bit order within bytes (bit k of the stream is
#           byte k>>3, bit k&7)
#   cells   count * u32   assignment cell ids
#   sigs    count * u8    signal indices
#   kinds   count * u8    1=primary, 0=secondary
#   pmap    nprim * (u32 cell, u32 sv)

_MAGIC = b"LPNT"
_VERSION = 1


def _pack_bits(words, width: int) -> bytes:
    """Concatenate fixed-width words, least-significant bit first."""
    out = bytearray()
    acc = 0
    acc_bits = 0
    for w in words:
        acc |= w << acc_bits
        acc_bits += width
        while acc_bits >= 8:
            out.append(acc & 0xFF)
            acc >>= 8
            acc_bits -= 8
    if acc_bits:
        out.append(acc & 0xFF)
    return bytes(out)


def _unpack_bits(blob: bytes, count: int, width: int) -> list[int]:
    mask = (1 << width) - 1
    words = []
    acc = 0
    acc_bits = 0
    it = iter(blob)
    for b in it:
        acc |= b << acc_bits
        acc_bits += 8
        while acc_bits >= width:
            words.append(acc & mask)
            if len(words) == count:
                return words
            acc >>= width
            acc_bits -= width
    if len(words) < count:
        raise ParseError(f"bit stream ends after {len(words)} of {count} words")
    return words


def write_schedule_binary(schedule: GnssSchedule, path,
                          layout: BitLayout = DEFAULT_LAYOUT,
                          sweep_reference_us: int | None = None):
    if sweep_reference_us is None:
        refs = {a.t_sweep_us for a in schedule.assignments if a.t_sweep_us != 0}
        if len(refs) > 1:
            raise EncodingError(f"multiple sweep values present: {sorted(refs)}")
        sweep_reference_us = refs.pop() if refs else 0
    words = [encode_assignment(a, layout, sweep_reference_us) for a in schedule.assignments]
    count = len(words)
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<BIII I", _VERSION, count, schedule.t_period_us,
                            sweep_reference_us, len(schedule.primary_map)))
        f.write(_pack_bits(words, layout.total_bits))
        f.write(struct.pack(f"<{count}I", *(a.cell_id for a in schedule.assignments)))
        f.write(struct.pack(f"<{count}B", *(a.s for a in schedule.assignments)))
        f.write(struct.pack(
            f"<{count}B", *(1 if a.kind == PRIMARY else 0 for a in schedule.assignments)))
        for cell, sv in sorted(schedule.primary_map.items()):
            f.write(struct.pack("<II", cell, sv))


def read_schedule_binary(path, layout: BitLayout = DEFAULT_LAYOUT) -> GnssSchedule:
    with open(path, "rb") as f:
        blob = f.read()
    header = struct.Struct("<4sBIIII")
    if len(blob) < header.size:
        raise ParseError("truncated header", path=path)
    magic, version, count, period, sweep_ref, nprim = header.unpack_from(blob, 0)
    if magic != _MAGIC:
        raise ParseError("bad magic", path=path)
    if version != _VERSION:
        raise ParseError(f"unsupported version {version}", path=path)
    off = header.size
    nwords_bytes = (count * layout.total_bits + 7) // 8
    need = nwords_bytes + count * 4 + count + count + nprim * 8
    if len(blob) - off < need:
        raise ParseError(
            f"truncated body: need {need} bytes, have {len(blob) - off}", path=path)
    words = _unpack_bits(blob[off:off + nwords_bytes], count, layout.total_bits)
    off += nwords_bytes
    cells = struct.unpack_from(f"<{count}I", blob, off)
    off += count * 4
    sigs = struct.unpack_from(f"<{count}B", blob, off)
    off += count
    kinds = struct.unpack_from(f"<{count}B", blob, off)
    off += count
    pmap = {}
    for _ in range(nprim):
        cell, sv = struct.unpack_from("<II", blob, off)
        off += 8
        pmap[cell] = sv
    assignments = [
        decode_assignment(w, layout, sweep_ref, cell_id=c, s=s,
                          kind=PRIMARY if k else SECONDARY)
        for w, c, s, k in zip(words, cells, sigs, kinds)
    ]
    return GnssSchedule(t_period_us=period, assignments=assignments, primary_map=pmap)


def assignment_payload_bits(count: int, layout: BitLayout = DEFAULT_LAYOUT) -> int:
    """Pure tuple payload size, excluding container framing."""
    return count * layout.total_bits
