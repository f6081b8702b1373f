"""Closed-form reservation and cost estimates, plus measured counterparts.

Every quantity is expressed as a reservation: the fraction of a bottleneck
constellation resource (transmit time, receive time, steering set-up
bandwidth, energy, terminal time) consumed by the ranging service.  The
closed forms are upper bounds that deliberately over-count switching time
and neighbor exclusions, so the measured value from an actual schedule must
never exceed them.

All durations here are seconds (converted from the microsecond scheduling
domain at the boundary).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

from .cubes import RxCube, TxCube
from .errors import ParameterError, SaturationError
from .schedule import GnssSchedule, SECONDARY, TimingParams

# d(spectral efficiency)/d(SNR in dB) of log2(1+snr) at high SNR
SHANNON_SENSITIVITY_BPS_HZ_PER_DB = 1.0 / (10.0 * math.log10(2.0))


@dataclass(frozen=True)
class CostParams:
    """Inputs for the closed-form cost model.

    Defaults describe the reference system: 850k cells of 29 km between
    +/-60 deg latitude served by a 10,000-SV constellation with 15 beams,
    76 channels of 50 MHz, and at most 264 simultaneous beam-channels.
    """

    n_cells: int = 850_000
    n_adj: int = 6
    n_sats: int = 10_000
    n_beams: int = 15
    n_channels: int = 76
    n_beam_channels: int = 264
    par: float = 9.6
    timing: TimingParams = field(default_factory=TimingParams)
    t_sweep_s: float = 74.10216649175803e-6   # (29 km / c) * cos(40 deg)
    channel_bandwidth_hz: float = 50e6
    spectral_efficiency_bps_hz: float = 2.29
    assignment_bits: int = 59
    fwhm_deg: float = 2.0
    omega_deg_s: float = 0.73
    refresh_period_s: float = 15.0
    correction_stream_bps: float = 500.0
    iono_stream_bps: float = 3.4

    def __post_init__(self):
        for name in ("n_cells", "n_adj", "n_sats", "n_beams", "n_channels",
                     "n_beam_channels", "par", "channel_bandwidth_hz",
                     "spectral_efficiency_bps_hz", "assignment_bits",
                     "fwhm_deg", "omega_deg_s", "refresh_period_s"):
            if getattr(self, name) <= 0 and name != "n_adj":
                raise ParameterError(f"{name} must be positive")
        if self.n_adj < 0:
            raise ParameterError("n_adj must be >= 0")
        if self.t_sweep_s < 0:
            raise ParameterError("t_sweep_s must be >= 0")

    @property
    def channel_rate_bps(self) -> float:
        return self.channel_bandwidth_hz * self.spectral_efficiency_bps_hz

    def _seconds(self, name):
        return getattr(self.timing, name) * 1e-6


def _fraction(x: float, name: str) -> float:
    if not 0.0 <= x <= 1.0:
        raise SaturationError(f"{name} = {x:.6g} is not a fraction in [0, 1]")
    return x


def tx_reservation_bound(p: CostParams) -> float:
    """Upper bound on the non-idle fraction of the transmit cube.

    A cell's primary burst holds one beam-channel for the burst; each of its
    n-1 cross-cell bursts holds an entire beam (N_bc/N_beams channels on
    average) for the burst plus a switch margin on both sides.
    """
    t = p.timing
    per_cell = (
        t.t_burst_us
        + (t.n_signals - 1) * (t.t_burst_us + 2 * t.t_switch_tx_us)
        * p.n_beam_channels / p.n_beams
    ) * 1e-6
    r = p.n_cells * per_cell / (p.n_beam_channels * p.n_sats * t.t_period_us * 1e-6)
    return _fraction(r, "R_TX")


def rx_reservation_bound(p: CostParams) -> float:
    """Upper bound on the non-idle fraction of the receive cube.

    Every burst holds its own cell and each of the N_adj neighbors for the
    burst-plus-sweep window on one channel; cross-cell bursts add receive
    switch margins.
    """
    t = p.timing
    burst_s = t.t_burst_us * 1e-6
    num = (
        t.n_signals * (p.n_adj + 1) * (burst_s + p.t_sweep_s)
        + 2 * (t.n_signals - 1) * t.t_switch_rx_us * 1e-6
    )
    r = num / (p.n_channels * t.t_period_us * 1e-6)
    return _fraction(r, "R_RX")


@dataclass(frozen=True)
class DownlinkReport:
    before_channels: float      # simultaneous channels' worth of downlink
    after_channels: float
    r_dl: float                 # relative capacity given up
    before_bps: float
    after_bps: float
    per_cell_loss_bps: float


def downlink_capacity(p: CostParams) -> DownlinkReport:
    """System downlink capacity before and after the ranging service.

    Capacity is min(transmit volume, receive volume) per period; the
    service scales each side down by its reservation.
    """
    t_period = p.timing.t_period_us * 1e-6
    v_tx = p.n_beam_channels * p.n_sats * t_period
    v_rx = p.n_cells * p.n_channels * t_period
    before = min(v_tx, v_rx) / t_period
    r_tx = tx_reservation_bound(p)
    r_rx = rx_reservation_bound(p)
    after = min(v_tx * (1.0 - r_tx), v_rx * (1.0 - r_rx)) / t_period
    r_dl = _fraction((before - after) / before, "R_DL")
    rate = p.channel_rate_bps
    return DownlinkReport(
        before_channels=before,
        after_channels=after,
        r_dl=r_dl,
        before_bps=before * rate,
        after_bps=after * rate,
        per_cell_loss_bps=r_dl * before * rate / p.n_cells,
    )


def setup_reservation(p: CostParams) -> float:
    """Fraction of per-beam coefficient-loading bandwidth consumed: each
    cross-cell burst costs one set-up interval per period on one beam."""
    t = p.timing
    r = ((t.n_signals - 1) * p.n_cells * t.t_setup_tx_us * 1e-6
         / (p.n_beams * p.n_sats * t.t_period_us * 1e-6))
    return _fraction(r, "R_SU")


def energy_reservation(p: CostParams) -> float:
    """Fraction of constellation downlink energy consumed by ranging bursts.

    The peak-to-average power ratio converts burst transmit time into a
    share of the mean downlink energy budget.
    """
    t = p.timing
    r = (t.n_signals * p.n_cells * t.t_burst_us * 1e-6 * p.par
         / (t.t_period_us * 1e-6 * p.n_sats * p.n_beam_channels))
    return _fraction(r, "R_E")


def pointing_loss_db(delta_theta_deg: float, fwhm_deg: float) -> float:
    """Gaussian-beam pointing loss: 12 dB * (offset / FWHM)^2."""
    return 12.0 * (delta_theta_deg / fwhm_deg) ** 2


def max_steer_interval_s(fwhm_deg: float, omega_deg_s: float,
                         loss_budget_db: float, statistic: str = "max") -> float:
    """Longest interval between steering events for a pointing-loss budget.

    Between steps the line of sight drifts at ``omega``; steering by twice
    the tolerated offset recenters the beam.  For a max-loss budget the
    offset satisfies 12*(d/FWHM)^2 = L, giving (FWHM/omega)*sqrt(L/3).  For
    a mean-loss budget (averaging the quadratic loss over the drift cycle)
    the 3 becomes 1.
    """
    if loss_budget_db < 0:
        raise ParameterError("loss_budget_db must be >= 0")
    denom = {"max": 3.0, "mean": 1.0}.get(statistic)
    if denom is None:
        raise ParameterError(f"statistic must be 'max' or 'mean', got {statistic!r}")
    return fwhm_deg / omega_deg_s * math.sqrt(loss_budget_db / denom)


def steer_interval_for_throughput_loss(p: CostParams, loss_fraction: float,
                                       statistic: str = "mean") -> float:
    """Steering interval that keeps relative throughput loss within budget.

    Maps the throughput budget to a dB budget through the high-SNR Shannon
    sensitivity (log2(10)/10 = 0.332 b/s/Hz per dB), then applies
    :func:`max_steer_interval_s`.
    """
    loss_db = (loss_fraction * p.spectral_efficiency_bps_hz
               / SHANNON_SENSITIVITY_BPS_HZ_PER_DB)
    return max_steer_interval_s(p.fwhm_deg, p.omega_deg_s, loss_db, statistic)


def pointing_overhead_ppm(p: CostParams) -> float:
    """First-order estimate of throughput lost to displaced steering events.

    Approximate: a fraction R_SU of steering slots is displaced by up to one
    set-up interval, adding mean-square pointing drift omega^2 * T_setup^2/3
    and hence 4*(omega*T_setup/FWHM)^2 dB of extra loss while displaced,
    converted to throughput through the high-SNR sensitivity.
    """
    t_setup = p.timing.t_setup_tx_us * 1e-6
    extra_db = 4.0 * (p.omega_deg_s * t_setup / p.fwhm_deg) ** 2
    rel = (extra_db * SHANNON_SENSITIVITY_BPS_HZ_PER_DB
           / p.spectral_efficiency_bps_hz)
    return setup_reservation(p) * rel * 1e6


@dataclass(frozen=True)
class CncReport:
    total_bits: int
    total_mib: float
    per_sv_bps: float


def cnc_uplink_cost(p: CostParams) -> CncReport:
    """Command-and-control uplink volume for distributing the schedule.

    Each primary assignment reaches one SV and each cross-cell assignment
    two (the transmitter and the target cell's primary SV), so one schedule
    costs (2n-1) * N_cells tuples.  The per-SV rate adds the orbit/clock
    correction and ionosphere streams on top of periodic schedule refreshes.
    """
    t = p.timing
    total_bits = (2 * t.n_signals - 1) * p.n_cells * p.assignment_bits
    per_sv_bps = (
        total_bits / p.n_sats / p.refresh_period_s
        + p.correction_stream_bps
        + p.iono_stream_bps
    )
    return CncReport(
        total_bits=total_bits,
        total_mib=total_bits / 8.0 / (1 << 20),
        per_sv_bps=per_sv_bps,
    )


@dataclass(frozen=True)
class UtDutyReport:
    d_pnt: float          # receive time spent on ranging bursts
    d_dl_max: float       # single-terminal downlink duty bound, 1 - R_RX
    d_dl_mean_max: float  # fleet-average downlink duty bound, 1 - R_DL
    d_ul_max: float       # uplink duty bound, 1 - d_PNT


def ut_duty_cost(p: CostParams) -> UtDutyReport:
    """Half-duplex user-terminal time budget impacts.

    The terminal's uplink, downlink, switching, and idle duty cycles sum to
    one; using the ranging service subtracts d_PNT from that budget.
    """
    t = p.timing
    d_pnt = ((t.n_signals * t.t_burst_us
              + 2 * (t.n_signals - 1) * t.t_switch_rx_us)
             / t.t_period_us)
    _fraction(d_pnt, "d_PNT")
    report = UtDutyReport(
        d_pnt=d_pnt,
        d_dl_max=1.0 - rx_reservation_bound(p),
        d_dl_mean_max=1.0 - downlink_capacity(p).r_dl,
        d_ul_max=1.0 - d_pnt,
    )
    budget = report.d_pnt + report.d_ul_max
    if budget > 1.0 + 1e-12:
        raise SaturationError(f"duty budget exceeds 100%: {budget}")
    return report


@dataclass(frozen=True)
class MeasuredReservations:
    r_tx: float
    r_rx: float
    r_su: float
    r_e: float


def measure_reservations(schedule: GnssSchedule, tx_cube: TxCube,
                         rx_cube: RxCube, p: CostParams) -> MeasuredReservations:
    """Reservations actually consumed by a schedule.

    TX/RX come from cube occupancy; set-up counts one set-up interval per
    cross-cell assignment per period on its beam; energy weights total burst
    time by the peak-to-average power ratio.
    """
    t = p.timing
    t_period_s = t.t_period_us * 1e-6
    n_secondary = sum(1 for a in schedule.assignments if a.kind == SECONDARY)
    n_total = len(schedule.assignments)
    r_su = (n_secondary * t.t_setup_tx_us * 1e-6
            / (p.n_beams * p.n_sats * t_period_s))
    r_e = (n_total * t.t_burst_us * 1e-6 * p.par
           / (t_period_s * p.n_sats * p.n_beam_channels))
    return MeasuredReservations(
        r_tx=_fraction(tx_cube.occupancy(), "R_TX_meas"),
        r_rx=_fraction(rx_cube.occupancy(), "R_RX_meas"),
        r_su=_fraction(r_su, "R_SU_meas"),
        r_e=_fraction(r_e, "R_E_meas"),
    )


@dataclass
class CostReport:
    """Every analytic quantity, with measured values when a schedule is given."""

    r_tx: float
    r_rx: float
    r_dl: float
    per_cell_loss_bps: float
    downlink_before_bps: float
    downlink_after_bps: float
    r_su: float
    r_e: float
    c_au_bits: int
    c_au_mib: float
    per_sv_uplink_bps: float
    d_pnt: float
    d_dl_max: float
    d_dl_mean_max: float
    d_ul_max: float
    t_steer_max_s: float
    complexity_steps: float
    pointing_overhead_ppm: float
    r_tx_meas: float | None = None
    r_rx_meas: float | None = None
    r_su_meas: float | None = None
    r_e_meas: float | None = None

    def to_json_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path):
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f, indent=1, sort_keys=True)
            f.write("\n")

    def csv_fields(self):
        return list(self.to_json_dict().keys())

    def csv_row(self):
        return ["" if v is None else repr(v) for v in self.to_json_dict().values()]


def cost_report(p: CostParams, schedule: GnssSchedule | None = None,
                tx_cube: TxCube | None = None,
                rx_cube: RxCube | None = None,
                steer_loss_budget: float = 0.001) -> CostReport:
    from .scheduler import complexity_bound  # local import to avoid a cycle

    r_tx = tx_reservation_bound(p)
    r_rx = rx_reservation_bound(p)
    dl = downlink_capacity(p)
    cnc = cnc_uplink_cost(p)
    duty = ut_duty_cost(p)
    report = CostReport(
        r_tx=r_tx,
        r_rx=r_rx,
        r_dl=dl.r_dl,
        per_cell_loss_bps=dl.per_cell_loss_bps,
        downlink_before_bps=dl.before_bps,
        downlink_after_bps=dl.after_bps,
        r_su=setup_reservation(p),
        r_e=energy_reservation(p),
        c_au_bits=cnc.total_bits,
        c_au_mib=cnc.total_mib,
        per_sv_uplink_bps=cnc.per_sv_bps,
        d_pnt=duty.d_pnt,
        d_dl_max=duty.d_dl_max,
        d_dl_mean_max=duty.d_dl_mean_max,
        d_ul_max=duty.d_ul_max,
        t_steer_max_s=steer_interval_for_throughput_loss(p, steer_loss_budget),
        complexity_steps=complexity_bound(p.timing.n_signals, p.n_cells, r_tx, r_rx),
        pointing_overhead_ppm=pointing_overhead_ppm(p),
    )
    if schedule is not None and tx_cube is not None and rx_cube is not None:
        meas = measure_reservations(schedule, tx_cube, rx_cube, p)
        report.r_tx_meas = meas.r_tx
        report.r_rx_meas = meas.r_rx
        report.r_su_meas = meas.r_su
        report.r_e_meas = meas.r_e
    return report
