import math

import numpy as np
import pytest

from leopnt.cells import sweep_time
from leopnt.costs import (
    CostParams,
    SHANNON_SENSITIVITY_BPS_HZ_PER_DB,
    cnc_uplink_cost,
    cost_report,
    downlink_capacity,
    energy_reservation,
    max_steer_interval_s,
    measure_reservations,
    pointing_loss_db,
    pointing_overhead_ppm,
    rx_reservation_bound,
    setup_reservation,
    steer_interval_for_throughput_loss,
    tx_reservation_bound,
    ut_duty_cost,
)
from leopnt.errors import ParameterError, SaturationError
from leopnt.schedule import TimingParams


def test_tx_reservation_reference_value():
    assert tx_reservation_bound(CostParams()) == pytest.approx(0.0160, abs=5e-4)


def test_tx_reservation_primary_only_limit():
    p = CostParams(timing=TimingParams(n_signals=4, t_switch_tx_us=1))
    # with n signals the formula collapses to the stated closed form
    t = p.timing
    want = p.n_cells * (t.t_burst_us + 3 * (t.t_burst_us + 2) * 264 / 15) * 1e-6 / (264 * p.n_sats)
    assert tx_reservation_bound(p) == pytest.approx(want, rel=1e-12)


def test_tx_reservation_desk_hand_evaluation():
    timing = TimingParams()
    p = CostParams(n_cells=2000, n_sats=400, timing=timing)
    # hand evaluation: 2000 * (500us + 4 * 700us * 264/15) / (264 * 400 * 1s)
    want = 2000 * (500e-6 + 4 * 700e-6 * 264 / 15) / (264 * 400 * 1.0)
    assert tx_reservation_bound(p) == pytest.approx(want, rel=1e-12)
    assert want == pytest.approx(9.4318e-4, abs=1e-7)


def test_rx_reservation_reference_value():
    r = rx_reservation_bound(CostParams())
    assert r <= 0.0003
    assert r == pytest.approx(0.000275, abs=2e-5)


def test_rx_reservation_simplified_limit():
    p = CostParams(n_adj=0, t_sweep_s=0.0,
                   timing=TimingParams(t_switch_rx_us=1))
    t = p.timing
    want = (t.n_signals * t.t_burst_us * 1e-6 + 2 * (t.n_signals - 1) * 1e-6) / (76 * 1.0)
    assert rx_reservation_bound(p) == pytest.approx(want, rel=1e-12)


def test_rx_reservation_zero_sweep():
    # (5*7*500us + 2*4*100us) / (76 * 1s)
    r = rx_reservation_bound(CostParams(t_sweep_s=0.0))
    assert r == pytest.approx(18300e-6 / 76, rel=1e-12)
    assert r == pytest.approx(0.000241, abs=1e-6)


def test_downlink_capacity_reference():
    dl = downlink_capacity(CostParams())
    assert dl.r_dl == pytest.approx(0.0160, abs=5e-4)
    assert dl.per_cell_loss_bps == pytest.approx(5.7e6, abs=0.1e6)
    assert dl.before_channels == pytest.approx(264 * 10_000)
    assert dl.before_bps == pytest.approx(264 * 10_000 * 114.5e6, rel=1e-9)


def test_downlink_unchanged_without_reservations():
    p = CostParams(timing=TimingParams(n_signals=4))
    dl = downlink_capacity(p)
    manual_after = dl.before_channels * (1 - tx_reservation_bound(p))
    assert dl.after_channels == pytest.approx(manual_after, rel=1e-12)


def test_channel_rate_is_bandwidth_times_efficiency():
    p = CostParams()
    assert p.channel_rate_bps == pytest.approx(114.5e6, rel=1e-9)


def test_setup_reservation_values():
    assert setup_reservation(CostParams()) == pytest.approx(0.1133, abs=1e-3)
    p1 = CostParams(timing=TimingParams(n_signals=4))
    # n=4: 3 cross-cell bursts per cell
    assert setup_reservation(p1) == pytest.approx(3 * 850_000 * 0.005 / 150_000, rel=1e-12)
    p2 = CostParams(timing=TimingParams(t_setup_tx_us=1000))
    assert setup_reservation(p2) == pytest.approx(0.0227, abs=1e-4)


def test_energy_reservation_values():
    assert energy_reservation(CostParams()) == pytest.approx(0.0077, abs=2e-4)
    assert energy_reservation(CostParams(par=1.0)) == pytest.approx(0.000805, abs=5e-6)
    big = CostParams(n_beam_channels=264 * 1000, n_channels=76 * 250, par=9.6)
    assert energy_reservation(big) < 1e-5


def test_pointing_loss_quadratic():
    assert pointing_loss_db(1.0, 2.0) == pytest.approx(3.0, rel=1e-12)
    assert pointing_loss_db(0.0, 2.0) == 0.0
    assert pointing_loss_db(2.0, 2.0) == pytest.approx(12.0, rel=1e-12)


def test_max_steer_interval():
    assert max_steer_interval_s(2.0, 0.73, 3.0, "max") == pytest.approx(2.0 / 0.73, rel=1e-12)
    assert max_steer_interval_s(2.0, 0.73, 0.0, "max") == 0.0
    # mean statistic drops the factor-3 denominator
    assert (max_steer_interval_s(2.0, 0.73, 1.0, "mean")
            == pytest.approx(math.sqrt(3) * max_steer_interval_s(2.0, 0.73, 1.0, "max"),
                             rel=1e-12))
    with pytest.raises(ParameterError):
        max_steer_interval_s(2.0, 0.73, 1.0, "median")


def test_steer_interval_for_throughput_budget():
    # 0.10% throughput budget via the high-SNR sensitivity (0.332 b/s/Hz/dB)
    t = steer_interval_for_throughput_loss(CostParams(), 0.001)
    assert 0.26 * 0.85 <= t <= 0.26 * 1.15
    assert SHANNON_SENSITIVITY_BPS_HZ_PER_DB == pytest.approx(0.332193, abs=1e-6)


def test_cnc_uplink_cost_reference():
    c = cnc_uplink_cost(CostParams())
    assert c.total_bits == 9 * 850_000 * 59
    assert c.total_mib <= 54.0
    assert c.total_mib == pytest.approx(53.8, abs=0.1)
    assert c.per_sv_bps == pytest.approx(3500.0, rel=0.10)


def test_cnc_uplink_primary_only():
    p = CostParams(timing=TimingParams(n_signals=4))
    # (2n-1) tuples per cell
    assert cnc_uplink_cost(p).total_bits == 7 * 850_000 * 59


def test_ut_duty_reference():
    d = ut_duty_cost(CostParams())
    assert d.d_pnt == pytest.approx(0.0033, abs=1e-4)
    assert d.d_ul_max == pytest.approx(0.9967, abs=1e-4)
    assert d.d_dl_max == pytest.approx(1 - 0.000275, abs=2e-5)
    assert d.d_dl_mean_max == pytest.approx(0.984, abs=5e-4)
    assert d.d_pnt + d.d_ul_max == pytest.approx(1.0, rel=1e-12)


def test_monotonicity_in_drivers():
    def params(n=5, n_cells=850_000, n_sats=10_000, n_channels=76):
        return CostParams(n_cells=n_cells, n_sats=n_sats, n_channels=n_channels,
                          timing=TimingParams(n_signals=n))
    for n in (4, 5, 6, 7):
        assert tx_reservation_bound(params(n + 1)) > tx_reservation_bound(params(n))
        assert rx_reservation_bound(params(n + 1)) > rx_reservation_bound(params(n))
        assert setup_reservation(params(n + 1)) > setup_reservation(params(n))
        assert energy_reservation(params(n + 1)) > energy_reservation(params(n))
        assert ut_duty_cost(params(n + 1)).d_pnt > ut_duty_cost(params(n)).d_pnt
    assert tx_reservation_bound(params(n_cells=900_000)) > tx_reservation_bound(params())
    assert tx_reservation_bound(params(n_sats=20_000)) < tx_reservation_bound(params())
    assert setup_reservation(params(n_sats=20_000)) < setup_reservation(params())
    assert energy_reservation(params(n_sats=20_000)) < energy_reservation(params())
    assert rx_reservation_bound(params(n_channels=152)) < rx_reservation_bound(params())


def test_saturation_raises_instead_of_silent_overflow():
    with pytest.raises(SaturationError):
        tx_reservation_bound(CostParams(n_cells=10**9))
    with pytest.raises(SaturationError):
        setup_reservation(CostParams(n_sats=1))


def test_pointing_overhead_is_flagged_approximate_and_small():
    p = CostParams()
    ppm = pointing_overhead_ppm(p)
    # order-of-magnitude check only: the reported figure is sub-ppm
    assert 0.01 <= ppm <= 5.0
    assert "Approximate" in pointing_overhead_ppm.__doc__


def test_measured_below_analytic_across_random_scenarios(desk_grid, desk_config,
                                                         timing):
    """Bound dominance on live schedules over randomized scenarios."""
    from leopnt.scheduler import SchedulerConfig, randomized_schedule
    p = CostParams(n_cells=desk_grid.n_cells, n_sats=desk_config.n_sats,
                   timing=timing, t_sweep_s=sweep_time(desk_grid.params))
    r_tx, r_rx = tx_reservation_bound(p), rx_reservation_bound(p)
    r_su, r_e = setup_reservation(p), energy_reservation(p)
    for seed in range(50, 56):
        sched, stats, tx, rx = randomized_schedule(
            desk_grid, desk_config, timing,
            SchedulerConfig(mode="randomized", rng_seed=seed))
        meas = measure_reservations(sched, tx, rx, p)
        assert meas.r_tx <= r_tx * (1 + 1e-9)
        assert meas.r_rx <= r_rx
        assert meas.r_su <= r_su * (1 + 1e-9)
        assert meas.r_e <= r_e * (1 + 1e-9)


def test_measure_reservations_empty_and_primary_only(desk_grid, timing):
    from leopnt.cubes import RxCube, TxCube, tx_reserve_assignment
    from leopnt.schedule import Assignment, GnssSchedule, PRIMARY
    p = CostParams(n_cells=desk_grid.n_cells, n_sats=10, timing=timing)
    tx = TxCube(10, 15, 76, 264, timing.t_period_us)
    rx = RxCube(desk_grid.n_cells, 76, timing.t_period_us)
    empty = GnssSchedule(t_period_us=timing.t_period_us)
    m = measure_reservations(empty, tx, rx, p)
    assert (m.r_tx, m.r_rx, m.r_su, m.r_e) == (0.0, 0.0, 0.0, 0.0)
    a = Assignment(cell_id=0, s=1, sv_id=3, beam_id=0, channel_id=0,
                   t_tx_us=100, t_flight_us=3000, t_sweep_us=500, kind=PRIMARY)
    assert tx_reserve_assignment(tx, a, timing) is None
    sched = GnssSchedule(t_period_us=timing.t_period_us, assignments=[a],
                         primary_map={0: 3})
    m2 = measure_reservations(sched, tx, rx, p)
    assert m2.r_su == 0.0
    assert m2.r_tx > 0.0


def test_cost_report_round_trip(tmp_path):
    report = cost_report(CostParams())
    d = report.to_json_dict()
    assert d["r_tx"] == pytest.approx(0.0160, abs=5e-4)
    assert d["complexity_steps"] == pytest.approx(4.4e6, rel=0.02)
    path = tmp_path / "report.json"
    report.to_json(path)
    import json
    back = json.loads(path.read_text())
    for k, v in d.items():
        if v is None:
            assert back[k] is None
        else:
            assert back[k] == pytest.approx(v)
    assert len(report.csv_fields()) == len(report.csv_row())
