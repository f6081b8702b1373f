"""Scenario files: sectioned key/value configs driving every command.

Every key has a baked-in default describing the reference system, so an
empty scenario file reproduces the headline cost numbers; a scenario only
states what it overrides.  Constellation shells are sections named
``[shell.<name>]``, one per shell.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

from .cells import GridParams, sweep_time
from .constellation import ConstellationConfig, ShellConfig
from .costs import CostParams
from .errors import ParameterError, ParseError
from .population import ParParams
from .schedule import TimingParams
from .scheduler import SchedulerConfig

_DEFAULTS = {
    "grid": {
        "cell_diameter_km": "29.0",
        "lat_max_deg": "60.0",
        "earth_radius_km": "6371.0",
        "min_elevation_deg": "40.0",
    },
    "constellation": {
        "n_beams": "15",
        "n_channels": "76",
        "n_beam_channels": "264",
    },
    "timing": {
        "t_burst_us": "500",
        "t_switch_tx_us": "100",
        "t_switch_rx_us": "100",
        "t_setup_tx_us": "5000",
        "t_setup_rx_us": "5000",
        "t_period_us": "1000000",
        "n_signals": "5",
    },
    "cost": {
        # closed-form inputs; cell/SV counts here are independent of any
        # grid or shell sections so that cost studies stay instantaneous
        "n_cells": "850000",
        "n_adj": "6",
        "n_sats": "10000",
        "par": "9.6",
        "channel_bandwidth_hz": "50e6",
        "spectral_efficiency_bps_hz": "2.29",
        "assignment_bits": "59",
        "fwhm_deg": "2.0",
        "omega_deg_s": "0.73",
        "refresh_period_s": "15.0",
        "correction_stream_bps": "500.0",
        "iono_stream_bps": "3.4",
        "steer_loss_budget": "0.001",
    },
    "scheduler": {
        "mode": "greedy",
        "rng_seed": "0",
        "max_attempts_per_signal": "1000",
        "epoch_s": "0.0",
        "cell_order": "id",
        "goal_elevation_deg": "45.0",
        "geo_mask_halfwidth_deg": "5.0",
        "block_size": "1024",
    },
    "population": {
        "raster": "",
        "threshold_raster": "",
        "target_unserved_population": "42e6",
        "gamma": "1.4698795180722892",   # 122/83
        "rho_max": "",
        "altitude_km": "550.0",
        "inclination_deg": "53.0",
        "phi0_deg": "40.0",
        "n_orbit_samples": "200000",
        "rng_seed": "0",
        "peak_percentile": "99.9",
    },
    "output": {
        "dir": "out",
    },
}

_INT_KEYS = {
    "n_beams", "n_channels", "n_beam_channels", "t_burst_us", "t_switch_tx_us",
    "t_switch_rx_us", "t_setup_tx_us", "t_setup_rx_us", "t_period_us",
    "n_signals", "n_cells", "n_adj", "n_sats", "assignment_bits", "rng_seed",
    "max_attempts_per_signal", "block_size", "n_orbit_samples", "n_planes",
    "sats_per_plane",
}


@dataclass
class Scenario:
    """Parsed scenario with typed accessors for each subsystem."""

    sections: dict = field(default_factory=dict)
    shells: list = field(default_factory=list)
    path: str | None = None

    def _get(self, section: str, key: str) -> str:
        try:
            return self.sections[section][key]
        except KeyError:
            raise ParseError(f"missing key [{section}] {key}", path=self.path) from None

    def _typed(self, section: str, key: str):
        raw = self._get(section, key)
        try:
            if key in _INT_KEYS:
                v = float(raw)
                if v != int(v):
                    raise ValueError("not an integer")
                return int(v)
            return float(raw)
        except ValueError:
            raise ParseError(
                f"bad value for [{section}] {key}: {raw!r}", path=self.path) from None

    def grid_params(self) -> GridParams:
        return GridParams(
            cell_diameter_km=self._typed("grid", "cell_diameter_km"),
            lat_max_deg=self._typed("grid", "lat_max_deg"),
            earth_radius_km=self._typed("grid", "earth_radius_km"),
            min_elevation_deg=self._typed("grid", "min_elevation_deg"),
        )

    def constellation(self) -> ConstellationConfig:
        shells = []
        for name, body in self.shells:
            def shell_val(key, default=None):
                if key in body:
                    return body[key]
                if default is None:
                    raise ParseError(
                        f"missing key [shell.{name}] {key}", path=self.path)
                return default
            try:
                shells.append(ShellConfig(
                    altitude_km=float(shell_val("altitude_km")),
                    inclination_deg=float(shell_val("inclination_deg")),
                    n_planes=int(shell_val("n_planes")),
                    sats_per_plane=int(shell_val("sats_per_plane")),
                    raan_spread_deg=float(shell_val("raan_spread_deg", "360.0")),
                    phase_offset_deg=float(shell_val("phase_offset_deg", "0.0")),
                ))
            except ValueError as exc:
                raise ParseError(f"bad value in [shell.{name}]: {exc}",
                                 path=self.path) from None
        if not shells:
            raise ParseError("scenario defines no [shell.*] sections", path=self.path)
        return ConstellationConfig(
            shells=tuple(shells),
            n_beams=self._typed("constellation", "n_beams"),
            n_channels=self._typed("constellation", "n_channels"),
            n_beam_channels=self._typed("constellation", "n_beam_channels"),
        )

    def timing(self) -> TimingParams:
        return TimingParams(
            t_burst_us=self._typed("timing", "t_burst_us"),
            t_switch_tx_us=self._typed("timing", "t_switch_tx_us"),
            t_switch_rx_us=self._typed("timing", "t_switch_rx_us"),
            t_setup_tx_us=self._typed("timing", "t_setup_tx_us"),
            t_setup_rx_us=self._typed("timing", "t_setup_rx_us"),
            t_period_us=self._typed("timing", "t_period_us"),
            n_signals=self._typed("timing", "n_signals"),
        )

    def scheduler_config(self, mode=None, seed=None, order=None) -> SchedulerConfig:
        return SchedulerConfig(
            mode=mode or self._get("scheduler", "mode"),
            rng_seed=self._typed("scheduler", "rng_seed") if seed is None else seed,
            max_attempts_per_signal=self._typed("scheduler", "max_attempts_per_signal"),
            epoch_s=self._typed("scheduler", "epoch_s"),
            cell_order=order or self._get("scheduler", "cell_order"),
            goal_elevation_deg=self._typed("scheduler", "goal_elevation_deg"),
            geo_mask_halfwidth_deg=self._typed("scheduler", "geo_mask_halfwidth_deg"),
            block_size=self._typed("scheduler", "block_size"),
        )

    def cost_params(self, grid=None, config=None) -> CostParams:
        """Closed-form inputs; pass a built grid and constellation to use
        their actual cell/SV counts and sweep time instead of the [cost]
        section's standalone values."""
        params = self.grid_params()
        if grid is not None:
            n_cells = grid.n_cells
        else:
            n_cells = self._typed("cost", "n_cells")
        n_sats = config.n_sats if config is not None else self._typed("cost", "n_sats")
        return CostParams(
            n_cells=n_cells,
            n_adj=self._typed("cost", "n_adj"),
            n_sats=n_sats,
            n_beams=self._typed("constellation", "n_beams"),
            n_channels=self._typed("constellation", "n_channels"),
            n_beam_channels=self._typed("constellation", "n_beam_channels"),
            par=self._typed("cost", "par"),
            timing=self.timing(),
            t_sweep_s=sweep_time(params),
            channel_bandwidth_hz=self._typed("cost", "channel_bandwidth_hz"),
            spectral_efficiency_bps_hz=self._typed("cost", "spectral_efficiency_bps_hz"),
            assignment_bits=self._typed("cost", "assignment_bits"),
            fwhm_deg=self._typed("cost", "fwhm_deg"),
            omega_deg_s=self._typed("cost", "omega_deg_s"),
            refresh_period_s=self._typed("cost", "refresh_period_s"),
            correction_stream_bps=self._typed("cost", "correction_stream_bps"),
            iono_stream_bps=self._typed("cost", "iono_stream_bps"),
        )

    def par_params(self) -> ParParams:
        rho_raw = self._get("population", "rho_max")
        return ParParams(
            target_unserved_population=self._typed("population", "target_unserved_population"),
            gamma=self._typed("population", "gamma"),
            rho_max=float(rho_raw) if rho_raw else None,
            altitude_km=self._typed("population", "altitude_km"),
            inclination_deg=self._typed("population", "inclination_deg"),
            phi0_deg=self._typed("population", "phi0_deg"),
            n_orbit_samples=self._typed("population", "n_orbit_samples"),
            rng_seed=self._typed("population", "rng_seed"),
            peak_percentile=self._typed("population", "peak_percentile"),
        )

    def raster_path(self, key: str = "raster") -> str | None:
        raw = self._get("population", key)
        return raw or None

    def output_dir(self) -> str:
        return self._get("output", "dir")

    def steer_loss_budget(self) -> float:
        return self._typed("cost", "steer_loss_budget")

    def set_override(self, section: str, key: str, value: str):
        if section not in self.sections:
            raise ParseError(f"unknown section [{section}]", path=self.path)
        if key not in self.sections[section]:
            raise ParseError(f"unknown key [{section}] {key}", path=self.path)
        self.sections[section][key] = value


def load_scenario(path=None, overrides=None) -> Scenario:
    """Load a scenario file on top of the defaults.

    ``overrides`` is an iterable of ``section.key=value`` strings applied
    last (the CLI sweep mechanism uses this).
    """
    sections = {name: dict(body) for name, body in _DEFAULTS.items()}
    shells = []
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path) as f:
                parser.read_file(f)
        except OSError:
            raise
        except configparser.Error as exc:
            raise ParseError(f"bad scenario syntax: {exc}", path=path) from None
        for section in parser.sections():
            if section.startswith("shell.") or section == "shell":
                name = section.split(".", 1)[1] if "." in section else "0"
                shells.append((name, dict(parser[section])))
                continue
            if section not in sections:
                raise ParseError(f"unknown section [{section}]", path=path)
            for key, value in parser[section].items():
                if key not in sections[section]:
                    raise ParseError(f"unknown key [{section}] {key}", path=path)
                sections[section][key] = value
    scenario = Scenario(sections=sections, shells=shells, path=str(path) if path else None)
    for item in overrides or ():
        try:
            dotted, value = item.split("=", 1)
            section, key = dotted.split(".", 1)
        except ValueError:
            raise ParseError(f"override must look like section.key=value: {item!r}") from None
        scenario.set_override(section.strip(), key.strip(), value.strip())
    return scenario
