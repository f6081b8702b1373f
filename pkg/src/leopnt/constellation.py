"""Multi-shell circular-orbit constellations and per-cell visibility.

Orbits are circular two-body with uniform Earth rotation (no J2, no drag):
the downstream scheduling and costing depend on visibility statistics, not
centimeter-accurate ephemerides.  Shells follow a Walker-delta layout with a
configurable inter-plane phase offset.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .cells import SPEED_OF_LIGHT_KM_S, CellGrid, GridParams, _unit_vectors, destination_point
from .errors import GeometryError, InsufficientVisibilityError, ParameterError

MU_EARTH_KM3_S2 = 398600.4418
EARTH_ROTATION_RAD_S = 7.2921159e-5
GEO_RADIUS_KM = 42164.0
GEO_ARC_SAMPLES = 361

# Schedulers evaluate the visibility masks through a different (vectorized)
# float path than the checker; padding their thresholds by a physically
# meaningless margin keeps borderline satellites out of dispute.
MASK_GUARD_DEG = 1e-6


@dataclass(frozen=True)
class ShellConfig:
    altitude_km: float
    inclination_deg: float
    n_planes: int
    sats_per_plane: int
    raan_spread_deg: float = 360.0
    phase_offset_deg: float = 0.0

    def __post_init__(self):
        if not self.altitude_km > 0:
            raise ParameterError("altitude_km must be > 0")
        if not 0 <= self.inclination_deg <= 180:
            raise ParameterError("inclination_deg must be in [0, 180]")
        if self.n_planes * self.sats_per_plane < 1:
            raise ParameterError("shell must contain at least one satellite")

    @property
    def n_sats(self) -> int:
        return self.n_planes * self.sats_per_plane


@dataclass(frozen=True)
class ConstellationConfig:
    shells: tuple[ShellConfig, ...]
    n_beams: int = 15
    n_channels: int = 76
    n_beam_channels: int = 264

    def __post_init__(self):
        if isinstance(self.shells, list):
            object.__setattr__(self, "shells", tuple(self.shells))
        if self.n_beam_channels > self.n_beams * self.n_channels:
            raise ParameterError("n_beam_channels cannot exceed n_beams * n_channels")
        if min(self.n_beams, self.n_channels, self.n_beam_channels) < 1:
            raise ParameterError("beam/channel counts must be >= 1")

    @property
    def n_sats(self) -> int:
        return sum(s.n_sats for s in self.shells)


class BeamChannelMap:
    """Partition of an SV's simultaneous transmit slots among its beams.

    Each beam owns a contiguous block of the ``n_bc`` beam-channel slots and
    maps them onto a staggered subset of the frequency channels, so that a
    whole-beam reservation covers ~``n_bc / n_beams`` channels.  Non-uniform
    per-beam bandwidth is deliberately ignored downstream.
    """

    def __init__(self, n_beams: int, n_channels: int, n_bc: int):
        if n_bc > n_beams * n_channels:
            raise ParameterError("n_bc cannot exceed n_beams * n_channels")
        self.n_beams = n_beams
        self.n_channels = n_channels
        self.n_bc = n_bc
        self._channels = []
        for b in range(n_beams):
            lo = b * n_bc // n_beams
            hi = (b + 1) * n_bc // n_beams
            start = b * n_channels // n_beams
            self._channels.append(tuple((start + k) % n_channels for k in range(hi - lo)))

    def channels_of_beam(self, beam_id: int) -> tuple[int, ...]:
        return self._channels[beam_id]

    @property
    def mean_channels_per_beam(self) -> float:
        return self.n_bc / self.n_beams


@dataclass
class SvState:
    sv_id: int
    position_km: np.ndarray   # Earth-fixed cartesian
    velocity_km_s: np.ndarray
    epoch_s: float


@dataclass
class LineOfSight:
    sv_id: int
    elevation_deg: float
    azimuth_deg: float
    range_km: float
    excluded: bool
    reason: str | None = None  # 'horizon' | 'below-mask' | 'geo-arc'


def orbital_period_s(altitude_km: float, earth_radius_km: float = 6371.0) -> float:
    a = earth_radius_km + altitude_km
    return 2.0 * math.pi * math.sqrt(a**3 / MU_EARTH_KM3_S2)


def propagate_arrays(config: ConstellationConfig, t_s: float,
                     earth_radius_km: float = 6371.0):
    """Earth-fixed positions and velocities of every SV at time ``t_s``.

    Returns ``(positions, velocities)`` with shape (N, 3) in km and km/s;
    SV ids are the row indices, numbered shell by shell, plane by plane.
    """
    if t_s < 0:
        raise ParameterError("t_s must be >= 0")
    pos_parts, vel_parts = [], []
    theta = EARTH_ROTATION_RAD_S * t_s
    ct, st = math.cos(theta), math.sin(theta)
    for shell in config.shells:
        a = earth_radius_km + shell.altitude_km
        rate = math.sqrt(MU_EARTH_KM3_S2 / a**3)
        inc = math.radians(shell.inclination_deg)
        p = np.arange(shell.n_planes)
        k = np.arange(shell.sats_per_plane)
        raan = np.radians(shell.raan_spread_deg) * p / shell.n_planes
        u0 = (
            2.0 * math.pi * k[None, :] / shell.sats_per_plane
            + math.radians(shell.phase_offset_deg) * p[:, None]
        )
        u = u0 + rate * t_s
        raan = np.broadcast_to(raan[:, None], u.shape)
        cu, su = np.cos(u), np.sin(u)
        cO, sO = np.cos(raan), np.sin(raan)
        ci, si = math.cos(inc), math.sin(inc)
        # inertial position/velocity of a circular orbit
        x = a * (cO * cu - sO * su * ci)
        y = a * (sO * cu + cO * su * ci)
        z = a * (su * si)
        vx = a * rate * (-cO * su - sO * cu * ci)
        vy = a * rate * (-sO * su + cO * cu * ci)
        vz = a * rate * (cu * si)
        # rotate into the Earth-fixed frame and add the frame motion
        xe = ct * x + st * y
        ye = -st * x + ct * y
        vxe = ct * vx + st * vy + EARTH_ROTATION_RAD_S * ye
        vye = -st * vx + ct * vy - EARTH_ROTATION_RAD_S * xe
        pos_parts.append(np.stack([xe, ye, z], axis=-1).reshape(-1, 3))
        vel_parts.append(np.stack([vxe, vye, vz], axis=-1).reshape(-1, 3))
    return np.concatenate(pos_parts), np.concatenate(vel_parts)


def propagate(config: ConstellationConfig, t_s: float,
              earth_radius_km: float = 6371.0) -> list[SvState]:
    """As :func:`propagate_arrays` but returning one ``SvState`` per SV."""
    pos, vel = propagate_arrays(config, t_s, earth_radius_km)
    return [SvState(i, pos[i], vel[i], t_s) for i in range(pos.shape[0])]


def write_states_csv(states: list[SvState], path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["sv_id", "t", "x", "y", "z"])
        for s in states:
            writer.writerow([s.sv_id, repr(s.epoch_s)] + [repr(float(v)) for v in s.position_km])


# -- topocentric geometry ----------------------------------------------------

def _enu_basis(lat_deg, lon_deg):
    lat = math.radians(lat_deg)
    lon = math.radians(lon_deg)
    east = np.array([-math.sin(lon), math.cos(lon), 0.0])
    north = np.array([-math.sin(lat) * math.cos(lon), -math.sin(lat) * math.sin(lon), math.cos(lat)])
    up = np.array([math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)])
    return east, north, up


def line_of_sight_arrays(sv_positions: np.ndarray, lat_deg: float, lon_deg: float,
                         earth_radius_km: float):
    """Elevation, azimuth (deg) and range (km) from a ground point to SVs."""
    east, north, up = _enu_basis(lat_deg, lon_deg)
    obs = earth_radius_km * up
    d = sv_positions - obs
    e = d @ east
    n = d @ north
    u = d @ up
    rng = np.sqrt(e * e + n * n + u * u)
    elev = np.degrees(np.arcsin(np.clip(u / rng, -1.0, 1.0)))
    az = np.degrees(np.arctan2(e, n)) % 360.0
    return elev, az, rng


def geo_arc_directions(lat_deg: float, lon_deg: float, earth_radius_km: float,
                       n_samples: int = GEO_ARC_SAMPLES):
    """Unit vectors from a ground point toward sampled geostationary-arc
    points within +/-90 deg of the point's longitude."""
    east, north, up = _enu_basis(lat_deg, lon_deg)
    obs = earth_radius_km * up
    lam = np.radians(lon_deg + np.linspace(-90.0, 90.0, n_samples))
    arc = GEO_RADIUS_KM * np.stack([np.cos(lam), np.sin(lam), np.zeros_like(lam)], axis=-1)
    d = arc - obs
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


def geo_arc_min_angle_deg(los_units: np.ndarray, geo_units: np.ndarray) -> np.ndarray:
    """Smallest angle between each line of sight and the sampled GEO arc."""
    dots = np.clip(los_units @ geo_units.T, -1.0, 1.0)
    return np.degrees(np.arccos(dots.max(axis=-1)))


def visible_svs(states, cell, grid_params: GridParams,
                geo_mask_halfwidth_deg: float = 5.0) -> list[LineOfSight]:
    """Evaluate the line of sight from a cell to every SV.

    Exclusion reasons, in precedence order: below the geometric horizon,
    below the minimum elevation mask, or within ``geo_mask_halfwidth_deg``
    of the geostationary arc as seen from the cell.
    """
    if len(states) == 0:
        raise ParameterError("states must be nonempty")
    if isinstance(states[0], SvState):
        positions = np.array([s.position_km for s in states])
        ids = [s.sv_id for s in states]
    else:
        positions = np.asarray(states)
        ids = list(range(positions.shape[0]))
    lat, lon = cell.lat_deg, cell.lon_deg
    R = grid_params.earth_radius_km
    elev, az, rng = line_of_sight_arrays(positions, lat, lon, R)

    _, _, up = _enu_basis(lat, lon)
    obs = R * up
    los = positions - obs
    los /= np.linalg.norm(los, axis=-1, keepdims=True)
    geo_units = geo_arc_directions(lat, lon, R)
    geo_angle = geo_arc_min_angle_deg(los, geo_units)

    out = []
    for i, sv_id in enumerate(ids):
        if elev[i] < 0.0:
            excluded, reason = True, "horizon"
        elif elev[i] < grid_params.min_elevation_deg:
            excluded, reason = True, "below-mask"
        elif geo_angle[i] < geo_mask_halfwidth_deg:
            excluded, reason = True, "geo-arc"
        else:
            excluded, reason = False, None
        out.append(LineOfSight(sv_id, float(elev[i]), float(az[i]), float(rng[i]),
                               excluded, reason))
    return out


def goal_directions_enu(n: int, goal_elevation_deg: float = 45.0) -> np.ndarray:
    """Unit ENU goal directions for signal indices 1..n.

    Index 1 is the zenith; 2..5 are north, east, south, west at the goal
    elevation; any further goals are spread uniformly in azimuth between the
    cardinal directions, at the same elevation.
    """
    if n < 4:
        raise ParameterError("need at least 4 signals per cell")
    goals = [np.array([0.0, 0.0, 1.0])]
    az_list = [0.0, 90.0, 180.0, 270.0][: max(0, min(n - 1, 4))]
    if n > 5:
        extra = n - 5
        az_list += [(k + 0.5) * 360.0 / extra for k in range(extra)]
    ce = math.cos(math.radians(goal_elevation_deg))
    se = math.sin(math.radians(goal_elevation_deg))
    for az in az_list:
        a = math.radians(az)
        goals.append(np.array([math.sin(a) * ce, math.cos(a) * ce, se]))
    return np.stack(goals)


def select_diverse(visible: list[LineOfSight], n: int,
                   goal_elevation_deg: float = 45.0, cell_id=None):
    """Candidate orderings, one list per signal index.

    For each goal direction the non-excluded SVs are sorted by descending
    alignment (dot product of the unit line of sight with the goal), ties
    broken by sv_id.  Raises if fewer than ``n`` SVs are usable.
    """
    usable = [v for v in visible if not v.excluded]
    if len(usable) < n:
        raise InsufficientVisibilityError(cell_id, len(usable), n)
    el = np.radians([v.elevation_deg for v in usable])
    az = np.radians([v.azimuth_deg for v in usable])
    enu = np.stack([np.sin(az) * np.cos(el), np.cos(az) * np.cos(el), np.sin(el)], axis=-1)
    ids = np.array([v.sv_id for v in usable])
    out = []
    for goal in goal_directions_enu(n, goal_elevation_deg):
        score = enu @ goal
        order = np.lexsort((ids, -score))
        out.append([usable[i] for i in order])
    return out


def slant_range_km(elevation_deg: float, altitude_km: float,
                   earth_radius_km: float = 6371.0) -> float:
    """Slant range to an SV at a given elevation, by the law of cosines."""
    R = earth_radius_km
    a = R + altitude_km
    ce = math.cos(math.radians(elevation_deg))
    se = math.sin(math.radians(elevation_deg))
    return math.sqrt(a * a - R * R * ce * ce) - R * se


def flight_time_s(sv_position_km: np.ndarray, cell, grid: CellGrid) -> float:
    """Shortest time for a burst to reach the cell, in seconds.

    The minimum is taken over the cell center and its six hexagon vertices.
    Raises if the SV is below the geometric horizon at the cell center.
    """
    pts = [(cell.lat_deg, cell.lon_deg)] + grid.cell_vertices(cell.id)
    R = grid.params.earth_radius_km
    units = _unit_vectors(*np.array(pts).T)
    obs = R * units
    d = np.asarray(sv_position_km)[None, :] - obs
    rng = np.linalg.norm(d, axis=-1)
    upcomp = np.einsum("ij,ij->i", d, units)
    if upcomp[0] / rng[0] < 0.0:
        raise GeometryError(
            f"SV below the horizon for cell {cell.id}"
        )
    return float(rng.min() / SPEED_OF_LIGHT_KM_S)
