"""Hexagonal service-cell grid over a latitude band of a spherical Earth.

Cells are laid out in staggered latitude rows: row centers are spaced by
3/4 of the cell diameter ``D`` (the long, vertex-to-vertex diagonal of the
hexagon) and cells within a row by ``sqrt(3)/2 * D``, which is the standard
hexagonal close packing.  Row lengths are rounded to whole cells, so the
tiling is not exactly regular on the sphere; the grid contract is only that
the cell count tracks ``service_area / hex_area``, that adjacency is
symmetric with at most 6 neighbors per cell, and that nearest-cell queries
are exact.

All angles at the API boundary are degrees, lengths are kilometers, and
times are seconds.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import OutOfBandError, ParameterError, ParseError

SPEED_OF_LIGHT_KM_S = 299792.458

# Neighbor-distance acceptance factor: first-shell hex neighbors sit within
# ~1.15*D even at the worst row-stagger drift, while the second shell starts
# near 1.5*D; 1.45x the nominal cross-row distance (~1.26*D) splits them.
_NEIGHBOR_SLACK = 1.45


@dataclass(frozen=True)
class GridParams:
    """Geometry of the service grid.

    ``cell_diameter_km`` is the hexagon's long (vertex-to-vertex) diagonal,
    so the cell area is ``3*sqrt(3)/8 * D**2``.
    """

    cell_diameter_km: float = 29.0
    lat_max_deg: float = 60.0
    earth_radius_km: float = 6371.0
    min_elevation_deg: float = 40.0

    def __post_init__(self):
        if not self.cell_diameter_km > 0:
            raise ParameterError("cell_diameter_km must be > 0")
        if not 0 < self.lat_max_deg <= 90:
            raise ParameterError("lat_max_deg must be in (0, 90]")
        if not self.earth_radius_km > 0:
            raise ParameterError("earth_radius_km must be > 0")
        if not 0 < self.min_elevation_deg < 90:
            raise ParameterError("min_elevation_deg must be in (0, 90)")


@dataclass(frozen=True)
class Cell:
    id: int
    lat_deg: float
    lon_deg: float
    neighbor_ids: tuple[int, ...]


def hex_area(diameter_km: float) -> float:
    """Area of a regular hexagon with vertex-to-vertex diameter ``D``."""
    return 3.0 * math.sqrt(3.0) / 8.0 * diameter_km * diameter_km


def service_area(lat_max_deg: float, earth_radius_km: float) -> float:
    """Area of the band |lat| <= lat_max on a sphere: 4*pi*R^2*sin(lat_max)."""
    if not 0 < lat_max_deg <= 90:
        raise ParameterError("lat_max_deg must be in (0, 90]")
    return 4.0 * math.pi * earth_radius_km**2 * math.sin(math.radians(lat_max_deg))


def sweep_time(params: GridParams) -> float:
    """Worst-case time for a wavefront to cross one cell, in seconds.

    A burst arriving at the minimum elevation angle sweeps the ground at
    c/cos(elev); the crossing time of a cell of diameter D is therefore
    bounded by (D/c)*cos(min_elevation).
    """
    d_m = params.cell_diameter_km * 1000.0
    return d_m / (SPEED_OF_LIGHT_KM_S * 1000.0) * math.cos(
        math.radians(params.min_elevation_deg)
    )


def _unit_vectors(lat_deg, lon_deg):
    lat = np.radians(lat_deg)
    lon = np.radians(lon_deg)
    clat = np.cos(lat)
    return np.stack([clat * np.cos(lon), clat * np.sin(lon), np.sin(lat)], axis=-1)


def _central_angle(u, v):
    # arcsin of half-chord: stable for small angles, exact on unit vectors
    chord = np.linalg.norm(u - v, axis=-1)
    return 2.0 * np.arcsin(np.clip(chord / 2.0, 0.0, 1.0))


def destination_point(lat_deg, lon_deg, bearing_deg, distance_km, radius_km):
    """Great-circle destination from a start point, bearing, and distance."""
    phi1 = math.radians(lat_deg)
    lam1 = math.radians(lon_deg)
    theta = math.radians(bearing_deg)
    delta = distance_km / radius_km
    sphi2 = math.sin(phi1) * math.cos(delta) + math.cos(phi1) * math.sin(delta) * math.cos(theta)
    phi2 = math.asin(max(-1.0, min(1.0, sphi2)))
    lam2 = lam1 + math.atan2(
        math.sin(theta) * math.sin(delta) * math.cos(phi1),
        math.cos(delta) - math.sin(phi1) * sphi2,
    )
    lon2 = math.degrees(lam2)
    lon2 = (lon2 + 180.0) % 360.0 - 180.0
    return math.degrees(phi2), lon2


class CellGrid:
    """Immutable hex-cell grid with adjacency and spatial queries.

    Construction happens in :func:`build_cell_grid`; instances are safe for
    concurrent reads and all queries are pure.
    """

    def __init__(self, params, lats_deg, lons_deg, indptr, indices, rows=None):
        self.params = params
        self.lats_deg = lats_deg
        self.lons_deg = lons_deg
        self._indptr = indptr
        self._indices = indices
        self._rows = rows  # (row_lats, row_counts, row_starts, row_phases) or None
        self._units = _unit_vectors(lats_deg, lons_deg)

    @property
    def n_cells(self) -> int:
        return self.lats_deg.shape[0]

    def neighbors(self, cell_id: int) -> np.ndarray:
        return self._indices[self._indptr[cell_id]:self._indptr[cell_id + 1]]

    def degree(self, cell_id: int) -> int:
        return int(self._indptr[cell_id + 1] - self._indptr[cell_id])

    def mean_degree(self) -> float:
        return float(self._indices.shape[0]) / self.n_cells

    def cell(self, cell_id: int) -> Cell:
        return Cell(
            id=int(cell_id),
            lat_deg=float(self.lats_deg[cell_id]),
            lon_deg=float(self.lons_deg[cell_id]),
            neighbor_ids=tuple(int(i) for i in self.neighbors(cell_id)),
        )

    @property
    def cells(self):
        return [self.cell(i) for i in range(self.n_cells)]

    def unit_vector(self, cell_id: int) -> np.ndarray:
        return self._units[cell_id]

    def unit_vectors(self, cell_ids=None) -> np.ndarray:
        if cell_ids is None:
            return self._units
        return self._units[cell_ids]

    def cell_vertices(self, cell_id: int):
        """The six hexagon vertices (lat, lon), at D/2 from the center."""
        lat = float(self.lats_deg[cell_id])
        lon = float(self.lons_deg[cell_id])
        r = self.params.cell_diameter_km / 2.0
        return [
            destination_point(lat, lon, b, r, self.params.earth_radius_km)
            for b in (0.0, 60.0, 120.0, 180.0, 240.0, 300.0)
        ]

    # -- spatial queries ---------------------------------------------------

    def nearest_cell(self, lat_deg: float, lon_deg: float) -> int:
        """Id of the cell whose center is nearest the point; ties break low.

        The point must lie inside the service band.
        """
        if abs(lat_deg) > self.params.lat_max_deg + 1e-12:
            raise OutOfBandError(
                f"point latitude {lat_deg} outside band +/-{self.params.lat_max_deg}"
            )
        cand = self._candidate_ids(lat_deg, lon_deg)
        u = _unit_vectors(lat_deg, lon_deg)
        d = _central_angle(self._units[cand], u)
        order = np.lexsort((cand, d))
        return int(cand[order[0]])

    def cells_within_radius(self, lat_deg: float, lon_deg: float, radius_km: float):
        """Ids of all cells whose centers are within a great-circle radius."""
        psi = radius_km / self.params.earth_radius_km
        u = _unit_vectors(lat_deg, lon_deg)
        if self._rows is None:
            d = _central_angle(self._units, u)
            return np.nonzero(d <= psi + 1e-15)[0]
        row_lats, row_counts, row_starts, _ = self._rows
        ids = []
        for i in np.nonzero(np.abs(np.radians(row_lats - lat_deg)) <= psi + 1e-12)[0]:
            start, count = row_starts[i], row_counts[i]
            sub = np.arange(start, start + count)
            d = _central_angle(self._units[sub], u)
            ids.append(sub[d <= psi + 1e-15])
        if not ids:
            return np.empty(0, dtype=np.int64)
        return np.sort(np.concatenate(ids))

    def _candidate_ids(self, lat_deg, lon_deg):
        if self._rows is None:
            return np.arange(self.n_cells)
        row_lats, row_counts, row_starts, row_phases = self._rows
        n_rows = row_lats.shape[0]
        d_lat = 2.0 * self.params.lat_max_deg / n_rows
        r0 = (lat_deg + self.params.lat_max_deg) / d_lat - 0.5
        rows = range(max(0, int(math.floor(r0)) - 2), min(n_rows, int(math.ceil(r0)) + 3))
        out = []
        for i in rows:
            n_i = int(row_counts[i])
            f = (lon_deg + 180.0) / 360.0 * n_i - row_phases[i]
            k0 = int(math.floor(f))
            for dk in (-2, -1, 0, 1, 2):
                out.append(int(row_starts[i]) + (k0 + dk) % n_i)
        return np.unique(np.array(out, dtype=np.int64))

    # -- serialization -----------------------------------------------------

    def to_csv(self, path):
        """Write ``cell_id, lat_deg, lon_deg, neighbor_ids`` rows."""
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["cell_id", "lat_deg", "lon_deg", "neighbor_ids"])
            for i in range(self.n_cells):
                nbrs = ";".join(str(int(k)) for k in self.neighbors(i))
                writer.writerow([i, repr(float(self.lats_deg[i])), repr(float(self.lons_deg[i])), nbrs])

    @classmethod
    def from_csv(cls, path, params: GridParams) -> "CellGrid":
        """Load a grid exported by :meth:`to_csv`.

        The imported grid answers spatial queries by direct scan (no row
        structure), which is exact but slower than a built grid.
        """
        lats, lons, nbr_lists = [], [], []
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None or header[:3] != ["cell_id", "lat_deg", "lon_deg"]:
                raise ParseError("bad grid CSV header", path=path, line=1)
            for ln, row in enumerate(reader, start=2):
                if len(row) != 4:
                    raise ParseError("expected 4 columns", path=path, line=ln)
                try:
                    cid = int(row[0])
                    lats.append(float(row[1]))
                    lons.append(float(row[2]))
                    nbrs = [int(x) for x in row[3].split(";") if x != ""]
                except ValueError as exc:
                    raise ParseError(f"bad value: {exc}", path=path, line=ln) from None
                if cid != len(nbr_lists):
                    raise ParseError("cell ids must be dense 0..N-1", path=path, line=ln)
                nbr_lists.append(nbrs)
        indptr = np.zeros(len(nbr_lists) + 1, dtype=np.int64)
        for i, nbrs in enumerate(nbr_lists):
            indptr[i + 1] = indptr[i] + len(nbrs)
        indices = np.fromiter(
            (k for nbrs in nbr_lists for k in nbrs), dtype=np.int64, count=int(indptr[-1])
        )
        return cls(params, np.array(lats), np.array(lons), indptr, indices, rows=None)


def build_cell_grid(params: GridParams) -> CellGrid:
    """Lay out staggered hex rows over the band and derive adjacency.

    Adjacency combines structural same-row edges with mutual-bracket edges
    between adjacent rows, filtered by distance; every edge is symmetric and
    no cell exceeds 6 neighbors.  Degenerate single-row bands fall back to
    next-nearest in-row neighbors so that every cell keeps at least 3.
    """
    R = params.earth_radius_km
    D = params.cell_diameter_km
    row_sep_km = 0.75 * D
    in_row_km = math.sqrt(3.0) / 2.0 * D
    band_arc_km = 2.0 * math.radians(params.lat_max_deg) * R

    n_rows = max(1, round(band_arc_km / row_sep_km))
    d_lat = 2.0 * params.lat_max_deg / n_rows
    row_lats = -params.lat_max_deg + (np.arange(n_rows) + 0.5) * d_lat
    circumference = 2.0 * math.pi * R * np.cos(np.radians(row_lats))
    row_counts = np.maximum(1, np.rint(circumference / in_row_km).astype(np.int64))
    row_phases = 0.5 * (np.arange(n_rows) % 2)
    row_starts = np.concatenate([[0], np.cumsum(row_counts)])[:-1]
    n_cells = int(row_counts.sum())

    lats = np.repeat(row_lats, row_counts)
    lons = np.empty(n_cells)
    for i in range(n_rows):
        n_i = int(row_counts[i])
        j = np.arange(n_i)
        lons[row_starts[i]:row_starts[i] + n_i] = 360.0 * (j + row_phases[i]) / n_i - 180.0

    units = _unit_vectors(lats, lons)
    edges_a, edges_b = [], []

    # same-row ring edges
    for i in range(n_rows):
        n_i = int(row_counts[i])
        if n_i < 2:
            continue
        base = int(row_starts[i])
        j = np.arange(n_i - 1)
        edges_a.append(base + j)
        edges_b.append(base + j + 1)
        if n_i >= 3:
            edges_a.append(np.array([base + n_i - 1]))
            edges_b.append(np.array([base]))

    # cross-row mutual-bracket edges
    actual_sep_km = math.radians(d_lat) * R
    for i in range(n_rows - 1):
        na, nb = int(row_counts[i]), int(row_counts[i + 1])
        sa = float(circumference[i]) / na
        sb = float(circumference[i + 1]) / nb
        base_a, base_b = int(row_starts[i]), int(row_starts[i + 1])
        lon_a = lons[base_a:base_a + na]
        lon_b = lons[base_b:base_b + nb]

        def brackets(lon_src, n_dst, phase_dst):
            f = (lon_src + 180.0) / 360.0 * n_dst - phase_dst
            k0 = np.floor(f).astype(np.int64)
            return k0 % n_dst, (k0 + 1) % n_dst

        ka0, ka1 = brackets(lon_a, nb, float(row_phases[i + 1]))
        kb0, kb1 = brackets(lon_b, na, float(row_phases[i]))
        ja = np.arange(na)
        jb = np.arange(nb)
        pairs_a = np.concatenate([ja * nb + ka0, ja * nb + ka1])
        pairs_b = np.concatenate([kb0 * nb + jb, kb1 * nb + jb])
        mutual = np.intersect1d(pairs_a, pairs_b)
        a_idx = mutual // nb
        b_idx = mutual % nb
        thresh = _NEIGHBOR_SLACK * math.hypot(actual_sep_km, 0.5 * max(sa, sb))
        dist = _central_angle(units[base_a + a_idx], units[base_b + b_idx]) * R
        keep = dist <= thresh
        edges_a.append(base_a + a_idx[keep])
        edges_b.append(base_b + b_idx[keep])

    ea = np.concatenate(edges_a) if edges_a else np.empty(0, dtype=np.int64)
    eb = np.concatenate(edges_b) if edges_b else np.empty(0, dtype=np.int64)
    indptr, indices = _edges_to_csr(n_cells, ea, eb)

    grid = CellGrid(
        params, lats, lons, indptr, indices,
        rows=(row_lats, row_counts, row_starts, row_phases),
    )
    _pad_low_degree(grid)
    return grid


def _edges_to_csr(n_cells, ea, eb):
    src = np.concatenate([ea, eb])
    dst = np.concatenate([eb, ea])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    # drop accidental duplicates
    if src.shape[0]:
        keep = np.concatenate([[True], (src[1:] != src[:-1]) | (dst[1:] != dst[:-1])])
        src, dst = src[keep], dst[keep]
    indptr = np.zeros(n_cells + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, dst.astype(np.int64)


def _pad_low_degree(grid: CellGrid, min_degree: int = 3, max_degree: int = 6):
    """Raise cells below ``min_degree`` using nearby in-band candidates.

    Only degenerate bands (one or two rows) ever trigger this; the edges
    added are symmetric and respect the 6-neighbor cap on both endpoints.
    """
    deg = np.diff(grid._indptr)
    deficient = np.nonzero(deg < min_degree)[0]
    if deficient.shape[0] == 0:
        return
    nbr_sets = {int(c): set(int(x) for x in grid.neighbors(c)) for c in range(grid.n_cells)}
    for c in deficient:
        c = int(c)
        cand = grid._candidate_ids(float(grid.lats_deg[c]), float(grid.lons_deg[c]))
        cand = cand[cand != c]
        d = _central_angle(grid._units[cand], grid._units[c])
        for k in cand[np.lexsort((cand, d))]:
            k = int(k)
            if len(nbr_sets[c]) >= min_degree:
                break
            if k in nbr_sets[c] or len(nbr_sets[k]) >= max_degree:
                continue
            nbr_sets[c].add(k)
            nbr_sets[k].add(c)
    indptr = np.zeros(grid.n_cells + 1, dtype=np.int64)
    counts = np.array([len(nbr_sets[i]) for i in range(grid.n_cells)], dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = np.empty(int(indptr[-1]), dtype=np.int64)
    for i in range(grid.n_cells):
        indices[indptr[i]:indptr[i + 1]] = sorted(nbr_sets[i])
    grid._indptr = indptr
    grid._indices = indices
