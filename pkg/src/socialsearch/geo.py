"""Geodesic distances, bounding boxes, and the rhomboid grid tessellation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

EARTH_RADIUS_KM = 6371.0


@dataclass(frozen=True)
class GeoPoint:
    """A latitude/longitude pair in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned lat/lon box, half-open on its north and east edges."""

    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self) -> None:
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise ValueError("bounding box must have positive latitude and longitude extent")
        if not (-90.0 <= self.lat_min and self.lat_max <= 90.0):
            raise ValueError("latitude bounds outside [-90, 90]")
        if not (-180.0 <= self.lon_min and self.lon_max <= 180.0):
            raise ValueError("longitude bounds outside [-180, 180]")

    def contains(self, p: GeoPoint) -> bool:
        return self.lat_min <= p.lat < self.lat_max and self.lon_min <= p.lon < self.lon_max


# Box around the contiguous United States used as the default study area.
CONTIGUOUS_US = BoundingBox(24.5, 49.4, -124.8, -66.9)


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in kilometers on a sphere of radius 6371 km.

    Symmetric, non-negative, and zero for coincident coordinates.
    """
    phi_a = math.radians(a.lat)
    phi_b = math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi_a) * math.cos(phi_b) * math.sin(dlam / 2.0) ** 2
    # asin argument clipped against rounding just above 1
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def haversine_km_arrays(
    lats1: np.ndarray, lons1: np.ndarray, lats2: np.ndarray, lons2: np.ndarray
) -> np.ndarray:
    """Elementwise great-circle distances for degree arrays (broadcasting)."""
    phi1 = np.radians(lats1)
    phi2 = np.radians(lats2)
    dphi = np.radians(np.subtract(lats2, lats1))
    dlam = np.radians(np.subtract(lons2, lons1))
    h = np.sin(dphi / 2.0) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def _distances_to(lats: np.ndarray, lons: np.ndarray, lat0: float, lon0: float) -> np.ndarray:
    return haversine_km_arrays(lats, lons, lat0, lon0)


@dataclass(frozen=True, eq=False)
class RhomboidGrid:
    """Tessellation of a bounding box into roughly side_km by side_km cells.

    Latitude bands all have the angular height that spans ``side_km`` along a
    meridian; the top band is truncated at the box edge.  Within a band, cell
    widths span ``side_km`` along the band's central parallel, so bands nearer
    the pole hold fewer, angularly wider cells.  Cells are half-open (south and
    west edges included), which makes them non-overlapping and lets every point
    of the half-open box resolve to exactly one cell id.  Cell ids run west to
    east within a band, bands run south to north.
    """

    bbox: BoundingBox
    side_km: float
    band_height_deg: float
    band_lat_edges: np.ndarray  # length n_bands + 1, last entry == bbox.lat_max
    lon_step_deg: np.ndarray  # per-band cell width in degrees
    cells_per_band: np.ndarray
    band_offset: np.ndarray  # length n_bands + 1, cumulative cell-id starts

    @property
    def n_bands(self) -> int:
        return len(self.cells_per_band)

    @property
    def n_cells(self) -> int:
        return int(self.band_offset[-1])

    def locate(self, p: GeoPoint) -> int | None:
        """Cell id containing ``p``, or None if outside the box."""
        if not self.bbox.contains(p):
            return None
        band = int((p.lat - self.bbox.lat_min) / self.band_height_deg)
        band = min(band, self.n_bands - 1)
        col = int((p.lon - self.bbox.lon_min) / float(self.lon_step_deg[band]))
        col = min(col, int(self.cells_per_band[band]) - 1)
        return int(self.band_offset[band]) + col

    def locate_arrays(self, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
        """Vectorized ``locate``; -1 marks points outside the box."""
        lats = np.asarray(lats, dtype=np.float64)
        lons = np.asarray(lons, dtype=np.float64)
        inside = (
            (lats >= self.bbox.lat_min)
            & (lats < self.bbox.lat_max)
            & (lons >= self.bbox.lon_min)
            & (lons < self.bbox.lon_max)
        )
        band = ((lats - self.bbox.lat_min) / self.band_height_deg).astype(np.int64)
        np.clip(band, 0, self.n_bands - 1, out=band)
        col = ((lons - self.bbox.lon_min) / self.lon_step_deg[band]).astype(np.int64)
        np.clip(col, 0, None, out=col)
        col = np.minimum(col, self.cells_per_band[band] - 1)
        out = self.band_offset[band] + col
        out[~inside] = -1
        return out

    def cell_band(self, cell: int) -> int:
        if not 0 <= cell < self.n_cells:
            raise ValueError(f"cell id {cell} outside [0, {self.n_cells})")
        return int(np.searchsorted(self.band_offset, cell, side="right")) - 1

    def cell_bounds(self, cell: int) -> tuple[float, float, float, float]:
        """(lat_min, lat_max, lon_min, lon_max) of a cell, half-open like the box."""
        band = self.cell_band(cell)
        col = cell - int(self.band_offset[band])
        lat_lo = float(self.band_lat_edges[band])
        lat_hi = float(self.band_lat_edges[band + 1])
        step = float(self.lon_step_deg[band])
        lon_lo = self.bbox.lon_min + col * step
        lon_hi = min(lon_lo + step, self.bbox.lon_max)
        return lat_lo, lat_hi, lon_lo, lon_hi

    def cell_center(self, cell: int) -> GeoPoint:
        lat_lo, lat_hi, lon_lo, lon_hi = self.cell_bounds(cell)
        return GeoPoint((lat_lo + lat_hi) / 2.0, (lon_lo + lon_hi) / 2.0)


def build_grid(bbox: BoundingBox, side_km: float = 70.0) -> RhomboidGrid:
    """Build the rhomboid tessellation of ``bbox`` with ``side_km`` cells.

    Band and per-band cell counts are rounded up, so edge cells may be
    truncated by the box boundary.  Deterministic in its inputs.
    """
    if side_km <= 0:
        raise ValueError("side_km must be positive")
    height_deg = math.degrees(side_km / EARTH_RADIUS_KM)
    lat_span = bbox.lat_max - bbox.lat_min
    # tiny slack so an exact multiple of the band height does not gain a band
    n_bands = max(1, math.ceil(lat_span / height_deg - 1e-12))
    edges = bbox.lat_min + height_deg * np.arange(n_bands + 1, dtype=np.float64)
    edges = np.minimum(edges, bbox.lat_max)
    centers = (edges[:-1] + edges[1:]) / 2.0
    # cell width measured along the band's central parallel
    steps = np.degrees(side_km / (EARTH_RADIUS_KM * np.cos(np.radians(centers))))
    lon_span = bbox.lon_max - bbox.lon_min
    counts = np.maximum(1, np.ceil(lon_span / steps - 1e-12)).astype(np.int64)
    offsets = np.concatenate(([0], np.cumsum(counts)))
    return RhomboidGrid(
        bbox=bbox,
        side_km=side_km,
        band_height_deg=height_deg,
        band_lat_edges=edges,
        lon_step_deg=steps,
        cells_per_band=counts,
        band_offset=offsets,
    )


def latlon_arrays(points: Sequence[GeoPoint]) -> tuple[np.ndarray, np.ndarray]:
    """Split a point sequence into float64 latitude and longitude arrays."""
    lats = np.fromiter((p.lat for p in points), dtype=np.float64, count=len(points))
    lons = np.fromiter((p.lon for p in points), dtype=np.float64, count=len(points))
    return lats, lons


def cell_populations(grid: RhomboidGrid, points: Sequence[GeoPoint]) -> tuple[np.ndarray, int]:
    """Per-cell point counts and the number of nonempty cells.

    Points outside the grid's box are ignored.
    """
    counts = np.zeros(grid.n_cells, dtype=np.int64)
    if len(points) == 0:
        return counts, 0
    lats, lons = latlon_arrays(points)
    cells = grid.locate_arrays(lats, lons)
    cells = cells[cells >= 0]
    np.add.at(counts, cells, 1)
    return counts, int(np.count_nonzero(counts))


_BRUTE_FORCE_LIMIT = 600


def _diameter_brute(lats: np.ndarray, lons: np.ndarray) -> float:
    best = 0.0
    for i in range(len(lats) - 1):
        d = haversine_km_arrays(lats[i + 1 :], lons[i + 1 :], lats[i], lons[i])
        m = float(d.max())
        if m > best:
            best = m
    return best


def geographic_diameter_arrays(lats: np.ndarray, lons: np.ndarray) -> float:
    """Largest pairwise great-circle distance among the given coordinates."""
    if len(lats) < 2:
        raise ValueError("need at least two points")
    coords = np.unique(np.column_stack((lats, lons)), axis=0)
    if len(coords) == 1:
        return 0.0
    ulats, ulons = coords[:, 0], coords[:, 1]
    if len(coords) > _BRUTE_FORCE_LIMIT:
        # the farthest pair on a sphere also has the largest 3-D chord, and
        # chord extremes lie on the convex hull of the embedded points
        try:
            from scipy.spatial import ConvexHull, QhullError

            phi = np.radians(ulats)
            lam = np.radians(ulons)
            xyz = np.column_stack(
                (np.cos(phi) * np.cos(lam), np.cos(phi) * np.sin(lam), np.sin(phi))
            )
            hull = ConvexHull(xyz)
            ulats = ulats[hull.vertices]
            ulons = ulons[hull.vertices]
        except QhullError:
            pass  # degenerate (coplanar) input, fall back to all pairs
    return _diameter_brute(ulats, ulons)


def geographic_diameter(points: Sequence[GeoPoint]) -> float:
    lats, lons = latlon_arrays(points)
    return geographic_diameter_arrays(lats, lons)


def load_locations(path: str | Path) -> dict[int, GeoPoint]:
    """Read a locations TSV: ``node<TAB>lat<TAB>lon`` per row.

    Blank lines and lines starting with ``#`` are skipped.  A node listed
    twice keeps its last row.
    """
    locations: dict[int, GeoPoint] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'node lat lon', got {raw.rstrip()!r}")
            try:
                node = int(parts[0])
                point = GeoPoint(float(parts[1]), float(parts[2]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            locations[node] = point
    return locations


def write_locations(path: str | Path, locations: dict[int, GeoPoint] | Iterable[tuple[int, GeoPoint]]) -> None:
    """Write a locations TSV with nodes in ascending id order."""
    items = locations.items() if isinstance(locations, dict) else locations
    with open(path, "w", encoding="utf-8") as fh:
        for node, p in sorted(items):
            fh.write(f"{node}\t{p.lat:.10g}\t{p.lon:.10g}\n")
