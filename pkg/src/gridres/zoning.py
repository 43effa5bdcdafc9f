"""Weather-zone construction and point-to-zone assignment.

The service territory is split into one zone per weather station of a given
capability: a point belongs to the station it is nearest to (a Voronoi
tessellation clipped to the territory boundary). With at most a dozen
stations the cells are built by successive half-plane clipping, which is
O(n^2) but numerically boring.

All geometry runs on an equirectangular projection about the boundary
centroid: x = (lon - lon0) * cos(lat0), y = lat - lat0, in degrees. At the
~50 km scale of a metro service territory the bisector displacement versus
great-circle distance is far below the station spacing, and the projection
keeps every operation linear.

Also hosts the outage-density grid used for heatmap-style summaries.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .ingest import Station

HAZARD_WIND = "wind"
HAZARD_PRECIPITATION = "precipitation"
HAZARD_CLASSES = (HAZARD_WIND, HAZARD_PRECIPITATION)

# two points closer than this (projected degrees) are the same site
COINCIDENT_TOL = 1e-12
# assign_zone distance tie tolerance, projected degrees
TIE_TOL = 1e-12


@dataclass(frozen=True)
class Projection:
    """Equirectangular local projection about (lon0, lat0)."""
    lon0: float
    lat0: float
    cos_lat0: float

    def to_plane(self, lon: float, lat: float) -> tuple[float, float]:
        return (lon - self.lon0) * self.cos_lat0, lat - self.lat0

    def to_lonlat(self, x: float, y: float) -> tuple[float, float]:
        return x / self.cos_lat0 + self.lon0, y + self.lat0


@dataclass(frozen=True)
class WeatherZone:
    """One Voronoi cell. polygon is a closed counterclockwise
    (longitude, latitude) ring: first vertex == last vertex."""
    zone_id: str
    station_id: str
    polygon: tuple[tuple[float, float], ...]
    hazard_class: str


@dataclass(frozen=True)
class ZonePartition:
    hazard_class: str
    zones: tuple[WeatherZone, ...]
    boundary: tuple[tuple[float, float], ...]
    stations: tuple[Station, ...]
    projection: Projection
    # projected station coordinates, aligned with zones
    sites: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class DensityGrid:
    bbox: tuple[float, float, float, float]
    cell_size: float
    counts: np.ndarray  # row-major, row 0 along min_lat


# ---------------------------------------------------------------------------
# Polygon primitives
# ---------------------------------------------------------------------------

def signed_area(ring: list[tuple[float, float]]) -> float:
    """Shoelace signed area; accepts open or closed rings."""
    total = 0.0
    n = len(ring)
    for i in range(n):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % n]
        total += x0 * y1 - x1 * y0
    return 0.5 * total


def polygon_centroid(ring: list[tuple[float, float]]) -> tuple[float, float]:
    """Area centroid; the ring must enclose nonzero area."""
    area = signed_area(ring)
    if abs(area) < 1e-15:
        raise ValidationError("boundary polygon has zero area")
    cx = cy = 0.0
    n = len(ring)
    for i in range(n):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % n]
        cross = x0 * y1 - x1 * y0
        cx += (x0 + x1) * cross
        cy += (y0 + y1) * cross
    return cx / (6.0 * area), cy / (6.0 * area)


def point_in_ring(ring: list[tuple[float, float]], x: float, y: float) -> bool:
    """Ray-casting point-in-polygon; accepts open or closed rings."""
    inside = False
    n = len(ring)
    for i in range(n):
        x0, y0 = ring[i]
        x1, y1 = ring[(i + 1) % n]
        if (y0 > y) != (y1 > y):
            t = (y - y0) / (y1 - y0)
            if x < x0 + t * (x1 - x0):
                inside = not inside
    return inside


def _open_ring(ring: list[tuple[float, float]]) -> list[tuple[float, float]]:
    if len(ring) >= 2 and ring[0] == ring[-1]:
        return list(ring[:-1])
    return list(ring)


def _close_ccw(ring: list[tuple[float, float]]) -> tuple[tuple[float, float], ...]:
    ring = _open_ring(ring)
    if signed_area(ring) < 0.0:
        ring.reverse()
    return tuple(ring) + (ring[0],)


def _clip_halfplane(
    poly: list[tuple[float, float]], a: float, b: float, c: float,
) -> list[tuple[float, float]]:
    """Clip an open convex ring to the half-plane a*x + b*y <= c."""
    out: list[tuple[float, float]] = []
    n = len(poly)
    for i in range(n):
        px, py = poly[i]
        qx, qy = poly[(i + 1) % n]
        p_val = a * px + b * py - c
        q_val = a * qx + b * qy - c
        if p_val <= 0.0:
            out.append((px, py))
            if q_val > 0.0:
                t = p_val / (p_val - q_val)
                out.append((px + t * (qx - px), py + t * (qy - py)))
        elif q_val <= 0.0:
            t = p_val / (p_val - q_val)
            out.append((px + t * (qx - px), py + t * (qy - py)))
    # drop near-duplicate consecutive vertices introduced by clipping
    cleaned: list[tuple[float, float]] = []
    for pt in out:
        ref = cleaned[-1] if cleaned else (out[-1] if out else pt)
        if cleaned and abs(pt[0] - cleaned[-1][0]) < 1e-14 \
                and abs(pt[1] - cleaned[-1][1]) < 1e-14:
            continue
        cleaned.append(pt)
    if len(cleaned) >= 2 and abs(cleaned[0][0] - cleaned[-1][0]) < 1e-14 \
            and abs(cleaned[0][1] - cleaned[-1][1]) < 1e-14:
        cleaned.pop()
    return cleaned


# ---------------------------------------------------------------------------
# Partition construction
# ---------------------------------------------------------------------------

def build_partition(
    stations: list[Station],
    hazard_class: str,
    boundary: list[tuple[float, float]],
) -> ZonePartition:
    """Build the Voronoi partition of `boundary` for one station capability.

    Zone order (and therefore the index in zone_id "<class>:<index>")
    follows the input station order.
    """
    if hazard_class not in HAZARD_CLASSES:
        raise ValidationError(f"unknown hazard class {hazard_class!r}")
    qualifying = [s for s in stations if hazard_class in s.capabilities]
    if not qualifying:
        raise ValidationError(f"no station has capability {hazard_class!r}")

    boundary_open = _open_ring(list(boundary))
    if len(boundary_open) < 3:
        raise ValidationError("boundary polygon needs at least 3 vertices")
    lon0, lat0 = polygon_centroid(boundary_open)
    proj = Projection(lon0, lat0, math.cos(math.radians(lat0)))

    bnd = [proj.to_plane(lon, lat) for lon, lat in boundary_open]
    if signed_area(bnd) < 0.0:
        bnd.reverse()
    sites = [proj.to_plane(s.longitude, s.latitude) for s in qualifying]

    for i in range(len(sites)):
        for j in range(i + 1, len(sites)):
            dx = sites[i][0] - sites[j][0]
            dy = sites[i][1] - sites[j][1]
            if math.sqrt(dx * dx + dy * dy) < COINCIDENT_TOL:
                raise ValidationError(
                    f"stations {qualifying[i].station_id!r} and "
                    f"{qualifying[j].station_id!r} coincide; Voronoi bisector "
                    f"is degenerate")
    for s, (x, y) in zip(qualifying, sites):
        if not point_in_ring(bnd, x, y):
            raise ValidationError(
                f"station {s.station_id!r} lies outside the service boundary")

    zones: list[WeatherZone] = []
    for i, (six, siy) in enumerate(sites):
        cell = list(bnd)
        for j, (sjx, sjy) in enumerate(sites):
            if j == i:
                continue
            # keep |p - s_i|^2 <= |p - s_j|^2, rewritten as a linear half-plane
            a = 2.0 * (sjx - six)
            b = 2.0 * (sjy - siy)
            c = sjx * sjx + sjy * sjy - six * six - siy * siy
            cell = _clip_halfplane(cell, a, b, c)
            if len(cell) < 3:
                raise ValidationError(
                    f"station {qualifying[i].station_id!r} produced an empty "
                    f"Voronoi cell")
        ring = [proj.to_lonlat(x, y) for x, y in cell]
        zones.append(WeatherZone(
            zone_id=f"{hazard_class}:{i}",
            station_id=qualifying[i].station_id,
            polygon=_close_ccw(ring),
            hazard_class=hazard_class,
        ))

    return ZonePartition(
        hazard_class=hazard_class,
        zones=tuple(zones),
        boundary=_close_ccw(boundary_open),
        stations=tuple(qualifying),
        projection=proj,
        sites=tuple(sites),
    )


# ---------------------------------------------------------------------------
# Assignment
# ---------------------------------------------------------------------------

def assign_index(partition: ZonePartition, lon: float, lat: float) -> int:
    """Index of the nearest station; ties go to the lowest index."""
    x, y = partition.projection.to_plane(lon, lat)
    d_min = math.inf
    for sx, sy in partition.sites:
        dx, dy = x - sx, y - sy
        d = math.sqrt(dx * dx + dy * dy)
        if d < d_min:
            d_min = d
    for i, (sx, sy) in enumerate(partition.sites):
        dx, dy = x - sx, y - sy
        if math.sqrt(dx * dx + dy * dy) <= d_min + TIE_TOL:
            return i
    raise AssertionError("unreachable: no station within tolerance of minimum")


def assign_zone(partition: ZonePartition, point: tuple[float, float]) -> str:
    zone_id, _ = assign_zone_flagged(partition, point)
    return zone_id


def assign_zone_flagged(
    partition: ZonePartition, point: tuple[float, float],
) -> tuple[str, bool]:
    """Like assign_zone, also reporting whether the point lies inside the
    service boundary. Outside points still get their nearest station's zone."""
    lon, lat = point
    idx = assign_index(partition, lon, lat)
    x, y = partition.projection.to_plane(lon, lat)
    inside = point_in_ring([partition.projection.to_plane(a, b)
                            for a, b in _open_ring(list(partition.boundary))], x, y)
    return partition.zones[idx].zone_id, inside


def assign_many(
    partition: ZonePartition, lons: np.ndarray, lats: np.ndarray,
) -> np.ndarray:
    """Vectorized assign_index over point arrays; returns zone indices."""
    proj = partition.projection
    x = (np.asarray(lons, dtype=float) - proj.lon0) * proj.cos_lat0
    y = np.asarray(lats, dtype=float) - proj.lat0
    sites = np.asarray(partition.sites, dtype=float)
    dx = x[:, None] - sites[None, :, 0]
    dy = y[:, None] - sites[None, :, 1]
    d = np.sqrt(dx * dx + dy * dy)
    d_min = d.min(axis=1)
    # first index within tolerance of the minimum = lowest-index tie-break
    return np.argmax(d <= (d_min + TIE_TOL)[:, None], axis=1)


# ---------------------------------------------------------------------------
# Density grid
# ---------------------------------------------------------------------------

def density_grid(
    points: list[tuple[float, float]],
    bbox: tuple[float, float, float, float],
    cell_size: float,
) -> DensityGrid:
    """Count points per cell on a regular lon/lat grid over a closed bbox.

    Cells are half-open on their low edge side: a point on an interior
    shared edge counts toward the larger cell index. Points on the bbox
    maximum edges fold into the last cell so the closed bbox loses nothing.
    """
    min_lon, min_lat, max_lon, max_lat = bbox
    if cell_size <= 0.0:
        raise ValidationError("cell_size must be positive")
    if max_lon <= min_lon or max_lat <= min_lat:
        raise ValidationError("bbox must satisfy min < max on both axes")
    ncols = max(1, math.ceil((max_lon - min_lon) / cell_size - 1e-12))
    nrows = max(1, math.ceil((max_lat - min_lat) / cell_size - 1e-12))

    counts = np.zeros((nrows, ncols), dtype=np.int64)
    if points:
        pts = np.asarray(points, dtype=float)
        lons, lats = pts[:, 0], pts[:, 1]
        inside = ((lons >= min_lon) & (lons <= max_lon)
                  & (lats >= min_lat) & (lats <= max_lat))
        cols = np.floor((lons[inside] - min_lon) / cell_size).astype(np.int64)
        rows = np.floor((lats[inside] - min_lat) / cell_size).astype(np.int64)
        np.clip(cols, 0, ncols - 1, out=cols)
        np.clip(rows, 0, nrows - 1, out=rows)
        flat = np.bincount(rows * ncols + cols, minlength=nrows * ncols)
        counts += flat.reshape(nrows, ncols)
    return DensityGrid(bbox=tuple(bbox), cell_size=cell_size, counts=counts)


def density_grid_csv(grid: DensityGrid) -> bytes:
    lines = [",".join(str(int(v)) for v in row) for row in grid.counts]
    return ("\n".join(lines) + "\n").encode("utf-8")


def density_grid_meta_json(grid: DensityGrid) -> str:
    doc = {
        "bbox": list(grid.bbox),
        "cell_size": grid.cell_size,
        "rows": int(grid.counts.shape[0]),
        "cols": int(grid.counts.shape[1]),
        "total": int(grid.counts.sum()),
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# GeoJSON
# ---------------------------------------------------------------------------

def load_boundary_geojson(text: str) -> list[tuple[float, float]]:
    """Extract the first Polygon exterior ring from a GeoJSON document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"boundary GeoJSON is not valid JSON: {exc}") from exc

    def first_polygon(node: dict) -> list | None:
        kind = node.get("type")
        if kind == "FeatureCollection":
            for feature in node.get("features", []):
                ring = first_polygon(feature)
                if ring is not None:
                    return ring
            return None
        if kind == "Feature":
            geom = node.get("geometry")
            return first_polygon(geom) if geom else None
        if kind == "Polygon":
            coords = node.get("coordinates")
            return coords[0] if coords else None
        if kind == "MultiPolygon":
            coords = node.get("coordinates")
            return coords[0][0] if coords and coords[0] else None
        return None

    ring = first_polygon(doc)
    if ring is None:
        raise ValidationError("boundary GeoJSON contains no Polygon geometry")
    if len(ring) < 4:
        raise ValidationError("boundary ring needs at least 3 distinct vertices")
    return [(float(lon), float(lat)) for lon, lat in ring]


def boundary_to_geojson(ring: list[tuple[float, float]]) -> str:
    closed = list(_close_ccw(list(ring)))
    doc = {
        "type": "Feature",
        "properties": {"role": "service_boundary"},
        "geometry": {
            "type": "Polygon",
            "coordinates": [[[lon, lat] for lon, lat in closed]],
        },
    }
    return json.dumps(doc, sort_keys=True) + "\n"


def partition_to_geojson(partition: ZonePartition) -> str:
    features = []
    for zone in partition.zones:
        features.append({
            "type": "Feature",
            "properties": {
                "zone_id": zone.zone_id,
                "station_id": zone.station_id,
                "hazard_class": zone.hazard_class,
            },
            "geometry": {
                "type": "Polygon",
                "coordinates": [[[lon, lat] for lon, lat in zone.polygon]],
            },
        })
    doc = {"type": "FeatureCollection", "features": features}
    return json.dumps(doc, sort_keys=True) + "\n"
