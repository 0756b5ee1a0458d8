"""Vector geometry: polygons, field parcels, GeoJSON parsing and AOI validation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

Point = tuple[float, float]
Ring = list[Point]
Bbox = tuple[float, float, float, float]  # (min_x, min_y, max_x, max_y)


class VectorError(ValueError):
    """Base class for vector-domain errors."""


class MalformedGeoJSONError(VectorError):
    """Document is not parseable GeoJSON."""


class NotSinglePolygonError(VectorError):
    """Document contains more than one geometry."""


class GeometryTypeError(VectorError):
    """Geometry is not a polygon."""


class UnclosedRingError(VectorError):
    """A ring's first and last vertices differ."""


class DegenerateRingError(VectorError):
    """A ring has too few vertices or repeated consecutive vertices."""


class OversizedAOIError(VectorError):
    """AOI bounding box exceeds the allowed span."""


def _validate_ring(ring: Ring, what: str) -> Ring:
    if len(ring) < 4:
        raise DegenerateRingError(f"{what} has {len(ring)} vertices; a closed ring needs at least 4")
    if ring[0] != ring[-1]:
        raise UnclosedRingError(f"{what} is not closed: first vertex {ring[0]} != last vertex {ring[-1]}")
    for a, b in zip(ring, ring[1:]):
        if a == b:
            raise DegenerateRingError(f"{what} repeats consecutive vertex {a}")
    return [(float(x), float(y)) for x, y in ring]


def point_in_ring(x: float, y: float, ring: Ring) -> bool:
    """Even-odd test: counts edge crossings strictly to the right of (x, y).

    Edges are half-open in y (min(y1,y2) <= y < max(y1,y2)) so shared ring
    vertices are counted once; a point exactly on a crossing is not counted
    as having that crossing to its right.
    """
    inside = False
    for (x1, y1), (x2, y2) in zip(ring, ring[1:]):
        if (y1 <= y < y2) or (y2 <= y < y1):
            t = (y - y1) / (y2 - y1)
            if x1 + t * (x2 - x1) > x:
                inside = not inside
    return inside


def point_in_polygon(x: float, y: float, exterior: Ring, holes: list[Ring]) -> bool:
    """Even-odd membership over all rings; holes subtract."""
    inside = point_in_ring(x, y, exterior)
    for hole in holes:
        if point_in_ring(x, y, hole):
            inside = not inside
    return inside


@dataclass(frozen=True)
class Polygon:
    """Closed polygon with optional holes.

    Rings are closed (first == last), have at least 4 vertices and no
    repeated consecutive vertices. Every hole vertex must lie inside the
    exterior ring. Coordinates are interpreted in whatever CRS the caller
    works in; GeoJSON documents carry WGS84 lon/lat.
    """

    exterior: Ring
    holes: list[Ring] = field(default_factory=list)

    def __post_init__(self):
        object.__setattr__(self, "exterior", _validate_ring(self.exterior, "exterior ring"))
        validated = []
        for i, hole in enumerate(self.holes):
            hole = _validate_ring(hole, f"hole {i}")
            for x, y in hole[:-1]:
                if not point_in_ring(x, y, self.exterior):
                    raise DegenerateRingError(
                        f"hole {i} vertex ({x}, {y}) lies outside the exterior ring"
                    )
            validated.append(hole)
        object.__setattr__(self, "holes", validated)

    def bbox(self) -> Bbox:
        xs = [p[0] for p in self.exterior]
        ys = [p[1] for p in self.exterior]
        return (min(xs), min(ys), max(xs), max(ys))

    def rings(self) -> list[Ring]:
        return [self.exterior, *self.holes]

    def to_geojson(self) -> dict:
        return {
            "type": "Polygon",
            "coordinates": [[list(p) for p in ring] for ring in self.rings()],
        }


@dataclass(frozen=True)
class FieldParcel:
    """One LPIS parcel: farmer-declared field polygon with its crop code."""

    parcel_id: str
    crop_code: str
    geometry: Polygon
    applicant_id: str | None = None

    def __post_init__(self):
        if not self.parcel_id:
            raise VectorError("parcel_id must be non-empty")


def _geometry_from_document(doc) -> dict:
    if not isinstance(doc, dict) or "type" not in doc:
        raise MalformedGeoJSONError("document is not a GeoJSON object")
    kind = doc["type"]
    if kind == "FeatureCollection":
        features = doc.get("features")
        if not isinstance(features, list) or not features:
            raise MalformedGeoJSONError("feature collection has no features")
        if len(features) > 1:
            raise NotSinglePolygonError(f"expected a single polygon, got {len(features)} features")
        return _geometry_from_document(features[0])
    if kind == "Feature":
        geometry = doc.get("geometry")
        if not isinstance(geometry, dict):
            raise MalformedGeoJSONError("feature has no geometry")
        return _geometry_from_document(geometry)
    return doc


def parse_geojson_polygon(text: str) -> Polygon:
    """Parse a GeoJSON document that holds exactly one polygon.

    Accepts a bare Polygon geometry, a single Feature, or a
    FeatureCollection with exactly one feature.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedGeoJSONError(f"invalid JSON: {e}") from e
    geometry = _geometry_from_document(doc)
    kind = geometry.get("type")
    if kind == "MultiPolygon":
        raise NotSinglePolygonError("MultiPolygon is not a single polygon")
    if kind != "Polygon":
        raise GeometryTypeError(f"geometry type {kind!r} is not Polygon")
    coords = geometry.get("coordinates")
    if not isinstance(coords, list) or not coords:
        raise MalformedGeoJSONError("polygon has no coordinate rings")
    try:
        rings = [[(float(x), float(y)) for x, y in ring] for ring in coords]
    except (TypeError, ValueError) as e:
        raise MalformedGeoJSONError(f"invalid coordinates: {e}") from e
    return Polygon(exterior=rings[0], holes=rings[1:])


# AOI requests are limited to one degree of longitude and latitude (closed
# bound); the check is on the bounding box, not the polygon area.
MAX_AOI_SPAN_DEG = 1.0


def validate_aoi(polygon: Polygon) -> None:
    min_x, min_y, max_x, max_y = polygon.bbox()
    width = max_x - min_x
    height = max_y - min_y
    if width > MAX_AOI_SPAN_DEG or height > MAX_AOI_SPAN_DEG:
        raise OversizedAOIError(
            f"AOI bounding box spans {width:.4f} deg longitude x {height:.4f} deg latitude; "
            f"the limit is {MAX_AOI_SPAN_DEG} deg in each direction"
        )


def bbox_intersects(a: Bbox, b: Bbox) -> bool:
    return a[0] <= b[2] and a[2] >= b[0] and a[1] <= b[3] and a[3] >= b[1]


def clip_parcels_bbox(parcels: list[FieldParcel], bbox: Bbox) -> list[FieldParcel]:
    """Keep parcels whose bounding box intersects bbox.

    Geometries are not cut: the parcel layer is used as an overlay, and
    cutting would falsify field areas.
    """
    return [p for p in parcels if bbox_intersects(p.geometry.bbox(), bbox)]


def ring_signed_area(ring: Ring) -> float:
    """Shoelace signed area; positive for counterclockwise rings."""
    area = 0.0
    for (x1, y1), (x2, y2) in zip(ring, ring[1:]):
        area += x1 * y2 - x2 * y1
    return area / 2.0
