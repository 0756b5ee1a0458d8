"""ESRI shapefile I/O for parcel layers: polygon type 5 with .dbf character attributes.

Supported subset: 2D polygon shapefiles where every record carries exactly
one exterior ring (clockwise, per the shapefile convention) and any number
of counterclockwise hole rings, plus UTF-8 character fields in the .dbf.
Anything else is rejected loudly. Writing is deterministic (fixed .dbf
update date, layout fully determined by the input).
"""
from __future__ import annotations

import struct
from pathlib import Path

from .vector import FieldParcel, Polygon, Ring, ring_signed_area

SHAPE_TYPE_POLYGON = 5
_DBF_DATE = (100, 1, 1)  # 2000-01-01, fixed so output is reproducible


class ShapefileError(ValueError):
    pass


class ShapeTypeError(ShapefileError):
    pass


class RecordCountMismatchError(ShapefileError):
    pass


class MissingColumnError(ShapefileError):
    pass


def _oriented(ring: Ring, clockwise: bool) -> Ring:
    area = ring_signed_area(ring)
    if area == 0:
        raise ShapefileError("cannot orient a zero-area ring")
    if (area < 0) == clockwise:
        return ring
    return list(reversed(ring))


def _ring_bbox(points) -> tuple[float, float, float, float]:
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    return min(xs), min(ys), max(xs), max(ys)


def _encode_record(number: int, polygon: Polygon) -> bytes:
    rings = [_oriented(polygon.exterior, clockwise=True)]
    rings.extend(_oriented(h, clockwise=False) for h in polygon.holes)
    points = [p for ring in rings for p in ring]
    parts = []
    offset = 0
    for ring in rings:
        parts.append(offset)
        offset += len(ring)
    bbox = _ring_bbox(points)
    content = struct.pack("<i", SHAPE_TYPE_POLYGON)
    content += struct.pack("<4d", *bbox)
    content += struct.pack("<2i", len(parts), len(points))
    content += struct.pack(f"<{len(parts)}i", *parts)
    for x, y in points:
        content += struct.pack("<2d", x, y)
    header = struct.pack(">2i", number, len(content) // 2)
    return header + content


def _main_header(total_bytes: int, bbox: tuple[float, float, float, float]) -> bytes:
    head = struct.pack(">i", 9994)
    head += b"\x00" * 20
    head += struct.pack(">i", total_bytes // 2)
    head += struct.pack("<2i", 1000, SHAPE_TYPE_POLYGON)
    head += struct.pack("<4d", *bbox)
    head += struct.pack("<4d", 0.0, 0.0, 0.0, 0.0)
    return head


def _dbf_field(name: str, length: int) -> bytes:
    raw = name.encode("ascii")
    if len(raw) > 10:
        raise ShapefileError(f"dbf column name {name!r} exceeds 10 characters")
    return raw.ljust(11, b"\x00") + b"C" + b"\x00" * 4 + bytes([length, 0]) + b"\x00" * 14


def _field_width(values: list[str]) -> int:
    width = max([1] + [len(v.encode("utf-8")) for v in values])
    if width > 254:
        raise ShapefileError("dbf character fields are limited to 254 bytes")
    return width


def write_parcels_shapefile(
    parcels: list[FieldParcel],
    shp_path,
    parcel_id_column: str = "parcel_id",
    crop_code_column: str = "crop_code",
    applicant_column: str = "applicant",
) -> None:
    """Write parcels as <base>.shp/.shx/.dbf next to the given .shp path.

    Rings are stored in shapefile orientation (exterior clockwise, holes
    counterclockwise); callers that need roundtrip identity should provide
    geometries already in that orientation.
    """
    shp_path = Path(shp_path)
    shx_path = shp_path.with_suffix(".shx")
    dbf_path = shp_path.with_suffix(".dbf")

    records = [_encode_record(i + 1, p.geometry) for i, p in enumerate(parcels)]
    if parcels:
        boxes = [p.geometry.bbox() for p in parcels]
        bbox = (
            min(b[0] for b in boxes),
            min(b[1] for b in boxes),
            max(b[2] for b in boxes),
            max(b[3] for b in boxes),
        )
    else:
        bbox = (0.0, 0.0, 0.0, 0.0)

    total = 100 + sum(len(r) for r in records)
    with open(shp_path, "wb") as fh:
        fh.write(_main_header(total, bbox))
        for record in records:
            fh.write(record)

    with open(shx_path, "wb") as fh:
        fh.write(_main_header(100 + 8 * len(records), bbox))
        offset = 100
        for record in records:
            fh.write(struct.pack(">2i", offset // 2, (len(record) - 8) // 2))
            offset += len(record)

    columns = [
        (parcel_id_column, [p.parcel_id for p in parcels]),
        (crop_code_column, [p.crop_code for p in parcels]),
        (applicant_column, [p.applicant_id or "" for p in parcels]),
    ]
    widths = [_field_width(values) for _, values in columns]
    header_size = 32 + 32 * len(columns) + 1
    record_size = 1 + sum(widths)
    with open(dbf_path, "wb") as fh:
        fh.write(bytes([0x03, *_DBF_DATE]))
        fh.write(struct.pack("<I", len(parcels)))
        fh.write(struct.pack("<2H", header_size, record_size))
        fh.write(b"\x00" * 20)
        for (name, _), width in zip(columns, widths):
            fh.write(_dbf_field(name, width))
        fh.write(b"\x0d")
        for i in range(len(parcels)):
            fh.write(b" ")
            for (_, values), width in zip(columns, widths):
                fh.write(values[i].encode("utf-8").ljust(width, b" "))
        fh.write(b"\x1a")


def _read_dbf(path) -> tuple[list[str], list[dict[str, str]]]:
    buf = Path(path).read_bytes()
    if len(buf) < 32 or buf[0] not in (0x03, 0x83):
        raise ShapefileError(f"{path} is not a supported dBASE III file")
    (n_records,) = struct.unpack_from("<I", buf, 4)
    header_size, record_size = struct.unpack_from("<2H", buf, 8)
    fields = []
    pos = 32
    while pos < header_size - 1:
        if buf[pos] == 0x0D:
            break
        name = buf[pos : pos + 11].split(b"\x00", 1)[0].decode("ascii")
        ftype = chr(buf[pos + 11])
        length = buf[pos + 16]
        if ftype != "C":
            raise ShapefileError(f"dbf field {name!r} has type {ftype!r}; only character fields are supported")
        fields.append((name, length))
        pos += 32
    records = []
    pos = header_size
    for _ in range(n_records):
        if buf[pos : pos + 1] != b" ":  # deleted or malformed record
            raise ShapefileError("deleted dbf records are not supported")
        cursor = pos + 1
        row = {}
        for name, length in fields:
            row[name] = buf[cursor : cursor + length].decode("utf-8").strip()
            cursor += length
        records.append(row)
        pos += record_size
    return [name for name, _ in fields], records


def _read_shp(path) -> list[Polygon]:
    buf = Path(path).read_bytes()
    if len(buf) < 100 or struct.unpack_from(">i", buf, 0)[0] != 9994:
        raise ShapefileError(f"{path} is not a shapefile")
    (shape_type,) = struct.unpack_from("<i", buf, 32)
    if shape_type != SHAPE_TYPE_POLYGON:
        raise ShapeTypeError(f"shapefile holds shape type {shape_type}, expected polygon (5)")
    polygons = []
    pos = 100
    while pos < len(buf):
        _number, length_words = struct.unpack_from(">2i", buf, pos)
        content = buf[pos + 8 : pos + 8 + 2 * length_words]
        pos += 8 + 2 * length_words
        (record_type,) = struct.unpack_from("<i", content, 0)
        if record_type != SHAPE_TYPE_POLYGON:
            raise ShapeTypeError(f"record shape type {record_type} is not polygon (5)")
        n_parts, n_points = struct.unpack_from("<2i", content, 36)
        parts = list(struct.unpack_from(f"<{n_parts}i", content, 44))
        parts.append(n_points)
        coords = struct.unpack_from(f"<{2 * n_points}d", content, 44 + 4 * n_parts)
        points = [(coords[2 * i], coords[2 * i + 1]) for i in range(n_points)]
        exterior = None
        holes = []
        for start, end in zip(parts, parts[1:]):
            ring = points[start:end]
            area = ring_signed_area(ring)
            if area == 0:
                raise ShapefileError("record contains a zero-area ring")
            if area < 0:  # clockwise: exterior
                if exterior is not None:
                    raise ShapefileError(
                        "record contains multiple exterior rings; multi-part parcels are not supported"
                    )
                exterior = ring
            else:
                holes.append(ring)
        if exterior is None:
            raise ShapefileError("record has no exterior (clockwise) ring")
        polygons.append(Polygon(exterior=exterior, holes=holes))
    return polygons


def read_parcels_shapefile(
    shp_path,
    dbf_path,
    parcel_id_column: str = "parcel_id",
    crop_code_column: str = "crop_code",
    applicant_column: str = "applicant",
) -> list[FieldParcel]:
    """Read a parcel layer; one FieldParcel per record."""
    polygons = _read_shp(shp_path)
    columns, rows = _read_dbf(dbf_path)
    if len(polygons) != len(rows):
        raise RecordCountMismatchError(
            f".shp has {len(polygons)} records but .dbf has {len(rows)}"
        )
    for required in (parcel_id_column, crop_code_column):
        if required not in columns:
            raise MissingColumnError(
                f"dbf lacks required column {required!r}; present: {columns}"
            )
    parcels = []
    for polygon, row in zip(polygons, rows):
        applicant = row.get(applicant_column) or None
        parcels.append(
            FieldParcel(
                parcel_id=row[parcel_id_column],
                crop_code=row[crop_code_column],
                geometry=polygon,
                applicant_id=applicant,
            )
        )
    return parcels
