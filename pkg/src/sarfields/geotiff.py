"""Minimal GeoTIFF reader/writer for the exchange profile this project uses.

Profile: classic little-endian TIFF, stripped, uncompressed, single IFD,
one band of 32-bit IEEE floats or 16-bit unsigned integers (or three float
bands for composites), GDAL nodata tag, ModelPixelScale + ModelTiepoint
anchored at pixel (0, 0), and a GeoKeyDirectory carrying the EPSG code.
Anything outside the profile is rejected with a distinct error. Writing is
deterministic: identical rasters produce byte-identical files.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .raster import GridGeometry, Raster, RasterStack

# TIFF tag ids
TAG_IMAGE_WIDTH = 256
TAG_IMAGE_LENGTH = 257
TAG_BITS_PER_SAMPLE = 258
TAG_COMPRESSION = 259
TAG_PHOTOMETRIC = 262
TAG_STRIP_OFFSETS = 273
TAG_SAMPLES_PER_PIXEL = 277
TAG_ROWS_PER_STRIP = 278
TAG_STRIP_BYTE_COUNTS = 279
TAG_PLANAR_CONFIG = 284
TAG_SAMPLE_FORMAT = 339
TAG_MODEL_PIXEL_SCALE = 33550
TAG_MODEL_TIEPOINT = 33922
TAG_GEO_KEY_DIRECTORY = 34735
TAG_GDAL_NODATA = 42113
TILE_TAGS = (322, 323, 324, 325)

# GeoKey ids
KEY_MODEL_TYPE = 1024
KEY_RASTER_TYPE = 1025
KEY_GEOGRAPHIC_TYPE = 2048
KEY_PROJECTED_CS_TYPE = 3072

TYPE_ASCII = 2
TYPE_SHORT = 3
TYPE_LONG = 4
TYPE_DOUBLE = 12
_TYPE_SIZE = {1: 1, TYPE_ASCII: 1, TYPE_SHORT: 2, TYPE_LONG: 4, 5: 8, TYPE_DOUBLE: 8}
_TYPE_FMT = {1: "B", TYPE_SHORT: "H", TYPE_LONG: "I", TYPE_DOUBLE: "d"}


class GeoTiffError(ValueError):
    """Base class for GeoTIFF profile errors."""


class NotATiffError(GeoTiffError):
    """File is unreadable or not a little-endian classic TIFF."""


class InvalidTiffError(GeoTiffError):
    """Structurally broken TIFF or required profile tag missing."""


class UnsupportedTiffError(GeoTiffError):
    """Valid TIFF using features outside the exchange profile."""


class MultiBandError(GeoTiffError):
    """More than one band where a single band is required."""


class MissingGeoTagsError(GeoTiffError):
    """Missing georeferencing (pixel scale, tiepoint or EPSG geokey)."""


class UnsupportedSampleFormatError(GeoTiffError):
    """Sample type is neither float32 nor uint16."""


def _is_geographic(epsg: int) -> bool:
    # EPSG geographic 2D codes live in the 4000-4999 block; everything else
    # in this project is treated as a projected CS.
    return 4000 <= epsg < 5000


def _geokey_directory(epsg: int) -> list[int]:
    model = 2 if _is_geographic(epsg) else 1
    epsg_key = KEY_GEOGRAPHIC_TYPE if _is_geographic(epsg) else KEY_PROJECTED_CS_TYPE
    keys = [
        (KEY_MODEL_TYPE, 0, 1, model),
        (KEY_RASTER_TYPE, 0, 1, 1),  # PixelIsArea: origin is the outer corner
        (epsg_key, 0, 1, epsg),
    ]
    directory = [1, 1, 0, len(keys)]
    for entry in keys:
        directory.extend(entry)
    return directory


def _pack_values(type_id: int, values) -> bytes:
    if type_id == TYPE_ASCII:
        return values  # already bytes, NUL-terminated
    fmt = _TYPE_FMT[type_id]
    return struct.pack(f"<{len(values)}{fmt}", *values)


def _encode(plane: np.ndarray, dtype: str) -> bytes:
    if dtype == "float32":
        return plane.astype("<f4").tobytes()
    if dtype == "uint16":
        arr = np.asarray(plane, dtype=np.float64)
        if not np.array_equal(arr, np.floor(arr)) or arr.min() < 0 or arr.max() > 65535:
            raise GeoTiffError("uint16 output requires integral values in [0, 65535]")
        return arr.astype("<u2").tobytes()
    raise GeoTiffError(f"unsupported output dtype {dtype!r}")


def write_geotiff(raster: Raster | RasterStack, path, dtype: str = "float32") -> None:
    """Write a raster (or 3-band stack) in the exchange profile.

    Output bytes depend only on the raster content: tags are emitted in
    ascending order with a fixed layout.
    """
    g = raster.geometry
    if isinstance(raster, RasterStack):
        if dtype != "float32":
            raise GeoTiffError("multi-band output supports float32 only")
        spp = raster.band_count
        data = _encode(np.stack(raster.bands, axis=-1), dtype)
    else:
        spp = 1
        data = _encode(raster.values, dtype)

    bits = 32 if dtype == "float32" else 16
    fmt = 3 if dtype == "float32" else 1
    nodata_ascii = str(raster.nodata).encode("ascii") + b"\x00"
    geokeys = _geokey_directory(g.crs_epsg)

    entries = [
        (TAG_IMAGE_WIDTH, TYPE_LONG, 1, [g.width]),
        (TAG_IMAGE_LENGTH, TYPE_LONG, 1, [g.height]),
        (TAG_BITS_PER_SAMPLE, TYPE_SHORT, spp, [bits] * spp),
        (TAG_COMPRESSION, TYPE_SHORT, 1, [1]),
        (TAG_PHOTOMETRIC, TYPE_SHORT, 1, [1]),
        (TAG_STRIP_OFFSETS, TYPE_LONG, 1, None),  # patched once layout is known
        (TAG_SAMPLES_PER_PIXEL, TYPE_SHORT, 1, [spp]),
        (TAG_ROWS_PER_STRIP, TYPE_LONG, 1, [g.height]),
        (TAG_STRIP_BYTE_COUNTS, TYPE_LONG, 1, [len(data)]),
    ]
    if spp > 1:
        entries.append((TAG_PLANAR_CONFIG, TYPE_SHORT, 1, [1]))
    entries.extend(
        [
            (TAG_SAMPLE_FORMAT, TYPE_SHORT, spp, [fmt] * spp),
            (TAG_MODEL_PIXEL_SCALE, TYPE_DOUBLE, 3, [g.pixel_size_x, g.pixel_size_y, 0.0]),
            (
                TAG_MODEL_TIEPOINT,
                TYPE_DOUBLE,
                6,
                [0.0, 0.0, 0.0, g.origin_x, g.origin_y, 0.0],
            ),
            (TAG_GEO_KEY_DIRECTORY, TYPE_SHORT, len(geokeys), geokeys),
            (TAG_GDAL_NODATA, TYPE_ASCII, len(nodata_ascii), nodata_ascii),
        ]
    )

    ifd_offset = 8
    ifd_size = 2 + 12 * len(entries) + 4
    cursor = ifd_offset + ifd_size
    payloads: list[tuple[int, bytes]] = []
    packed: list[tuple[int, int, int, bytes, int | None]] = []
    for tag, type_id, count, values in entries:
        if values is None:
            packed.append((tag, type_id, count, b"", None))
            continue
        raw = _pack_values(type_id, values)
        if len(raw) <= 4:
            packed.append((tag, type_id, count, raw.ljust(4, b"\x00"), None))
        else:
            if cursor % 2:
                cursor += 1
            packed.append((tag, type_id, count, b"", cursor))
            payloads.append((cursor, raw))
            cursor += len(raw)
    if cursor % 2:
        cursor += 1
    data_offset = cursor

    out = bytearray()
    out += struct.pack("<2sHI", b"II", 42, ifd_offset)
    out += struct.pack("<H", len(packed))
    for tag, type_id, count, inline, offset in packed:
        if tag == TAG_STRIP_OFFSETS:
            inline = struct.pack("<I", data_offset)
        value = inline if offset is None else struct.pack("<I", offset)
        out += struct.pack("<HHI", tag, type_id, count) + value
    out += struct.pack("<I", 0)  # no further IFDs
    for offset, raw in payloads:
        if len(out) < offset:
            out += b"\x00" * (offset - len(out))
        out += raw
    if len(out) < data_offset:
        out += b"\x00" * (data_offset - len(out))
    out += data

    Path(path).write_bytes(bytes(out))


def _read_ifd(buf: bytes) -> dict[int, tuple[int, int, tuple]]:
    if len(buf) < 8:
        raise NotATiffError("file too short to be a TIFF")
    order, magic, ifd_offset = struct.unpack_from("<2sHI", buf, 0)
    if order == b"MM":
        raise UnsupportedTiffError("big-endian TIFF is outside the exchange profile")
    if order != b"II" or magic != 42:
        raise NotATiffError("not a classic little-endian TIFF")
    try:
        (n,) = struct.unpack_from("<H", buf, ifd_offset)
    except struct.error as e:
        raise InvalidTiffError(f"broken IFD: {e}") from e
    tags: dict[int, tuple[int, int, tuple]] = {}
    for i in range(n):
        base = ifd_offset + 2 + 12 * i
        try:
            tag, type_id, count = struct.unpack_from("<HHI", buf, base)
        except struct.error as e:
            raise InvalidTiffError(f"broken IFD entry {i}: {e}") from e
        size = _TYPE_SIZE.get(type_id)
        if size is None:
            continue  # unknown value type: tag is ignored
        total = size * count
        if total <= 4:
            raw = buf[base + 8 : base + 8 + total]
        else:
            (offset,) = struct.unpack_from("<I", buf, base + 8)
            raw = buf[offset : offset + total]
        if len(raw) != total:
            raise InvalidTiffError(f"tag {tag} value runs past end of file")
        if type_id == TYPE_ASCII:
            values: tuple = (raw,)
        else:
            values = struct.unpack(f"<{count}{_TYPE_FMT[type_id]}", raw)
        tags[tag] = (type_id, count, values)
    return tags


def _require(tags: dict, tag: int, name: str):
    if tag not in tags:
        raise InvalidTiffError(f"missing required tag {name}({tag})")
    return tags[tag][2]


def _epsg_from_geokeys(shorts: tuple) -> int:
    if len(shorts) < 4:
        raise MissingGeoTagsError("GeoKeyDirectory too short")
    n_keys = shorts[3]
    for i in range(n_keys):
        entry = shorts[4 + 4 * i : 8 + 4 * i]
        if len(entry) < 4:
            raise MissingGeoTagsError("GeoKeyDirectory truncated")
        key_id, location, _count, value = entry
        if key_id in (KEY_GEOGRAPHIC_TYPE, KEY_PROJECTED_CS_TYPE) and location == 0:
            return int(value)
    raise MissingGeoTagsError("GeoKeyDirectory carries no EPSG code key")


def _parse(path) -> tuple[GridGeometry, np.ndarray, float, int]:
    try:
        buf = Path(path).read_bytes()
    except OSError as e:
        raise NotATiffError(f"cannot read {path}: {e}") from e
    tags = _read_ifd(buf)

    for tag in TILE_TAGS:
        if tag in tags:
            raise UnsupportedTiffError("tiled TIFF is outside the exchange profile")
    (compression,) = _require(tags, TAG_COMPRESSION, "Compression")
    if compression != 1:
        raise UnsupportedTiffError(f"compression {compression} is outside the exchange profile")
    (photometric,) = _require(tags, TAG_PHOTOMETRIC, "PhotometricInterpretation")
    if photometric not in (0, 1):
        raise UnsupportedTiffError(f"photometric interpretation {photometric} not supported")

    (width,) = _require(tags, TAG_IMAGE_WIDTH, "ImageWidth")
    (height,) = _require(tags, TAG_IMAGE_LENGTH, "ImageLength")
    spp = tags[TAG_SAMPLES_PER_PIXEL][2][0] if TAG_SAMPLES_PER_PIXEL in tags else 1
    if spp not in (1, 3):
        raise UnsupportedTiffError(f"{spp} samples per pixel is outside the exchange profile")
    if spp > 1:
        planar = tags.get(TAG_PLANAR_CONFIG, (None, None, (1,)))[2][0]
        if planar != 1:
            raise UnsupportedTiffError("planar (non-interleaved) band layout not supported")

    bits = _require(tags, TAG_BITS_PER_SAMPLE, "BitsPerSample")
    formats = tags.get(TAG_SAMPLE_FORMAT, (None, None, tuple([1] * spp)))[2]
    if len(set(bits)) != 1 or len(set(formats)) != 1:
        raise UnsupportedSampleFormatError("mixed per-band sample types not supported")
    combo = (bits[0], formats[0])
    if combo == (32, 3):
        sample_dtype = "<f4"
    elif combo == (16, 1):
        sample_dtype = "<u2"
    else:
        raise UnsupportedSampleFormatError(
            f"sample type bits={bits[0]} format={formats[0]} not supported "
            "(expected float32 or unsigned 16-bit)"
        )

    offsets = _require(tags, TAG_STRIP_OFFSETS, "StripOffsets")
    counts = _require(tags, TAG_STRIP_BYTE_COUNTS, "StripByteCounts")
    _require(tags, TAG_ROWS_PER_STRIP, "RowsPerStrip")
    if len(offsets) != len(counts):
        raise InvalidTiffError("StripOffsets and StripByteCounts disagree")
    data = b"".join(buf[o : o + c] for o, c in zip(offsets, counts))
    expected = width * height * spp * (4 if sample_dtype == "<f4" else 2)
    if len(data) != expected:
        raise InvalidTiffError(f"strip data holds {len(data)} bytes, expected {expected}")

    if TAG_MODEL_PIXEL_SCALE not in tags or TAG_MODEL_TIEPOINT not in tags:
        raise MissingGeoTagsError("missing georeferencing (ModelPixelScale/ModelTiepoint)")
    if TAG_GEO_KEY_DIRECTORY not in tags:
        raise MissingGeoTagsError("missing georeferencing (GeoKeyDirectory)")
    scale = tags[TAG_MODEL_PIXEL_SCALE][2]
    tie = tags[TAG_MODEL_TIEPOINT][2]
    if len(scale) < 2 or scale[0] <= 0 or scale[1] <= 0:
        raise MissingGeoTagsError("ModelPixelScale must carry positive x and y sizes")
    if len(tie) < 6:
        raise MissingGeoTagsError("ModelTiepoint must carry 6 values")
    if tie[0] != 0 or tie[1] != 0 or tie[2] != 0:
        raise UnsupportedTiffError("tiepoint not anchored at raster position (0, 0, 0)")
    epsg = _epsg_from_geokeys(tags[TAG_GEO_KEY_DIRECTORY][2])

    (nodata_raw,) = _require(tags, TAG_GDAL_NODATA, "GDAL_NODATA")
    try:
        nodata = float(nodata_raw.split(b"\x00", 1)[0].decode("ascii").strip())
    except (UnicodeDecodeError, ValueError) as e:
        raise InvalidTiffError(f"unparseable GDAL_NODATA value {nodata_raw!r}") from e

    geometry = GridGeometry(
        width=int(width),
        height=int(height),
        origin_x=float(tie[3]),
        origin_y=float(tie[4]),
        pixel_size_x=float(scale[0]),
        pixel_size_y=float(scale[1]),
        crs_epsg=epsg,
    )
    values = np.frombuffer(data, dtype=sample_dtype).astype(np.float32)
    if spp > 1:
        values = values.reshape(height, width, spp)
    else:
        values = values.reshape(height, width)
    return geometry, values, nodata, spp


def read_geotiff(path) -> Raster:
    """Read a single-band profile GeoTIFF; multi-band files are rejected."""
    geometry, values, nodata, spp = _parse(path)
    if spp != 1:
        raise MultiBandError(f"expected a single band, file has {spp}")
    return Raster(geometry, values, nodata)


def read_geotiff_stack(path) -> RasterStack:
    """Read a profile GeoTIFF with one or three interleaved bands."""
    geometry, values, nodata, spp = _parse(path)
    if spp == 1:
        return RasterStack(geometry, [values], nodata)
    bands = [values[:, :, i].copy() for i in range(spp)]
    return RasterStack(geometry, bands, nodata)
