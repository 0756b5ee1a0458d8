"""Raster substrate: grid geometry, float32 rasters, masks, and grid-domain operations.

All grids are axis-aligned and north-up: origin is the outer top-left corner
of pixel (0, 0), pixel sizes are stored positive, and rows advance southward.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .vector import Bbox, Polygon

NODATA_DEFAULT = -9999.0


class RasterError(ValueError):
    """Base class for raster-domain errors."""


class GeometryMismatchError(RasterError):
    """Operands do not share the same grid geometry."""


class EmptyIntersectionError(RasterError):
    """Requested bbox does not intersect the raster extent."""


class CRSMismatchError(RasterError):
    """Operands are referenced to different CRSs."""


class AnisotropicPixelsError(RasterError):
    """Operation requires square pixels."""


@dataclass(frozen=True)
class GridGeometry:
    """North-up affine georeferencing for a width x height pixel grid.

    Pixel (col, row) center maps to
    (origin_x + (col + 0.5) * pixel_size_x, origin_y - (row + 0.5) * pixel_size_y).
    """

    width: int
    height: int
    origin_x: float
    origin_y: float
    pixel_size_x: float
    pixel_size_y: float
    crs_epsg: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise RasterError(f"grid must be non-empty, got {self.width}x{self.height}")
        if self.pixel_size_x <= 0 or self.pixel_size_y <= 0:
            raise RasterError("pixel sizes must be strictly positive")

    @property
    def extent(self) -> Bbox:
        return (
            self.origin_x,
            self.origin_y - self.height * self.pixel_size_y,
            self.origin_x + self.width * self.pixel_size_x,
            self.origin_y,
        )

    def pixel_center(self, col: float, row: float) -> tuple[float, float]:
        return (
            self.origin_x + (col + 0.5) * self.pixel_size_x,
            self.origin_y - (row + 0.5) * self.pixel_size_y,
        )

    def map_to_pixel(self, x: float, y: float) -> tuple[float, float]:
        """Fractional (col, row) in pixel-center coordinates: integers at centers."""
        return (
            (x - self.origin_x) / self.pixel_size_x - 0.5,
            (self.origin_y - y) / self.pixel_size_y - 0.5,
        )

    def col_centers(self) -> np.ndarray:
        return self.origin_x + (np.arange(self.width) + 0.5) * self.pixel_size_x

    def row_centers(self) -> np.ndarray:
        return self.origin_y - (np.arange(self.height) + 0.5) * self.pixel_size_y


def _as_plane(values, geometry: GridGeometry) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float32)
    if arr.size != geometry.width * geometry.height:
        raise RasterError(
            f"value count {arr.size} does not match grid {geometry.width}x{geometry.height}"
        )
    return arr.reshape(geometry.height, geometry.width)


def _check_plane(arr: np.ndarray, nodata: float) -> None:
    bad = ~np.isfinite(arr)
    if bad.any():
        raise RasterError("raster values must be finite; nodata cells carry the sentinel value")
    del bad


@dataclass
class Raster:
    """Single-band float32 raster with a nodata sentinel."""

    geometry: GridGeometry
    values: np.ndarray
    nodata: float = NODATA_DEFAULT

    def __post_init__(self):
        self.values = _as_plane(self.values, self.geometry)
        self.nodata = float(self.nodata)
        _check_plane(self.values, self.nodata)

    @classmethod
    def filled(cls, geometry: GridGeometry, value: float, nodata: float = NODATA_DEFAULT) -> "Raster":
        return cls(geometry, np.full((geometry.height, geometry.width), value, np.float32), nodata)

    @property
    def valid(self) -> np.ndarray:
        return self.values != np.float32(self.nodata)

    def copy(self) -> "Raster":
        return Raster(self.geometry, self.values.copy(), self.nodata)

    def equals(self, other: "Raster") -> bool:
        return (
            self.geometry == other.geometry
            and self.nodata == other.nodata
            and np.array_equal(self.values, other.values)
        )


@dataclass
class RasterStack:
    """Multi-band raster sharing one geometry and nodata sentinel (used for composites)."""

    geometry: GridGeometry
    bands: list[np.ndarray]
    nodata: float = NODATA_DEFAULT

    def __post_init__(self):
        if not self.bands:
            raise RasterError("stack needs at least one band")
        self.bands = [_as_plane(b, self.geometry) for b in self.bands]
        self.nodata = float(self.nodata)
        for b in self.bands:
            _check_plane(b, self.nodata)

    @property
    def band_count(self) -> int:
        return len(self.bands)

    def band(self, i: int) -> Raster:
        return Raster(self.geometry, self.bands[i].copy(), self.nodata)


@dataclass
class Mask:
    """Boolean qualifier sharing the geometry of the raster it masks."""

    geometry: GridGeometry
    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits, dtype=bool)
        if arr.size != self.geometry.width * self.geometry.height:
            raise RasterError("mask size does not match its grid")
        self.bits = arr.reshape(self.geometry.height, self.geometry.width)

    def count(self) -> int:
        return int(self.bits.sum())


def _pixel_range(origin: float, size: float, lo: float, hi: float, n: int) -> tuple[int, int]:
    """Half-open pixel index range minimally covering [lo, hi] along one axis."""
    first = math.floor((lo - origin) / size)
    last = math.ceil((hi - origin) / size)
    return max(first, 0), min(last, n)


def subset_bbox(raster: Raster, bbox: Bbox) -> Raster:
    """Minimal pixel-aligned sub-grid covering bbox intersected with the extent.

    Values are copied unmodified; the origin shifts by a whole number of pixels.
    """
    g = raster.geometry
    min_x, min_y, max_x, max_y = bbox
    c0, c1 = _pixel_range(g.origin_x, g.pixel_size_x, min_x, max_x, g.width)
    # rows advance southward: measure from origin_y downward
    r0 = math.floor((g.origin_y - max_y) / g.pixel_size_y)
    r1 = math.ceil((g.origin_y - min_y) / g.pixel_size_y)
    r0, r1 = max(r0, 0), min(r1, g.height)
    if c0 >= c1 or r0 >= r1:
        raise EmptyIntersectionError(f"bbox {bbox} does not intersect raster extent {g.extent}")
    sub = GridGeometry(
        width=c1 - c0,
        height=r1 - r0,
        origin_x=g.origin_x + c0 * g.pixel_size_x,
        origin_y=g.origin_y - r0 * g.pixel_size_y,
        pixel_size_x=g.pixel_size_x,
        pixel_size_y=g.pixel_size_y,
        crs_epsg=g.crs_epsg,
    )
    return Raster(sub, raster.values[r0:r1, c0:c1].copy(), raster.nodata)


def resample_bilinear(raster: Raster, target: GridGeometry) -> Raster:
    """Bilinear interpolation of source pixel centers at target pixel centers.

    A target pixel is nodata when its 2x2 stencil falls outside the source
    extent or touches any nodata cell.
    """
    g = raster.geometry
    if g.crs_epsg != target.crs_epsg:
        raise CRSMismatchError(f"source CRS {g.crs_epsg} != target CRS {target.crs_epsg}")
    xs = target.col_centers()
    ys = target.row_centers()
    f = (xs - g.origin_x) / g.pixel_size_x - 0.5  # fractional source col per target col
    q = (g.origin_y - ys) / g.pixel_size_y - 0.5  # fractional source row per target row
    c0 = np.floor(f).astype(np.int64)
    r0 = np.floor(q).astype(np.int64)
    ok_col = (c0 >= 0) & (c0 + 1 <= g.width - 1)
    ok_row = (r0 >= 0) & (r0 + 1 <= g.height - 1)
    ok = ok_row[:, None] & ok_col[None, :]

    c0c = np.clip(c0, 0, g.width - 2)
    r0c = np.clip(r0, 0, g.height - 2)
    wx = (f - c0)[None, :]
    wy = (q - r0)[:, None]
    v = raster.values.astype(np.float64)
    v00 = v[r0c[:, None], c0c[None, :]]
    v01 = v[r0c[:, None], c0c[None, :] + 1]
    v10 = v[r0c[:, None] + 1, c0c[None, :]]
    v11 = v[r0c[:, None] + 1, c0c[None, :] + 1]
    out = (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11)

    valid = raster.valid
    s00 = valid[r0c[:, None], c0c[None, :]]
    s01 = valid[r0c[:, None], c0c[None, :] + 1]
    s10 = valid[r0c[:, None] + 1, c0c[None, :]]
    s11 = valid[r0c[:, None] + 1, c0c[None, :] + 1]
    ok &= s00 & s01 & s10 & s11

    result = np.where(ok, out, raster.nodata).astype(np.float32)
    return Raster(target, result, raster.nodata)


def rasterize_polygon(polygon: Polygon, grid: GridGeometry) -> Mask:
    """Set pixels whose center lies inside the polygon (even-odd rule, holes subtract).

    Scanline implementation: per pixel row, edge crossings with the row's
    center line are collected over all rings; a center is inside when an odd
    number of crossings lies strictly to its right. The caller is responsible
    for the polygon being in the grid's CRS.
    """
    edges = []
    for ring in polygon.rings():
        pts = np.asarray(ring, dtype=np.float64)
        edges.append((pts[:-1], pts[1:]))
    a = np.concatenate([e[0] for e in edges])
    b = np.concatenate([e[1] for e in edges])

    bits = np.zeros((grid.height, grid.width), dtype=bool)
    xs = grid.col_centers()
    for row, y in enumerate(grid.row_centers()):
        lo = np.minimum(a[:, 1], b[:, 1])
        hi = np.maximum(a[:, 1], b[:, 1])
        hit = (lo <= y) & (y < hi)
        if not hit.any():
            continue
        a1, b1 = a[hit], b[hit]
        t = (y - a1[:, 1]) / (b1[:, 1] - a1[:, 1])
        crossings = np.sort(a1[:, 0] + t * (b1[:, 0] - a1[:, 0]))
        # number of crossings <= x, so crossings strictly right = total - that
        left_or_equal = np.searchsorted(crossings, xs, side="right")
        bits[row] = ((crossings.size - left_or_equal) % 2) == 1
    return Mask(grid, bits)


def disk_offsets(r_px: float) -> np.ndarray:
    """Boolean structuring element of center-to-center Euclidean distance <= r_px."""
    n = int(math.floor(r_px))
    span = np.arange(-n, n + 1)
    dc, dr = np.meshgrid(span, span)
    return (dc * dc + dr * dr) <= r_px * r_px


def erode_disk(mask: Mask, radius: float) -> Mask:
    """Binary erosion by a Euclidean disk of the given radius in map units.

    A pixel survives iff every pixel whose center lies within
    radius / pixel_size (pixel units) of it is set; the area outside the grid
    counts as unset, so the interior also shrinks away from image borders.
    Radius 0 is the identity.
    """
    g = mask.geometry
    if g.pixel_size_x != g.pixel_size_y:
        raise AnisotropicPixelsError(
            f"erosion requires square pixels, got {g.pixel_size_x} x {g.pixel_size_y}"
        )
    if radius < 0:
        raise RasterError("erosion radius must be >= 0")
    r_px = radius / g.pixel_size_x
    if r_px < 1.0:
        return Mask(g, mask.bits.copy())
    structure = disk_offsets(r_px)
    eroded = ndimage.binary_erosion(mask.bits, structure=structure, border_value=0)
    return Mask(g, eroded)
