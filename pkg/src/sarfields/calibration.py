"""Radiometric calibration of digital numbers to sigma nought, and dB conversion."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import Raster


class CalibrationError(ValueError):
    pass


class EmptyLUTError(CalibrationError):
    pass


@dataclass(frozen=True)
class CalibrationLUT:
    """Sparse gain table over (line, pixel) positions, expanded bilinearly.

    `lines` and `pixels` are strictly increasing sample positions; `gains`
    is the (len(lines), len(pixels)) table of positive sigma-nought gains.
    A single line or pixel position means the gain is constant along that
    axis. Queries outside the hull clamp to the nearest node.
    """

    lines: np.ndarray
    pixels: np.ndarray
    gains: np.ndarray

    def __post_init__(self):
        lines = np.asarray(self.lines, dtype=np.float64)
        pixels = np.asarray(self.pixels, dtype=np.float64)
        gains = np.asarray(self.gains, dtype=np.float64)
        if lines.size == 0 or pixels.size == 0:
            raise EmptyLUTError("calibration LUT has no vectors or no points")
        if gains.shape != (lines.size, pixels.size):
            raise CalibrationError(
                f"gain table shape {gains.shape} does not match "
                f"{lines.size} lines x {pixels.size} pixels"
            )
        if lines.size > 1 and not np.all(np.diff(lines) > 0):
            raise CalibrationError("LUT lines must be strictly increasing")
        if pixels.size > 1 and not np.all(np.diff(pixels) > 0):
            raise CalibrationError("LUT pixel positions must be strictly increasing")
        if not np.all(gains > 0):
            raise CalibrationError("all LUT gains must be positive")
        object.__setattr__(self, "lines", lines)
        object.__setattr__(self, "pixels", pixels)
        object.__setattr__(self, "gains", gains)

    @classmethod
    def from_rows(cls, rows) -> "CalibrationLUT":
        """Build from [(line, [(pixel, gain), ...]), ...] as found in scene sidecars."""
        if not rows:
            raise EmptyLUTError("calibration LUT has no vectors")
        lines = [line for line, _ in rows]
        pixel_sets = [[p for p, _ in points] for _, points in rows]
        if any(ps != pixel_sets[0] for ps in pixel_sets[1:]):
            raise CalibrationError("all LUT vectors must share the same pixel positions")
        gains = [[g for _, g in points] for _, points in rows]
        return cls(np.array(lines), np.array(pixel_sets[0]), np.array(gains))

    def expand(self, height: int, width: int) -> np.ndarray:
        """Dense (height, width) gain image for raster rows 0..h-1, cols 0..w-1."""
        rows = np.arange(height, dtype=np.float64)
        cols = np.arange(width, dtype=np.float64)
        if self.lines.size == 1:
            per_row = np.tile(self.gains[0], (height, 1))
        else:
            per_row = np.empty((height, self.pixels.size))
            for j in range(self.pixels.size):
                per_row[:, j] = np.interp(rows, self.lines, self.gains[:, j])
        if self.pixels.size == 1:
            return np.tile(per_row[:, :1], (1, width))
        out = np.empty((height, width))
        for i in range(height):
            out[i] = np.interp(cols, self.pixels, per_row[i])
        return out


def interpolate_gain(lut: CalibrationLUT, col: float, row: float) -> float:
    """Bilinear gain at one (col, row), clamped to the LUT hull."""
    gain_at_row = (
        lut.gains[0]
        if lut.lines.size == 1
        else np.array([np.interp(row, lut.lines, lut.gains[:, j]) for j in range(lut.pixels.size)])
    )
    if lut.pixels.size == 1:
        return float(gain_at_row[0])
    return float(np.interp(col, lut.pixels, gain_at_row))


def calibrate_sigma0(dn: Raster, lut: CalibrationLUT) -> Raster:
    """Sigma nought per pixel: DN^2 / A^2 with A interpolated from the LUT.

    Nodata propagates; non-nodata digital numbers must be >= 0.
    """
    valid = dn.valid
    values = dn.values.astype(np.float64)
    if np.any(values[valid] < 0):
        raise CalibrationError("digital numbers must be >= 0")
    gain = lut.expand(dn.geometry.height, dn.geometry.width)
    sigma0 = (values / gain) ** 2
    out = np.where(valid, sigma0, dn.nodata).astype(np.float32)
    return Raster(dn.geometry, out, dn.nodata)


def to_db(linear: Raster) -> Raster:
    """10*log10 of positive values; zero or negative values become nodata."""
    valid = linear.valid & (linear.values > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        db = 10.0 * np.log10(linear.values.astype(np.float64))
    out = np.where(valid, db, linear.nodata).astype(np.float32)
    return Raster(linear.geometry, out, linear.nodata)


def from_db(db: Raster) -> Raster:
    """Inverse of to_db on non-nodata cells."""
    linear = np.power(10.0, db.values.astype(np.float64) / 10.0)
    out = np.where(db.valid, linear, db.nodata).astype(np.float32)
    return Raster(db.geometry, out, db.nodata)
