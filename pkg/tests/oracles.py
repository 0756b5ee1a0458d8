"""Independent reference implementations used as test oracles.

Everything here is written as plain, slow, obviously-correct code taking a
different route than the library (scalar loops instead of vectorization,
quadrature instead of incomplete-gamma identities, exhaustive enumeration
instead of iteration), so agreement is meaningful.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import integrate, optimize


# -- bilinear resampling -------------------------------------------------------

def bilinear_reference(src, target_geometry):
    """Direct per-pixel evaluation of the bilinear formula."""
    g = src.geometry
    out = np.full((target_geometry.height, target_geometry.width), src.nodata, dtype=np.float64)
    valid = src.valid
    v = src.values.astype(np.float64)
    for row in range(target_geometry.height):
        y = target_geometry.origin_y - (row + 0.5) * target_geometry.pixel_size_y
        q = (g.origin_y - y) / g.pixel_size_y - 0.5
        r0 = math.floor(q)
        for col in range(target_geometry.width):
            x = target_geometry.origin_x + (col + 0.5) * target_geometry.pixel_size_x
            f = (x - g.origin_x) / g.pixel_size_x - 0.5
            c0 = math.floor(f)
            if not (0 <= c0 and c0 + 1 <= g.width - 1 and 0 <= r0 and r0 + 1 <= g.height - 1):
                continue
            if not (valid[r0, c0] and valid[r0, c0 + 1] and valid[r0 + 1, c0] and valid[r0 + 1, c0 + 1]):
                continue
            wx = f - c0
            wy = q - r0
            top = (1 - wx) * v[r0, c0] + wx * v[r0, c0 + 1]
            bottom = (1 - wx) * v[r0 + 1, c0] + wx * v[r0 + 1, c0 + 1]
            out[row, col] = (1 - wy) * top + wy * bottom
    return out


# -- point in polygon ----------------------------------------------------------

def pnpoly(x, y, ring):
    """Classic crossing-number test over one closed ring."""
    inside = False
    n = len(ring) - 1
    j = n - 1
    for i in range(n):
        xi, yi = ring[i]
        xj, yj = ring[j]
        if (yi > y) != (yj > y):
            t = (y - yi) / (yj - yi)
            if x < xi + t * (xj - xi):
                inside = not inside
        j = i
    return inside


def point_in_polygon_reference(x, y, polygon):
    inside = pnpoly(x, y, polygon.exterior)
    for hole in polygon.holes:
        if pnpoly(x, y, hole):
            inside = not inside
    return inside


def rasterize_reference(polygon, grid):
    out = np.zeros((grid.height, grid.width), dtype=bool)
    for row in range(grid.height):
        y = grid.origin_y - (row + 0.5) * grid.pixel_size_y
        for col in range(grid.width):
            x = grid.origin_x + (col + 0.5) * grid.pixel_size_x
            out[row, col] = point_in_polygon_reference(x, y, polygon)
    return out


# -- erosion ---------------------------------------------------------------------

def erode_reference(bits, r_px):
    """All-neighbors-within-distance check, quadratic and literal."""
    h, w = bits.shape
    n = math.floor(r_px)
    out = np.zeros_like(bits)
    for row in range(h):
        for col in range(w):
            keep = True
            for dr in range(-n, n + 1):
                for dc in range(-n, n + 1):
                    if dr * dr + dc * dc > r_px * r_px:
                        continue
                    rr, cc = row + dr, col + dc
                    if not (0 <= rr < h and 0 <= cc < w) or not bits[rr, cc]:
                        keep = False
                        break
                if not keep:
                    break
            out[row, col] = keep
    return out


# -- zonal statistics -------------------------------------------------------------

def zonal_reference(raster, mask):
    total = 0.0
    count = 0
    valid = raster.valid
    for row in range(raster.geometry.height):
        for col in range(raster.geometry.width):
            if mask.bits[row, col] and valid[row, col]:
                total += float(raster.values[row, col])
                count += 1
    if count == 0:
        return None, 0
    return total / count, count


# -- k-means ------------------------------------------------------------------------

def kmeans_exhaustive_sse(values, k):
    """Global SSE minimum over every possible assignment of points to k labels."""
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    assignments = np.array(list(itertools.product(range(k), repeat=n)), dtype=np.int64)
    total = np.zeros(len(assignments))
    for j in range(k):
        members = assignments == j
        counts = members.sum(axis=1)
        sums = members @ values
        with np.errstate(invalid="ignore", divide="ignore"):
            means = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
        total += (members * (values[None, :] - means[:, None]) ** 2).sum(axis=1)
    best = float(total.min())
    return best


# -- sigma range by quadrature -------------------------------------------------------

def speckle_pdf(v, looks):
    if v <= 0:
        return 0.0
    return looks**looks * v ** (looks - 1) * math.exp(-looks * v) / math.gamma(looks)


def sigma_range_reference(looks, sigma):
    """Quantiles by root-finding on a quadrature CDF; moments by quadrature."""

    def cdf(x):
        return integrate.quad(speckle_pdf, 0.0, x, args=(looks,), limit=200)[0]

    lo_mass = (1.0 - sigma) / 2.0
    hi_mass = 1.0 - lo_mass
    a1 = optimize.brentq(lambda x: cdf(x) - lo_mass, 1e-12, 60.0, xtol=1e-13)
    a2 = optimize.brentq(lambda x: cdf(x) - hi_mass, 1e-12, 60.0, xtol=1e-13)
    mass = integrate.quad(speckle_pdf, a1, a2, args=(looks,), limit=200)[0]
    m1 = integrate.quad(lambda v: v * speckle_pdf(v, looks), a1, a2, limit=200)[0] / mass
    m2 = integrate.quad(lambda v: v * v * speckle_pdf(v, looks), a1, a2, limit=200)[0] / mass
    sigma_vn = math.sqrt(m2 - m1 * m1) / m1
    return a1, a2, sigma_vn, m1


# -- the sigma filter, straight-line ---------------------------------------------------

def lee_sigma_reference(raster, params):
    """Per-pixel reimplementation of the filter's five steps.

    Neighbors accumulate in row-major offset order with skipped neighbors
    contributing nothing, mirroring the production accumulation contract, so
    results must agree bit for bit.
    """
    rng = params.range_params
    h, w = raster.values.shape
    v32 = raster.values
    valid = raster.valid
    v = v32.astype(np.float64)
    out = np.empty((h, w), dtype=np.float32)
    if not valid.any():
        return v32.copy()
    z_thr = np.quantile(v[valid], params.point_target_percentile)
    sv2 = 1.0 / params.looks
    svn2 = rng.sigma_vn * rng.sigma_vn
    t_half = params.target_window // 2
    w_half = params.window // 2

    for row in range(h):
        for col in range(w):
            if not valid[row, col]:
                out[row, col] = np.float32(raster.nodata)
                continue
            y = v[row, col]

            # (1) point-target retention
            if y >= z_thr:
                bright = 0
                for dr in range(-t_half, t_half + 1):
                    for dc in range(-t_half, t_half + 1):
                        rr, cc = row + dr, col + dc
                        if 0 <= rr < h and 0 <= cc < w and valid[rr, cc] and v[rr, cc] >= z_thr:
                            bright += 1
                if bright >= params.point_target_min_count:
                    out[row, col] = v32[row, col]
                    continue

            # (2) a-priori mean over the target window
            s1 = 0.0
            s2 = 0.0
            n = 0.0
            for dr in range(-t_half, t_half + 1):
                for dc in range(-t_half, t_half + 1):
                    rr, cc = row + dr, col + dc
                    if 0 <= rr < h and 0 <= cc < w and valid[rr, cc]:
                        s1 += v[rr, cc]
                        s2 += v[rr, cc] * v[rr, cc]
                        n += 1.0
            mean = s1 / n
            var = max(s2 / n - mean * mean, 0.0)
            if var > 0:
                b = max(0.0, (var - mean * mean * sv2) / ((1.0 + sv2) * var))
            else:
                b = 0.0
            xhat = mean + b * (y - mean)

            # (3) sigma range, (4) restricted MMSE
            lo = rng.a1 * xhat
            hi = rng.a2 * xhat
            rs1 = 0.0
            rs2 = 0.0
            rn = 0.0
            n_valid = 0.0
            for dr in range(-w_half, w_half + 1):
                for dc in range(-w_half, w_half + 1):
                    rr, cc = row + dr, col + dc
                    if 0 <= rr < h and 0 <= cc < w and valid[rr, cc]:
                        n_valid += 1.0
                        nb = v[rr, cc]
                        if lo <= nb <= hi:
                            rs1 += nb
                            rs2 += nb * nb
                            rn += 1.0

            # (5) sparse-range fallback
            if rn < params.min_in_range:
                out[row, col] = np.float32(xhat)
                continue
            rmean = rs1 / rn
            rvar = max(rs2 / rn - rmean * rmean, 0.0)
            if (rn < n_valid) and (rvar > 0):
                m_est = rmean / rng.mean_in_range
            else:
                m_est = rmean
            if rvar > 0:
                b2 = max(0.0, (rvar - rmean * rmean * svn2) / ((1.0 + svn2) * rvar))
            else:
                b2 = 0.0
            out[row, col] = np.float32(m_est + b2 * (y - m_est))
    return out


# -- per-pixel calibration formula ------------------------------------------------------

def calibrate_reference(dn, lut):
    """Scalar sigma-nought formula with a literal bilinear LUT lookup."""
    h, w = dn.values.shape
    out = np.full((h, w), dn.nodata, dtype=np.float64)
    lines = lut.lines
    pixels = lut.pixels
    for row in range(h):
        for col in range(w):
            if dn.values[row, col] == np.float32(dn.nodata):
                continue
            # clamp + linear in line
            r = min(max(row, lines[0]), lines[-1])
            i = np.searchsorted(lines, r, side="right") - 1
            i = min(max(i, 0), len(lines) - (2 if len(lines) > 1 else 1))
            if len(lines) == 1:
                per_pixel = lut.gains[0]
            else:
                t = (r - lines[i]) / (lines[i + 1] - lines[i])
                per_pixel = lut.gains[i] + t * (lut.gains[i + 1] - lut.gains[i])
            c = min(max(col, pixels[0]), pixels[-1])
            j = np.searchsorted(pixels, c, side="right") - 1
            j = min(max(j, 0), len(pixels) - (2 if len(pixels) > 1 else 1))
            if len(pixels) == 1:
                gain = per_pixel[0]
            else:
                u = (c - pixels[j]) / (pixels[j + 1] - pixels[j])
                gain = per_pixel[j] + u * (per_pixel[j + 1] - per_pixel[j])
            out[row, col] = (float(dn.values[row, col]) / gain) ** 2
    return out
