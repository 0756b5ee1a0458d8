"""Lee sigma speckle filter for intensity (linear power) imagery.

The sigma range is derived at runtime from the L-look gamma speckle model
(mean 1): the range endpoints are the equal-tail quantiles covering the
configured probability mass, and the restricted-speckle standard deviation
is the coefficient of variation of the truncated law. Published lookup
tables are not used.

Filtering a pixel proceeds in the classic two stages: an a-priori MMSE mean
over a small target window with the full speckle deviation, then an MMSE
estimate over the full window restricted to pixels inside the sigma range
around the a-priori mean, with the truncated deviation. Pixels at or above
a high global percentile with enough equally bright neighbors are treated
as point targets and copied unchanged.

One departure from the plain truncated estimate: the mean over in-range
pixels systematically underestimates the scene mean (for 1-look data the
truncated mean is ~0.888), so whenever the range actually excluded at least
one valid neighbor and the in-range variance is nonzero, the in-range mean
is divided by the model's truncated mean before blending. Windows the range
left intact (constant patches, isolated strong targets) pass through the
plain mean, which keeps them exact.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .raster import Raster


class SpeckleError(ValueError):
    pass


@dataclass(frozen=True)
class SigmaRangeParams:
    """Derived constants of the sigma range for an L-look speckle model.

    a1/a2 are the lower/upper range multipliers (quantiles of the unit-mean
    gamma law at equal tail masses), sigma_vn the normalized standard
    deviation of speckle truncated to [a1, a2], and mean_in_range the mean
    of the truncated law (the compensation factor).
    """

    looks: int
    sigma: float
    a1: float
    a2: float
    sigma_vn: float
    mean_in_range: float


def compute_sigma_range(looks: int, sigma: float) -> SigmaRangeParams:
    """Equal-tail sigma range and truncated moments for Gamma(looks, mean 1).

    The endpoints solve the regularized incomplete gamma equation
    P(L, L*x) = (1 -/+ sigma)/2; truncated moments follow from partial-moment
    identities of the gamma law.
    """
    if looks < 1:
        raise SpeckleError(f"looks must be >= 1, got {looks}")
    if not 0.0 < sigma < 1.0:
        raise SpeckleError(f"sigma must lie in (0, 1), got {sigma}")
    lo_mass = (1.0 - sigma) / 2.0
    hi_mass = 1.0 - lo_mass
    a1 = float(special.gammaincinv(looks, lo_mass) / looks)
    a2 = float(special.gammaincinv(looks, hi_mass) / looks)
    if not a1 < 1.0 < a2:
        raise SpeckleError(
            f"sigma={sigma} gives range [{a1:.4f}, {a2:.4f}] that does not bracket the "
            "unit mean; choose a larger sigma"
        )

    # E[V * 1{V<=t}] = P(L+1, L*t) and E[V^2 * 1{V<=t}] = (L+1)/L * P(L+2, L*t)
    # for V ~ Gamma(shape=L, rate=L).
    mass = sigma
    m1 = float((special.gammainc(looks + 1, looks * a2) - special.gammainc(looks + 1, looks * a1)) / mass)
    m2 = float(
        (looks + 1)
        / looks
        * (special.gammainc(looks + 2, looks * a2) - special.gammainc(looks + 2, looks * a1))
        / mass
    )
    sigma_vn = float(np.sqrt(m2 - m1 * m1) / m1)
    return SigmaRangeParams(looks=looks, sigma=sigma, a1=a1, a2=a2, sigma_vn=sigma_vn, mean_in_range=m1)


@dataclass(frozen=True)
class SpeckleFilterParams:
    """Filter configuration; the defaults are the production setup
    (single look, 7x7 window, sigma 0.9, 3x3 target window)."""

    window: int = 7
    target_window: int = 3
    looks: int = 1
    sigma: float = 0.9
    point_target_percentile: float = 0.98
    point_target_min_count: int = 5
    min_in_range: int = 4
    range_params: SigmaRangeParams | None = None

    def __post_init__(self):
        if self.window % 2 == 0 or self.target_window % 2 == 0:
            raise SpeckleError("window sizes must be odd")
        if self.target_window > self.window:
            raise SpeckleError("target window cannot exceed the filter window")
        if not 0.0 < self.point_target_percentile < 1.0:
            raise SpeckleError("point target percentile must lie in (0, 1)")
        if self.range_params is None:
            object.__setattr__(self, "range_params", compute_sigma_range(self.looks, self.sigma))


def _window_sums(values: np.ndarray, include: np.ndarray, half: int):
    """Sum, sum of squares, and count over the (2*half+1)^2 neighborhood.

    Offsets accumulate in row-major order and out-of-image neighbors are
    skipped, so a per-pixel loop visiting neighbors in the same order
    reproduces these sums bit-exactly.
    """
    h, w = values.shape
    s1 = np.zeros((h, w))
    s2 = np.zeros((h, w))
    n = np.zeros((h, w))
    masked = np.where(include, values, 0.0)
    sq = masked * masked
    for dr in range(-half, half + 1):
        for dc in range(-half, half + 1):
            r0, r1 = max(0, -dr), min(h, h - dr)
            c0, c1 = max(0, -dc), min(w, w - dc)
            s1[r0:r1, c0:c1] += masked[r0 + dr : r1 + dr, c0 + dc : c1 + dc]
            s2[r0:r1, c0:c1] += sq[r0 + dr : r1 + dr, c0 + dc : c1 + dc]
            n[r0:r1, c0:c1] += include[r0 + dr : r1 + dr, c0 + dc : c1 + dc]
    return s1, s2, n


def _range_sums(values: np.ndarray, valid: np.ndarray, lo: np.ndarray, hi: np.ndarray, half: int):
    """Window sums restricted per center pixel to valid neighbors in [lo, hi].

    Also returns the count of valid (unrestricted) neighbors, used to decide
    whether the range actually excluded anything.
    """
    h, w = values.shape
    s1 = np.zeros((h, w))
    s2 = np.zeros((h, w))
    n = np.zeros((h, w))
    n_valid = np.zeros((h, w))
    sq = values * values
    for dr in range(-half, half + 1):
        for dc in range(-half, half + 1):
            r0, r1 = max(0, -dr), min(h, h - dr)
            c0, c1 = max(0, -dc), min(w, w - dc)
            nb = values[r0 + dr : r1 + dr, c0 + dc : c1 + dc]
            nb_sq = sq[r0 + dr : r1 + dr, c0 + dc : c1 + dc]
            nb_ok = valid[r0 + dr : r1 + dr, c0 + dc : c1 + dc]
            in_range = nb_ok & (nb >= lo[r0:r1, c0:c1]) & (nb <= hi[r0:r1, c0:c1])
            s1[r0:r1, c0:c1] += np.where(in_range, nb, 0.0)
            s2[r0:r1, c0:c1] += np.where(in_range, nb_sq, 0.0)
            n[r0:r1, c0:c1] += in_range
            n_valid[r0:r1, c0:c1] += nb_ok
    return s1, s2, n, n_valid


def _mmse_gain(var: np.ndarray, mean: np.ndarray, noise_var: np.ndarray | float):
    """MMSE blending factor b = max(0, (var - mean^2*nv) / ((1+nv)*var))."""
    with np.errstate(invalid="ignore", divide="ignore"):
        b = np.where(
            var > 0,
            np.maximum(0.0, (var - mean * mean * noise_var) / ((1.0 + noise_var) * var)),
            0.0,
        )
    return b


def lee_sigma_filter(raster: Raster, params: SpeckleFilterParams | None = None) -> Raster:
    """Apply the sigma filter to a linear-power raster.

    Nodata cells stay nodata and are excluded from all window statistics;
    neighborhoods clip at image borders. Raises on negative input values.
    """
    if params is None:
        params = SpeckleFilterParams()
    rng = params.range_params
    valid = raster.valid
    if not valid.any():
        return raster.copy()
    v = raster.values.astype(np.float64)
    if np.any(v[valid] < 0):
        raise SpeckleError("sigma filter input must be non-negative linear power")

    # point-target retention against the global brightness percentile
    z_thr = np.quantile(v[valid], params.point_target_percentile)
    bright = valid & (v >= z_thr)
    _, _, bright_count = _window_sums(v, bright, params.target_window // 2)
    retain = bright & (bright_count >= params.point_target_min_count)

    # a-priori mean: plain MMSE over the target window with full speckle sd
    sv2 = 1.0 / params.looks
    s1, s2, n = _window_sums(v, valid, params.target_window // 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = s1 / n
        var = np.maximum(s2 / n - mean * mean, 0.0)
    b = _mmse_gain(var, mean, sv2)
    xhat = mean + b * (v - mean)

    # MMSE over the full window restricted to the sigma range around xhat
    lo = rng.a1 * xhat
    hi = rng.a2 * xhat
    rs1, rs2, rn, n_valid = _range_sums(v, valid, lo, hi, params.window // 2)
    svn2 = rng.sigma_vn * rng.sigma_vn
    with np.errstate(invalid="ignore", divide="ignore"):
        rmean = rs1 / rn
        rvar = np.maximum(rs2 / rn - rmean * rmean, 0.0)
        compensate = (rn < n_valid) & (rvar > 0)
        m_est = np.where(compensate, rmean / rng.mean_in_range, rmean)
    b2 = _mmse_gain(rvar, rmean, svn2)
    filtered = m_est + b2 * (v - m_est)

    out = np.where(rn < params.min_in_range, xhat, filtered).astype(np.float32)
    out[retain] = raster.values[retain]
    out[~valid] = np.float32(raster.nodata)
    return Raster(raster.geometry, out, raster.nodata)
