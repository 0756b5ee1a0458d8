"""Per-field products: dB composites, zonal means, time series, clustering and phenology."""
from __future__ import annotations

import csv
import datetime as dt
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .raster import (
    GeometryMismatchError,
    Mask,
    Raster,
    RasterStack,
    erode_disk,
    rasterize_polygon,
)
from .vector import FieldParcel


class AnalyticsError(ValueError):
    pass


class RatioMode(enum.Enum):
    """How the third composite band / series ratio is formed from dB values."""

    DB_QUOTIENT = "db_quotient"      # VV(dB) / VH(dB), undefined where VH(dB) = 0
    DB_DIFFERENCE = "db_difference"  # VV(dB) - VH(dB)


def composite_rgb(vv_db: Raster, vh_db: Raster, mode: RatioMode = RatioMode.DB_QUOTIENT) -> RasterStack:
    """Three-band composite: band 1 VV(dB), band 2 VH(dB), band 3 their ratio.

    Nodata in either input makes all three bands nodata at that pixel; under
    the quotient mode a zero VH(dB) also yields nodata in band 3.
    """
    if vv_db.geometry != vh_db.geometry:
        raise GeometryMismatchError("composite inputs must share grid geometry")
    nodata = vv_db.nodata
    both = vv_db.valid & vh_db.valid
    vv = vv_db.values.astype(np.float64)
    vh = vh_db.values.astype(np.float64)
    if mode is RatioMode.DB_QUOTIENT:
        ok = both & (vh != 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = vv / vh
    else:
        ok = both
        ratio = vv - vh
    band1 = np.where(both, vv, nodata).astype(np.float32)
    band2 = np.where(both, vh, nodata).astype(np.float32)
    band3 = np.where(ok, ratio, nodata).astype(np.float32)
    return RasterStack(vv_db.geometry, [band1, band2, band3], nodata)


def zonal_mean(raster: Raster, mask: Mask) -> tuple[float | None, int]:
    """Arithmetic mean over in-mask, non-nodata pixels; (None, 0) when empty."""
    if raster.geometry != mask.geometry:
        raise GeometryMismatchError("zonal mask must share the raster's grid")
    selected = mask.bits & raster.valid
    count = int(selected.sum())
    if count == 0:
        return None, 0
    return float(raster.values[selected].astype(np.float64).sum() / count), count


@dataclass(frozen=True)
class TimeSeriesSample:
    timestamp: dt.datetime
    scene_id: str
    mean_vv_db: float
    mean_vh_db: float
    ratio: float
    pixel_count: int


@dataclass
class TimeSeries:
    """Per-parcel dated record of zonal dB means and their ratio."""

    parcel_id: str
    samples: list[TimeSeriesSample] = field(default_factory=list)
    eroded_away: bool = False  # parcel had pixels but erosion consumed them all


@dataclass(frozen=True)
class SceneLayers:
    """Aligned dB layers of one acquisition, as consumed by the series builder."""

    scene_id: str
    acquired_at: dt.datetime
    vv_db: Raster
    vh_db: Raster


def _ratio_of_means(mean_vv: float, mean_vh: float, mode: RatioMode) -> float:
    if mode is RatioMode.DB_QUOTIENT:
        return mean_vv / mean_vh if mean_vh != 0 else math.nan
    return mean_vv - mean_vh


def build_field_time_series(
    parcel: FieldParcel,
    scenes: list[SceneLayers],
    erosion_m: float = 30.0,
    mode: RatioMode = RatioMode.DB_QUOTIENT,
    map_units_per_meter: float = 1.0,
) -> TimeSeries:
    """Zonal mean series over the eroded parcel interior.

    The parcel is rasterized on each scene's grid and eroded by
    erosion_m * map_units_per_meter so boundary and headland pixels never
    enter the statistics. The per-sample ratio is the ratio of the two zonal
    means (not the mean of per-pixel ratios). Scenes where both layers have
    no valid eroded-interior pixel contribute no sample. Samples come out
    sorted by acquisition time.
    """
    radius = erosion_m * map_units_per_meter
    samples = []
    had_pixels = False
    all_eroded_empty = True
    for scene in scenes:
        if scene.vv_db.geometry != scene.vh_db.geometry:
            raise GeometryMismatchError(f"scene {scene.scene_id} layers disagree on grid")
        full = rasterize_polygon(parcel.geometry, scene.vv_db.geometry)
        if full.count() > 0:
            had_pixels = True
        eroded = erode_disk(full, radius)
        if eroded.count() > 0:
            all_eroded_empty = False
        joint = Mask(eroded.geometry, eroded.bits & scene.vv_db.valid & scene.vh_db.valid)
        mean_vv, count = zonal_mean(scene.vv_db, joint)
        mean_vh, _ = zonal_mean(scene.vh_db, joint)
        if count == 0 or mean_vv is None or mean_vh is None:
            continue
        samples.append(
            TimeSeriesSample(
                timestamp=scene.acquired_at,
                scene_id=scene.scene_id,
                mean_vv_db=mean_vv,
                mean_vh_db=mean_vh,
                ratio=_ratio_of_means(mean_vv, mean_vh, mode),
                pixel_count=count,
            )
        )
    samples.sort(key=lambda s: (s.timestamp, s.scene_id))
    for a, b in zip(samples, samples[1:]):
        if a.timestamp == b.timestamp:
            raise AnalyticsError(
                f"scenes {a.scene_id} and {b.scene_id} share acquisition time {a.timestamp}"
            )
    return TimeSeries(
        parcel_id=parcel.parcel_id,
        samples=samples,
        eroded_away=had_pixels and all_eroded_empty,
    )


@dataclass
class ClusterResult:
    """K-means outcome on one band: label raster, ascending centroids, SSE."""

    labels: Raster
    centroids: list[float]
    sse: float
    iterations: int
    values: Raster  # the band that was clustered, kept for sampling plans


def _lloyd(vals: np.ndarray, centroids: np.ndarray, max_iter: int):
    """Minimum-distance iteration from one initialization.

    Centroids stay sorted so label ties always resolve toward the smaller
    centroid value; a cluster that loses all members is reseeded at the point
    currently farthest from its own centroid, which keeps the per-assignment
    SSE non-increasing while escaping degenerate partitions.
    """
    centroids = np.sort(np.asarray(centroids, dtype=np.float64))
    labels = None
    iterations = 0
    sse_trace: list[float] = []
    for _ in range(max_iter):
        dist = (vals[:, None] - centroids[None, :]) ** 2
        new_labels = np.argmin(dist, axis=1)  # ties resolve to the lowest label
        sse_trace.append(float(((vals - centroids[new_labels]) ** 2).sum()))
        iterations += 1
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        updated = centroids.copy()
        empty = []
        for j in range(centroids.size):
            members = vals[labels == j]
            if members.size:
                updated[j] = members.mean()
            else:
                empty.append(j)
        if empty:
            residual = np.abs(vals - updated[labels])
            order = np.argsort(-residual, kind="stable")
            taken: set[int] = set()
            for j in empty:
                for idx in order:
                    if int(idx) not in taken:
                        updated[j] = vals[idx]
                        taken.add(int(idx))
                        break
        centroids = np.sort(updated)
    return labels, centroids, sse_trace[-1], iterations, sse_trace


def _natural_breaks_init(vals: np.ndarray, k: int) -> np.ndarray:
    """Centroids of the SSE-optimal contiguous partition of the sorted values.

    In one dimension the optimal k-means clusters are contiguous runs of the
    sorted data, so a dynamic program over unique values finds the global
    optimum exactly; seeding one restart with it makes small instances
    provably optimal while the iteration contract stays unchanged.
    """
    xs, w = np.unique(vals, return_counts=True)
    m = xs.size
    w = w.astype(np.float64)
    cum_w = np.concatenate([[0.0], np.cumsum(w)])
    cum_wx = np.concatenate([[0.0], np.cumsum(w * xs)])
    cum_wx2 = np.concatenate([[0.0], np.cumsum(w * xs * xs)])

    def run_cost(a, b):
        """Within-SSE of sorted-run a..b (inclusive); a may be an array."""
        ww = cum_w[b + 1] - cum_w[a]
        wx = cum_wx[b + 1] - cum_wx[a]
        return (cum_wx2[b + 1] - cum_wx2[a]) - wx * wx / ww

    idx = np.arange(m)
    prev = run_cost(np.zeros(m, dtype=int), idx)
    split_at = np.zeros((k, m), dtype=int)
    for j in range(1, k):
        cur = np.full(m, np.inf)
        for i in range(j, m):
            starts = np.arange(j, i + 1)
            cand = prev[starts - 1] + run_cost(starts, np.full(starts.size, i, dtype=int))
            t = int(np.argmin(cand))
            cur[i] = cand[t]
            split_at[j, i] = j + t
        prev = cur

    bounds = []
    i = m - 1
    for j in range(k - 1, 0, -1):
        s = int(split_at[j, i])
        bounds.append(s)
        i = s - 1
    starts = [0] + sorted(bounds)
    ends = sorted(bounds) + [m]
    return np.array([(cum_wx[b] - cum_wx[a]) / (cum_w[b] - cum_w[a]) for a, b in zip(starts, ends)])


# unique-value counts above this skip the exact DP seed (quadratic cost)
_NATURAL_BREAKS_LIMIT = 4096


def _hartigan_refine(vals: np.ndarray, labels: np.ndarray, centroids: np.ndarray,
                     max_moves: int = 200):
    """Best-improvement single-point moves with exact SSE deltas.

    A state with no improving move is also a nearest-centroid fixed point,
    so the assignment invariants survive refinement. Returns labels, means
    and SSE plus the number of moves applied.
    """
    k = centroids.size
    labels = labels.copy()
    moves = 0
    point_idx = np.arange(vals.size)
    for _ in range(max_moves):
        counts = np.array([(labels == j).sum() for j in range(k)], dtype=np.float64)
        means = np.array(
            [vals[labels == j].mean() if counts[j] else centroids[j] for j in range(k)]
        )
        own_mean = means[labels]
        n_own = counts[labels]
        removal = np.where(
            n_own > 1, n_own / np.maximum(n_own - 1, 1.0) * (vals - own_mean) ** 2, 0.0
        )
        insertion = counts[None, :] / (counts[None, :] + 1.0) * (vals[:, None] - means[None, :]) ** 2
        insertion[:, counts == 0] = 0.0
        gain = insertion - removal[:, None]
        gain[point_idx, labels] = np.inf
        i, b = np.unravel_index(np.argmin(gain), gain.shape)
        if not (gain[i, b] < -1e-12):
            break
        labels[i] = b
        moves += 1
    counts = np.array([(labels == j).sum() for j in range(k)], dtype=np.float64)
    means = np.array([vals[labels == j].mean() if counts[j] else centroids[j] for j in range(k)])
    sse = float(((vals - means[labels]) ** 2).sum())
    return labels, means, sse, moves


def kmeans_cluster(raster: Raster, mask: Mask, k: int = 3, seed: int = 0, max_iter: int = 100,
                   restarts: int = 5) -> ClusterResult:
    """1-D k-means over in-mask pixel values: minimum-distance iteration plus
    hill-climbing, best SSE over several initializations.

    Deterministic seeds: centroids at the (i+0.5)/k value quantiles (falling
    back to evenly spaced distinct values when quantiles collide) and, when
    the distinct-value count allows it, the exact natural-breaks partition;
    then `restarts` seeded random draws from the distinct values. Every run
    is polished by single-point hill-climbing moves; the lowest SSE wins,
    first hit on ties. Labels are numbered so centroid values ascend.
    """
    if raster.geometry != mask.geometry:
        raise GeometryMismatchError("cluster mask must share the raster's grid")
    selected = mask.bits & raster.valid
    vals = raster.values[selected].astype(np.float64)
    unique = np.unique(vals)
    if unique.size < k:
        raise AnalyticsError(f"need at least {k} distinct in-mask values, got {unique.size}")

    inits = []
    quantile_init = np.quantile(vals, [(i + 0.5) / k for i in range(k)])
    if np.unique(quantile_init).size == k:
        inits.append(quantile_init)
    else:
        idx = np.round(np.linspace(0, unique.size - 1, k)).astype(int)
        inits.append(unique[idx])
    if unique.size <= _NATURAL_BREAKS_LIMIT:
        inits.append(_natural_breaks_init(vals, k))
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        inits.append(rng.choice(unique, size=k, replace=False))

    best = None
    for init in inits:
        labels, centroids, sse, iterations, _ = _lloyd(vals, np.asarray(init), max_iter)
        labels, centroids, sse, moves = _hartigan_refine(vals, labels, centroids)
        if best is None or sse < best[2]:
            best = (labels, centroids, sse, iterations + moves)
    labels, centroids, sse, iterations = best

    order = np.argsort(centroids, kind="stable")
    relabel = np.empty(k, dtype=np.int64)
    relabel[order] = np.arange(k)
    labels = relabel[labels]
    centroids = centroids[order]

    label_plane = np.full(raster.values.shape, raster.nodata, dtype=np.float32)
    label_plane[selected] = labels.astype(np.float32)
    return ClusterResult(
        labels=Raster(raster.geometry, label_plane, raster.nodata),
        centroids=[float(c) for c in centroids],
        sse=sse,
        iterations=iterations,
        values=raster,
    )


def sampling_plan(clusters: ClusterResult, n_per_cluster: int) -> list[tuple[int, int, int, float, float]]:
    """Per cluster, the n pixels whose values sit nearest the centroid.

    Ties order row-major; clusters smaller than n return everything. Each
    entry is (label, col, row, map_x, map_y) with map coordinates at the
    pixel center.
    """
    if n_per_cluster < 1:
        raise AnalyticsError("n_per_cluster must be >= 1")
    g = clusters.labels.geometry
    label_plane = clusters.labels.values
    value_plane = clusters.values.values.astype(np.float64)
    plan = []
    for label, centroid in enumerate(clusters.centroids):
        rows, cols = np.nonzero(label_plane == np.float32(label))
        if rows.size == 0:
            continue
        distance = np.abs(value_plane[rows, cols] - centroid)
        order = np.lexsort((cols, rows, distance))[:n_per_cluster]
        for i in order:
            col, row = int(cols[i]), int(rows[i])
            x, y = g.pixel_center(col, row)
            plan.append((label, col, row, x, y))
    return plan


@dataclass(frozen=True)
class GrowthStageObservation:
    """Field-trial note of the decimal growth-stage code on a date."""

    parcel_id: str
    date: dt.date
    stage: float

    def __post_init__(self):
        if not 0.0 <= self.stage <= 99.0:
            raise AnalyticsError(f"growth stage {self.stage} outside [0, 99]")


@dataclass(frozen=True)
class AnnotatedSample:
    parcel_id: str
    timestamp: dt.datetime
    scene_id: str
    mean_vv_db: float
    mean_vh_db: float
    ratio: float
    pixel_count: int
    stage: float | None


def _day_number(when: dt.datetime) -> float:
    if when.tzinfo is None:
        when = when.replace(tzinfo=dt.timezone.utc)
    return when.timestamp() / 86400.0


def align_growth_stages(series: TimeSeries, observations: list[GrowthStageObservation]) -> list[AnnotatedSample]:
    """Annotate each sample with the stage linearly interpolated in time.

    Only observations of the series' parcel participate; samples outside the
    observation span stay unannotated (no extrapolation).
    """
    obs = sorted(
        (o for o in observations if o.parcel_id == series.parcel_id),
        key=lambda o: o.date,
    )
    obs_days = [
        _day_number(dt.datetime.combine(o.date, dt.time(0, 0), tzinfo=dt.timezone.utc)) for o in obs
    ]
    out = []
    for sample in series.samples:
        day = _day_number(sample.timestamp)
        stage = None
        if obs and obs_days[0] <= day <= obs_days[-1]:
            for i in range(len(obs) - 1):
                if obs_days[i] <= day <= obs_days[i + 1]:
                    span = obs_days[i + 1] - obs_days[i]
                    if span == 0:
                        stage = obs[i].stage
                    else:
                        t = (day - obs_days[i]) / span
                        stage = obs[i].stage + t * (obs[i + 1].stage - obs[i].stage)
                    break
            else:
                stage = obs[0].stage if day == obs_days[0] else None
        out.append(
            AnnotatedSample(
                parcel_id=series.parcel_id,
                timestamp=sample.timestamp,
                scene_id=sample.scene_id,
                mean_vv_db=sample.mean_vv_db,
                mean_vh_db=sample.mean_vh_db,
                ratio=sample.ratio,
                pixel_count=sample.pixel_count,
                stage=stage,
            )
        )
    return out


def detect_peak(series: TimeSeries) -> tuple[dt.datetime, float] | None:
    """Timestamp and ratio of the smoothed-series maximum.

    Ratios are smoothed with a centered 3-sample moving average (edges use
    the samples that exist); the earliest timestamp wins ties. Series with
    fewer than 3 finite-ratio samples yield None.
    """
    samples = [s for s in series.samples if math.isfinite(s.ratio)]
    if len(samples) < 3:
        return None
    ratios = [s.ratio for s in samples]
    smoothed = []
    for i in range(len(ratios)):
        window = ratios[max(0, i - 1) : i + 2]
        smoothed.append(sum(window) / len(window))
    best = max(range(len(smoothed)), key=lambda i: (smoothed[i], -i))
    return samples[best].timestamp, samples[best].ratio


GROWTH_STAGE_CSV_HEADER = ["parcel_id", "date", "stage"]
TIME_SERIES_CSV_HEADER = [
    "parcel_id",
    "timestamp",
    "scene_id",
    "mean_vv_db",
    "mean_vh_db",
    "ratio",
    "pixel_count",
    "stage",
]


def read_growth_stages_csv(path) -> list[GrowthStageObservation]:
    """Read `parcel_id,date,stage` rows (ISO dates); sorted per parcel by date."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(GROWTH_STAGE_CSV_HEADER) - set(reader.fieldnames or [])
        if missing:
            raise AnalyticsError(f"growth stage CSV lacks columns: {sorted(missing)}")
        rows = [
            GrowthStageObservation(
                parcel_id=row["parcel_id"],
                date=dt.date.fromisoformat(row["date"]),
                stage=float(row["stage"]),
            )
            for row in reader
        ]
    rows.sort(key=lambda o: (o.parcel_id, o.date))
    return rows


def _format_timestamp(when: dt.datetime) -> str:
    if when.tzinfo is None:
        when = when.replace(tzinfo=dt.timezone.utc)
    return when.astimezone(dt.timezone.utc).isoformat()


def write_time_series_csv(rows: list[AnnotatedSample], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIME_SERIES_CSV_HEADER)
        for row in rows:
            writer.writerow(
                [
                    row.parcel_id,
                    _format_timestamp(row.timestamp),
                    row.scene_id,
                    repr(row.mean_vv_db),
                    repr(row.mean_vh_db),
                    repr(row.ratio),
                    row.pixel_count,
                    "" if row.stage is None else repr(row.stage),
                ]
            )
