import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sarfields.analytics import (
    AnalyticsError,
    AnnotatedSample,
    GrowthStageObservation,
    RatioMode,
    SceneLayers,
    TimeSeries,
    TimeSeriesSample,
    align_growth_stages,
    build_field_time_series,
    composite_rgb,
    detect_peak,
    kmeans_cluster,
    read_growth_stages_csv,
    sampling_plan,
    write_time_series_csv,
    zonal_mean,
)
from sarfields.raster import Mask, Raster, rasterize_polygon
from sarfields.vector import FieldParcel, Polygon

from conftest import full_mask, make_grid, rect_ring
from oracles import kmeans_exhaustive_sse, zonal_reference

UTC = dt.timezone.utc


def raster_of(values, nodata=-9999.0):
    values = np.asarray(values, dtype=np.float32)
    g = make_grid(width=values.shape[1], height=values.shape[0])
    return Raster(g, values, nodata)


# --- composites -------------------------------------------------------------

def test_composite_quotient():
    vv = raster_of([[-10.0]])
    vh = raster_of([[-20.0]])
    out = composite_rgb(vv, vh, RatioMode.DB_QUOTIENT)
    assert out.bands[0][0, 0] == -10.0
    assert out.bands[1][0, 0] == -20.0
    assert out.bands[2][0, 0] == pytest.approx(0.5)


def test_composite_difference():
    out = composite_rgb(raster_of([[-10.0]]), raster_of([[-20.0]]), RatioMode.DB_DIFFERENCE)
    assert out.bands[2][0, 0] == pytest.approx(10.0)


def test_composite_zero_vh_quotient_nodata():
    out = composite_rgb(raster_of([[-10.0]]), raster_of([[0.0]]), RatioMode.DB_QUOTIENT)
    assert out.bands[2][0, 0] == np.float32(-9999.0)
    assert out.bands[0][0, 0] == -10.0


def test_composite_nodata_union():
    vv = raster_of([[-10.0, -9999.0]])
    vh = raster_of([[-9999.0, -15.0]])
    out = composite_rgb(vv, vh, RatioMode.DB_DIFFERENCE)
    for band in out.bands:
        assert np.all(band == np.float32(-9999.0))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 9999))
def test_composite_difference_antisymmetric_quotient_reciprocal(seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(-30, -1, (4, 5)).astype(np.float32)
    b = rng.uniform(-30, -1, (4, 5)).astype(np.float32)
    diff_ab = composite_rgb(raster_of(a), raster_of(b), RatioMode.DB_DIFFERENCE).bands[2]
    diff_ba = composite_rgb(raster_of(b), raster_of(a), RatioMode.DB_DIFFERENCE).bands[2]
    assert np.allclose(diff_ab, -diff_ba, atol=1e-5)
    q_ab = composite_rgb(raster_of(a), raster_of(b), RatioMode.DB_QUOTIENT).bands[2]
    q_ba = composite_rgb(raster_of(b), raster_of(a), RatioMode.DB_QUOTIENT).bands[2]
    assert np.allclose(q_ab.astype(np.float64) * q_ba.astype(np.float64), 1.0, rtol=1e-5)


# --- zonal mean --------------------------------------------------------------

def test_zonal_two_pixel_mean():
    r = raster_of([[3.0, 5.0, 100.0]])
    mask = Mask(r.geometry, np.array([[True, True, False]]))
    assert zonal_mean(r, mask) == (4.0, 2)


def test_zonal_only_nodata_is_empty():
    r = raster_of([[-9999.0, -9999.0]])
    mask = Mask(r.geometry, np.array([[True, True]]))
    assert zonal_mean(r, mask) == (None, 0)


def test_zonal_matches_naive_loop():
    rng = np.random.default_rng(31)
    values = rng.uniform(-25, 0, (16, 16)).astype(np.float32)
    values[rng.random((16, 16)) < 0.15] = np.float32(-9999.0)
    r = raster_of(values)
    mask = Mask(r.geometry, rng.random((16, 16)) < 0.5)
    got_mean, got_count = zonal_mean(r, mask)
    ref_mean, ref_count = zonal_reference(r, mask)
    assert got_count == ref_count
    assert got_mean == pytest.approx(ref_mean, abs=1e-12)


def test_zonal_nodata_pixels_never_change_result():
    r = raster_of([[1.0, -9999.0], [3.0, 5.0]])
    small = Mask(r.geometry, np.array([[True, False], [True, False]]))
    plus_nodata = Mask(r.geometry, np.array([[True, True], [True, False]]))
    assert zonal_mean(r, small) == zonal_mean(r, plus_nodata)


# --- time series -----------------------------------------------------------------

def scene(ts, vv, vh, scene_id="s"):
    return SceneLayers(
        scene_id=scene_id,
        acquired_at=ts,
        vv_db=vv,
        vh_db=vh,
    )


def test_series_single_pixel_means():
    g = make_grid(width=4, height=4, pixel=10.0)
    vv = Raster(g, np.full((4, 4), -12.0, np.float32))
    vh = Raster(g, np.full((4, 4), -18.0, np.float32))
    # one-pixel parcel: covers the center of pixel (1, 1) only
    parcel = FieldParcel("p", "Vinterhvede", Polygon(exterior=rect_ring(10.0, 20.0, 20.0, 30.0)))
    series = build_field_time_series(
        parcel,
        [scene(dt.datetime(2017, 6, 1, tzinfo=UTC), vv, vh)],
        erosion_m=0.0,
        mode=RatioMode.DB_QUOTIENT,
    )
    assert len(series.samples) == 1
    s = series.samples[0]
    assert (s.mean_vv_db, s.mean_vh_db, s.pixel_count) == (-12.0, -18.0, 1)
    assert s.ratio == pytest.approx(2.0 / 3.0, abs=1e-9)


def test_series_parcel_narrower_than_erosion_flagged_empty():
    g = make_grid(width=12, height=12, pixel=10.0)
    vv = Raster(g, np.full((12, 12), -10.0, np.float32))
    vh = Raster(g, np.full((12, 12), -17.0, np.float32))
    # 50 m wide parcel on 10 m pixels; 30 m erosion consumes it
    parcel = FieldParcel("thin", "Majs", Polygon(exterior=rect_ring(20.0, 20.0, 70.0, 70.0)))
    series = build_field_time_series(
        parcel, [scene(dt.datetime(2017, 6, 1, tzinfo=UTC), vv, vh)], erosion_m=30.0
    )
    assert series.samples == []
    assert series.eroded_away


def test_series_three_scenes_sorted_constants():
    g = make_grid(width=10, height=10, pixel=10.0)
    parcel = FieldParcel("k", "Vårbyg", Polygon(exterior=rect_ring(10.0, 10.0, 90.0, 90.0)))
    scenes = []
    expected = []
    for i, day in enumerate((21, 7, 14)):  # deliberately unsorted
        vv = Raster(g, np.full((10, 10), -10.0 - i, np.float32))
        vh = Raster(g, np.full((10, 10), -16.0, np.float32))
        ts = dt.datetime(2017, 6, day, tzinfo=UTC)
        scenes.append(scene(ts, vv, vh, scene_id=f"s{i}"))
        expected.append((ts, -10.0 - i))
    series = build_field_time_series(parcel, scenes, erosion_m=10.0)
    expected.sort()
    assert [s.timestamp for s in series.samples] == [e[0] for e in expected]
    assert [s.mean_vv_db for s in series.samples] == [e[1] for e in expected]
    assert all(s.pixel_count > 0 for s in series.samples)


def test_series_erosion_zero_equals_plain_mask():
    g = make_grid(width=10, height=10, pixel=10.0)
    rng = np.random.default_rng(77)
    vv = Raster(g, rng.uniform(-20, -5, (10, 10)).astype(np.float32))
    vh = Raster(g, rng.uniform(-25, -10, (10, 10)).astype(np.float32))
    parcel = FieldParcel("z", "Majs", Polygon(exterior=rect_ring(15.0, 15.0, 85.0, 85.0)))
    series = build_field_time_series(
        parcel, [scene(dt.datetime(2017, 7, 1, tzinfo=UTC), vv, vh)], erosion_m=0.0
    )
    mask = rasterize_polygon(parcel.geometry, g)
    mean_vv, count = zonal_mean(vv, mask)
    assert series.samples[0].pixel_count == count
    assert series.samples[0].mean_vv_db == pytest.approx(mean_vv, abs=1e-12)


# --- k-means -----------------------------------------------------------------------

def test_kmeans_separable_two_clusters():
    r = raster_of([[0.0, 0.0, 10.0, 10.0]])
    result = kmeans_cluster(r, full_mask(r.geometry), k=2, seed=0)
    assert result.centroids == [0.0, 10.0]
    assert result.sse == 0.0
    assert list(result.labels.values[0]) == [0.0, 0.0, 1.0, 1.0]


def test_kmeans_k_equals_distinct_count():
    r = raster_of([[1.0, 5.0, 9.0]])
    result = kmeans_cluster(r, full_mask(r.geometry), k=3, seed=1)
    assert result.centroids == [1.0, 5.0, 9.0]
    assert result.sse == 0.0


def test_kmeans_needs_k_distinct():
    r = raster_of([[2.0, 2.0, 2.0]])
    with pytest.raises(AnalyticsError):
        kmeans_cluster(r, full_mask(r.geometry), k=2, seed=0)


def test_kmeans_labels_ascend_and_are_nearest():
    rng = np.random.default_rng(13)
    values = rng.uniform(-25, -5, (8, 8)).astype(np.float32)
    r = raster_of(values)
    result = kmeans_cluster(r, full_mask(r.geometry), k=3, seed=3)
    assert result.centroids == sorted(result.centroids)
    labels = result.labels.values
    centroids = np.array(result.centroids)
    for row in range(8):
        for col in range(8):
            v = float(values[row, col])
            label = int(labels[row, col])
            dists = (v - centroids) ** 2
            assert dists[label] == dists.min()
            # ties break toward the lowest label
            assert label == int(np.argmin(dists))


def test_kmeans_attains_exhaustive_optimum_small_instances():
    for seed in range(25):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 11))
        k = int(rng.integers(2, 4))
        values = rng.uniform(0, 20, n).astype(np.float32)
        if np.unique(values).size < k:
            continue
        r = raster_of(values.reshape(1, n))
        result = kmeans_cluster(r, full_mask(r.geometry), k=k, seed=seed)
        best = kmeans_exhaustive_sse(values.astype(np.float64), k)
        assert result.sse == pytest.approx(best, abs=1e-9), f"seed {seed}"


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 99_999), n=st.integers(4, 40), k=st.integers(2, 4))
def test_kmeans_sse_monotone_and_fixed_point(seed, n, k):
    from sarfields.analytics import _lloyd

    rng = np.random.default_rng(seed)
    vals = rng.uniform(-30, 0, n)
    if np.unique(vals).size < k:
        return
    init = np.quantile(vals, [(i + 0.5) / k for i in range(k)])
    labels, centroids, sse, _, trace = _lloyd(vals, init, 100)
    assert all(a >= b - 1e-9 for a, b in zip(trace, trace[1:]))
    # one more assignment pass changes nothing
    again = np.argmin((vals[:, None] - centroids[None, :]) ** 2, axis=1)
    assert np.array_equal(again, labels)


def test_kmeans_invariant_under_pixel_permutation():
    rng = np.random.default_rng(4)
    values = rng.uniform(0, 50, 24).astype(np.float32)
    a = kmeans_cluster(raster_of(values.reshape(4, 6)), full_mask(make_grid(width=6, height=4)), k=3, seed=9)
    shuffled = values.copy().reshape(4, 6)[::-1, ::-1].copy()
    b = kmeans_cluster(raster_of(shuffled), full_mask(make_grid(width=6, height=4)), k=3, seed=9)
    assert a.centroids == pytest.approx(b.centroids, abs=1e-12)
    assert a.sse == pytest.approx(b.sse, abs=1e-9)


# --- sampling plan ---------------------------------------------------------------------

def test_sampling_plan_zero_sse_row_major_first():
    r = raster_of([[0.0, 0.0], [10.0, 10.0]])
    result = kmeans_cluster(r, full_mask(r.geometry), k=2, seed=0)
    plan = sampling_plan(result, 1)
    assert plan[0][:3] == (0, 0, 0)  # first zero-cluster pixel in row-major order
    assert plan[1][:3] == (1, 0, 1)


def test_sampling_plan_truncates_to_cluster_size():
    r = raster_of([[0.0, 0.1, 10.0]])
    result = kmeans_cluster(r, full_mask(r.geometry), k=2, seed=0)
    plan = sampling_plan(result, 5)
    by_label = {}
    for entry in plan:
        by_label.setdefault(entry[0], []).append(entry)
    assert len(by_label[0]) == 2
    assert len(by_label[1]) == 1


def test_sampling_plan_matches_ranking_oracle():
    rng = np.random.default_rng(8)
    values = rng.uniform(0, 30, (6, 6)).astype(np.float32)
    r = raster_of(values)
    result = kmeans_cluster(r, full_mask(r.geometry), k=3, seed=2)
    n = 4
    plan = sampling_plan(result, n)
    for label, centroid in enumerate(result.centroids):
        got = [(col, row) for lab, col, row, _, _ in plan if lab == label]
        members = [
            (abs(float(values[row, col]) - centroid), row, col)
            for row in range(6)
            for col in range(6)
            if int(result.labels.values[row, col]) == label
        ]
        members.sort()
        want = [(col, row) for _, row, col in members[:n]]
        assert got == want


def test_sampling_plan_map_coords_are_pixel_centers():
    r = raster_of([[0.0, 10.0]])
    result = kmeans_cluster(r, full_mask(r.geometry), k=2, seed=0)
    plan = sampling_plan(result, 1)
    label, col, row, x, y = plan[0]
    assert (x, y) == r.geometry.pixel_center(col, row)


# --- growth stages -------------------------------------------------------------------

def sample_at(day, ratio, hour=0):
    return TimeSeriesSample(
        timestamp=dt.datetime(2017, 5, day, hour, tzinfo=UTC),
        scene_id=f"s{day}",
        mean_vv_db=-12.0,
        mean_vh_db=-18.0,
        ratio=ratio,
        pixel_count=9,
    )


def test_align_linear_midpoint():
    series = TimeSeries("p", [sample_at(6, 0.7)])
    obs = [
        GrowthStageObservation("p", dt.date(2017, 5, 1), 20.0),
        GrowthStageObservation("p", dt.date(2017, 5, 11), 30.0),
    ]
    rows = align_growth_stages(series, obs)
    assert rows[0].stage == pytest.approx(25.0, abs=1e-9)


def test_align_refuses_extrapolation():
    series = TimeSeries("p", [sample_at(1, 0.5)])
    obs = [
        GrowthStageObservation("p", dt.date(2017, 5, 10), 20.0),
        GrowthStageObservation("p", dt.date(2017, 5, 20), 30.0),
    ]
    rows = align_growth_stages(series, obs)
    assert rows[0].stage is None


def test_align_filters_other_parcels():
    series = TimeSeries("p", [sample_at(6, 0.5)])
    obs = [
        GrowthStageObservation("other", dt.date(2017, 5, 1), 10.0),
        GrowthStageObservation("other", dt.date(2017, 5, 11), 90.0),
    ]
    rows = align_growth_stages(series, obs)
    assert rows[0].stage is None


def test_stage_out_of_range_rejected():
    with pytest.raises(AnalyticsError):
        GrowthStageObservation("p", dt.date(2017, 5, 1), 120.0)


# --- peak detection -------------------------------------------------------------------

def test_peak_rising_falling():
    ratios = [0.2, 0.5, 0.9, 0.6, 0.3]
    series = TimeSeries("p", [sample_at(d + 1, r) for d, r in enumerate(ratios)])
    peak = detect_peak(series)
    assert peak is not None
    assert peak[0].day == 3
    assert peak[1] == pytest.approx(0.9)


def test_peak_constant_series_earliest():
    series = TimeSeries("p", [sample_at(d + 1, 0.5) for d in range(4)])
    peak = detect_peak(series)
    assert peak[0].day == 1


def test_peak_short_series_none():
    series = TimeSeries("p", [sample_at(1, 0.5), sample_at(2, 0.6)])
    assert detect_peak(series) is None


def test_peak_shift_invariant():
    ratios = [0.2, 0.4, 0.9, 0.8, 0.1, 0.05]
    base = TimeSeries("p", [sample_at(d + 1, r) for d, r in enumerate(ratios)])
    shifted = TimeSeries("p", [sample_at(d + 1, r + 5.0) for d, r in enumerate(ratios)])
    assert detect_peak(base)[0] == detect_peak(shifted)[0]


def test_peak_logistic_rise_decay_within_one_sample():
    # smooth rise to a known maximum then decay; samples every 6 days
    days = list(range(1, 28, 2))
    t_peak = 13.0

    def curve(t):
        return 1.0 / (1.0 + math.exp(-(t - 7.0))) * math.exp(-0.5 * ((t - t_peak) / 9.0) ** 2)

    series = TimeSeries("p", [sample_at(d, curve(d)) for d in days])
    peak = detect_peak(series)
    analytic_best = max(days, key=curve)
    assert abs(peak[0].day - analytic_best) <= 2  # one sample spacing


# --- CSV io ---------------------------------------------------------------------------------

def test_growth_csv_roundtrip(tmp_path):
    path = tmp_path / "stages.csv"
    path.write_text("parcel_id,date,stage\np,2017-05-11,30.0\np,2017-05-01,20.5\n")
    obs = read_growth_stages_csv(path)
    assert obs[0].date == dt.date(2017, 5, 1)  # sorted per parcel
    assert obs[0].stage == 20.5


def test_growth_csv_missing_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("parcel_id,when\np,2017-05-01\n")
    with pytest.raises(AnalyticsError):
        read_growth_stages_csv(path)


def test_series_csv_format(tmp_path):
    rows = [
        AnnotatedSample("p", dt.datetime(2017, 5, 1, 5, 30, tzinfo=UTC), "s1", -12.5, -18.25, 0.685, 42, 25.5),
        AnnotatedSample("p", dt.datetime(2017, 5, 7, 5, 30, tzinfo=UTC), "s2", -11.0, -17.0, 0.647, 42, None),
    ]
    path = tmp_path / "series.csv"
    write_time_series_csv(rows, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "parcel_id,timestamp,scene_id,mean_vv_db,mean_vh_db,ratio,pixel_count,stage"
    assert lines[1] == "p,2017-05-01T05:30:00+00:00,s1,-12.5,-18.25,0.685,42,25.5"
    assert lines[2].endswith(",42,")  # blank stage when unannotated
