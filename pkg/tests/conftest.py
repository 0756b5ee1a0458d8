"""Shared fixtures: small grids, synthetic rasters, and a demo catalog environment."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from sarfields.catalog import SceneCatalog
from sarfields.config import GridSpec, ServiceConfig
from sarfields.geotiff import write_geotiff
from sarfields.raster import GridGeometry, Mask, Raster
from sarfields.shapefile_io import write_parcels_shapefile
from sarfields.vector import FieldParcel, Polygon


def make_grid(width=8, height=6, origin_x=0.0, origin_y=None, pixel=1.0, crs=32632) -> GridGeometry:
    if origin_y is None:
        origin_y = height * pixel
    return GridGeometry(
        width=width,
        height=height,
        origin_x=origin_x,
        origin_y=origin_y,
        pixel_size_x=pixel,
        pixel_size_y=pixel,
        crs_epsg=crs,
    )


def random_raster(seed, width=8, height=6, nodata_fraction=0.0, low=0.0, high=10.0, **grid_kw) -> Raster:
    rng = np.random.default_rng(seed)
    grid = make_grid(width=width, height=height, **grid_kw)
    values = rng.uniform(low, high, size=(height, width)).astype(np.float32)
    raster = Raster(grid, values)
    if nodata_fraction > 0:
        holes = rng.random((height, width)) < nodata_fraction
        raster.values[holes] = np.float32(raster.nodata)
    return raster


def rect_ring(x0, y0, x1, y1, clockwise=True):
    ring = [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)]
    # that order is counterclockwise in x-right/y-up axes
    return list(reversed(ring)) if clockwise else ring


def full_mask(grid) -> Mask:
    return Mask(grid, np.ones((grid.height, grid.width), dtype=bool))


# --- demo environment: catalog with 4 synthetic dual-pol scenes + LPIS layer ---

AOI_GEOJSON = json.dumps(
    {
        "type": "Polygon",
        "coordinates": [[[10.0, 55.0], [10.2, 55.0], [10.2, 55.2], [10.0, 55.2], [10.0, 55.0]]],
    }
)

SCENE_TIMES = [
    ("S1A_20170501", "2017-05-01T05:30:00+00:00", "ASCENDING", 44),
    ("S1B_20170601", "2017-06-01T17:10:00+00:00", "DESCENDING", 117),
    ("S1A_20170701", "2017-07-01T05:30:00+00:00", "ASCENDING", 44),
    ("S1B_20171115", "2017-11-15T17:10:00+00:00", "DESCENDING", 117),  # outside the window
]


def _dn_plane(width, height, base):
    cols = np.arange(width)[None, :]
    rows = np.arange(height)[:, None]
    return (base + (cols * 7 + rows * 13) % 40).astype(np.float32)


def _write_scene_inputs(scene_dir: Path, scene_id, acquired, pass_dir, orbit):
    scene_dir.mkdir(parents=True, exist_ok=True)
    dn_grid = GridGeometry(
        width=130,
        height=110,
        origin_x=9.995,
        origin_y=55.215,
        pixel_size_x=2e-3,
        pixel_size_y=2e-3,
        crs_epsg=4326,
    )
    offset = (orbit * 3) % 17
    vv = Raster(dn_grid, _dn_plane(130, 110, 180 + offset))
    vh = Raster(dn_grid, _dn_plane(130, 110, 120 + offset))
    write_geotiff(vv, scene_dir / "vv_dn.tif", dtype="uint16")
    write_geotiff(vh, scene_dir / "vh_dn.tif", dtype="uint16")
    lut = [
        {"line": 0, "points": [{"pixel": 0, "gain": 950.0}, {"pixel": 129, "gain": 1050.0}]},
        {"line": 109, "points": [{"pixel": 0, "gain": 980.0}, {"pixel": 129, "gain": 1020.0}]},
    ]
    sidecar = {
        "scene_id": scene_id,
        "acquired_at": acquired,
        "pass": pass_dir,
        "relative_orbit": orbit,
        "calibration": {"VV": lut, "VH": lut},
    }
    (scene_dir / "meta.json").write_text(json.dumps(sidecar, indent=2))
    return scene_dir / "vv_dn.tif", scene_dir / "vh_dn.tif", scene_dir / "meta.json"


def demo_parcels() -> list[FieldParcel]:
    def parcel(pid, crop, x0, y0, size=0.02, applicant=None):
        return FieldParcel(
            parcel_id=pid,
            crop_code=crop,
            geometry=Polygon(exterior=rect_ring(x0, y0, x0 + size, y0 + size)),
            applicant_id=applicant,
        )

    return [
        parcel("DK-001", "Vinterhvede", 10.02, 55.02, applicant="A77"),
        parcel("DK-002", "Vårbyg", 10.09, 55.09),
        parcel("DK-003", "Vinterhvede", 10.14, 55.14),
        parcel("DK-900", "Majs", 10.50, 55.50),  # outside the demo AOI
    ]


@pytest.fixture(scope="session")
def demo_site(tmp_path_factory):
    """Session-wide read-only catalog + LPIS fixture; per-test state lives elsewhere."""
    root = tmp_path_factory.mktemp("site")
    grid = GridSpec(crs_epsg=4326, origin_x=0.0, origin_y=90.0, pixel_size=1e-3, map_units_per_meter=1e-5)
    catalog = SceneCatalog(root / "catalog", grid)
    for scene_id, acquired, pass_dir, orbit in SCENE_TIMES:
        vv, vh, meta = _write_scene_inputs(root / "raw" / scene_id, scene_id, acquired, pass_dir, orbit)
        catalog.ingest_scene(vv, vh, meta)
    lpis = root / "lpis"
    lpis.mkdir()
    write_parcels_shapefile(demo_parcels(), lpis / "parcels.shp")
    return {"root": root, "grid": grid, "catalog_root": root / "catalog", "lpis_shp": lpis / "parcels.shp"}


@pytest.fixture
def demo_config(demo_site, tmp_path) -> ServiceConfig:
    """Fresh job-store/data root per test, sharing the session catalog."""
    return ServiceConfig(
        grid=demo_site["grid"],
        catalog_root=str(demo_site["catalog_root"]),
        data_root=str(tmp_path / "data"),
        lpis_shp=str(demo_site["lpis_shp"]),
        worker_count=0,
    )


@pytest.fixture
def demo_catalog(demo_site) -> SceneCatalog:
    return SceneCatalog(demo_site["catalog_root"], demo_site["grid"])
