#!/usr/bin/env python3
"""Build a self-contained demo site: synthetic scenes, LPIS layer, config.

Creates a working directory with four ingested dual-polarization scenes
(three inside the winter-wheat 2017 window, one outside), a small parcel
shapefile, and a ready-to-serve config. Optionally runs one request end to
end so the bundle and time series can be inspected immediately.

    python3 scripts/make_demo_catalog.py demo-site --run-request
    sarfields serve --config demo-site/config.json
"""
import argparse
import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from sarfields.catalog import SceneCatalog
from sarfields.config import GridSpec, ServiceConfig
from sarfields.geotiff import write_geotiff
from sarfields.jobs import JobStore, Worker
from sarfields.raster import GridGeometry, Raster
from sarfields.shapefile_io import write_parcels_shapefile
from sarfields.vector import FieldParcel, Polygon

SCENES = [
    ("S1A_20170501", "2017-05-01T05:30:00+00:00", "ASCENDING", 44),
    ("S1B_20170601", "2017-06-01T17:10:00+00:00", "DESCENDING", 117),
    ("S1A_20170701", "2017-07-01T05:30:00+00:00", "ASCENDING", 44),
    ("S1B_20171115", "2017-11-15T17:10:00+00:00", "DESCENDING", 117),
]

AOI = {
    "type": "Polygon",
    "coordinates": [[[10.0, 55.0], [10.2, 55.0], [10.2, 55.2], [10.0, 55.2], [10.0, 55.0]]],
}


def rect(x0, y0, x1, y1):
    # clockwise exterior, as stored in shapefiles
    return [(x0, y0), (x0, y1), (x1, y1), (x1, y0), (x0, y0)]


def write_scene(raw_dir: Path, scene_id, acquired, pass_dir, orbit, seed):
    raw_dir.mkdir(parents=True, exist_ok=True)
    grid = GridGeometry(130, 110, 9.995, 55.215, 2e-3, 2e-3, 4326)
    rng = np.random.default_rng(seed)
    cols = np.arange(130)[None, :]
    rows = np.arange(110)[:, None]
    for pol, base in (("VV", 180 + orbit % 17), ("VH", 120 + orbit % 17)):
        pattern = base + (cols * 7 + rows * 13) % 40
        speckled = np.clip(pattern * rng.gamma(4.0, 0.25, size=pattern.shape), 1, 65535)
        dn = Raster(grid, np.floor(speckled).astype(np.float32))
        write_geotiff(dn, raw_dir / f"{pol}.tif", dtype="uint16")
    lut = [
        {"line": 0, "points": [{"pixel": 0, "gain": 950.0}, {"pixel": 129, "gain": 1050.0}]},
        {"line": 109, "points": [{"pixel": 0, "gain": 980.0}, {"pixel": 129, "gain": 1020.0}]},
    ]
    (raw_dir / "meta.json").write_text(
        json.dumps(
            {
                "scene_id": scene_id,
                "acquired_at": acquired,
                "pass": pass_dir,
                "relative_orbit": orbit,
                "calibration": {"VV": lut, "VH": lut},
            },
            indent=2,
        )
    )
    return raw_dir / "VV.tif", raw_dir / "VH.tif", raw_dir / "meta.json"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("site", help="directory to create")
    parser.add_argument("--run-request", action="store_true", help="submit and process one demo request")
    args = parser.parse_args()

    site = Path(args.site)
    grid = GridSpec(crs_epsg=4326, origin_x=0.0, origin_y=90.0, pixel_size=1e-3, map_units_per_meter=1e-5)
    catalog = SceneCatalog(site / "catalog", grid)
    for i, (scene_id, acquired, pass_dir, orbit) in enumerate(SCENES):
        vv, vh, meta = write_scene(site / "raw" / scene_id, scene_id, acquired, pass_dir, orbit, seed=i)
        record = catalog.ingest_scene(vv, vh, meta)
        print(f"ingested {record.scene_id} ({record.acquired_at.date()}, {record.pass_direction})")

    parcels = [
        FieldParcel("DK-001", "Vinterhvede", Polygon(exterior=rect(10.02, 55.02, 10.04, 55.04)), "A77"),
        FieldParcel("DK-002", "Vårbyg", Polygon(exterior=rect(10.09, 55.09, 10.11, 55.11))),
        FieldParcel("DK-003", "Vinterhvede", Polygon(exterior=rect(10.14, 55.14, 10.16, 55.16))),
        FieldParcel("DK-900", "Majs", Polygon(exterior=rect(10.50, 55.50, 10.52, 55.52))),
    ]
    (site / "lpis").mkdir(exist_ok=True)
    write_parcels_shapefile(parcels, site / "lpis" / "parcels.shp")
    print(f"wrote {len(parcels)} parcels")

    config = ServiceConfig(
        grid=grid,
        catalog_root="catalog",
        data_root="data",
        lpis_shp="lpis/parcels.shp",
        webui_root="webui" if (site / "webui").is_dir() else None,
    )
    config.save(site / "config.json")
    print(f"config at {site / 'config.json'}")

    if args.run_request:
        loaded = ServiceConfig.from_file(site / "config.json")
        store = JobStore(Path(loaded.data_root) / "jobs.jsonl")
        request_id = store.submit_request(json.dumps(AOI), "demo@example.org", "Winter wheat", 2017)
        worker = Worker(store, SceneCatalog(loaded.catalog_root, loaded.grid), loaded)
        worker.recover()
        worker.process_next_job()
        record = store.get(request_id)
        print(f"request {request_id}: {record.status}")
        if record.bundle_path:
            print(f"bundle at {record.bundle_path} ({record.scene_count} scenes)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
