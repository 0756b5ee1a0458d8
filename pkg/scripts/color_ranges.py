#!/usr/bin/env python3
"""Derive display color ranges for bundle rasters.

The project descriptor presets each band's contrast range. This script
computes the 2nd-98th percentile of VV(dB), VH(dB) and both ratio variants
over a year-scale sample and prints a `color_ranges` config snippet.

By default the sample is synthetic: one dual-pol acquisition per dekad over
a season cycle, with seasonal mean backscatter levels and single-look gamma
speckle, processed exactly like ingested data (sigma filter, then dB).
Point it at a real catalog with --catalog to use ingested layers instead.
"""
import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from sarfields.calibration import to_db
from sarfields.raster import GridGeometry, Raster
from sarfields.speckle import SpeckleFilterParams, lee_sigma_filter


def synthetic_year_sample(seed: int, size: int = 96) -> dict[str, np.ndarray]:
    """Dual-pol dB samples over 36 dekads of a seasonal backscatter cycle."""
    rng = np.random.default_rng(seed)
    grid = GridGeometry(size, size, 0.0, size * 10.0, 10.0, 10.0, 32632)
    params = SpeckleFilterParams()
    vv_all, vh_all = [], []
    for dekad in range(36):
        phase = 2.0 * math.pi * dekad / 36.0
        # bare-soil winter lows to full-canopy summer highs, VH ~7 dB below VV
        vv_db_mean = -12.0 + 4.0 * math.sin(phase - 0.7)
        vh_db_mean = -19.0 + 5.0 * math.sin(phase - 0.9)
        for mean_db, bucket in ((vv_db_mean, vv_all), (vh_db_mean, vh_all)):
            level = 10.0 ** (mean_db / 10.0)
            # mild field-to-field texture on top of the seasonal level
            texture = rng.lognormal(mean=0.0, sigma=0.25, size=(size, size))
            intensity = level * texture * rng.gamma(1.0, 1.0, size=(size, size))
            raster = Raster(grid, intensity.astype(np.float32))
            filtered = lee_sigma_filter(raster, params)
            db = to_db(filtered)
            bucket.append(db.values[db.valid])
    return {"vv": np.concatenate(vv_all), "vh": np.concatenate(vh_all)}


def catalog_sample(catalog_root: Path) -> dict[str, np.ndarray]:
    from sarfields.geotiff import read_geotiff

    vv_all, vh_all = [], []
    journal = catalog_root / "journal.jsonl"
    for line in journal.read_text().splitlines():
        record = json.loads(line)
        if record.get("status") != "ingested":
            continue
        for pol, bucket in (("VV", vv_all), ("VH", vh_all)):
            raster = read_geotiff(catalog_root / record["product_paths"][pol])
            bucket.append(raster.values[raster.valid])
    if not vv_all:
        raise SystemExit("catalog holds no ingested scenes")
    return {"vv": np.concatenate(vv_all), "vh": np.concatenate(vh_all)}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--catalog", help="catalog root; omit for the synthetic year sample")
    parser.add_argument("--seed", type=int, default=20170101)
    parser.add_argument("--lo", type=float, default=2.0, help="lower percentile")
    parser.add_argument("--hi", type=float, default=98.0, help="upper percentile")
    args = parser.parse_args()

    sample = catalog_sample(Path(args.catalog)) if args.catalog else synthetic_year_sample(args.seed)
    vv, vh = sample["vv"], sample["vh"]
    n = min(vv.size, vh.size)
    quotient = vv[:n][vh[:n] != 0] / vh[:n][vh[:n] != 0]
    difference = vv[:n] - vh[:n]

    def rng_of(values):
        return [round(float(np.percentile(values, args.lo)), 2),
                round(float(np.percentile(values, args.hi)), 2)]

    ranges = {
        "vv_db": rng_of(vv),
        "vh_db": rng_of(vh),
        "ratio_db_quotient": rng_of(quotient),
        "ratio_db_difference": rng_of(difference),
    }
    print(json.dumps({"color_ranges": ranges}, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
