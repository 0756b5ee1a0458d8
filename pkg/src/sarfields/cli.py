"""Command line entry points: serve, worker, ingest, timeseries, cluster, season."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import analytics
from .analytics import RatioMode
from .catalog import SceneCatalog
from .config import ServiceConfig
from .crops import list_crops, season_window
from .geotiff import write_geotiff
from .jobs import JobStore, Worker, season_interval
from .shapefile_io import read_parcels_shapefile


def _load_config(path: str | None) -> ServiceConfig:
    if path is None:
        return ServiceConfig()
    return ServiceConfig.from_file(path)


def _open_catalog(config: ServiceConfig) -> SceneCatalog:
    return SceneCatalog(config.catalog_root, config.grid, config.speckle)


def _load_parcels(config: ServiceConfig):
    if not config.lpis_shp:
        raise SystemExit("configuration has no lpis_shp; parcel operations need an LPIS layer")
    dbf = config.lpis_dbf or str(Path(config.lpis_shp).with_suffix(".dbf"))
    return read_parcels_shapefile(
        config.lpis_shp,
        dbf,
        parcel_id_column=config.parcel_id_column,
        crop_code_column=config.crop_code_column,
        applicant_column=config.applicant_column,
    )


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = _load_config(args.config)
    if args.host:
        config.host = args.host
    if args.port:
        config.port = args.port
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


def cmd_worker(args) -> int:
    config = _load_config(args.config)
    store = JobStore(Path(config.data_root) / "jobs.jsonl")
    worker = Worker(store, _open_catalog(config), config)
    if args.once:
        worker.recover()
        processed = worker.process_next_job()
        print(processed or "no pending requests")
        return 0
    worker.run_forever()
    return 0


def cmd_ingest(args) -> int:
    config = _load_config(args.config)
    catalog = _open_catalog(config)
    record = catalog.ingest_scene(args.vv, args.vh, args.meta)
    print(f"ingested {record.scene_id}: {record.acquired_at.isoformat()} "
          f"{record.pass_direction} orbit {record.relative_orbit}")
    return 0


def _series_for_parcel(args, config: ServiceConfig):
    from .analytics import SceneLayers, build_field_time_series

    catalog = _open_catalog(config)
    parcels = {p.parcel_id: p for p in _load_parcels(config)}
    if args.parcel_id not in parcels:
        raise SystemExit(f"parcel {args.parcel_id!r} not found in the LPIS layer")
    parcel = parcels[args.parcel_id]
    bbox = parcel.geometry.bbox()
    start, end = season_interval(args.crop, args.year)
    layers = [
        SceneLayers(
            scene_id=record.scene_id,
            acquired_at=record.acquired_at,
            vv_db=catalog.get_raster(record, "VV", bbox),
            vh_db=catalog.get_raster(record, "VH", bbox),
        )
        for record in catalog.query_scenes(bbox, start, end)
    ]
    return build_field_time_series(
        parcel,
        layers,
        erosion_m=args.erosion_m,
        mode=RatioMode(args.ratio_mode),
        map_units_per_meter=config.grid.map_units_per_meter,
    )


def cmd_timeseries(args) -> int:
    config = _load_config(args.config)
    series = _series_for_parcel(args, config)
    observations = analytics.read_growth_stages_csv(args.stages) if args.stages else []
    annotated = analytics.align_growth_stages(series, observations)
    out_path = args.out or "-"
    if out_path == "-":
        import io

        buffer = io.StringIO()
        import csv as _csv

        writer = _csv.writer(buffer)
        writer.writerow(analytics.TIME_SERIES_CSV_HEADER)
        for row in annotated:
            writer.writerow(
                [
                    row.parcel_id,
                    row.timestamp.isoformat(),
                    row.scene_id,
                    repr(row.mean_vv_db),
                    repr(row.mean_vh_db),
                    repr(row.ratio),
                    row.pixel_count,
                    "" if row.stage is None else repr(row.stage),
                ]
            )
        sys.stdout.write(buffer.getvalue())
    else:
        analytics.write_time_series_csv(annotated, out_path)
    if series.eroded_away:
        print("note: erosion consumed the parcel; series is empty", file=sys.stderr)
    peak = analytics.detect_peak(series)
    if peak is not None:
        print(f"peak ratio {peak[1]:.4f} at {peak[0].isoformat()}", file=sys.stderr)
    return 0


def cmd_cluster(args) -> int:
    from .raster import erode_disk, rasterize_polygon

    config = _load_config(args.config)
    catalog = _open_catalog(config)
    parcels = {p.parcel_id: p for p in _load_parcels(config)}
    if args.parcel_id not in parcels:
        raise SystemExit(f"parcel {args.parcel_id!r} not found in the LPIS layer")
    parcel = parcels[args.parcel_id]
    record = catalog.get(args.scene_id)
    raster = catalog.get_raster(record, args.polarization, parcel.geometry.bbox())
    mask = rasterize_polygon(parcel.geometry, raster.geometry)
    mask = erode_disk(mask, args.erosion_m * config.grid.map_units_per_meter)
    result = analytics.kmeans_cluster(raster, mask, k=args.k, seed=args.seed)
    write_geotiff(result.labels, args.out_labels)
    plan = analytics.sampling_plan(result, args.samples_per_cluster)
    with open(args.out_plan, "w", encoding="utf-8") as fh:
        fh.write("label,col,row,map_x,map_y\n")
        for label, col, row, x, y in plan:
            fh.write(f"{label},{col},{row},{x!r},{y!r}\n")
    print(
        f"clustered {args.parcel_id} / {args.scene_id} {args.polarization}: "
        f"centroids {[round(c, 3) for c in result.centroids]} sse {result.sse:.4f}"
    )
    return 0


def cmd_season(args) -> int:
    if args.crop:
        start, end = season_window(args.crop, args.year)
        print(f"{args.crop} {args.year}: {start.isoformat()} .. {end.isoformat()}")
    else:
        for season in list_crops():
            start, end = season.window(args.year)
            label = season.english_name + (f" ({season.lpis_name})" if season.lpis_name else "")
            print(f"{label}: {start.isoformat()} .. {end.isoformat()}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sarfields")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP API (and in-process workers)")
    p.add_argument("--config", help="service configuration JSON")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("worker", help="run a standalone request worker")
    p.add_argument("--config", help="service configuration JSON")
    p.add_argument("--once", action="store_true", help="process at most one job and exit")
    p.set_defaults(func=cmd_worker)

    p = sub.add_parser("ingest", help="ingest one dual-polarization scene")
    p.add_argument("--config", help="service configuration JSON")
    p.add_argument("--vv", required=True, help="VV digital-number GeoTIFF")
    p.add_argument("--vh", required=True, help="VH digital-number GeoTIFF")
    p.add_argument("--meta", required=True, help="scene metadata sidecar (JSON)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("timeseries", help="offline per-parcel series export")
    p.add_argument("--config", help="service configuration JSON")
    p.add_argument("--parcel-id", dest="parcel_id", required=True)
    p.add_argument("--crop", required=True)
    p.add_argument("--year", type=int, required=True)
    p.add_argument("--ratio-mode", dest="ratio_mode", default="db_quotient",
                   choices=[m.value for m in RatioMode])
    p.add_argument("--erosion-m", dest="erosion_m", type=float, default=30.0)
    p.add_argument("--stages", help="growth-stage observations CSV")
    p.add_argument("--out", help="output CSV path (default stdout)")
    p.set_defaults(func=cmd_timeseries)

    p = sub.add_parser("cluster", help="offline sampling map for one parcel/scene")
    p.add_argument("--config", help="service configuration JSON")
    p.add_argument("--parcel-id", dest="parcel_id", required=True)
    p.add_argument("--scene-id", dest="scene_id", required=True)
    p.add_argument("--polarization", default="VV", choices=["VV", "VH"])
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--erosion-m", dest="erosion_m", type=float, default=30.0)
    p.add_argument("--samples-per-cluster", dest="samples_per_cluster", type=int, default=3)
    p.add_argument("--out-labels", dest="out_labels", required=True)
    p.add_argument("--out-plan", dest="out_plan", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("season", help="print crop season windows")
    p.add_argument("--crop", help="crop name (English or Danish); omit for all")
    p.add_argument("--year", type=int, required=True)
    p.set_defaults(func=cmd_season)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
