"""Request intake, durable job journal, background worker, and bundle assembly.

The job store is an append-only JSONL journal; the in-memory index is
rebuilt by replay and kept fresh by tailing new complete lines, so any
number of reader processes can share it with the writers. Writers serialize
through an exclusive file lock. A job's observable status walks
pending -> processing -> done | failed; a `requeued` recovery event returns
a stale processing job (its worker died) to pending.
"""
from __future__ import annotations

import datetime as dt
import fcntl
import json
import logging
import os
import re
import secrets
import shutil
import threading
import zipfile
from dataclasses import dataclass
from pathlib import Path

from . import analytics
from .analytics import RatioMode, SceneLayers, build_field_time_series
from .catalog import SceneCatalog
from .config import ServiceConfig
from .crops import UnknownCropError, find_crop, season_window
from .geotiff import write_geotiff
from .project import LayerSpec, build_project_descriptor
from .shapefile_io import read_parcels_shapefile, write_parcels_shapefile
from .vector import (
    FieldParcel,
    MalformedGeoJSONError,
    GeometryTypeError,
    NotSinglePolygonError,
    OversizedAOIError,
    Polygon,
    VectorError,
    clip_parcels_bbox,
    parse_geojson_polygon,
    validate_aoi,
)

log = logging.getLogger("sarfields.jobs")

PENDING = "pending"
PROCESSING = "processing"
DONE = "done"
FAILED = "failed"


class RequestValidationError(ValueError):
    """User-input rejection with a machine-readable code."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def validate_email(email: str) -> None:
    """Syntactic check only: one @, non-empty local part, dotted domain."""
    if not isinstance(email, str) or email.count("@") != 1:
        raise RequestValidationError("invalid_email", f"email {email!r} must contain exactly one @")
    local, domain = email.split("@")
    if not local or not domain or "." not in domain or domain.startswith(".") or domain.endswith("."):
        raise RequestValidationError(
            "invalid_email", f"email {email!r} needs a local part and a dotted domain"
        )


@dataclass
class JobRecord:
    request_id: str
    email: str
    polygon: Polygon
    crop: str
    year: int
    ratio_mode: RatioMode
    created_at: dt.datetime
    status: str = PENDING
    message: str | None = None
    bundle_path: str | None = None
    scene_count: int | None = None
    parcel_count: int | None = None
    owner_pid: int | None = None
    notification: dict | None = None

    def public_view(self) -> dict:
        """Status payload for the API; never includes the email address."""
        view = {
            "request_id": self.request_id,
            "status": self.status,
            "crop": self.crop,
            "year": self.year,
            "ratio_mode": self.ratio_mode.value,
            "created_at": self.created_at.isoformat(),
            "message": self.message,
            "scene_count": self.scene_count,
            "parcel_count": self.parcel_count,
        }
        if self.status == DONE:
            view["bundle_url"] = f"/api/requests/{self.request_id}/bundle.zip"
            view["timeseries_url"] = f"/api/requests/{self.request_id}/timeseries.json"
        if self.notification is not None:
            view["notification"] = self.notification
        return view


def _utcnow() -> dt.datetime:
    return dt.datetime.now(dt.timezone.utc)


def _parse_ts(text: str) -> dt.datetime:
    return dt.datetime.fromisoformat(text)


class JobStore:
    """Durable request journal with live tailing for cross-process reads."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.touch(exist_ok=True)
        self._lock_path = self.path.with_suffix(".lock")
        self._lock_path.touch(exist_ok=True)
        self._mutex = threading.Lock()
        self._records: dict[str, JobRecord] = {}
        self._order: list[str] = []
        self._offset = 0

    # -- journal plumbing ---------------------------------------------------

    def _apply(self, event: dict) -> None:
        kind = event["event"]
        if kind == "submitted":
            raw = event["request"]
            record = JobRecord(
                request_id=raw["request_id"],
                email=raw["email"],
                polygon=Polygon(
                    exterior=[tuple(p) for p in raw["polygon"][0]],
                    holes=[[tuple(p) for p in ring] for ring in raw["polygon"][1:]],
                ),
                crop=raw["crop"],
                year=int(raw["year"]),
                ratio_mode=RatioMode(raw["ratio_mode"]),
                created_at=_parse_ts(event["at"]),
            )
            if record.request_id not in self._records:
                self._order.append(record.request_id)
            self._records[record.request_id] = record
            return
        record = self._records.get(event["request_id"])
        if record is None:
            return  # event for an unknown request: ignore rather than fail replay
        if kind == "started" and record.status == PENDING:
            record.status = PROCESSING
            record.owner_pid = event.get("owner_pid")
        elif kind == "requeued" and record.status == PROCESSING:
            record.status = PENDING
            record.owner_pid = None
        elif kind == "done" and record.status in (PENDING, PROCESSING):
            record.status = DONE
            record.bundle_path = event["bundle_path"]
            record.scene_count = event.get("scene_count")
            record.parcel_count = event.get("parcel_count")
        elif kind == "failed" and record.status in (PENDING, PROCESSING):
            record.status = FAILED
            record.message = event["message"]
        elif kind == "notified":
            record.notification = event["notification"]

    def refresh(self) -> None:
        """Apply any journal lines appended since the last read."""
        with self._mutex:
            size = self.path.stat().st_size
            if size == self._offset:
                return
            with open(self.path, "rb") as fh:
                fh.seek(self._offset)
                chunk = fh.read()
            # hold back a partial trailing line until its newline arrives
            complete = chunk.rfind(b"\n") + 1
            for line in chunk[:complete].split(b"\n")[:-1]:
                if line.strip():
                    self._apply(json.loads(line.decode("utf-8")))
            self._offset += complete

    def _append(self, event: dict) -> None:
        line = (json.dumps(event, sort_keys=True) + "\n").encode("utf-8")
        with open(self.path, "ab") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())

    class _WriteLock:
        def __init__(self, store: "JobStore"):
            self.store = store
            self.fh = None

        def __enter__(self):
            self.fh = open(self.store._lock_path, "rb")
            fcntl.flock(self.fh, fcntl.LOCK_EX)
            self.store.refresh()
            return self.store

        def __exit__(self, *exc):
            fcntl.flock(self.fh, fcntl.LOCK_UN)
            self.fh.close()

    def write_lock(self) -> "_WriteLock":
        return JobStore._WriteLock(self)

    # -- intake ---------------------------------------------------------------

    def submit_request(
        self,
        geojson: str,
        email: str,
        crop: str,
        year: int,
        ratio_mode: str | RatioMode | None = None,
    ) -> str:
        """Validate a request and persist it as pending; returns the request id."""
        validate_email(email)
        try:
            polygon = parse_geojson_polygon(geojson)
        except NotSinglePolygonError as e:
            raise RequestValidationError("not_single_polygon", str(e)) from e
        except (MalformedGeoJSONError, GeometryTypeError, VectorError) as e:
            raise RequestValidationError("invalid_polygon", str(e)) from e
        try:
            validate_aoi(polygon)
        except OversizedAOIError as e:
            raise RequestValidationError("aoi_too_large", str(e)) from e
        try:
            find_crop(crop)
        except UnknownCropError as e:
            raise RequestValidationError("unknown_crop", str(e)) from e
        if not 1970 <= int(year) <= 2100:
            raise RequestValidationError("invalid_year", f"year {year} outside 1970..2100")
        if ratio_mode is None:
            mode = RatioMode.DB_QUOTIENT
        else:
            try:
                mode = ratio_mode if isinstance(ratio_mode, RatioMode) else RatioMode(ratio_mode)
            except ValueError as e:
                raise RequestValidationError(
                    "invalid_ratio_mode",
                    f"ratio_mode must be one of {[m.value for m in RatioMode]}",
                ) from e

        request_id = secrets.token_hex(16)
        event = {
            "event": "submitted",
            "at": _utcnow().isoformat(),
            "request": {
                "request_id": request_id,
                "email": email,
                "polygon": [[list(p) for p in ring] for ring in polygon.rings()],
                "crop": crop,
                "year": int(year),
                "ratio_mode": mode.value,
            },
        }
        with self.write_lock():
            self._append(event)
            self.refresh()
        return request_id

    # -- worker-side transitions ----------------------------------------------

    def claim_next(self, owner_pid: int) -> str | None:
        """Atomically move the oldest pending request to processing."""
        with self.write_lock():
            pending = [rid for rid in self._order if self._records[rid].status == PENDING]
            if not pending:
                return None
            request_id = pending[0]
            self._append(
                {
                    "event": "started",
                    "at": _utcnow().isoformat(),
                    "request_id": request_id,
                    "owner_pid": owner_pid,
                }
            )
            self.refresh()
            return request_id

    def mark_done(self, request_id: str, bundle_path: str, scene_count: int, parcel_count: int) -> None:
        with self.write_lock():
            self._append(
                {
                    "event": "done",
                    "at": _utcnow().isoformat(),
                    "request_id": request_id,
                    "bundle_path": bundle_path,
                    "scene_count": scene_count,
                    "parcel_count": parcel_count,
                }
            )
            self.refresh()

    def mark_failed(self, request_id: str, message: str) -> None:
        with self.write_lock():
            self._append(
                {
                    "event": "failed",
                    "at": _utcnow().isoformat(),
                    "request_id": request_id,
                    "message": message,
                }
            )
            self.refresh()

    def requeue_stale(self) -> list[str]:
        """Return stale processing jobs (dead owner) to pending."""
        requeued = []
        with self.write_lock():
            for record in self._records.values():
                if record.status != PROCESSING:
                    continue
                if record.owner_pid is not None and _pid_alive(record.owner_pid):
                    continue
                self._append(
                    {
                        "event": "requeued",
                        "at": _utcnow().isoformat(),
                        "request_id": record.request_id,
                    }
                )
                requeued.append(record.request_id)
            self.refresh()
        return requeued

    def record_notification(self, request_id: str, notification: dict) -> None:
        with self.write_lock():
            self._append(
                {
                    "event": "notified",
                    "at": _utcnow().isoformat(),
                    "request_id": request_id,
                    "notification": notification,
                }
            )
            self.refresh()

    # -- reads ------------------------------------------------------------------

    def get(self, request_id: str) -> JobRecord | None:
        self.refresh()
        return self._records.get(request_id)

    def all_records(self) -> list[JobRecord]:
        self.refresh()
        return [self._records[rid] for rid in self._order]


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True


class JournalNotifier:
    """Default notifier: records the notification on the job and in the log."""

    def __init__(self, store: JobStore, base_url: str = ""):
        self.store = store
        self.base_url = base_url

    def notify(self, record: JobRecord) -> None:
        if record.status == DONE:
            payload = {
                "email": record.email,
                "link": f"{self.base_url}/api/requests/{record.request_id}/bundle.zip",
            }
        else:
            payload = {"email": record.email, "message": record.message or "processing failed"}
        log.info("notify %s: %s", record.email, payload.get("link") or payload.get("message"))
        self.store.record_notification(record.request_id, payload)


_SAFE_NAME = re.compile(r"[^A-Za-z0-9_.-]")


def _safe_filenames(names: list[str]) -> dict[str, str]:
    """Deterministic filesystem-safe names, deduplicated in sorted order."""
    out: dict[str, str] = {}
    used: set[str] = set()
    for name in sorted(names):
        base = _SAFE_NAME.sub("_", name) or "parcel"
        candidate = base
        counter = 2
        while candidate in used:
            candidate = f"{base}-{counter}"
            counter += 1
        used.add(candidate)
        out[name] = candidate
    return out


@dataclass
class BundleResult:
    zip_path: Path
    scene_count: int
    parcel_count: int
    timeseries: dict


def _write_zip(zip_path: Path, stage: Path) -> None:
    """Deterministic zip: sorted entries, fixed timestamps and attributes."""
    entries = sorted(p for p in stage.rglob("*") if p.is_file())
    with zipfile.ZipFile(zip_path, "w") as archive:
        for entry in entries:
            info = zipfile.ZipInfo(entry.relative_to(stage).as_posix(), date_time=(1980, 1, 1, 0, 0, 0))
            info.compress_type = zipfile.ZIP_DEFLATED
            info.external_attr = 0o644 << 16
            archive.writestr(info, entry.read_bytes(), compresslevel=6)


def season_interval(crop: str, year: int) -> tuple[dt.datetime, dt.datetime]:
    """Season window as UTC instants; the end date is included whole."""
    start_date, end_date = season_window(crop, year)
    start = dt.datetime.combine(start_date, dt.time(0, 0), tzinfo=dt.timezone.utc)
    end = dt.datetime.combine(end_date, dt.time(23, 59, 59, 999999), tzinfo=dt.timezone.utc)
    return start, end


def build_bundle(
    record: JobRecord,
    config: ServiceConfig,
    catalog: SceneCatalog,
    parcels: list[FieldParcel],
    work_dir: Path,
    out_path: Path,
) -> BundleResult:
    """Assemble the result zip for one request.

    Layout: manifest.json, project.qgs, scenes/<stamp>_<track>_<pass>.tif
    (3-band composites over the AOI), parcels/parcels.shp|.shx|.dbf, and
    timeseries/<parcel_id>.csv. The bundle bytes depend only on the catalog
    content and the request parameters, so identical requests produce
    byte-identical zips. A window with zero scenes still succeeds and yields
    a bundle with an empty scene list.
    """
    aoi_bbox = record.polygon.bbox()
    start, end = season_interval(record.crop, record.year)
    scenes = catalog.query_scenes(aoi_bbox, start, end)

    stage = work_dir / "stage"
    if stage.exists():
        shutil.rmtree(stage)
    (stage / "scenes").mkdir(parents=True)
    (stage / "parcels").mkdir()
    (stage / "timeseries").mkdir()

    mode = record.ratio_mode
    ratio_key = f"ratio_{mode.value}"
    ranges = config.color_ranges
    band_ranges = (
        tuple(ranges["vv_db"]),
        tuple(ranges["vh_db"]),
        tuple(ranges.get(ratio_key, ranges["vv_db"])),
    )

    layer_specs: list[LayerSpec] = []
    scene_entries = []
    scene_layers: list[SceneLayers] = []
    for scene in scenes:
        vv = catalog.get_raster(scene, "VV", aoi_bbox)
        vh = catalog.get_raster(scene, "VH", aoi_bbox)
        composite = analytics.composite_rgb(vv, vh, mode)
        stamp = scene.acquired_at.strftime("%Y%m%dT%H%M%S")
        name = f"{stamp}_{scene.relative_orbit:03d}_{scene.pass_direction}.tif"
        write_geotiff(composite, stage / "scenes" / name)
        layer_specs.append(
            LayerSpec(kind="raster", path=f"scenes/{name}", name=name[:-4], band_ranges=band_ranges)
        )
        scene_entries.append(
            {
                "scene_id": scene.scene_id,
                "acquired_at": scene.acquired_at.isoformat(),
                "pass": scene.pass_direction,
                "relative_orbit": scene.relative_orbit,
                "path": f"scenes/{name}",
            }
        )
        scene_layers.append(
            SceneLayers(scene_id=scene.scene_id, acquired_at=scene.acquired_at, vv_db=vv, vh_db=vh)
        )

    bundle_parcels = clip_parcels_bbox(parcels, aoi_bbox)
    bundle_parcels = sorted(bundle_parcels, key=lambda p: p.parcel_id)
    write_parcels_shapefile(
        bundle_parcels,
        stage / "parcels" / "parcels.shp",
        parcel_id_column=config.parcel_id_column,
        crop_code_column=config.crop_code_column,
        applicant_column=config.applicant_column,
    )
    layer_specs.append(LayerSpec(kind="vector", path="parcels/parcels.shp", name="parcels"))

    filenames = _safe_filenames([p.parcel_id for p in bundle_parcels])
    series_payload = []
    csv_paths = []
    for parcel in bundle_parcels:
        series = build_field_time_series(
            parcel,
            scene_layers,
            erosion_m=config.erosion_m,
            mode=mode,
            map_units_per_meter=config.grid.map_units_per_meter,
        )
        annotated = analytics.align_growth_stages(series, [])
        csv_name = f"timeseries/{filenames[parcel.parcel_id]}.csv"
        analytics.write_time_series_csv(annotated, stage / csv_name)
        csv_paths.append(csv_name)
        series_payload.append(
            {
                "parcel_id": parcel.parcel_id,
                "crop_code": parcel.crop_code,
                "eroded_away": series.eroded_away,
                "samples": [
                    {
                        "timestamp": s.timestamp.isoformat(),
                        "scene_id": s.scene_id,
                        "mean_vv_db": s.mean_vv_db,
                        "mean_vh_db": s.mean_vh_db,
                        "ratio": s.ratio,
                        "pixel_count": s.pixel_count,
                        "stage": None,
                    }
                    for s in series.samples
                ],
            }
        )

    descriptor = build_project_descriptor(layer_specs, config.grid.crs_epsg)
    (stage / "project.qgs").write_bytes(descriptor)

    manifest = {
        "aoi": record.polygon.to_geojson(),
        "crop": record.crop,
        "year": record.year,
        "ratio_mode": mode.value,
        "scene_count": len(scene_entries),
        "scenes": scene_entries,
        "parcel_count": len(bundle_parcels),
        "parcels_path": "parcels/parcels.shp",
        "timeseries": csv_paths,
    }
    (stage / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    tmp_zip = work_dir / "bundle.zip.part"
    _write_zip(tmp_zip, stage)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    os.replace(tmp_zip, out_path)
    shutil.rmtree(stage)

    timeseries = {
        "request_id": record.request_id,
        "ratio_mode": mode.value,
        "scene_count": len(scene_entries),
        "parcels": series_payload,
    }
    return BundleResult(
        zip_path=out_path,
        scene_count=len(scene_entries),
        parcel_count=len(bundle_parcels),
        timeseries=timeseries,
    )


class Worker:
    """Consumes pending requests: builds bundles and settles job status.

    Processing failures never escape process_next_job; they are captured in
    the job record. Notifier failures are logged and do not change status.
    """

    def __init__(self, store: JobStore, catalog: SceneCatalog, config: ServiceConfig, notifier=None):
        self.store = store
        self.catalog = catalog
        self.config = config
        self.notifier = notifier or JournalNotifier(store, config.base_url)
        self.data_root = Path(config.data_root)
        self._parcels: list[FieldParcel] | None = None

    def recover(self) -> list[str]:
        """Requeue stale processing jobs and clear leftover staging files."""
        requeued = self.store.requeue_stale()
        tmp_root = self.data_root / "tmp"
        if tmp_root.exists():
            shutil.rmtree(tmp_root)
        return requeued

    def _load_parcels(self) -> list[FieldParcel]:
        if self._parcels is None:
            if self.config.lpis_shp:
                dbf = self.config.lpis_dbf or str(Path(self.config.lpis_shp).with_suffix(".dbf"))
                self._parcels = read_parcels_shapefile(
                    self.config.lpis_shp,
                    dbf,
                    parcel_id_column=self.config.parcel_id_column,
                    crop_code_column=self.config.crop_code_column,
                    applicant_column=self.config.applicant_column,
                )
            else:
                self._parcels = []
        return self._parcels

    def process_next_job(self) -> str | None:
        request_id = self.store.claim_next(os.getpid())
        if request_id is None:
            return None
        record = self.store.get(request_id)
        try:
            work_dir = self.data_root / "tmp" / request_id
            work_dir.mkdir(parents=True, exist_ok=True)
            out_path = self.data_root / "bundles" / f"{request_id}.zip"
            result = build_bundle(
                record, self.config, self.catalog, self._load_parcels(), work_dir, out_path
            )
            results_dir = self.data_root / "results"
            results_dir.mkdir(parents=True, exist_ok=True)
            series_tmp = work_dir / "timeseries.json.part"
            series_tmp.write_text(json.dumps(result.timeseries, sort_keys=True))
            os.replace(series_tmp, results_dir / f"{request_id}.json")
            shutil.rmtree(work_dir, ignore_errors=True)
            self.store.mark_done(
                request_id,
                bundle_path=str(result.zip_path),
                scene_count=result.scene_count,
                parcel_count=result.parcel_count,
            )
        except Exception as e:  # failures land in the job record, never escape
            log.exception("request %s failed", request_id)
            self.store.mark_failed(request_id, str(e))
        try:
            self.notifier.notify(self.store.get(request_id))
        except Exception:
            log.exception("notifier failed for request %s", request_id)
        return request_id

    def run_forever(self, stop_event: threading.Event | None = None, poll_seconds: float | None = None):
        delay = poll_seconds if poll_seconds is not None else self.config.poll_seconds
        stop = stop_event or threading.Event()
        self.recover()
        while not stop.is_set():
            processed = self.process_next_job()
            if processed is None:
                stop.wait(delay)
