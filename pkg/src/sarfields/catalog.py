"""Scene catalog: ingestion pipeline, durable journal, and spatio-temporal queries.

Persistence is a line-delimited JSON journal plus per-scene GeoTIFF layers
under `<root>/<scene_id>/<POL>.tif`. Ingestion is atomic per scene: layers
are written to a temp directory that is renamed into place before the
journal entry is appended; on open, layer directories without a journal
entry are removed as crash leftovers, and a partial trailing journal line
is ignored.
"""
from __future__ import annotations

import datetime as dt
import json
import math
import os
import shutil
from dataclasses import dataclass
from pathlib import Path

from .calibration import CalibrationLUT, calibrate_sigma0, to_db
from .config import GridSpec
from .geotiff import read_geotiff, write_geotiff
from .raster import CRSMismatchError, GridGeometry, Raster, resample_bilinear, subset_bbox
from .speckle import SpeckleFilterParams, lee_sigma_filter
from .vector import Bbox, bbox_intersects

POLARIZATIONS = ("VV", "VH")
PASS_DIRECTIONS = ("ASCENDING", "DESCENDING")


class CatalogError(ValueError):
    pass


class DuplicateSceneError(CatalogError):
    pass


class MissingPolarizationError(CatalogError):
    pass


class SidecarError(CatalogError):
    pass


class CatalogCorruptionError(CatalogError):
    pass


class IngestError(CatalogError):
    pass


@dataclass(frozen=True)
class SceneRecord:
    scene_id: str
    acquired_at: dt.datetime
    pass_direction: str
    relative_orbit: int
    footprint_bbox: Bbox
    polarizations: tuple[str, ...]
    product_paths: dict[str, str]  # polarization -> path relative to catalog root
    status: str  # "ingested" | "failed"
    message: str | None = None

    def to_json(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "acquired_at": self.acquired_at.isoformat(),
            "pass": self.pass_direction,
            "relative_orbit": self.relative_orbit,
            "footprint_bbox": list(self.footprint_bbox),
            "polarizations": list(self.polarizations),
            "product_paths": self.product_paths,
            "status": self.status,
            "message": self.message,
        }

    @classmethod
    def from_json(cls, raw: dict) -> "SceneRecord":
        return cls(
            scene_id=raw["scene_id"],
            acquired_at=parse_timestamp(raw["acquired_at"]),
            pass_direction=raw["pass"],
            relative_orbit=int(raw["relative_orbit"]),
            footprint_bbox=tuple(raw["footprint_bbox"]),
            polarizations=tuple(raw["polarizations"]),
            product_paths=dict(raw["product_paths"]),
            status=raw["status"],
            message=raw.get("message"),
        )


def parse_timestamp(text: str) -> dt.datetime:
    when = dt.datetime.fromisoformat(text.replace("Z", "+00:00"))
    if when.tzinfo is None:
        when = when.replace(tzinfo=dt.timezone.utc)
    return when.astimezone(dt.timezone.utc)


@dataclass(frozen=True)
class SceneMetadata:
    scene_id: str
    acquired_at: dt.datetime
    pass_direction: str
    relative_orbit: int
    calibration: dict[str, CalibrationLUT]


def parse_sidecar(path) -> SceneMetadata:
    """Validate and load the scene metadata sidecar (JSON document)."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise SidecarError(f"cannot read sidecar {path}: {e}") from e
    for key in ("scene_id", "acquired_at", "pass", "relative_orbit", "calibration"):
        if key not in raw:
            raise SidecarError(f"sidecar lacks required field {key!r}")
    scene_id = raw["scene_id"]
    if not isinstance(scene_id, str) or not scene_id:
        raise SidecarError("scene_id must be a non-empty string")
    if any(ch in scene_id for ch in "/\\\0") or scene_id in (".", ".."):
        raise SidecarError(f"scene_id {scene_id!r} is not a safe directory name")
    if raw["pass"] not in PASS_DIRECTIONS:
        raise SidecarError(f"pass must be one of {PASS_DIRECTIONS}, got {raw['pass']!r}")
    try:
        acquired = parse_timestamp(raw["acquired_at"])
    except ValueError as e:
        raise SidecarError(f"bad acquired_at: {e}") from e
    calibration = {}
    if not isinstance(raw["calibration"], dict):
        raise SidecarError("calibration must map polarization to gain vectors")
    for pol, vectors in raw["calibration"].items():
        if pol not in POLARIZATIONS:
            raise SidecarError(f"unknown polarization {pol!r} in calibration")
        try:
            rows = [
                (vec["line"], [(pt["pixel"], pt["gain"]) for pt in vec["points"]])
                for vec in vectors
            ]
            calibration[pol] = CalibrationLUT.from_rows(rows)
        except (KeyError, TypeError, ValueError) as e:
            raise SidecarError(f"bad calibration table for {pol}: {e}") from e
    return SceneMetadata(
        scene_id=scene_id,
        acquired_at=acquired,
        pass_direction=raw["pass"],
        relative_orbit=int(raw["relative_orbit"]),
        calibration=calibration,
    )


def snap_to_lattice(extent: Bbox, grid: GridSpec) -> GridGeometry:
    """Smallest lattice-aligned grid covering the extent."""
    min_x, min_y, max_x, max_y = extent
    p = grid.pixel_size
    c0 = math.floor((min_x - grid.origin_x) / p)
    c1 = math.ceil((max_x - grid.origin_x) / p)
    r0 = math.floor((grid.origin_y - max_y) / p)
    r1 = math.ceil((grid.origin_y - min_y) / p)
    return GridGeometry(
        width=c1 - c0,
        height=r1 - r0,
        origin_x=grid.origin_x + c0 * p,
        origin_y=grid.origin_y - r0 * p,
        pixel_size_x=p,
        pixel_size_y=p,
        crs_epsg=grid.crs_epsg,
    )


class SceneCatalog:
    """Append-only scene store; one writer, any number of readers."""

    def __init__(self, root, grid: GridSpec, speckle: SpeckleFilterParams | None = None):
        self.root = Path(root)
        self.grid = grid
        self.speckle = speckle or SpeckleFilterParams()
        self.root.mkdir(parents=True, exist_ok=True)
        self.journal_path = self.root / "journal.jsonl"
        self._records: dict[str, SceneRecord] = {}
        self._order: list[str] = []
        self._replay()
        self._clean_orphans()

    def _replay(self) -> None:
        self._records.clear()
        self._order.clear()
        if not self.journal_path.exists():
            return
        data = self.journal_path.read_bytes()
        for line in data.split(b"\n")[:-1]:  # a partial trailing line has no newline
            if not line.strip():
                continue
            record = SceneRecord.from_json(json.loads(line.decode("utf-8")))
            if record.scene_id not in self._records:
                self._order.append(record.scene_id)
            self._records[record.scene_id] = record

    def _clean_orphans(self) -> None:
        for child in self.root.iterdir():
            if child.is_dir() and child.name not in self._records:
                shutil.rmtree(child)

    def _append(self, record: SceneRecord) -> None:
        line = json.dumps(record.to_json(), sort_keys=True) + "\n"
        with open(self.journal_path, "ab") as fh:
            fh.write(line.encode("utf-8"))
            fh.flush()
            os.fsync(fh.fileno())
        if record.scene_id not in self._records:
            self._order.append(record.scene_id)
        self._records[record.scene_id] = record

    def __len__(self) -> int:
        return len(self._records)

    def get(self, scene_id: str) -> SceneRecord:
        if scene_id not in self._records:
            raise CatalogError(f"scene {scene_id!r} not in catalog")
        return self._records[scene_id]

    def _process_polarization(self, dn_path, lut: CalibrationLUT) -> Raster:
        dn = read_geotiff(dn_path)
        if dn.geometry.crs_epsg != self.grid.crs_epsg:
            raise CRSMismatchError(
                f"scene CRS {dn.geometry.crs_epsg} does not match catalog CRS {self.grid.crs_epsg}"
            )
        sigma0 = calibrate_sigma0(dn, lut)
        filtered = lee_sigma_filter(sigma0, self.speckle)
        target = snap_to_lattice(dn.geometry.extent, self.grid)
        resampled = resample_bilinear(filtered, target)
        return to_db(resampled)

    def ingest_scene(self, vv_dn_path, vh_dn_path, sidecar_path) -> SceneRecord:
        """Run the calibration/filter/resample/dB pipeline and store the scene.

        Pipeline failures are recorded as a `failed` journal entry and then
        re-raised; duplicate scene ids are rejected before anything is written.
        """
        meta = parse_sidecar(sidecar_path)
        if meta.scene_id in self._records:
            raise DuplicateSceneError(f"scene {meta.scene_id!r} already ingested")
        if vv_dn_path is None or vh_dn_path is None:
            raise MissingPolarizationError(
                f"scene {meta.scene_id!r}: dual polarization requires both VV and VH rasters"
            )
        for pol in POLARIZATIONS:
            if pol not in meta.calibration:
                raise MissingPolarizationError(
                    f"scene {meta.scene_id!r}: sidecar lacks {pol} calibration"
                )

        try:
            layers = {
                "VV": self._process_polarization(vv_dn_path, meta.calibration["VV"]),
                "VH": self._process_polarization(vh_dn_path, meta.calibration["VH"]),
            }
            if layers["VV"].geometry != layers["VH"].geometry:
                raise IngestError("VV and VH rasters do not share an extent")
        except Exception as e:
            failed = SceneRecord(
                scene_id=meta.scene_id,
                acquired_at=meta.acquired_at,
                pass_direction=meta.pass_direction,
                relative_orbit=meta.relative_orbit,
                footprint_bbox=(0.0, 0.0, 0.0, 0.0),
                polarizations=(),
                product_paths={},
                status="failed",
                message=str(e),
            )
            self._append(failed)
            raise IngestError(f"scene {meta.scene_id!r} pipeline failed: {e}") from e

        tmp_dir = self.root / f".tmp-{meta.scene_id}"
        if tmp_dir.exists():
            shutil.rmtree(tmp_dir)
        tmp_dir.mkdir(parents=True)
        paths = {}
        for pol, layer in layers.items():
            write_geotiff(layer, tmp_dir / f"{pol}.tif")
            paths[pol] = f"{meta.scene_id}/{pol}.tif"
        final_dir = self.root / meta.scene_id
        os.replace(tmp_dir, final_dir)

        record = SceneRecord(
            scene_id=meta.scene_id,
            acquired_at=meta.acquired_at,
            pass_direction=meta.pass_direction,
            relative_orbit=meta.relative_orbit,
            footprint_bbox=layers["VV"].geometry.extent,
            polarizations=POLARIZATIONS,
            product_paths=paths,
            status="ingested",
        )
        self._append(record)
        return record

    def query_scenes(self, bbox: Bbox, start: dt.datetime, end: dt.datetime) -> list[SceneRecord]:
        """Ingested scenes intersecting bbox with acquired_at in [start, end]."""
        if start > end:
            raise CatalogError("query interval start must not exceed end")
        hits = [
            r
            for r in self._records.values()
            if r.status == "ingested"
            and bbox_intersects(r.footprint_bbox, bbox)
            and start <= r.acquired_at <= end
        ]
        hits.sort(key=lambda r: (r.acquired_at, r.scene_id))
        return hits

    def get_raster(self, record: SceneRecord, polarization: str, bbox: Bbox | None = None) -> Raster:
        """Stored dB layer of one polarization, optionally subset to bbox."""
        if polarization not in record.product_paths:
            raise MissingPolarizationError(
                f"scene {record.scene_id!r} has no {polarization} layer"
            )
        path = self.root / record.product_paths[polarization]
        if not path.exists():
            raise CatalogCorruptionError(
                f"scene {record.scene_id!r}: layer file {path} is missing from the catalog"
            )
        raster = read_geotiff(path)
        if bbox is not None:
            raster = subset_bbox(raster, bbox)
        return raster
