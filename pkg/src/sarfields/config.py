"""Service configuration: analysis grid, paths, filter parameters, color ranges."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .analytics import RatioMode
from .speckle import SpeckleFilterParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """The fixed analysis lattice every ingested scene is resampled onto.

    origin_x/origin_y anchor the lattice (any lattice point); scene grids
    snap to whole pixels of it so all analysis-ready layers align exactly.
    map_units_per_meter converts metric quantities (erosion radius, nominal
    pitch) into the CRS's map units: 1.0 for projected metric systems, about
    1/111320 per degree of latitude for EPSG:4326 deployments.
    """

    crs_epsg: int = 4326
    origin_x: float = 0.0
    origin_y: float = 90.0
    pixel_size: float = 1e-4
    map_units_per_meter: float = 1e-5

    def __post_init__(self):
        if self.pixel_size <= 0 or self.map_units_per_meter <= 0:
            raise ConfigError("grid pixel size and meter scale must be positive")

    @property
    def pixel_size_m(self) -> float:
        return self.pixel_size / self.map_units_per_meter


# Display ranges for bundle rasters. The dB presets are the service's
# long-standing wide defaults; the ratio presets are the 2nd-98th percentile
# of the year-scale sample produced by scripts/color_ranges.py.
DEFAULT_COLOR_RANGES: dict[str, tuple[float, float]] = {
    "vv_db": (-25.0, 0.0),
    "vh_db": (-32.0, -5.0),
    "ratio_db_quotient": (0.44, 0.82),
    "ratio_db_difference": (2.86, 11.14),
}


@dataclass
class ServiceConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    catalog_root: str = "catalog"
    data_root: str = "data"
    lpis_shp: str | None = None
    lpis_dbf: str | None = None
    parcel_id_column: str = "parcel_id"
    crop_code_column: str = "crop_code"
    applicant_column: str = "applicant"
    speckle: SpeckleFilterParams = field(default_factory=SpeckleFilterParams)
    erosion_m: float = 30.0
    default_ratio_mode: RatioMode = RatioMode.DB_QUOTIENT
    color_ranges: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_COLOR_RANGES)
    )
    worker_count: int = 1
    host: str = "127.0.0.1"
    port: int = 8766
    poll_seconds: float = 0.5
    webui_root: str | None = None
    base_url: str = ""

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path | None = None) -> "ServiceConfig":
        raw = dict(raw)
        kwargs = {}
        if "grid" in raw:
            kwargs["grid"] = GridSpec(**raw.pop("grid"))
        if "speckle" in raw:
            sp = dict(raw.pop("speckle"))
            sp.pop("range_params", None)  # always rederived
            kwargs["speckle"] = SpeckleFilterParams(**sp)
        if "default_ratio_mode" in raw:
            kwargs["default_ratio_mode"] = RatioMode(raw.pop("default_ratio_mode"))
        if "color_ranges" in raw:
            kwargs["color_ranges"] = {
                k: (float(v[0]), float(v[1])) for k, v in raw.pop("color_ranges").items()
            }
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        kwargs.update(raw)
        cfg = cls(**kwargs)
        if base_dir is not None:
            cfg.catalog_root = str(_resolve(base_dir, cfg.catalog_root))
            cfg.data_root = str(_resolve(base_dir, cfg.data_root))
            if cfg.lpis_shp:
                cfg.lpis_shp = str(_resolve(base_dir, cfg.lpis_shp))
            if cfg.lpis_dbf:
                cfg.lpis_dbf = str(_resolve(base_dir, cfg.lpis_dbf))
            if cfg.webui_root:
                cfg.webui_root = str(_resolve(base_dir, cfg.webui_root))
        return cfg

    @classmethod
    def from_file(cls, path) -> "ServiceConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot load configuration {path}: {e}") from e
        return cls.from_dict(raw, base_dir=path.parent)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["default_ratio_mode"] = self.default_ratio_mode.value
        out["speckle"].pop("range_params", None)
        return out

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def _resolve(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p
