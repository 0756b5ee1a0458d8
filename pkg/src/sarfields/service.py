"""HTTP API over the request store: submission, status, bundles, crop calendar."""
from __future__ import annotations

import json
import threading
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from .catalog import SceneCatalog
from .config import ServiceConfig
from .crops import list_crops
from .jobs import DONE, JobStore, RequestValidationError, Worker

API_ERRORS = {
    "invalid_email": 400,
    "invalid_polygon": 400,
    "not_single_polygon": 400,
    "aoi_too_large": 400,
    "unknown_crop": 400,
    "invalid_year": 400,
    "invalid_ratio_mode": 400,
    "missing_field": 400,
    "not_found": 404,
    "not_ready": 409,
}


def _error(code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=API_ERRORS.get(code, 400), content={"error": code, "message": message})


def create_app(
    config: ServiceConfig,
    store: JobStore | None = None,
    catalog: SceneCatalog | None = None,
    notifier=None,
    run_workers: bool | None = None,
) -> FastAPI:
    """Build the API application.

    With run_workers enabled (the default when config.worker_count > 0) the
    app hosts that many in-process worker threads for the lifetime of the
    server; a standalone `sarfields worker` process is the alternative.
    """
    store = store or JobStore(Path(config.data_root) / "jobs.jsonl")
    catalog = catalog or SceneCatalog(config.catalog_root, config.grid, config.speckle)
    should_run_workers = config.worker_count > 0 if run_workers is None else run_workers

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        stop = threading.Event()
        threads = []
        if should_run_workers:
            for _ in range(config.worker_count):
                worker = Worker(store, catalog, config, notifier=notifier)
                thread = threading.Thread(target=worker.run_forever, args=(stop,), daemon=True)
                thread.start()
                threads.append(thread)
        try:
            yield
        finally:
            stop.set()
            for thread in threads:
                thread.join(timeout=5)

    app = FastAPI(title="sarfields", lifespan=lifespan)

    @app.post("/api/requests")
    async def submit(request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return _error("invalid_polygon", "request body is not valid JSON")
        for required in ("geojson", "email", "crop", "year"):
            if required not in body:
                return _error("missing_field", f"request body lacks {required!r}")
        geojson = body["geojson"]
        if not isinstance(geojson, str):
            geojson = json.dumps(geojson)
        try:
            request_id = store.submit_request(
                geojson=geojson,
                email=body["email"],
                crop=body["crop"],
                year=body["year"],
                ratio_mode=body.get("ratio_mode"),
            )
        except RequestValidationError as e:
            return _error(e.code, str(e))
        return {"request_id": request_id}

    @app.get("/api/requests/{request_id}")
    def status(request_id: str):
        record = store.get(request_id)
        if record is None:
            return _error("not_found", f"no request {request_id!r}")
        return record.public_view()

    @app.get("/api/requests/{request_id}/bundle.zip")
    def bundle(request_id: str):
        record = store.get(request_id)
        if record is None:
            return _error("not_found", f"no request {request_id!r}")
        if record.status != DONE or not record.bundle_path:
            return _error("not_ready", f"request {request_id} is {record.status}, not done")
        return FileResponse(record.bundle_path, media_type="application/zip", filename="bundle.zip")

    @app.get("/api/requests/{request_id}/timeseries.json")
    def timeseries(request_id: str):
        record = store.get(request_id)
        if record is None:
            return _error("not_found", f"no request {request_id!r}")
        if record.status != DONE:
            return _error("not_ready", f"request {request_id} is {record.status}, not done")
        path = Path(config.data_root) / "results" / f"{request_id}.json"
        if not path.exists():
            return _error("not_found", "result data missing")
        return Response(content=path.read_bytes(), media_type="application/json")

    @app.get("/api/crops")
    def crops():
        return [
            {
                "lpis_name": season.lpis_name,
                "english_name": season.english_name,
                "start": f"{season.start_month_day[0]:02d}-{season.start_month_day[1]:02d}",
                "start_year_offset": season.start_year_offset,
                "end": f"{season.end_month_day[0]:02d}-{season.end_month_day[1]:02d}",
                "end_year_offset": season.end_year_offset,
            }
            for season in list_crops()
        ]

    if config.webui_root and Path(config.webui_root).is_dir():
        app.mount("/", StaticFiles(directory=config.webui_root, html=True), name="webui")

    return app
