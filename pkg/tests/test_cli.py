from pathlib import Path

import numpy as np

from sarfields.cli import main
from sarfields.geotiff import read_geotiff

from conftest import AOI_GEOJSON, _write_scene_inputs


def test_season_prints_window(capsys):
    assert main(["season", "--crop", "Winter wheat", "--year", "2017"]) == 0
    out = capsys.readouterr().out
    assert "2016-08-15" in out and "2017-10-01" in out


def test_season_lists_all_crops(capsys):
    main(["season", "--year", "2018"])
    out = capsys.readouterr().out
    assert out.count("..") == 7
    assert "Vinterhvede" in out


def test_ingest_cli(demo_config, tmp_path, capsys):
    config_path = tmp_path / "config.json"
    demo_config.catalog_root = str(tmp_path / "cat")  # fresh catalog for this test
    demo_config.save(config_path)
    vv, vh, meta = _write_scene_inputs(
        tmp_path / "raw", "CLI_SCENE", "2017-06-05T05:30:00+00:00", "ASCENDING", 44
    )
    code = main(["ingest", "--config", str(config_path), "--vv", str(vv), "--vh", str(vh), "--meta", str(meta)])
    assert code == 0
    assert "CLI_SCENE" in capsys.readouterr().out
    assert (tmp_path / "cat" / "CLI_SCENE" / "VV.tif").exists()


def test_worker_once_and_timeseries_and_cluster(demo_config, tmp_path, capsys):
    config_path = tmp_path / "config.json"
    demo_config.save(config_path)
    from sarfields.jobs import JobStore

    store = JobStore(Path(demo_config.data_root) / "jobs.jsonl")
    rid = store.submit_request(AOI_GEOJSON, "user@example.org", "Winter wheat", 2017)

    assert main(["worker", "--config", str(config_path), "--once"]) == 0
    assert rid in capsys.readouterr().out
    assert store.get(rid).status == "done"

    out_csv = tmp_path / "series.csv"
    code = main(
        [
            "timeseries",
            "--config", str(config_path),
            "--parcel-id", "DK-001",
            "--crop", "Winter wheat",
            "--year", "2017",
            "--out", str(out_csv),
        ]
    )
    assert code == 0
    lines = out_csv.read_text().strip().split("\n")
    assert lines[0].startswith("parcel_id,timestamp")
    assert len(lines) == 1 + 3  # three scenes in the window

    labels_tif = tmp_path / "labels.tif"
    plan_csv = tmp_path / "plan.csv"
    code = main(
        [
            "cluster",
            "--config", str(config_path),
            "--parcel-id", "DK-001",
            "--scene-id", "S1A_20170501",
            "--k", "3",
            "--out-labels", str(labels_tif),
            "--out-plan", str(plan_csv),
        ]
    )
    assert code == 0
    labels = read_geotiff(labels_tif)
    codes = np.unique(labels.values[labels.valid])
    assert set(codes) <= {0.0, 1.0, 2.0}
    plan_lines = plan_csv.read_text().strip().split("\n")
    assert plan_lines[0] == "label,col,row,map_x,map_y"
    assert len(plan_lines) > 1
