import json
import subprocess
import sys
from importlib.resources import files

import pytest

from seabed_outliers.cli import COMMANDS, main

SMALL = {
    "grid": {"n_cells": 60},
    "experiment": {"count_model_samples": 500, "mc_samples": 500, "classification_iterations": 40,
                   "detection_trials": 200, "replications": 2, "scales": [1.0, 7.0]},
}


def write_config(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture
def small_config(tmp_path):
    return write_config(tmp_path, SMALL)


def outputs(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.is_file()}


def test_gap_outputs(small_config, tmp_path):
    out = tmp_path / "gap"
    assert main(["gap", "--config", str(small_config), "--seed", "1", "--out", str(out)]) == 0
    header = (out / "gap.csv").read_text().splitlines()[0].split(",")
    assert header == ["s_km", "p_mc", "p_mc_se", "p_mean_only", "p_second_order", "J", "J_tilde",
                      "bound_J_upper", "bound_Jt_lower", "bound_Jt_upper"]
    assert len((out / "gap.csv").read_text().splitlines()) == 61
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 1 and set(manifest["files"]) == {"gap.csv", "gap_summary.json", "curves.csv"}


@pytest.mark.parametrize("command", COMMANDS)
def test_commands_are_byte_reproducible(command, small_config, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([command, "--config", str(small_config), "--seed", "7", "--out", str(a)]) == 0
    assert main([command, "--config", str(small_config), "--seed", "7", "--out", str(b)]) == 0
    assert outputs(a) == outputs(b)
    assert not [p for p in a.iterdir() if p.is_dir()]


def test_seed_changes_output(small_config, tmp_path):
    main(["synth", "--config", str(small_config), "--seed", "1", "--out", str(tmp_path / "a")])
    main(["synth", "--config", str(small_config), "--seed", "2", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "dataset.csv").read_bytes() != (tmp_path / "b" / "dataset.csv").read_bytes()


def test_place_seven_sensors(small_config, tmp_path):
    out = tmp_path / "p"
    assert main(["place", "--config", str(small_config), "--seed", "3", "--out", str(out)]) == 0
    doc = json.loads((out / "placement.json").read_text())
    assert len(doc["sensors_km"]) == 7 and len(doc["trace"]) == 8
    obj = [t["objective"] for t in doc["trace"]]
    assert all(b >= a for a, b in zip(obj, obj[1:]))


def test_pipeline_workers_do_not_change_results(tmp_path):
    cfg = write_config(tmp_path, SMALL)
    main(["pipeline", "--config", str(cfg), "--out", str(tmp_path / "a"), "--workers", "1"])
    main(["pipeline", "--config", str(cfg), "--out", str(tmp_path / "b"), "--workers", "2"])
    assert outputs(tmp_path / "a") == outputs(tmp_path / "b")


def test_config_error_names_field(tmp_path, capsys):
    cfg = write_config(tmp_path, {"grid": {"n_cells": 1}})
    out = tmp_path / "o"
    assert main(["fit", "--config", str(cfg), "--out", str(out)]) == 2
    assert "grid.n_cells" in capsys.readouterr().err


def test_unknown_key_and_bad_json(tmp_path):
    assert main(["fit", "--config", str(write_config(tmp_path, {"gird": {}})), "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["fit", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["fit", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2


def test_data_error_leaves_no_partial_outputs(tmp_path, capsys):
    ais = tmp_path / "ais.csv"
    ais.write_text("MMSI,LAT,LON\n1,36.9,-76.0\n")
    doc = {"history": {"source": "ais", "ais": {
        "path": "ais.csv", "endpoint_a": [36.95, -76.10], "endpoint_b": [36.95, -75.953707],
        "corridor_halfwidth_km": 1.0, "window": ["2021-04-01T00:00:00", "2021-04-02T00:00:00"]}}}
    cfg = write_config(tmp_path, doc)
    out = tmp_path / "o"
    assert main(["fit", "--config", str(cfg), "--out", str(out)]) == 3
    assert "BaseDateTime" in capsys.readouterr().err
    assert list(out.iterdir()) == []


def test_bundled_ais_example(tmp_path):
    cfg = files("seabed_outliers").joinpath("data/example_ais.json")
    out = tmp_path / "fit"
    assert main(["fit", "--config", str(cfg), "--out", str(out)]) == 0
    doc = json.loads((out / "count_model.json").read_text())
    assert doc["skipped_rows"] == 2 and doc["n_arrivals"] > 0


def test_module_entry_point(small_config, tmp_path):
    res = subprocess.run([sys.executable, "-m", "seabed_outliers", "synth", "--config",
                          str(small_config), "--out", str(tmp_path / "m")], capture_output=True)
    assert res.returncode == 0 and (tmp_path / "m" / "dataset.csv").exists()
