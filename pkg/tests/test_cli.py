import csv
import json
import subprocess
import sys

import pytest

from mvlab.cli import format_value, main, run_experiment
from mvlab.experiments import ConfigError, parse_config

SMALL = {
    "euler_convergence": {"n_steps": [4, 8, 16], "n_ref": 32},
    "picard": {"n_steps": 16, "iterations": 4},
    "stability_initial": {"n_steps": 16, "deltas": [0.4, 0.2, 0.1]},
    "stability_coeffs": {"n_steps": 16, "levels": [1, 2, 4]},
    "stability_driver": {"n_steps": 16, "eps_list": [0.2, 0.1]},
    "property_suite": {"n_steps": 16, "samples": 1000},
}

HEADERS = {
    "euler_convergence": ["n_steps", "mesh", "sup_sq_error", "stderr"],
    "picard": ["iterate", "successive_distance", "moment_p2"],
    "stability_initial": ["delta", "error"],
    "stability_coeffs": ["n", "error"],
    "stability_driver": ["eps", "error"],
    "property_suite": ["property", "value", "threshold", "passed"],
}


def write_config(path, exp, **over):
    cfg = {"experiment": exp, "model": "mean_field_ou", "params": {}, "T": 1.0, "particles": 200, "seed": 5}
    cfg.update(SMALL[exp])
    cfg.update(over)
    path.write_text(json.dumps(cfg, indent=2))
    return path


@pytest.mark.parametrize("experiment", sorted(SMALL))
def test_run_each_experiment(tmp_path, experiment):
    cfg = write_config(tmp_path / "c.json", experiment)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--output-dir", str(out)]) == 0
    with open(out / f"{experiment}.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == HEADERS[experiment]
    assert len(rows) > 1
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["experiment"] == experiment
    assert manifest["seed"] == 5
    assert {"mvlab", "numpy", "python"} <= set(manifest["versions"])
    assert manifest["wall_time_s"] >= 0


def test_euler_manifest_has_slope(tmp_path):
    cfg = write_config(tmp_path / "c.json", "euler_convergence")
    run_experiment(cfg, tmp_path / "o")
    summary = json.loads((tmp_path / "o" / "manifest.json").read_text())["summary"]
    assert "slope" in summary and summary["oracle_mean"] == pytest.approx(0.6065306597)


def test_numbers_round_trip():
    for v in (0.1, 1 / 3, 2.0**-1074, 1e300, -7.123456789012345e-5):
        s = format_value(v)
        assert float(s) == v
    assert format_value(3) == "3"


def test_csv_values_round_trip(tmp_path):
    cfg = write_config(tmp_path / "c.json", "stability_initial")
    run_experiment(cfg, tmp_path / "o")
    rows = list(csv.reader(open(tmp_path / "o" / "stability_initial.csv")))
    assert float(rows[1][0]) == 0.4
    assert all(len(r) == 2 for r in rows)


def test_seed_override_and_threads_env(tmp_path, monkeypatch):
    cfg = write_config(tmp_path / "c.json", "picard")
    monkeypatch.setenv("MVLAB_THREADS", "3")
    assert main(["run", str(cfg), "--output-dir", str(tmp_path / "o"), "--seed", "77"]) == 0
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["seed"] == 77 and manifest["threads"] == 3


def test_malformed_json_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "experiment": "picard",\n  "model": "mean_field_ou"\n  "T": 1\n}')
    assert main(["run", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "line 4" in err and "malformed JSON" in err


def test_bad_value_names_key_and_line(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", "picard", particles=-3)
    assert main(["validate", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "'particles'" in err
    line = next(i for i, l in enumerate(cfg.read_text().splitlines(), 1) if '"particles"' in l)
    assert f"line {line}" in err


@pytest.mark.parametrize(
    "over, key",
    [
        ({"experiment": "nope"}, "experiment"),
        ({"model": "nope"}, "model"),
        ({"params": {"zeta": 1.0}}, "params"),
        ({"T": 0}, "T"),
        ({"n_steps": [4]}, "n_steps"),
        ({"seed": -1}, "seed"),
        ({"banana": 1}, "banana"),
        ({"iterations": 0}, "iterations"),
    ],
)
def test_validation_errors(tmp_path, over, key):
    cfg = write_config(tmp_path / "c.json", "picard", **over)
    with pytest.raises(ConfigError) as err:
        parse_config(cfg.read_text())
    assert err.value.key == key


def test_missing_key():
    with pytest.raises(ConfigError) as err:
        parse_config('{"experiment": "picard"}')
    assert err.value.key == "model"


def test_euler_grids_must_nest(tmp_path):
    cfg = write_config(tmp_path / "c.json", "euler_convergence", n_steps=[3, 8], n_ref=16)
    with pytest.raises(ConfigError) as err:
        parse_config(cfg.read_text())
    assert err.value.key == "n_ref"


def test_blow_up_exit_3(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", "picard", params={"a": 1e300}, x0=1e10)
    assert main(["run", str(cfg), "--output-dir", str(tmp_path / "o")]) == 3
    assert "particle" in capsys.readouterr().err


def test_validate_and_list_models(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", "stability_coeffs", model="osgood_drift")
    assert main(["validate", str(cfg)]) == 0
    assert main(["list-models"]) == 0
    out = capsys.readouterr().out
    assert "ok" in out and "osgood_drift" in out and "mckean_kernel:attraction" in out


def test_missing_file_exit_2(tmp_path):
    assert main(["run", str(tmp_path / "nope.json")]) == 2


def test_console_script(tmp_path):
    cfg = write_config(tmp_path / "c.json", "stability_driver")
    proc = subprocess.run(
        [sys.executable, "-m", "mvlab", "run", str(cfg), "--output-dir", str(tmp_path / "o"), "--threads", "2"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o" / "stability_driver.csv").exists()


def test_shipped_configs_validate():
    import pathlib

    configs = sorted((pathlib.Path(__file__).parent.parent / "configs").glob("*.json"))
    assert configs
    for path in configs:
        parse_config(path.read_text())
