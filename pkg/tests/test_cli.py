#!/usr/bin/env python3
"""
End-to-end tests for the command-line interface: JSON payloads, output files
and exit codes.
"""

import json
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml
from jsonschema import Draft202012Validator

# Add the project root to the path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from main import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main

OUTPUT_SCHEMA = json.loads((project_root / "data" / "schema" / "output.schema.json").read_text())
VALIDATOR = Draft202012Validator(OUTPUT_SCHEMA)


def write_panel(path: Path, waves) -> Path:
    lines = ["id,time,value"]
    for i, values in enumerate(zip(*waves)):
        for t, v in enumerate(values, start=1):
            lines.append(f"u{i},{t},{v!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def small_panel(tmp_path):
    return write_panel(tmp_path / "panel.csv", [[12.0, 2.0, 20.0, 4.0], [12.0, 2.0, 20.0, 4.0]])


@pytest.fixture
def wide_panel(tmp_path):
    first = np.random.default_rng(5).uniform(0.0, 20.0, size=80).round(3).tolist()
    return write_panel(tmp_path / "wide.csv", [first, first])


def run_json(capsys, argv):
    code = main(argv + ["--json", "--quiet"])
    payload = json.loads(capsys.readouterr().out)
    VALIDATOR.validate(payload)
    return code, payload


def test_output_schema_is_valid():
    Draft202012Validator.check_schema(OUTPUT_SCHEMA)
    assert not VALIDATOR.is_valid({"command": "compute", "index": "fgt(0)", "n": 0, "values": []})
    assert not VALIDATOR.is_valid({"command": "simulate", "experiment": "clt"})


def test_compute_fgt(capsys, small_panel):
    code, payload = run_json(capsys, ["compute", "--input", str(small_panel), "--index", "fgt",
                                      "--alpha", "1", "--z", "10"])
    assert code == EXIT_OK
    assert payload["command"] == "compute"
    assert payload["n"] == 4
    assert [row["J"] for row in payload["values"]] == [pytest.approx(0.35), pytest.approx(0.35)]


def test_compute_kakwani_single_time(capsys, small_panel):
    code, payload = run_json(capsys, ["compute", "-i", str(small_panel), "--index", "kakwani",
                                      "--k", "1", "--z", "10", "--times", "2"])
    assert code == EXIT_OK
    assert payload["index"] == "kakwani(1)"
    assert len(payload["values"]) == 1
    assert payload["values"][0]["J"] == pytest.approx(0.3666667, rel=1e-6)


def test_series_text_output(capsys, small_panel, tmp_path):
    out = tmp_path / "series.csv"
    code = main(["series", "-i", str(small_panel), "--index", "thon", "--z", "10", "-o", str(out), "-q"])
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "time,J"
    assert float(lines[1].split(",")[1]) == pytest.approx(0.5375)
    assert "time,J" in capsys.readouterr().out


def test_cov_plugin_csv(capsys, wide_panel, tmp_path):
    out = tmp_path / "cov.csv"
    code = main(["cov", "-i", str(wide_panel), "--index", "shorrocks", "--z", "10", "-o", str(out), "-q"])
    assert code == EXIT_OK
    assert out.read_text().splitlines()[0] == "time,1,2"
    assert "Gamma" in capsys.readouterr().out


def test_cov_plugin_json(capsys, wide_panel):
    code, payload = run_json(capsys, ["cov", "-i", str(wide_panel), "--index", "fgt", "--alpha", "0",
                                      "--z", "10"])
    assert code == EXIT_OK
    gamma = np.array(payload["gamma"])
    assert gamma.shape == (2, 2)
    assert gamma[0, 1] == pytest.approx(gamma[0, 0])
    assert payload["method"] == "plug-in-empirical"


def test_variation_identical_waves(capsys, wide_panel):
    code, payload = run_json(capsys, ["variation", "-i", str(wide_panel), "--index", "fgt", "--alpha", "1",
                                      "--z", "10", "--times", "1,2", "--target", "-0.5"])
    assert code == EXIT_OK
    assert payload["delta_j"] == 0.0
    assert payload["verdict"] == "not-achieved"


def test_variation_needs_two_times(capsys, small_panel):
    code = main(["variation", "-i", str(small_panel), "--index", "fgt", "--z", "10", "--times", "1", "-q"])
    assert code == EXIT_USAGE
    assert "two times" in capsys.readouterr().err


def test_simulate_needs_seed(capsys):
    code = main(["simulate", "--experiment", "clt", "--index", "thon", "--z", "0.5", "-q"])
    assert code == EXIT_USAGE
    assert "--seed" in capsys.readouterr().err


def test_simulate_point_mass_clt(capsys, tmp_path):
    model = tmp_path / "point.yaml"
    model.write_text(yaml.safe_dump({
        "times": [1.0, 2.0],
        "marginals": {"law": "point_mass", "value": 0.2},
    }))
    code, payload = run_json(capsys, ["simulate", "--experiment", "clt", "--model", str(model),
                                      "--index", "thon", "--z", "0.5", "--seed", "3",
                                      "--n", "40", "-R", "10"])
    assert code == EXIT_OK
    assert payload["experiment"] == "clt"
    assert payload["passed"] is True
    assert payload["provenance"]["seed"] == 3
    assert len(payload["provenance"]["config_hash"]) == 40
    assert "statistics" not in payload


def test_check_panel(capsys, small_panel):
    code, payload = run_json(capsys, ["check", "-i", str(small_panel), "--z", "10"])
    assert code == EXIT_OK
    assert payload["command"] == "check"
    assert "issues" in payload


def test_config_file_supplies_defaults(capsys, small_panel, tmp_path):
    config = tmp_path / "run.conf"
    config.write_text("index.kind = fgt\nindex.alpha = 2\nthreshold.z = 10\n")
    code, payload = run_json(capsys, ["compute", "-i", str(small_panel), "--config", str(config)])
    assert code == EXIT_OK
    assert payload["index"] == "fgt(2)"
    assert payload["values"][0]["J"] == pytest.approx(0.25)


def test_usage_errors(capsys, small_panel, tmp_path):
    assert main(["compute", "--index", "nope"]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE
    assert main(["compute", "-i", str(tmp_path / "missing.csv"), "--z", "10", "-q"]) == EXIT_USAGE
    assert main(["compute", "-i", str(small_panel), "-q"]) == EXIT_USAGE
    assert main(["simulate", "--experiment", "bogus", "--seed", "1", "-q"]) == EXIT_USAGE
    capsys.readouterr()


def test_data_error_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("id,time,value\na,1,3\na,1,4\n", encoding="utf-8")
    assert main(["compute", "-i", str(bad), "--z", "10", "-q"]) == EXIT_FAILURE
    assert "DuplicateObservation" in capsys.readouterr().err


def test_create_config(capsys, tmp_path):
    path = tmp_path / "default.yaml"
    assert main(["create-config", str(path)]) == EXIT_OK
    assert yaml.safe_load(path.read_text())["quadrature"]["prob_nodes"] == 4097


def test_simulate_exports_events(capsys, tmp_path):
    model = tmp_path / "point.yaml"
    model.write_text(yaml.safe_dump({"times": [1.0, 2.0], "marginals": {"law": "point_mass", "value": 0.2}}))
    events = tmp_path / "events.json"
    code, payload = run_json(capsys, ["simulate", "--experiment", "clt", "--model", str(model),
                                      "--index", "fgt", "--z", "0.5", "--seed", "4",
                                      "--n", "20", "-R", "5", "--events", str(events)])
    assert code == EXIT_OK
    data = json.loads(events.read_text())
    assert data["events"]
    assert data["provenance"]["config_hash"] == payload["provenance"]["config_hash"]


def test_series_json(capsys, small_panel):
    code, payload = run_json(capsys, ["series", "-i", str(small_panel), "--index", "thon", "--z", "10"])
    assert code == EXIT_OK
    assert [row["time"] for row in payload["series"]] == [1.0, 2.0]


def test_variation_target_from_config(capsys, wide_panel, tmp_path):
    config = tmp_path / "run.conf"
    config.write_text("variation.target = -0.5\n")
    code, payload = run_json(capsys, ["variation", "-i", str(wide_panel), "--index", "fgt", "--alpha", "1",
                                      "--z", "10", "--times", "1,2", "--config", str(config)])
    assert code == EXIT_OK
    assert payload["target"] == -0.5
    assert payload["verdict"] == "not-achieved"

    code, payload = run_json(capsys, ["variation", "-i", str(wide_panel), "--index", "fgt", "--alpha", "1",
                                      "--z", "10", "--times", "1,2"])
    assert code == EXIT_OK
    assert "verdict" not in payload


def test_check_rejects_out_of_range_exponent(capsys, small_panel):
    assert main(["check", "-i", str(small_panel), "--z", "10", "--r", "0.7", "-q"]) == EXIT_USAGE
    assert "--r must lie in (0, 1/2)" in capsys.readouterr().err


def test_check_quotient_ceiling(capsys, tmp_path):
    panel = write_panel(tmp_path / "drift.csv", [[1.0, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0, 8.0]])
    code, payload = run_json(capsys, ["check", "-i", str(panel), "--z", "10", "--max-quotient", "1"])
    assert code == EXIT_OK
    assert any("ceiling" in issue["message"] for issue in payload["issues"])


@pytest.mark.parametrize("experiment", ["consistency", "plugin_convergence"])
def test_simulate_convergence_experiments(capsys, experiment):
    model = project_root / "data" / "examples" / "model_uniform.yaml"
    code, payload = run_json(capsys, ["simulate", "--experiment", experiment, "--model", str(model),
                                      "--index", "shorrocks", "--z", "0.5", "--seed", "2", "--times", "1,2",
                                      "--n-list", "50,200", "-R", "4"])
    assert payload["experiment"] == experiment
    assert payload["n"] == [50, 200]
    assert payload["replications"] == 4
    assert code == (EXIT_OK if payload["passed"] else EXIT_FAILURE)
