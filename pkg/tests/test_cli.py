import io
import json
from pathlib import Path

import numpy as np
import pytest

from madoa.cli import main, parse_config, run
from madoa.exceptions import ConfigError

DATA = Path(__file__).parent / "data"
GOLDEN_ARGS = ["sweep-snr", "--seed", "2024", "--trials", "6"]


def test_empty_config_gives_reference_defaults():
    cfg = parse_config(["sweep-snr"])
    exp = cfg.experiment
    assert (exp.geometry.n_antennas, exp.geometry.n_calibrated, exp.n_snapshots) == (12, 7, 100)
    assert exp.geometry.region == 12.0 and exp.geometry.sigma_x == 0.5
    assert exp.snr_grid == (0.0, 5.0, 10.0, 15.0, 20.0)
    assert exp.trials == 200 and exp.trim == 0.05 and exp.threshold_deg == 0.5
    assert cfg.format == "csv"


def test_calibrated_count_must_be_below_antennas(capsys):
    with pytest.raises(ConfigError) as info:
        parse_config(["sweep-snr", "--mc", "12"])
    assert info.value.key == "mc"
    assert main(["sweep-snr", "--mc", "12"]) == 2
    assert "mc" in capsys.readouterr().err


def test_flag_overrides_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# sweep settings\nsnr-grid = 0, 10\nseed = 4\ntrials = 3\n")
    cfg = parse_config(["sweep-snr", "--config", str(path), "--seed", "9"])
    assert cfg.seed == 9
    assert cfg.experiment.snr_grid == (0.0, 10.0)
    assert cfg.experiment.trials == 3


def test_unknown_file_key_names_key(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("snr_grid = 0\nwobble = 3\n")
    assert main(["sweep-snr", "--config", str(path)]) == 2
    assert "wobble" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["sweep-snr", "--k", "12"],
    ["sweep-snr", "--trim", "1.5"],
    ["sweep-snr", "--methods", "proposed-xy,magic"],
    ["sweep-sources", "--k-max", "12"],
    ["debug-scenario", "--format", "csv"],
    ["sweep-snr", "--trials", "many"],
])
def test_invalid_values_exit_2(argv):
    assert main(argv) == 2


def test_meters_are_converted_to_wavelengths():
    cfg = parse_config(["sweep-snr", "--length-unit", "meters", "--wavelength", "0.1",
                        "--h", "1.2", "--sigma-x", "0.05"])
    assert cfg.experiment.geometry.region == pytest.approx(12.0)
    assert cfg.experiment.geometry.sigma_x == pytest.approx(0.5)
    # defaults stay in wavelengths
    assert cfg.experiment.geometry.sigma_y == 0.5


def test_unwritable_output_exits_2(tmp_path):
    out = tmp_path / "missing" / "dir" / "out.csv"
    assert main(["sweep-snr", "--trials", "1", "--snr-grid", "10", "--out", str(out)]) == 2


def test_debug_scenario_schema(tmp_path):
    out = tmp_path / "debug.json"
    assert main(["debug-scenario", "--seed", "7", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    for key in ("theta_true_deg", "theta_estimated_deg", "ape_true", "ape_estimated",
                "history", "metadata", "baselines_deg", "iterations", "converged"):
        assert key in doc
    assert len(doc["history"]) == doc["iterations"]
    assert np.shape(doc["ape_true"]) == (12, 2)
    assert doc["metadata"]["parameters"]["seed"] == 7


def test_sources_rows_with_infeasible_baseline(tmp_path):
    out = tmp_path / "src.csv"
    code = main(["sweep-sources", "--k-max", "7", "--trials", "2",
                 "--methods", "proposed-xy,music-calibrated", "--out", str(out)])
    assert code == 0
    rows = [l.split(",") for l in out.read_text().splitlines() if not l.startswith("#")]
    assert rows[0] == ["k", "method", "rmse_deg", "success_rate", "n_trials", "n_trimmed"]
    body = {(r[0], r[1]): r for r in rows[1:]}
    assert sorted({k for k, _ in body}, key=int) == [str(k) for k in range(2, 8)]
    assert body[("7", "music-calibrated")][2] == ""
    assert body[("7", "music-calibrated")][3] == "0.0000"
    assert body[("6", "music-calibrated")][2] != ""


def test_json_sweep_output(tmp_path):
    out = tmp_path / "it.json"
    assert main(["sweep-iterations", "--trials", "2", "--iterations", "4", "--format", "json",
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["variable"] == "iteration"
    assert [p["value"] for p in doc["points"]] == [1, 2, 3, 4]


def test_none_converged_exit_code(tmp_path):
    out = tmp_path / "nc.csv"
    argv = ["sweep-snr", "--trials", "2", "--snr-grid", "10", "--max-iters", "1",
            "--methods", "proposed-xy", "--out", str(out)]
    assert main(argv) == 4


def test_csv_header_and_metadata(tmp_path):
    cfg = parse_config(["sweep-snr", "--trials", "2", "--snr-grid", "10",
                        "--out", str(tmp_path / "a.csv")])
    assert run(cfg, stdout=io.StringIO()) == 0
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0].startswith("# madoa ")
    assert "snr_db,method,rmse_deg,success_rate,n_trials,n_trimmed" in lines


def test_golden_sweep_snr(tmp_path):
    out = tmp_path / "golden.csv"
    assert main(GOLDEN_ARGS + ["--out", str(out)]) == 0
    assert out.read_bytes() == (DATA / "golden_sweep_snr.csv").read_bytes()
