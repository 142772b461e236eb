import json
import logging
from pathlib import Path

import pytest
from click.testing import CliRunner

from hitchin_rmatrix.cli import (
    EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_PASS, EXIT_USAGE, SCHEMA_VERSION,
    bundle_exit_code, config_from_dict, dumps, load_config, main, run_pipeline, solve,
    workspace_load, workspace_path,
)
from hitchin_rmatrix.errors import ConfigError, ParseError, SchemaMismatch
from hitchin_rmatrix.kernels import series_equal

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def cfg(tmp_path):
    c = load_config("d1")
    c.cache_dir = str(tmp_path / "cache")
    c.out = str(tmp_path / "report.json")
    return c


def test_config_file_matches_preset():
    a, b = load_config(CONFIGS / "d1.toml"), load_config("d1")
    assert a.workspace_key() == b.workspace_key()
    assert a.derived["punctures"] == 1 and a.derived["dcybe_window"]["a_lo"] == -4
    assert load_config(CONFIGS / "d2.toml").derived["punctures"] == 2


@pytest.mark.parametrize("data", [
    {"curve": {"coefficients": [-1, 0, 0, 0, 0, 1]}, "truncation": {"K": 0}},
    {"curve": {"coefficients": [-1, 0, 0, 0, 0, 1]}, "truncation": {"jet_order": 0}},
    {"curve": {"coefficients": [-1, 0, 0, 0, 0, 1]}, "suites": {"select": ["nope"]}},
    {"curve": {"coefficients": ["1/0x"]}},
    {"curve": {"coefficients": [0, 0, 1, 0, 0, 1]}},
    {"curve": {"coefficients": [-1, 0, 0, 0, 0, 1]}, "gauge": [{"plus": [[0, 1, 1, "1", 0, None]]}]},
    {"curve": {"coefficients": [-1, 0, 0, 0, 0, 1]}, "extra": {}},
    {"preset": "d9"},
    {},
])
def test_invalid_configs_rejected(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_cli_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text('[curve]\ncoefficients = [1, 2\n')
    res = CliRunner().invoke(main, ["verify", "--config", str(bad)])
    assert res.exit_code == EXIT_USAGE


def test_workspace_round_trip(cfg):
    ws = solve(cfg)
    path = workspace_path(cfg)
    assert path.exists()
    back = workspace_load(cfg, path)
    assert back.to_json() == ws.to_json()
    assert back.chart.fingerprint() == ws.chart.fingerprint()
    assert series_equal([back.ks.column_coords(0, 2, 1, 0, 5)], [ws.ks.column_coords(0, 2, 1, 0, 5)],
                        -20, 5)


def test_workspace_schema_mismatch(cfg):
    ws = solve(cfg)
    data = ws.to_json()
    data["schema"] = SCHEMA_VERSION + 1
    path = Path(cfg.cache_dir) / "bumped.json"
    path.write_text(dumps(data))
    with pytest.raises(SchemaMismatch):
        workspace_load(cfg, path)


def test_workspace_garbage_is_parse_error(cfg, tmp_path):
    path = tmp_path / "junk.json"
    path.write_text("{not json")
    with pytest.raises(ParseError):
        workspace_load(cfg, path)


def test_corrupted_cache_recomputed(cfg, caplog):
    ws = solve(cfg)
    path = workspace_path(cfg)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with caplog.at_level(logging.WARNING, logger="hitchin_rmatrix"):
        again = solve(cfg)
    assert any("WARN" in r.getMessage() for r in caplog.records)
    assert again.to_json() == ws.to_json()
    assert json.loads(path.read_text()) == json.loads(dumps(ws.to_json()))


def test_suite_filtering(cfg):
    bundle = run_pipeline(cfg, ["szego"])
    assert [r["name"] for r in bundle["reports"]] == ["szego", "reproducing"]
    assert bundle["status"] == "PASS" and bundle["suites"] == ["szego"]


def test_bundle_is_byte_deterministic(cfg, tmp_path):
    first = dumps(run_pipeline(cfg, ["certificate", "frame", "projection"], use_cache=False))
    cfg.cache_dir = str(tmp_path / "other")
    second = dumps(run_pipeline(cfg, ["certificate", "frame", "projection"]))
    assert first == second
    assert "seconds" not in first


@pytest.mark.parametrize("status,code", [
    ("PASS", EXIT_PASS), ("FAIL", EXIT_FAIL), ("FAIL-INCONCLUSIVE", EXIT_INCONCLUSIVE)])
def test_exit_codes(status, code):
    assert bundle_exit_code({"status": status}) == code


def test_cli_verify_and_report(tmp_path):
    runner = CliRunner()
    out = tmp_path / "r.json"
    args = ["--config", "d1", "--out", str(out), "--cache-dir", str(tmp_path / "c")]
    res = runner.invoke(main, ["verify", "--suite", "certificate", "--suite", "frame", *args])
    assert res.exit_code == EXIT_PASS, res.output
    bundle = json.loads(out.read_text())
    assert [r["name"] for r in bundle["reports"]] == ["certificate", "frame"]
    assert bundle["chart"]["certificate"]["complement_dim"] == 3
    rep = runner.invoke(main, ["report", *args])
    assert rep.exit_code == EXIT_PASS and "overall (d1)" in rep.output
    bundle["status"] = "FAIL"
    out.write_text(dumps(bundle))
    assert runner.invoke(main, ["report", *args]).exit_code == EXIT_FAIL


def test_cli_certify_and_solve(tmp_path):
    runner = CliRunner()
    args = ["--config", "d1", "--cache-dir", str(tmp_path / "c")]
    res = runner.invoke(main, ["certify", *args])
    assert res.exit_code == 0 and json.loads(res.output)["certificate"]["complement_dim"] == 3
    res = runner.invoke(main, ["solve", *args])
    assert res.exit_code == 0 and json.loads(res.output)["Kc"] >= 7

