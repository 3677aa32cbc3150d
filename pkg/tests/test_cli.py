import json

import numpy as np
import pytest

from qsolidtorus.cli import main
from qsolidtorus.config import ConfigError, default_config_dict, load_config


@pytest.fixture()
def small_config(tmp_path):
    cfg = default_config_dict()
    cfg["grid"]["m_list"] = [0, 1, -2, 3]
    cfg["grid"]["n_list"] = [0, 1, 2]
    cfg["truncation"]["k_max"] = 40
    cfg["output"]["dir"] = str(tmp_path / "out")
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path, cfg


def read_out(path, name):
    return json.loads((path.parent / "out" / name).read_text())


def test_validate_default_exit_zero(small_config, capsys):
    path, _ = small_config
    assert main(["--config", str(path), "validate"]) == 0
    payload = read_out(path, "validation.json")
    assert payload["all_passed"] is True
    assert "generated_at" in payload["meta"]


def test_validate_divergent_weights_exit_one(tmp_path):
    cfg = default_config_dict()
    cfg["weights"]["q"] = 1.0
    cfg["output"]["dir"] = str(tmp_path / "out")
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(cfg))
    assert main(["--config", str(path), "validate"]) == 1
    payload = json.loads((tmp_path / "out" / "validation.json").read_text())
    names = [ch["name"] for ch in payload["checks"] if not ch["passed"]]
    assert "s_summable" in names


def test_missing_config_exit_two(tmp_path):
    assert main(["--config", str(tmp_path / "nope.json"), "validate"]) == 2


def test_unparseable_config_exit_two(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert main(["--config", str(path), "validate"]) == 2


def test_config_validation_rules(tmp_path):
    cfg = default_config_dict()
    cfg["grid"]["m_list"] = []
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    with pytest.raises(ConfigError, match="nonempty"):
        load_config(path)
    cfg = default_config_dict()
    cfg["truncation"]["tol_residual"] = 0.0
    path.write_text(json.dumps(cfg))
    with pytest.raises(ConfigError, match="positive"):
        load_config(path)


def test_solve_zero_rhs(small_config, tmp_path):
    path, _ = small_config
    rhs = {
        "modes": [
            {"m": 1, "n": 0, "r1": [0.0] * 40, "r2": [0.0] * 40, "q0": 0.0},
        ]
    }
    rhs_path = tmp_path / "rhs.json"
    rhs_path.write_text(json.dumps(rhs))
    assert main(["--config", str(path), "solve", "--rhs", str(rhs_path)]) == 0
    payload = read_out(path, "solutions.json")
    rec = payload["solutions"][0]
    assert rec["residual_right_inverse"] == 0.0
    assert rec["beta"] == 0.0


def test_solve_seeded_fixtures(small_config):
    path, _ = small_config
    assert main(["--config", str(path), "solve", "--seed", "7"]) == 0
    payload = read_out(path, "solutions.json")
    assert len(payload["solutions"]) == 12
    for rec in payload["solutions"]:
        assert rec["residual_right_inverse"] <= 1e-9
        assert rec["residual_oracle"] <= 1e-8


def test_solve_missing_rhs_file_exit_two(small_config, tmp_path):
    path, _ = small_config
    assert main(["--config", str(path), "solve", "--rhs", str(tmp_path / "none.json")]) == 2


def test_solve_degenerate_boundary_rule_exit_one(tmp_path, capsys):
    cfg = default_config_dict()
    cfg["grid"]["m_list"] = [2]
    cfg["grid"]["n_list"] = [0]
    cfg["truncation"]["k_max"] = 16
    cfg["boundary"] = {"rule": "table", "table": {"2": [-0.2, 1.0]}}
    cfg["output"]["dir"] = str(tmp_path / "out")
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["--config", str(path), "solve"]) == 1
    err = capsys.readouterr().err
    assert "mode (2, 0)" in err
    payload = json.loads((tmp_path / "out" / "solutions.json").read_text())
    assert any("error" in rec for rec in payload["solutions"])


def test_scan_default_exit_zero(small_config):
    path, _ = small_config
    assert main(["--config", str(path), "scan"]) == 0
    rows = read_out(path, "hs_scan.json")["rows"]
    assert len(rows) == 12
    lemma = read_out(path, "lemma_summary.json")
    assert all(rec["all_passed"] for rec in lemma["modes"])


def test_scan_single_diagonal_mode(small_config):
    path, _ = small_config
    assert main(["--config", str(path), "--modes", "0", "scan"]) == 0
    rows = read_out(path, "hs_scan.json")["rows"]
    assert all(set(k for k in row if k.startswith("hs_")) == {"hs_Z00"} for row in rows)


def test_dump_tables(small_config):
    path, _ = small_config
    assert main(["--config", str(path), "--modes", "1", "--kmax", "8", "dump", "--what", "solution"]) == 0
    rows = read_out(path, "dump_solution.json")["rows"]
    assert {"m", "n", "k", "I1", "I2", "K1", "K2", "wronskian_residual"} <= set(rows[0])
    assert main(["--config", str(path), "--modes", "1", "--kmax", "8", "dump", "--what", "transfer"]) == 0
    rows = read_out(path, "dump_transfer.json")["rows"]
    assert len(rows[0]["C"]) == 4 and len(rows[0]["P"]) == 4


def test_outputs_deterministic_modulo_timestamp(small_config, tmp_path):
    path, _ = small_config
    a_dir = tmp_path / "a"
    b_dir = tmp_path / "b"
    for out in (a_dir, b_dir):
        assert main(["--config", str(path), "--out", str(out), "solve", "--seed", "3"]) == 0
    a = json.loads((a_dir / "solutions.json").read_text())
    b = json.loads((b_dir / "solutions.json").read_text())
    a["meta"].pop("generated_at")
    b["meta"].pop("generated_at")
    assert a == b


def test_kmax_override(small_config):
    path, _ = small_config
    assert main(["--config", str(path), "--kmax", "24", "--modes", "1", "solve"]) == 0
    payload = read_out(path, "solutions.json")
    assert payload["meta"]["k_max"] == 40  # config echo; computation used the override
    assert len(payload["solutions"]) == 3
