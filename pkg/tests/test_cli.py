import json

import pytest
import yaml
from click.testing import CliRunner

from pssmp import cli
from pssmp.errors import ConfigError

FAST = {
    "simulate": {"n_paths": 5, "horizon": 2.0},
    "decompose": {"n_paths": 5, "horizon": 5.0},
    "ladder": {"levy": "cp", "n_paths": 60, "params": {"t": [1.0]}},
    "occupation": {"n_paths": 3, "horizon": 5.0, "dt": 1e-3, "eps_ladder": [0.2, 0.05],
                   "params": {"calibration_paths": 4}},
    "exit-check": {"n_paths": 100, "params": {"functionals": ["deep"], "pool": [30.0, 10]}},
    "resolvent": {"n_paths": 40, "params": {"q": [1.0], "f": ["one"], "pool": [20.0, 4],
                                             "direct_paths": 60}},
    "entrance": {"n_paths": 60, "params": {"f": ["exp_neg"], "pool": [30.0, 5]}},
    "stats-calibrate": {"n_paths": 50, "horizon": 0.5, "dt": 0.05, "params": {"repeats": 20},
                        "tolerances": {"rejection_band": [0.0, 0.2]}},
}


def _config(tmp_path, body):
    p = tmp_path / "cfg.yaml"
    p.write_text(yaml.safe_dump({"schema_version": 1, **body}))
    return str(p)


def _invoke(args, env=None):
    return CliRunner().invoke(cli.main, args, env=env)


@pytest.mark.parametrize("command", sorted(FAST))
def test_commands_write_outputs(tmp_path, command):
    out = tmp_path / "out"
    r = _invoke([command, "--config", _config(tmp_path, FAST[command]), "--out", str(out)])
    assert r.exit_code in (0, 1), r.output
    body = json.loads((out / "summary.json").read_text())
    assert body["command"] == command
    manifest = json.loads((out / "plots.json").read_text())
    for entry in manifest:
        assert (out / entry["file"]).exists()
    assert json.loads((out / "metadata.json").read_text())["threads"] == 1


def test_gate_outcome_simulate_has_no_gate(tmp_path):
    r = _invoke(["simulate", "--config", _config(tmp_path, FAST["simulate"]), "--out", str(tmp_path / "o")])
    assert r.exit_code == 0
    assert "PASS" in r.output


def test_summary_identical_across_threads(tmp_path):
    cfg = _config(tmp_path, FAST["decompose"])
    texts = []
    for th in ("1", "3"):
        out = tmp_path / th
        assert _invoke(["decompose", "--config", cfg, "--threads", th, "--out", str(out)]).exit_code == 0
        texts.append((out / "summary.json").read_text())
    assert texts[0] == texts[1]


def test_env_overrides(tmp_path):
    out = tmp_path / "envout"
    r = _invoke(["simulate", "--config", _config(tmp_path, FAST["simulate"])],
                env={"PSSMP_OUT": str(out), "PSSMP_THREADS": "2"})
    assert r.exit_code == 0
    assert json.loads((out / "metadata.json").read_text())["threads"] == 2


def test_seed_override_changes_result(tmp_path):
    cfg = _config(tmp_path, FAST["simulate"])
    res = []
    for seed in ("1", "2"):
        out = tmp_path / seed
        _invoke(["simulate", "--config", cfg, "--seed", seed, "--out", str(out)])
        res.append(json.loads((out / "summary.json").read_text())["result"]["mean_X_until"])
    assert res[0] != res[1]


@pytest.mark.parametrize("body", [
    {"unknown_key": 1},
    {"dt": -1.0},
    {"x0": 0.0},
    {"levy": "no-such-model"},
    {"params": [1, 2]},
])
def test_config_errors_exit_2(tmp_path, body):
    r = _invoke(["simulate", "--config", _config(tmp_path, body), "--out", str(tmp_path / "o")])
    assert r.exit_code == 2


def test_schema_version_required(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("levy: bm\n")
    assert _invoke(["simulate", "--config", str(p)]).exit_code == 2
    with pytest.raises(ConfigError):
        cli.load_config(str(p))


def test_budget_exit_3(tmp_path):
    body = {"n_paths": 1000, "horizon": 100.0, "dt": 1e-3, "max_cells": 1e6}
    r = _invoke(["simulate", "--config", _config(tmp_path, body), "--out", str(tmp_path / "o")])
    assert r.exit_code == 3


def test_inline_levy_spec(tmp_path):
    body = dict(FAST["simulate"], levy={"drift": 0.3, "sigma": 0.5})
    assert _invoke(["simulate", "--config", _config(tmp_path, body), "--out", str(tmp_path / "o")]).exit_code == 0


def test_verify_all_subset(tmp_path):
    out = tmp_path / "acc"
    r = _invoke(["verify-all", "--profile", "smoke", "--only", "1,2,3", "--out", str(out)])
    assert r.exit_code == 0, r.output
    assert "3/3 criteria passed" in r.output
    summary = json.loads((out / "acceptance.json").read_text())
    assert summary


def test_verify_all_bad_only():
    assert _invoke(["verify-all", "--only", "one"]).exit_code == 2


@pytest.mark.parametrize("levy", [{"drift": 1.0, "jump_law": {}}, {"jump_rate": 1.0}])
def test_bad_inline_levy_exit_2(tmp_path, levy):
    body = dict(FAST["simulate"], levy=levy)
    assert _invoke(["simulate", "--config", _config(tmp_path, body)]).exit_code == 2
