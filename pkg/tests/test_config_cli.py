import csv
import json

import pytest

from windroute.cli import main
from windroute.config import ConfigError, ScenarioConfig, dump_config, load_config

SMALL = """
seed: 3
graph: {n: 20, p: 0.15, side_m: 12000}
experiment:
  planners: [BER, RER]
  trials: 6
  rounds: 3
  B: [40]
  K: [4]
  ablations: [full, no_gate]
fleet: {customers: 4}
"""


def test_defaults_and_roundtrip():
    cfg = load_config("")
    assert cfg == ScenarioConfig()
    assert load_config(dump_config(cfg)) == cfg
    small = load_config(SMALL)
    assert small.graph.n == 20 and small.experiment.B == (40.0,)
    assert load_config(dump_config(small)) == small


@pytest.mark.parametrize("text", [
    "bogus: 1",
    "graph: {nn: 3}",
    "planner: {kappa_ret: 1.0}",
    "experiment: {K: [5]}",
    "graph: {n: 2.5}",
    "wind: {ladder: [0, 6, 3]}",
    "wind: {ladder: [0, 3, 20]}",
    "[1, 2",
])
def test_rejects_bad_config(text):
    with pytest.raises(ConfigError):
        load_config(text)


def test_lambda_key_maps():
    assert load_config("planner: {lambda: 2.0}").planner.lam == 2.0


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text(SMALL)
    return p


def test_cli_run_is_deterministic_and_report_reproduces(tmp_path, cfg_file, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(cfg_file), "--out", str(a)]) == 0
    assert main(["run", "--config", str(cfg_file), "--out", str(b)]) == 0
    for name in ("aggregate.csv", "raw_full.csv", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    before = (a / "aggregate.csv").read_bytes()
    assert main(["report", "--in", str(a)]) == 0
    assert (a / "aggregate.csv").read_bytes() == before
    json.loads((a / "manifest.json").read_text())
    rows = list(csv.DictReader(open(a / "aggregate.csv")))
    assert len(rows) == 2
    capsys.readouterr()


def test_cli_other_commands(tmp_path, cfg_file, capsys):
    assert main(["ablate", "--config", str(cfg_file), "--out", str(tmp_path / "ab")]) == 0
    assert (tmp_path / "ab" / "ablation.csv").exists()
    assert main(["sweep", "--config", str(cfg_file), "--lambda", "1,2", "--out", str(tmp_path / "sw")]) == 0
    assert main(["speed-curve", "--out", str(tmp_path)]) == 0
    assert main(["generate-graph", "--n", "10", "--out", str(tmp_path / "g.json")]) == 0
    assert main(["wind-log", "--duration", "600", "--out", str(tmp_path / "w.csv")]) == 0
    assert main(["fleet", "--config", str(cfg_file), "--out", str(tmp_path / "fl")]) == 0
    capsys.readouterr()


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("nope: 1")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert main(["report", "--in", str(tmp_path / "missing")]) == 1
    capsys.readouterr()
