import json
import warnings

import pytest
import yaml

import phosflow as pf
from phosflow.cli import main


@pytest.fixture(scope="module")
def cli_tree(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    world = pf.generate_world(
        pf.SynthWorldConfig(n_countries=14, n_categories=3, miner_count=4,
                            hub_count=2, hub_routing_frac=0.4, use_noise_sd=0.2,
                            seed=6, year=2018)
    )
    paths = pf.write_world(world, tmp / "world")
    config = {
        "mining_path": str(paths["mining"]),
        "use_path": str(paths["use"]),
        "trade_path": str(paths["trade"]),
        "countries_path": str(paths["countries"]),
        "stage": "M5",
        "gamma_tr": world.traded_share,
        "active_category_count": 3,
        "optimizer_restarts": 2,
        "optimizer_max_evals": 200,
        "out_dir": str(tmp / "out"),
        "seed": 1,
    }
    cfg_path = tmp / "run.yaml"
    cfg_path.write_text(yaml.safe_dump(config), encoding="utf-8")
    return tmp, cfg_path, world


def test_validate_ok(cli_tree, capsys):
    _, cfg_path, _ = cli_tree
    assert main(["validate", "-c", str(cfg_path)]) == 0
    out = capsys.readouterr().out
    assert "registry:" in out and "trade" in out


def test_validate_missing_file_exits_2(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(
        "mining_path: /nope.csv\nuse_path: /nope.csv\ntrade_path: /nope.csv\n",
        encoding="utf-8",
    )
    assert main(["validate", "-c", str(cfg)]) == 2


def test_run_then_report_and_diagram(cli_tree, capsys):
    tmp, cfg_path, world = cli_tree
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert main(["run", "-c", str(cfg_path)]) == 0
    assert (tmp / "out" / "2018" / "M5.json").exists()

    miner = world.registry.codes[0]
    out_file = tmp / "report.json"
    assert main([
        "report", "-c", str(cfg_path), "--year", "2018",
        "--country", miner, "--output", str(out_file),
    ]) == 0
    payload = json.loads(out_file.read_text())
    assert payload["country"] == miner
    assert payload["stage"] == "M5"

    edges_file = tmp / "edges.csv"
    assert main([
        "diagram", "-c", str(cfg_path), "--year", "2018",
        "--top", "3", "--no-eu", "--output", str(edges_file),
    ]) == 0
    header = edges_file.read_text().splitlines()[0]
    assert header == "origin,destination,share"


def test_report_before_run_exits_2(cli_tree, tmp_path):
    _, cfg_path, _ = cli_tree
    cfg = yaml.safe_load(cfg_path.read_text())
    cfg["out_dir"] = str(tmp_path / "never-ran")
    other = tmp_path / "other.yaml"
    other.write_text(yaml.safe_dump(cfg), encoding="utf-8")
    assert main([
        "report", "-c", str(other), "--year", "2018", "--country", "C000",
    ]) == 2


def test_run_bad_config_exits_2(tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("alpha_m: 0.9\nalpha_u: 0.9\n", encoding="utf-8")
    assert main(["run", "-c", str(cfg)]) == 2


def test_synth_writes_world(tmp_path):
    out = tmp_path / "world"
    assert main([
        "synth", "--out", str(out), "--countries", "10", "--categories", "3",
        "--miners", "3", "--hubs", "1", "--seed", "2",
    ]) == 0
    for name in ("mining.csv", "use.csv", "trade.csv", "countries.csv",
                 "world.json", "truth_edges.csv"):
        assert (out / name).exists()
    meta = json.loads((out / "world.json").read_text())
    assert 0.0 < meta["traded_share"] <= 1.0
