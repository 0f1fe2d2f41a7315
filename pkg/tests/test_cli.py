import csv
import json
import shutil

import numpy as np
import pytest
import yaml

from interarb.cli import main, parse_axis
from interarb.config import DATA_ENV, load_config
from interarb.errors import ConfigError
from interarb.ingest import write_series_csv
from interarb.synthetic import START


@pytest.fixture(scope="module")
def demo(tmp_path_factory):
    root = tmp_path_factory.mktemp("demo")
    assert main(["demo-data", str(root), "--days", "2", "--seed", "0"]) == 0
    return root


def config(demo, tmp_path, **changes):
    raw = yaml.safe_load((demo / "study.yaml").read_text())
    raw["data_dir"] = str(demo)
    for key, value in changes.items():
        if value is None:
            raw.pop(key, None)
        else:
            raw[key] = value
    path = tmp_path / "study.yaml"
    path.write_text(yaml.safe_dump(raw))
    return path


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config_sha256=")
    return list(csv.reader(lines[1:]))


def metrics(path):
    return json.loads((path / "metrics.json").read_text())


def test_parse_axis():
    assert parse_axis("0:30:1") == list(range(31))
    assert parse_axis("0:0.4:0.05")[-1] == 0.4 and len(parse_axis("0:0.4:0.05")) == 9
    assert parse_axis("0,0.5,1") == [0.0, 0.5, 1.0]
    with pytest.raises(ConfigError):
        parse_axis("1:0:1")
    with pytest.raises(ConfigError):
        parse_axis("a,b")


def test_solve_c1_smoke(demo, tmp_path):
    cfg = config(demo, tmp_path)
    out = tmp_path / "o"
    assert main(["solve", "-c", str(cfg), "-s", "C1", "-o", str(out), "--start", "2019-01-01",
                 "--end", "2019-01-01"]) == 0
    rows = read_csv(out / "trajectory.csv")
    assert rows[0] == ["timestamp", "x_a", "x_b", "soc", "z_ch"] and len(rows) == 25
    m = metrics(out)
    assert m["status"] == "optimal" and m["steps"] == 24
    assert len(m["config_sha256"]) == 64
    assert (out / "solver.log").read_text().startswith("# config_sha256=")


def test_closed_envelope_equals_c1(demo, tmp_path):
    write_series_csv(tmp_path / "be.csv", START + np.arange(48), np.full(48, 1000.0))
    write_series_csv(tmp_path / "uk.csv", START + np.arange(48), np.full(48, -1400.0))
    raw_data = yaml.safe_load((demo / "study.yaml").read_text())["data"]
    raw_data["flow"] = {"path": str(tmp_path / "be.csv"), "unit": "MW"}
    raw_data["flow_uk"] = {"path": str(tmp_path / "uk.csv"), "unit": "MW"}
    cfg = config(demo, tmp_path, data=raw_data,
                 envelope={"source": "flows-file", "hoa": True, "l_max": 1000.0, "l_max_uk": 1400.0})
    assert main(["solve", "-c", str(cfg), "-s", "C3", "-o", str(tmp_path / "c3")]) == 0
    assert main(["solve", "-c", str(cfg), "-s", "C1", "-o", str(tmp_path / "c1")]) == 0
    assert metrics(tmp_path / "c3")["objective"] == pytest.approx(metrics(tmp_path / "c1")["objective"], abs=1e-9)


def test_k1_not_above_c2(demo, tmp_path):
    cfg = config(demo, tmp_path)
    for sc in ("K1", "C2"):
        assert main(["solve", "-c", str(cfg), "-s", sc, "-o", str(tmp_path / sc)]) == 0
    assert metrics(tmp_path / "K1")["revenue"] <= metrics(tmp_path / "C2")["revenue"] + 1e-6


def test_exit_codes(demo, tmp_path):
    assert main(["solve", "-c", str(tmp_path / "missing.yaml")]) == 4
    bad = config(demo, tmp_path, scenario="C9")
    assert main(["solve", "-c", str(bad)]) == 4
    raw_data = yaml.safe_load((demo / "study.yaml").read_text())["data"]
    raw_data["price_a"]["path"] = "nope.csv"
    assert main(["solve", "-c", str(config(demo, tmp_path, data=raw_data))]) == 4
    blocked = config(demo, tmp_path, blocking={"b_block": 0.5, "lower_share": 1.0})
    assert main(["solve", "-c", str(blocked), "-s", "C2", "-o", str(tmp_path / "inf")]) == 2
    limited = config(demo, tmp_path, rent=0.0, solver={"node_limit": 1, "heuristic_every": 0})
    code = main(["solve", "-c", str(limited), "-s", "C2", "-o", str(tmp_path / "lim")])
    assert code in (0, 3)
    assert metrics(tmp_path / "lim")["status"] == {0: "optimal", 3: "limit"}[code]


def test_env_var_data_dir(demo, tmp_path, monkeypatch):
    cfg = config(demo, tmp_path, data_dir=None)
    monkeypatch.setenv(DATA_ENV, str(demo))
    assert load_config(cfg).data["price_a"].path.parent == demo


def test_unknown_key_rejected(demo, tmp_path):
    with pytest.raises(ConfigError):
        load_config(config(demo, tmp_path, colour="blue"))


def test_rent_sweep_31_rows(demo, tmp_path):
    cfg = config(demo, tmp_path)
    out = tmp_path / "rent"
    assert main(["sweep", "rent", "-c", str(cfg), "-o", str(out), "--axis", "0:30:1",
                 "--start", "2019-01-01", "--end", "2019-01-01"]) == 0
    rows = read_csv(out / "sweep_rent.csv")
    assert len(rows) == 32 and rows[0][0] == "rent"
    head = rows[0]
    rev = np.array([float(r[head.index("C2_revenue")]) for r in rows[1:]])
    assert np.all(np.diff(rev) <= 1e-6)
    assert json.loads((out / "sweep_rent.json").read_text())["points"] == 31


def test_blocking_sweep_json(demo, tmp_path):
    cfg = config(demo, tmp_path)
    out = tmp_path / "blk"
    assert main(["sweep", "blocking", "-c", str(cfg), "-o", str(out)]) == 0
    summary = json.loads((out / "sweep_blocking.json").read_text())
    for sc in ("C2", "C3"):
        assert set(summary["selections"][sc]) == {"M1", "M2"}
        assert "flag" in summary["selections"][sc]["M1"]
    assert (out / "sweep_blocking_long.csv").exists()


def test_reserved_sweep_monotone(demo, tmp_path):
    cfg = config(demo, tmp_path)
    out = tmp_path / "res"
    assert main(["sweep", "reserved", "-c", str(cfg), "-o", str(out)]) == 0
    rows = read_csv(out / "sweep_reserved.csv")
    head = rows[0]
    assert [float(r[0]) for r in rows[1:]] == [0.0, 0.25, 0.5, 0.75, 1.0]
    rev = np.array([float(r[head.index("C3_revenue")]) for r in rows[1:]])
    assert np.all(np.diff(rev) >= -1e-6)


def test_dispatch_then_solve(demo, tmp_path):
    cfg = config(demo, tmp_path)
    out = tmp_path / "disp"
    assert main(["dispatch", "-c", str(cfg), "-o", str(out), "--end", "2019-01-01"]) == 0
    prices = read_csv(out / "prices.csv")
    assert prices[0] == ["timestamp", "BE", "EI", "UK"] and len(prices) == 25
    assert json.loads((out / "dispatch.json").read_text())["max_residual"] <= 1e-6
    raw_data = yaml.safe_load((demo / "study.yaml").read_text())["data"]
    raw_data["flow"] = {"path": str(out / "flow_NEMO.csv"), "unit": "MW"}
    cfg2 = config(demo, tmp_path, data=raw_data)
    assert main(["solve", "-c", str(cfg2), "-s", "C3", "-o", str(tmp_path / "s")]) == 0
    assert metrics(tmp_path / "s")["steps"] == 24


def test_dispatch_sim_source(demo, tmp_path):
    cfg = config(demo, tmp_path, envelope={"source": "dispatch-sim", "hoa": True})
    assert main(["solve", "-c", str(cfg), "-s", "C3", "-o", str(tmp_path / "sim")]) == 0


def test_clean_and_mps(demo, tmp_path):
    cfg = config(demo, tmp_path)
    assert main(["clean-data", "-c", str(cfg), "-o", str(tmp_path / "cl")]) == 0
    assert len(read_csv(tmp_path / "cl" / "price_a.clean.csv")) > 1
    report = json.loads((tmp_path / "cl" / "cleaning_report.json").read_text())
    assert "config_sha256" in report
    assert main(["export-mps", "-c", str(cfg), "-s", "C2", "-o", str(tmp_path / "m"), "--end", "2019-01-01"]) == 0
    text = (tmp_path / "m" / "c2.mps").read_text()
    assert text.startswith("* config_sha256=")
    assert "'INTORG'" in text


def test_outputs_are_byte_identical(demo, tmp_path):
    cfg = config(demo, tmp_path)
    for tag in ("a", "b"):
        assert main(["solve", "-c", str(cfg), "-s", "C3", "-o", str(tmp_path / tag)]) == 0
    for name in ("trajectory.csv", "metrics.json", "solver.log"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_hash_tracks_inputs(demo, tmp_path):
    copy = tmp_path / "data"
    shutil.copytree(demo, copy)
    cfg = config(copy, tmp_path)
    before = load_config(cfg).digest()
    with open(copy / "price_a.csv", "a") as fh:
        fh.write("# edited\n")
    assert load_config(cfg).digest() != before
    assert load_config(cfg, rent=7.0).digest() != load_config(cfg).digest()
