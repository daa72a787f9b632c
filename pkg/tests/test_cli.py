import csv
import json
import subprocess
import sys

import pytest

from mtvip.cli import main
from mtvip.config import preset_defaults


@pytest.fixture
def small(tmp_path):
    p = tmp_path / "small.json"
    preset_defaults(num_objects=100, duration=5.0, seeds=(0,), tier2_capacity=10).save(p)
    return p


def test_run_writes_json_and_row(small, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "--config", str(small), "--policy", "lfu", "--seeds", "0,1", "--out", str(out)]) == 0
    assert len(list((out / "runs").glob("*.json"))) == 2
    rows = list(csv.DictReader(open(out / "summary.csv")))
    assert len(rows) == 2 and rows[0]["policy"] == "lfu"
    assert main(["run", "--config", str(small), "--policy", "vip", "--out", str(out)]) == 0
    assert len(list(csv.DictReader(open(out / "summary.csv")))) == 3
    assert "delay_fraction" in capsys.readouterr().out


def test_sweep_and_figures(small, tmp_path):
    out = tmp_path / "sw"
    rc = main(["sweep", "--config", str(small), "--topologies", "abilene,grid", "--policies", "vip,lru",
               "--omegas", "0,1", "--out", str(out), "--quiet"])
    assert rc == 0
    assert len(list(csv.DictReader(open(out / "summary.csv")))) == 8
    for fig in ("fig3a", "fig3b", "fig4"):
        assert main(["figure", fig, "--results", str(out)]) == 0
        assert (out / f"{fig}.csv").exists()
    assert main(["figure", "fig3a", "--results", str(out), "--topologies", "regular"]) != 0


def test_sweep_file(small, tmp_path):
    spec = {"base": json.loads(small.read_text()), "policies": ["fifo"], "omegas": [0.0]}
    (tmp_path / "sweep.json").write_text(json.dumps(spec))
    assert main(["sweep", "--sweep", str(tmp_path / "sweep.json"), "--out", str(tmp_path / "o"),
                 "--quiet"]) == 0


def test_virtual_and_fig1(small, tmp_path):
    out = tmp_path / "v"
    assert main(["virtual", "--config", str(small), "--omegas", "0,3", "--slots", "20",
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out / "virtual" / "w3_s0.csv")))
    assert list(rows[0]) == ["slot", "total_backlog", "total_penalty", "cumavg_backlog", "cumavg_penalty"]
    assert main(["figure", "fig1", "--results", str(out)]) == 0
    assert len(list(csv.DictReader(open(out / "fig1.csv")))) == 40


def test_rap_text(tmp_path, capsys):
    p = tmp_path / "m.txt"
    p.write_text("# counterexample\n10 1\n8 -100\n")
    assert main(["rap", str(p)]) == 0
    out = capsys.readouterr().out
    assert "objective 10" in out and "row 0 -> column 0" in out


def test_rap_json_with_capacities(tmp_path, capsys):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"benefits": [[6, 3], [4, 5]], "capacities": [1, 2]}))
    assert main(["rap", str(p)]) == 0
    out = capsys.readouterr().out
    assert "objective 11" in out and "(tier 1)" in out


def test_preset(tmp_path):
    assert main(["preset", "--out", str(tmp_path / "p.json")]) == 0
    assert json.loads((tmp_path / "p.json").read_text())["num_objects"] == 1000


def test_errors_exit_nonzero(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) != 0
    assert "error:" in capsys.readouterr().err
    bad = tmp_path / "bad.txt"
    bad.write_text("1 x\n")
    assert main(["rap", str(bad)]) != 0
    assert main(["figure", "fig3a", "--results", str(tmp_path)]) != 0
    assert main(["sweep", "--omegas", "1,0", "--out", str(tmp_path)]) != 0


def test_console_entry():
    r = subprocess.run([sys.executable, "-m", "mtvip.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for sub in ("run", "sweep", "figure", "virtual", "rap"):
        assert sub in r.stdout
