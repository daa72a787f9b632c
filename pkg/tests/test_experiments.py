import math

import numpy as np
import pytest

from mtvip import experiments as ex
from mtvip.config import SweepSpec, preset_defaults


@pytest.fixture(scope="module")
def base():
    return preset_defaults(num_objects=200, duration=10.0, seeds=(0, 1), tier2_capacity=20)


@pytest.fixture(scope="module")
def batch(base, tmp_path_factory):
    out = tmp_path_factory.mktemp("batch")
    sweep = SweepSpec(base, topologies=("abilene",), policies=("none", "vip", "lfu"), omegas=(0.0, 2.0))
    results, agg = ex.run_batch(sweep, out)
    return out, results, agg


def test_one_config_one_row(base, tmp_path):
    sweep = SweepSpec(base.with_(seeds=(0,)), policies=("lru",))
    results, _ = ex.run_batch(sweep, tmp_path)
    rows = ex.read_summary(tmp_path / "summary.csv")
    assert len(rows) == 1 and list(rows[0]) == ex.SUMMARY_FIELDS


def test_batch_outputs(batch):
    out, results, agg = batch
    assert len(results) == 3 * 2 * 2
    assert len(list((out / "runs").glob("*.json"))) == 12
    assert len(agg) == 6
    for a in agg:
        assert a["n"] == 2 and a["delay_fraction_std"] >= 0


def test_baseline_self_normalizes(batch):
    _, results, _ = batch
    assert all(m.delay_fraction == 1.0 for m in results if m.policy == "none")


def test_summary_regenerates_from_json(batch):
    out, _, _ = batch
    key = lambda r: (r["policy"], r["omega"], r["seed"])
    assert sorted(ex.summary_from_json(out), key=key) == sorted(ex.read_summary(out / "summary.csv"), key=key)


def test_batch_reproducible(batch, base, tmp_path):
    out, _, _ = batch
    sweep = SweepSpec(base, topologies=("abilene",), policies=("none", "vip", "lfu"), omegas=(0.0, 2.0))
    ex.run_batch(sweep, tmp_path, parallelism=2)
    assert (tmp_path / "summary.csv").read_bytes() == (out / "summary.csv").read_bytes()
    assert (tmp_path / "aggregate.csv").read_bytes() == (out / "aggregate.csv").read_bytes()


def test_batch_failure_names_run(base, tmp_path, monkeypatch):
    import mtvip.experiments as mod

    real = mod.simulate

    def boom(sc, policy, *a, **k):
        if policy == "vip":
            raise RuntimeError("disk on fire")
        return real(sc, policy, *a, **k)

    monkeypatch.setattr(mod, "simulate", boom)
    with pytest.raises(ex.BatchError, match="abilene_vip_w0_L20_s0.*disk on fire"):
        ex.run_configs([base.with_(policy="vip")], 1)


def test_fig3a_and_fig3b(batch):
    _, results, _ = batch
    rows = ex.figure_data(results, "fig3a")
    by = {r["policy"]: r for r in rows}
    assert by["none"]["delay_fraction_mean"] == 1.0
    rows = ex.figure_data(results, "fig3b", policies=["vip", "lfu"])
    assert all(0 <= r["tier1_share_mean"] <= 1 for r in rows)


def test_fig4_single_omega(batch):
    _, results, _ = batch
    rows = ex.figure_data([m for m in results if m.omega == 0.0], "fig4", policies=["vip", "lfu"])
    assert len(rows) == 2


def test_missing_cells_listed(batch):
    _, results, _ = batch
    with pytest.raises(ex.FigureError, match="grid"):
        ex.figure_data(results, "fig3a", topologies=["abilene", "grid"])
    with pytest.raises(ex.FigureError, match="5.0"):
        ex.figure_data(results, "fig4", omegas=[0.0, 5.0])
    with pytest.raises(ex.FigureError):
        ex.figure_data(results, "fig9")


def test_fig1_from_virtual_sweep(base):
    vs = ex.run_virtual_sweep(base, (0.0, 10.0), 30, seeds=(0,))
    rows = ex.figure_data(vs, "fig1")
    assert len(rows) == 60
    assert vs.final_penalty[1] <= vs.final_penalty[0]


def test_pareto_frontier():
    pts = [(10, 5), (5, 8), (12, 6), (20, 1), (5, 9)]
    assert ex.pareto_frontier(pts) == [(5, 8), (10, 5), (20, 1)]


def test_dominance_share():
    a = ex.pareto_frontier([(0, 10), (10, 0)])
    b = ex.pareto_frontier([(0, 12), (10, 1)])
    share, levels = ex.dominance_share(a, b)
    assert share == 1.0 and len(levels) > 0
    share, _ = ex.dominance_share(b, a)
    assert share == 0.0
    share, _ = ex.dominance_share(ex.pareto_frontier([(0, 1)]), ex.pareto_frontier([(5, 1), (9, 0)]))
    assert math.isnan(share)


def test_frontier_interpolation():
    f = ex.pareto_frontier([(0, 10), (10, 0)])
    assert ex.frontier_delay(f, 4.0) == pytest.approx(6.0)
