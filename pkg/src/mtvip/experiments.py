"""Batch execution, aggregation and plot-ready figure tables."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, SweepSpec
from .dataplane import RunMetrics, build_scenario, metrics_from, simulate

SUMMARY_FIELDS = ["topology", "policy", "omega", "tier2_capacity", "seed", "total_delay",
                  "delay_fraction", "hits_t1", "hits_t2", "total_penalty"]
FIGURES = ("fig1", "fig3a", "fig3b", "fig4")


class BatchError(RuntimeError):
    pass


class FigureError(ValueError):
    pass


def run_id(config: ScenarioConfig, seed) -> str:
    cap = config.tier2_capacity
    return f"{Path(config.topology).stem}_{config.policy}_w{config.omega:g}_L{cap}_s{seed}"


def _baseline_key(config: ScenarioConfig, seed):
    # everything that shapes the workload and the cache-free delays
    return (config.topology, config.num_objects, config.zipf_exponent, config.arrival_rate,
            config.link_capacity, config.duration, config.regular_nodes, config.topology_seed,
            int(seed))


def _baseline_task(args):
    cfg_dict, seed = args
    config = ScenarioConfig.from_dict(cfg_dict).with_(policy="none")
    try:
        sc = build_scenario(config, seed)
        sim = simulate(sc, "none", 0.0, config.window, config.slot_length, config.device_model)
    except Exception as e:
        raise BatchError(f"baseline run {run_id(config, seed)} failed: {type(e).__name__}: {e}") from e
    return sim.total_delay


def _run_task(args):
    cfg_dict, seed, baseline = args
    config = ScenarioConfig.from_dict(cfg_dict)
    try:
        sc = build_scenario(config, seed)
        sim = simulate(sc, config.policy, config.omega, config.window, config.slot_length,
                       config.device_model)
    except Exception as e:  # re-raised with the failing cell named
        raise BatchError(f"run {run_id(config, seed)} failed: {type(e).__name__}: {e}") from e
    m = metrics_from(sim, config, seed)
    m.baseline_delay = baseline
    m.delay_fraction = m.total_delay / baseline if baseline > 0 else 1.0
    return m.to_dict()


def _map(fn, tasks, parallelism):
    if parallelism <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=parallelism) as ex:
        return list(ex.map(fn, tasks))


def run_configs(configs, parallelism=1, progress=None) -> list[RunMetrics]:
    """Run every ``(config, seed)`` pair; baselines are computed once per workload."""
    pairs = [(c, s) for c in configs for s in c.seeds]
    keys = {}
    for c, s in pairs:
        keys.setdefault(_baseline_key(c, s), (c.to_dict(), s))
    key_list = list(keys)
    base_vals = _map(_baseline_task, [keys[k] for k in key_list], parallelism)
    baselines = dict(zip(key_list, base_vals))
    tasks = [(c.to_dict(), s, baselines[_baseline_key(c, s)]) for c, s in pairs]
    if parallelism <= 1:
        out = []
        for t in tasks:
            out.append(_run_task(t))
            if progress:
                progress(len(out), len(tasks))
    else:
        out = _map(_run_task, tasks, parallelism)
    return [RunMetrics.from_dict(d) for d in out]


def summary_row(m: RunMetrics) -> dict:
    return {"topology": m.topology, "policy": m.policy, "omega": m.omega,
            "tier2_capacity": m.tier2_capacity, "seed": m.seed, "total_delay": m.total_delay,
            "delay_fraction": m.delay_fraction, "hits_t1": m.hits_t1, "hits_t2": m.hits_t2,
            "total_penalty": m.total_penalty}


def _fmt(v):
    return repr(v) if isinstance(v, float) else ("" if v is None else str(v))


def write_summary(results, path, append=False):
    path = Path(path)
    new = not (append and path.exists())
    with open(path, "a" if append else "w", newline="") as f:
        w = csv.writer(f)
        if new:
            w.writerow(SUMMARY_FIELDS)
        for m in results:
            row = summary_row(m)
            w.writerow([_fmt(row[k]) for k in SUMMARY_FIELDS])


def read_summary(path) -> list[dict]:
    rows = []
    with open(path, newline="") as f:
        for r in csv.DictReader(f):
            rows.append({
                "topology": r["topology"], "policy": r["policy"], "omega": float(r["omega"]),
                "tier2_capacity": int(r["tier2_capacity"]) if r["tier2_capacity"] else None,
                "seed": int(r["seed"]), "total_delay": float(r["total_delay"]),
                "delay_fraction": float(r["delay_fraction"]) if r["delay_fraction"] else None,
                "hits_t1": int(r["hits_t1"]), "hits_t2": int(r["hits_t2"]),
                "total_penalty": float(r["total_penalty"]),
            })
    return rows


def write_run_json(m: RunMetrics, outdir, config: ScenarioConfig | None = None):
    runs = Path(outdir) / "runs"
    runs.mkdir(parents=True, exist_ok=True)
    name = f"{Path(m.topology).stem}_{m.policy}_w{m.omega:g}_L{m.tier2_capacity}_s{m.seed}"
    doc = {"run_id": name, "metrics": m.to_dict()}
    if config is not None:
        doc["config"] = config.to_dict()
    (runs / f"{name}.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return runs / f"{name}.json"


def summary_from_json(outdir) -> list[dict]:
    """Rebuild summary rows from the per-run JSON documents."""
    rows = []
    for p in sorted((Path(outdir) / "runs").glob("*.json")):
        rows.append(summary_row(RunMetrics.from_dict(json.loads(p.read_text())["metrics"])))
    return rows


def aggregate(rows, keys=("topology", "policy", "omega", "tier2_capacity"),
              values=("delay_fraction", "total_delay", "total_penalty", "hits_t1", "hits_t2")):
    """Mean and sample standard deviation over seeds for every config cell."""
    groups = {}
    for r in rows:
        r = r if isinstance(r, dict) else summary_row(r)
        groups.setdefault(tuple(r[k] for k in keys), []).append(r)
    out = []
    for key in sorted(groups, key=lambda k: tuple((x is None, x) for x in k)):
        g = sorted(groups[key], key=lambda r: r["seed"])
        row = dict(zip(keys, key))
        row["n"] = len(g)
        for v in values:
            x = np.array([r[v] for r in g], dtype=float)
            row[f"{v}_mean"] = float(np.mean(x))
            row[f"{v}_std"] = float(np.std(x, ddof=1)) if len(x) > 1 else 0.0
        t = np.array([r["hits_t1"] + r["hits_t2"] for r in g], dtype=float)
        share = np.array([r["hits_t1"] / h if h else 0.0 for r, h in zip(g, t)])
        row["tier1_share_mean"] = float(np.mean(share))
        row["total_hits_mean"] = float(np.mean(t))
        out.append(row)
    return out


def write_rows(rows, path):
    if not rows:
        raise FigureError("nothing to write")
    fields = list(rows[0])
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=fields)
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})


def run_batch(sweep: SweepSpec, outdir, parallelism=1, progress=None):
    """Run a sweep, write ``summary.csv``, ``aggregate.csv`` and per-run JSON."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    configs = sweep.configs()
    results = run_configs(configs, parallelism, progress)
    by_cell = {}
    for c in configs:
        for s in c.seeds:
            by_cell[(c.topology, c.policy, c.omega, c.tier2_capacity, s)] = c
    for m in results:
        write_run_json(m, outdir, by_cell.get((m.topology, m.policy, m.omega, m.tier2_capacity, m.seed)))
    write_summary(results, outdir / "summary.csv")
    agg = aggregate(results)
    write_rows(agg, outdir / "aggregate.csv")
    return results, agg


# -- virtual plane sweeps (fig1) -------------------------------------------

@dataclass
class VirtualSweep:
    omegas: tuple
    seeds: tuple
    cumavg_backlog: np.ndarray  # (len(omegas), slots), seed-averaged
    cumavg_penalty: np.ndarray

    @property
    def final_backlog(self):
        return self.cumavg_backlog[:, -1]

    @property
    def final_penalty(self):
        return self.cumavg_penalty[:, -1]


def virtual_setup(config: ScenarioConfig, seed):
    """Network, catalog and routing exactly as a data-plane run with this seed sees them."""
    from .model import assign_sources, build_routing
    from .topology import make_topology
    model = make_topology(config.topology, config.link_capacity, config.regular_nodes,
                          config.topology_seed)
    src_ss = np.random.SeedSequence(seed).spawn(4)[0]
    catalog = assign_sources(model, config.num_objects, np.random.default_rng(src_ss),
                             config.zipf_exponent, config.arrival_rate)
    return model, catalog, build_routing(model, catalog)


def run_virtual_sweep(config: ScenarioConfig, omegas, slots, seeds=None, progress=None) -> VirtualSweep:
    from .dataplane import _slot_tiers
    from .virtual import PolicyParams, run_virtual
    seeds = tuple(config.seeds if seeds is None else seeds)
    tiers = _slot_tiers(config.cache_config(), config.slot_length)
    B = np.zeros((len(omegas), slots))
    P = np.zeros((len(omegas), slots))
    for i, w in enumerate(omegas):
        for s in seeds:
            model, catalog, routing = virtual_setup(config, s)
            run = run_virtual(model, catalog, routing, tiers, PolicyParams(w), slots, s)
            B[i] += [r.cumavg_backlog for r in run.records]
            P[i] += [r.cumavg_penalty for r in run.records]
            if progress:
                progress(w, s)
    return VirtualSweep(tuple(omegas), seeds, B / len(seeds), P / len(seeds))


# -- figure tables ---------------------------------------------------------

def _require(cells, present, what):
    missing = sorted(set(cells) - set(present), key=str)
    if missing:
        raise FigureError(f"{what}: missing cells " + ", ".join(map(str, missing)))


def figure_data(results, figure_id, topologies=None, policies=None, omegas=None):
    """Plot-ready rows for one figure.

    ``results`` is a :class:`VirtualSweep` for ``fig1`` and summary rows (or
    :class:`RunMetrics`) otherwise. Requested axes that have no data raise
    :class:`FigureError` listing the missing cells.
    """
    if figure_id not in FIGURES:
        raise FigureError(f"unknown figure {figure_id!r}; choose from {', '.join(FIGURES)}")
    if figure_id == "fig1":
        if not isinstance(results, VirtualSweep):
            raise FigureError("fig1 needs a virtual-plane sweep")
        if omegas is not None:
            _require(omegas, results.omegas, "fig1")
        rows = []
        for i, w in enumerate(results.omegas):
            for t in range(results.cumavg_backlog.shape[1]):
                rows.append({"omega": w, "slot": t + 1,
                             "cumavg_backlog": float(results.cumavg_backlog[i, t]),
                             "cumavg_penalty": float(results.cumavg_penalty[i, t])})
        return rows
    rows = [r if isinstance(r, dict) else summary_row(r) for r in results]
    if not rows:
        raise FigureError(f"{figure_id}: no results")
    agg = aggregate(rows)
    if figure_id in ("fig3a", "fig3b"):
        agg = [a for a in agg if a["omega"] == 0.0] or agg
        tops = topologies or sorted({a["topology"] for a in agg})
        pols = policies or sorted({a["policy"] for a in agg})
        _require([(t, p) for t in tops for p in pols], [(a["topology"], a["policy"]) for a in agg],
                 figure_id)
        out = []
        for a in agg:
            if a["topology"] not in tops or a["policy"] not in pols:
                continue
            base = {"topology": a["topology"], "policy": a["policy"], "tier2_capacity": a["tier2_capacity"], "n": a["n"]}
            if figure_id == "fig3a":
                base.update(delay_fraction_mean=a["delay_fraction_mean"],
                            delay_fraction_std=a["delay_fraction_std"])
            else:
                base.update(tier1_share_mean=a["tier1_share_mean"], total_hits_mean=a["total_hits_mean"],
                            hits_t1_mean=a["hits_t1_mean"], hits_t2_mean=a["hits_t2_mean"])
            out.append(base)
        return out
    # fig4
    tops = topologies or sorted({a["topology"] for a in agg})
    pols = policies or sorted({a["policy"] for a in agg})
    cells = [(t, p) for t in tops for p in pols]
    if omegas is not None:
        cells = [(t, p, float(w)) for t, p in cells for w in omegas]
        have = [(a["topology"], a["policy"], a["omega"]) for a in agg]
    else:
        have = [(a["topology"], a["policy"]) for a in agg]
    _require(cells, have, "fig4")
    return [{"topology": a["topology"], "policy": a["policy"], "tier2_capacity": a["tier2_capacity"],
             "omega": a["omega"], "total_penalty_mean": a["total_penalty_mean"],
             "total_delay_mean": a["total_delay_mean"], "delay_fraction_mean": a["delay_fraction_mean"],
             "n": a["n"]}
            for a in agg if a["topology"] in tops and a["policy"] in pols]


# -- Pareto comparison -----------------------------------------------------

def pareto_frontier(points):
    """Lower-left frontier of ``(penalty, delay)`` points, sorted by penalty."""
    pts = sorted((float(p), float(d)) for p, d in points)
    front = []
    for p, d in pts:
        if not front or d < front[-1][1]:
            if front and front[-1][0] == p:
                front[-1] = (p, d)
            else:
                front.append((p, d))
    return front


def frontier_delay(front, penalty):
    ps = [p for p, _ in front]
    ds = [d for _, d in front]
    return float(np.interp(penalty, ps, ds))


def dominance_share(front_a, front_b):
    """Share of matched penalty levels where frontier ``a`` has delay <= ``b``.

    Levels are the frontier penalties of both curves inside their common
    penalty range; delays are linearly interpolated between frontier points.
    Returns ``(share, levels)``; share is NaN when the ranges do not overlap.
    """
    lo = max(front_a[0][0], front_b[0][0])
    hi = min(front_a[-1][0], front_b[-1][0])
    levels = sorted({p for p, _ in front_a + front_b if lo <= p <= hi})
    if not levels:
        return math.nan, []
    wins = [frontier_delay(front_a, p) <= frontier_delay(front_b, p) * (1 + 1e-12) for p in levels]
    return sum(wins) / len(levels), levels
