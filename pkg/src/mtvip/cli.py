"""Command line: ``mtvip {run,sweep,figure,virtual,rap,preset}``."""
from __future__ import annotations

import argparse
import csv
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .config import ConfigError, ScenarioConfig, SweepSpec, preset_defaults


def _floats(s):
    return tuple(float(x) for x in s.split(",") if x.strip())


def _ints(s):
    return tuple(int(x) for x in s.split(",") if x.strip())


def _base_config(args) -> ScenarioConfig:
    cfg = ScenarioConfig.load(args.config) if args.config else preset_defaults()
    kw = {}
    for name in ("topology", "policy", "omega", "device_model"):
        v = getattr(args, name, None)
        if v is not None:
            kw[name] = v
    if getattr(args, "seeds", None):
        kw["seeds"] = _ints(args.seeds)
    if getattr(args, "tier2_capacity", None) is not None:
        kw["tier2_capacity"] = args.tier2_capacity
    return cfg.with_(**kw) if kw else cfg


def _add_scenario_flags(p, single=True):
    p.add_argument("--config", help="scenario JSON file (default: built-in defaults)")
    p.add_argument("--seeds", help="comma-separated seed list")
    p.add_argument("--device-model", dest="device_model", choices=("shared", "split"))
    if single:
        p.add_argument("--topology", help="abilene, grid, regular or a topology JSON path")
        p.add_argument("--policy", choices=("vip", "lfu", "lru", "fifo", "rand", "none"))
        p.add_argument("--omega", type=float)
        p.add_argument("--tier2-capacity", dest="tier2_capacity", type=int)


def cmd_run(args):
    cfg = _base_config(args)
    out = Path(args.out)
    results = ex.run_configs([cfg])
    for m in results:
        ex.write_run_json(m, out, cfg)
        print(f"{m.topology} {m.policy} omega={m.omega:g} seed={m.seed}: "
              f"delay_fraction={m.delay_fraction:.4f} hits={m.hits} penalty={m.total_penalty:g}")
    ex.write_summary(results, out / "summary.csv", append=True)
    return 0


def cmd_sweep(args):
    if args.sweep:
        sweep = SweepSpec.load(args.sweep)
    else:
        base = _base_config(args)
        sweep = SweepSpec(
            base=base,
            topologies=tuple(args.topologies.split(",")),
            policies=tuple(args.policies.split(",")),
            omegas=_floats(args.omegas),
            tier2_capacities=_ints(args.tier2_capacities) if args.tier2_capacities else (),
        )
    n = sum(len(c.seeds) for c in sweep.configs())
    print(f"sweep: {len(sweep.configs())} configs, {n} runs", file=sys.stderr)
    progress = None if args.quiet else (lambda i, t: print(f"  {i}/{t}", file=sys.stderr))
    _, agg = ex.run_batch(sweep, args.out, args.parallel, progress)
    for a in agg:
        print(f"{a['topology']} {a['policy']} omega={a['omega']:g} L2={a['tier2_capacity']}: "
              f"delay_fraction={a['delay_fraction_mean']:.4f}±{a['delay_fraction_std']:.4f} "
              f"penalty={a['total_penalty_mean']:.1f}")
    return 0


def cmd_virtual(args):
    cfg = _base_config(args)
    out = Path(args.out) / "virtual"
    out.mkdir(parents=True, exist_ok=True)
    from .dataplane import _slot_tiers
    from .virtual import PolicyParams, run_virtual
    tiers = _slot_tiers(cfg.cache_config(), cfg.slot_length)
    for w in _floats(args.omegas):
        for s in cfg.seeds:
            model, catalog, routing = ex.virtual_setup(cfg, s)
            run = run_virtual(model, catalog, routing, tiers, PolicyParams(w), args.slots, s)
            run.to_csv(out / f"w{w:g}_s{s}.csv")
            print(f"omega={w:g} seed={s}: avg_backlog={run.avg_backlog:.3f} avg_penalty={run.avg_penalty:.3f}")
    return 0


def _load_virtual(dirpath) -> ex.VirtualSweep:
    files = sorted(Path(dirpath).glob("w*_s*.csv"))
    if not files:
        raise ex.FigureError(f"fig1: no virtual-plane series in {dirpath}")
    series = {}
    for f in files:
        m = re.fullmatch(r"w(.+)_s(\d+)\.csv", f.name)
        with open(f, newline="") as fh:
            rows = list(csv.DictReader(fh))
        b = np.array([float(r["cumavg_backlog"]) for r in rows])
        p = np.array([float(r["cumavg_penalty"]) for r in rows])
        series.setdefault(float(m.group(1)), []).append((int(m.group(2)), b, p))
    omegas = tuple(sorted(series))
    n = min(len(b) for v in series.values() for _, b, _ in v)
    B = np.array([np.mean([b[:n] for _, b, _ in series[w]], axis=0) for w in omegas])
    P = np.array([np.mean([p[:n] for _, _, p in series[w]], axis=0) for w in omegas])
    seeds = tuple(sorted({s for v in series.values() for s, _, _ in v}))
    return ex.VirtualSweep(omegas, seeds, B, P)


def cmd_figure(args):
    res = Path(args.results)
    omegas = _floats(args.omegas) if args.omegas else None
    if args.figure == "fig1":
        rows = ex.figure_data(_load_virtual(res / "virtual" if (res / "virtual").is_dir() else res),
                              "fig1", omegas=omegas)
    else:
        summary = res / "summary.csv" if res.is_dir() else res
        if not summary.exists():
            raise ex.FigureError(f"no summary.csv under {res}")
        rows = ex.figure_data(ex.read_summary(summary), args.figure,
                              topologies=args.topologies.split(",") if args.topologies else None,
                              policies=args.policies.split(",") if args.policies else None,
                              omegas=omegas)
    out = Path(args.out) if args.out else (res if res.is_dir() else res.parent) / f"{args.figure}.csv"
    ex.write_rows(rows, out)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def _read_matrix(path):
    p = Path(path)
    text = p.read_text()
    if p.suffix == ".json":
        d = json.loads(text)
        if isinstance(d, list):
            return np.array(d, dtype=float), None
        return np.array(d["benefits"], dtype=float), d.get("capacities")
    rows = [re.split(r"[,\s]+", ln.strip()) for ln in text.splitlines()
            if ln.strip() and not ln.lstrip().startswith("#")]
    return np.array([[float(x) for x in r if x] for r in rows], dtype=float), None


def cmd_rap(args):
    from . import rap
    values, caps = _read_matrix(args.matrix)
    if args.capacities:
        caps = _ints(args.capacities)
    if values.ndim != 2:
        raise rap.RapError("matrix must be two-dimensional")
    if caps is not None:
        bm = rap.BenefitMatrix(values, caps)
        e = rap.expand(bm)
        a = rap.solve(e)
        print(f"objective {a.objective:g}")
        for k, i in a.pairs:
            print(f"object {k} -> slot {i} (tier {int(e.slot_tier[i])}) benefit {e.values[k, i]:g}")
    else:
        a = rap.solve(values)
        print(f"objective {a.objective:g}")
        for k, i in a.pairs:
            print(f"row {k} -> column {i} benefit {values[k, i]:g}")
    return 0


def cmd_preset(args):
    cfg = preset_defaults()
    if args.out:
        cfg.save(args.out)
        print(f"wrote {args.out} (sha256 {cfg.digest()[:12]})")
    else:
        print(cfg.to_json())
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="mtvip", description="Multi-tier VIP caching simulator")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one scenario for each of its seeds")
    _add_scenario_flags(r)
    r.add_argument("--out", default="results")
    r.set_defaults(fn=cmd_run)

    s = sub.add_parser("sweep", help="run a batch of scenarios")
    s.add_argument("--sweep", help="sweep JSON file (overrides the axis flags)")
    _add_scenario_flags(s, single=False)
    s.add_argument("--topologies", default="abilene,grid,regular")
    s.add_argument("--policies", default="vip,lfu,lru,fifo,rand")
    s.add_argument("--omegas", default="0")
    s.add_argument("--tier2-capacities", dest="tier2_capacities", default="")
    s.add_argument("--parallel", type=int, default=1)
    s.add_argument("--out", default="results")
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(fn=cmd_sweep)

    f = sub.add_parser("figure", help="post-process results into plot-ready CSV")
    f.add_argument("figure", choices=ex.FIGURES)
    f.add_argument("--results", default="results", help="results directory or summary CSV")
    f.add_argument("--topologies")
    f.add_argument("--policies")
    f.add_argument("--omegas")
    f.add_argument("--out")
    f.set_defaults(fn=cmd_figure)

    v = sub.add_parser("virtual", help="run the virtual plane alone and write per-slot series")
    _add_scenario_flags(v)
    v.add_argument("--omegas", default=",".join(f"{w:g}" for w in (0, 1, 3, 10)))
    v.add_argument("--slots", type=int, default=5000)
    v.add_argument("--out", default="results")
    v.set_defaults(fn=cmd_virtual)

    a = sub.add_parser("rap", help="solve an assignment matrix file (debugging)")
    a.add_argument("matrix", help="CSV/whitespace text or JSON {benefits, capacities}")
    a.add_argument("--capacities", help="tier capacities; the matrix is then object x tier")
    a.set_defaults(fn=cmd_rap)

    q = sub.add_parser("preset", help="print or save the default scenario")
    q.add_argument("--out")
    q.set_defaults(fn=cmd_preset)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ValueError, ex.BatchError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
