"""Compiled vs pure-Python kernels: assignment solves and virtual-plane slots.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from mtvip import _kernels_py
from mtvip.config import preset_defaults
from mtvip.dataplane import _slot_tiers
from mtvip.experiments import virtual_setup
from mtvip.virtual import PolicyParams, run_virtual

try:
    from mtvip import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    ts = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return min(ts)


def bench_lap(impl, rng, n=200):
    mats = [np.vstack([rng.integers(-20, 21, (8, 6)).astype(float), np.zeros((6, 6))])
            for _ in range(n)]
    return lambda: [impl.lap_max(m) for m in mats]


def bench_tiered(impl, rng, n=20):
    caps = np.array([5, 100], dtype=np.int64)
    mats = [rng.exponential(5.0, (1000, 2)) - 2.0 for _ in range(n)]
    return lambda: [impl.tiered_max(m, caps, None) for m in mats]


def bench_slots(impl_name, slots):
    import mtvip.rap as rap
    impl = _kernels if impl_name == "compiled" else _kernels_py
    cfg = preset_defaults()
    model, catalog, routing = virtual_setup(cfg, 0)
    tiers = _slot_tiers(cfg.cache_config(), cfg.slot_length)

    def go():
        saved = rap._impl
        rap._impl = impl
        try:
            run_virtual(model, catalog, routing, tiers, PolicyParams(1.0), slots, 0)
        finally:
            rap._impl = saved
    return go


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--slots", type=int, default=100)
    args = ap.parse_args()
    impls = [("python", _kernels_py)] + ([("compiled", _kernels)] if _kernels else [])
    if _kernels is None:
        print("compiled kernels not built; timing the Python fallback only")
    rows = []
    for label, make, unit in (
        ("lap_max 14x6 x200", lambda m: bench_lap(m, np.random.default_rng(0)), 200),
        ("tiered_max 1000x(5,100) x20", lambda m: bench_tiered(m, np.random.default_rng(0)), 20),
    ):
        times = {name: best_of(make(mod), args.repeat) for name, mod in impls}
        rows.append((label, times, unit))
    times = {name: best_of(bench_slots(name, args.slots), args.repeat) for name, _ in impls}
    rows.append((f"virtual plane abilene {args.slots} slots", times, args.slots))

    print(f"{'benchmark':38s} {'python ms/op':>13s} {'compiled ms/op':>15s} {'speedup':>8s}")
    for label, t, unit in rows:
        py = 1e3 * t["python"] / unit
        if "compiled" in t:
            c = 1e3 * t["compiled"] / unit
            print(f"{label:38s} {py:13.3f} {c:15.3f} {py / c:7.1f}x")
        else:
            print(f"{label:38s} {py:13.3f} {'-':>15s} {'-':>8s}")


if __name__ == "__main__":
    main()
