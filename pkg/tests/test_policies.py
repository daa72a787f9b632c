import numpy as np
import pytest

from conftest import catalog, line, two_tier
from mtvip.dataplane import Action, Simulator
from mtvip.model import NodeCacheConfig, TierSpec, build_routing
from mtvip.policies import POLICY_CLASSES, lrt_forward, make_policy

T1 = TierSpec(1, 20.0, 20.0, 4.0, 2.0)


def make_sim(policy, cache=None, omega=0.0, seed=0, K=5):
    model = line(3)
    cat = catalog([2] * K)
    return Simulator(model, cat, build_routing(model, cat), cache or two_tier(1, 1),
                     make_policy(policy, omega, np.random.default_rng(seed)), omega, window=10)


def arrive(sim, node, obj):
    acts = sim.policy.on_data_arrival(node, obj)
    for a in acts:
        sim.apply(node, a)
    sim.check_invariants()
    return acts


def contents(sim, node):
    return [list(t.contents) for t in sim.nodes[node].tiers]


def test_make_policy_names():
    assert set(POLICY_CLASSES) == {"vip", "lfu", "lru", "fifo", "rand", "none"}
    with pytest.raises(ValueError):
        make_policy("lifo")


def test_lru_empty_tier1():
    sim = make_sim("lru")
    assert arrive(sim, 0, 0) == [Action("admit", 0, 0)]


def test_lru_evictee_moves_down():
    sim = make_sim("lru")
    arrive(sim, 0, 0)
    arrive(sim, 0, 1)
    assert contents(sim, 0) == [[1], [0]]


def test_lru_evictee_leaves_when_tier2_fresher():
    sim = make_sim("lru")
    arrive(sim, 0, 0)
    arrive(sim, 0, 1)           # 0 -> tier 2
    sim.policy.on_hit(0, 0, 1)  # 0 now more recent than 1
    acts = arrive(sim, 0, 2)
    assert contents(sim, 0) == [[2], [0]]
    assert acts[-1] == Action("drop", 1, from_buffer=True)


def test_lru_evictee_replaces_older_tier2():
    sim = make_sim("lru")
    arrive(sim, 0, 0)
    arrive(sim, 0, 1)           # tier1 [1], tier2 [0]
    arrive(sim, 0, 2)           # 1 (newer than 0) displaces 0
    assert contents(sim, 0) == [[2], [1]]
    assert sim.drops == 1


def test_fifo_chain():
    sim = make_sim("fifo")
    arrive(sim, 0, 0)
    assert contents(sim, 0) == [[0], []]
    arrive(sim, 0, 1)
    assert contents(sim, 0) == [[1], [0]]
    arrive(sim, 0, 2)
    assert contents(sim, 0) == [[2], [1]]
    assert sim.drops == 1


def test_fifo_ignores_hits():
    sim = make_sim("fifo", cache=two_tier(2, 1))
    arrive(sim, 0, 0)
    arrive(sim, 0, 1)
    sim.policy.on_hit(0, 0, 0)
    arrive(sim, 0, 2)
    assert contents(sim, 0) == [[1, 2], [0]]


def test_rand_single_tier():
    sim = make_sim("rand", cache=NodeCacheConfig((T1,)))
    for k in range(4):
        acts = arrive(sim, 0, k)
        assert acts[0].tier == 0
        assert sum(a.victim is not None for a in acts) <= 1


def test_rand_free_tier_no_eviction():
    sim = make_sim("rand", cache=two_tier(3, 3))
    assert arrive(sim, 0, 0)[0].victim is None


def test_rand_tier_frequencies():
    sim = make_sim("rand", seed=42)
    picks = [sim.policy.on_data_arrival(0, 0)[0].tier for _ in range(10_000)]
    assert abs(np.mean(picks) - 0.5) < 0.02


def test_rand_at_most_one_eviction():
    sim = make_sim("rand", seed=1, K=20)
    for k in range(20):
        acts = arrive(sim, 0, k)
        assert sum(a.victim is not None for a in acts) <= 1


def test_naive_eviction_bounds():
    for name in ("lru", "fifo"):
        sim = make_sim(name, K=20)
        for k in range(20):
            acts = arrive(sim, 0, k)
            per_tier = [sum(a.victim is not None and a.tier == j for a in acts) for j in (0, 1)]
            assert max(per_tier) <= 1


def test_lfu_zero_frequency_not_admitted():
    sim = make_sim("lfu", omega=1.0)
    assert sim.policy.on_data_arrival(0, 0) == []


def test_lfu_replacement_benefit():
    sim = make_sim("lfu", cache=NodeCacheConfig((T1,)), omega=1.0)
    sim.policy.freq[:2] = [3, 5]
    sim.nodes[0].tiers[0].contents[0] = True
    sim.nodes[0].where[0] = 0
    acts = sim.policy.on_data_arrival(0, 1)
    # 20 * (5 - 3) - 1 * (4 + 2) = 34 > 0
    assert acts[0] == Action("admit", 1, 0, 0)


def test_lfu_omega_zero_admits():
    sim = make_sim("lfu")
    sim.policy.on_request(0, 3)
    assert sim.policy.freq[3] == 1
    assert sim.policy.on_data_arrival(0, 3) == [Action("admit", 3, 0)]


def test_lfu_counts_only_at_origin():
    sim = make_sim("lfu")
    sim.run([0.0, 0.1], [0, 1], [1, 1])
    assert sim.policy.freq[1] == 2


def test_vip_and_lfu_share_cascade():
    rng = np.random.default_rng(3)
    for _ in range(30):
        freq = rng.integers(0, 10, size=5).astype(float)
        vip = make_sim("vip", omega=0.5)
        lfu = make_sim("lfu", omega=0.5)
        lfu.policy.freq[:] = freq
        vip.window.recv[0] = freq * vip.window.T
        resident = rng.permutation(5)[:2]
        for sim in (vip, lfu):
            for j, k in enumerate(resident):
                sim.nodes[0].tiers[j].contents[int(k)] = True
                sim.nodes[0].where[int(k)] = j
        new = next(k for k in range(5) if k not in resident)
        assert vip.policy.on_data_arrival(0, new) == lfu.policy.on_data_arrival(0, new)


def test_lrt_smallest_rtt():
    assert lrt_forward(0, [1, 2], {(0, 1): 0.5, (0, 2): 0.2}) == 2


def test_lrt_unmeasured_first():
    assert lrt_forward(0, [1, 2], {(0, 1): 0.5}) == 2


def test_lrt_single_link():
    assert lrt_forward(0, [7], {(0, 7): 3.0}) == 7


def test_no_cache_policy_never_caches():
    sim = make_sim("none")
    sim.run([0.0, 0.5, 1.0], [0, 0, 0], [1, 1, 1])
    assert sim.hits == [0, 0] and sim.penalty == 0
