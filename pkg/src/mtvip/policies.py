"""Caching and forwarding policies for the data plane.

Policies read simulator state through the ``sim`` handle given to
``bind`` and return :class:`~mtvip.dataplane.Action` lists; the simulator
applies them. Private bookkeeping (recency, counters) lives in the policy.
"""
from __future__ import annotations

import numpy as np

from .dataplane import Action, on_data_arrival


def lrt_forward(node, hops, rtt):
    """Least response time: smallest last round-trip delay, unmeasured links
    count as 0 so they get tried; ties by node id."""
    return min(hops, key=lambda b: (rtt.get((node, b), 0.0), b))


class Policy:
    name = "none"
    caches = True
    uses_virtual_plane = False

    def __init__(self, omega=0.0, rng=None):
        self.omega = float(omega)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.sim = None

    def bind(self, sim):
        self.sim = sim

    def on_request(self, node, obj):
        pass

    def on_hit(self, node, obj, tier):
        pass

    def on_data_arrival(self, node, obj) -> list[Action]:
        return []

    def forward_choice(self, node, obj, hops):
        return hops[0] if len(hops) == 1 else lrt_forward(node, hops, self.sim.rtt)


class NoCache(Policy):
    """Caching disabled; the normalization baseline."""

    name = "none"
    caches = False


class VipPolicy(Policy):
    """Cache scores and forwarding both follow the windowed VIP flows."""

    name = "vip"
    uses_virtual_plane = True

    def on_data_arrival(self, node, obj):
        w = self.sim.window
        return on_data_arrival(obj, self.sim.nodes[node], w.recv[node] / w.T, self.omega)

    def forward_choice(self, node, obj, hops):
        if len(hops) == 1:
            return hops[0]
        sent = self.sim.window.sent
        idx = self.sim.link_index
        rtt = self.sim.rtt
        return min(hops, key=lambda b: (-sent[idx[(node, b)], obj], rtt.get((node, b), 0.0), b))


class LfuPolicy(Policy):
    """Cost-aware LFU: the score cascade driven by network-wide request counts."""

    name = "lfu"

    def bind(self, sim):
        super().bind(sim)
        self.freq = np.zeros(sim.K)

    def on_request(self, node, obj):
        self.freq[obj] += 1

    def on_data_arrival(self, node, obj):
        return on_data_arrival(obj, self.sim.nodes[node], self.freq, self.omega)


class LruPolicy(Policy):
    """Leave-copy-everywhere into tier 1; LRU evictees trickle down a tier
    when there is room or the lower tier's LRU object is older."""

    name = "lru"

    def bind(self, sim):
        super().bind(sim)
        self.tick = 0
        self.last = [dict() for _ in range(sim.N)]

    def _touch(self, node, obj):
        self.tick += 1
        self.last[node][obj] = self.tick

    def on_hit(self, node, obj, tier):
        self._touch(node, obj)

    def _lru(self, node, tier):
        last = self.last[node]
        return min(tier.contents, key=lambda k: last[k])

    def on_data_arrival(self, node, obj):
        tiers = self.sim.nodes[node].tiers
        self._touch(node, obj)
        t0 = tiers[0]
        if not t0.full:
            return [Action("admit", obj, 0)]
        victim = self._lru(node, t0)
        acts = [Action("admit", obj, 0, victim)]
        last = self.last[node]
        for j in range(1, len(tiers)):
            t = tiers[j]
            if not t.full:
                acts.append(Action("admit", victim, j, None, True))
                return acts
            v2 = self._lru(node, t)
            if last[v2] < last[victim]:
                acts.append(Action("admit", victim, j, v2, True))
                victim = v2
            else:
                break
        acts.append(Action("drop", victim, from_buffer=True))
        return acts


class FifoPolicy(Policy):
    """Both tiers form one FIFO queue: tier-1 head overflows into tier 2."""

    name = "fifo"

    def on_data_arrival(self, node, obj):
        tiers = self.sim.nodes[node].tiers
        acts = []
        cur, staged = obj, False
        for j, t in enumerate(tiers):
            if not t.full:
                acts.append(Action("admit", cur, j, None, staged))
                return acts
            head = next(iter(t.contents))
            acts.append(Action("admit", cur, j, head, staged))
            cur, staged = head, True
        acts.append(Action("drop", cur, from_buffer=True))
        return acts


class RandPolicy(Policy):
    """Uniform tier choice; a full tier loses a uniformly random resident."""

    name = "rand"

    def on_data_arrival(self, node, obj):
        tiers = self.sim.nodes[node].tiers
        j = int(self.rng.integers(len(tiers)))
        t = tiers[j]
        if not t.full:
            return [Action("admit", obj, j)]
        res = list(t.contents)
        victim = res[int(self.rng.integers(len(res)))]
        return [Action("admit", obj, j, victim), Action("drop", victim, from_buffer=True)]


POLICY_CLASSES = {c.name: c for c in (NoCache, VipPolicy, LfuPolicy, LruPolicy, FifoPolicy, RandPolicy)}


def make_policy(name, omega=0.0, rng=None) -> Policy:
    try:
        cls = POLICY_CLASSES[name]
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; choose from {', '.join(POLICY_CLASSES)}") from None
    return cls(omega, rng)
