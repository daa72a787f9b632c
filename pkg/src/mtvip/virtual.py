"""Slotted virtual control plane: VIP counts, joint caching/forwarding, penalties."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rap
from .model import NetworkModel, NodeCacheConfig, ObjectCatalog, RoutingTable, zipf_pmf


@dataclass
class PolicyParams:
    omega: float = 0.0

    def __post_init__(self):
        if self.omega < 0:
            raise ValueError("omega must be non-negative")


@dataclass
class ForwardingAllocation:
    """Per-link allocation for one slot.

    Each link carries at most one object, so the allocation is stored per
    link: ``obj[l]`` (-1 when idle), ``mu[l]`` allocated rate, ``v[l]``
    VIPs actually sent and ``w[l]`` the winning backpressure differential.
    """

    obj: np.ndarray
    mu: np.ndarray
    w: np.ndarray
    v: np.ndarray = None

    def __post_init__(self):
        if self.v is None:
            self.v = np.zeros_like(self.mu)


@dataclass
class SlotRecord:
    slot: int
    total_backlog: float
    total_penalty: float
    cumavg_backlog: float
    cumavg_penalty: float


def compute_benefits(V_n, prev_tier_n, tiers: NodeCacheConfig, params: PolicyParams):
    """Per-object, per-tier caching benefit at one node.

    ``prev_tier_n[k]`` is the tier that held k last slot (-1 if none).
    Uncached: ``r*V - omega*c_a``; already in that tier: ``r*V + omega*c_e``.
    """
    r = tiers.read_rates
    b = np.outer(V_n, r) - params.omega * tiers.admission_costs
    held = np.flatnonzero(prev_tier_n >= 0)
    if len(held):
        j = prev_tier_n[held]
        b[held, j] += params.omega * (tiers.admission_costs[j] + tiers.eviction_costs[j])
    return b


def decide_caching(benefits, tiers: NodeCacheConfig, exclude=None, method="tiered", prefer=None):
    """Optimal cache placement for one node; returns the tier per object (-1 = none).

    ``exclude`` masks objects that may not be cached here (those sourced at
    the node). ``method="expanded"`` goes through the explicit slot expansion
    and the generic assignment solver; ``"tiered"`` is the fast equivalent
    and, given ``prefer`` (current tiers), breaks exact ties toward keeping
    the current placement.
    """
    b = np.asarray(benefits, dtype=float)
    K, J = b.shape
    tier = np.full(K, -1, dtype=np.int64)
    if J == 0:
        return tier
    keep = np.arange(K) if exclude is None else np.flatnonzero(~exclude)
    bm = rap.BenefitMatrix(b[keep], tiers.capacities)
    if method == "tiered":
        s = rap.solve_tiered(bm, None if prefer is None else np.asarray(prefer)[keep])
    elif method == "expanded":
        e = rap.expand(bm)
        s = rap.collapse(rap.solve(e), e.slot_tier, len(keep), J)
    else:
        raise ValueError(f"unknown method {method!r}")
    rows, cols = np.nonzero(s)
    tier[keep[rows]] = cols
    return tier


def compute_penalties(prev_tier, new_tier, admission_costs, eviction_costs):
    """Transition penalties per (node, object): c_a on entering a tier, c_e on leaving.

    ``prev_tier``/``new_tier`` are ``(N, K)`` tier indices; ``*_costs`` are
    ``(N, J)``. A move between tiers counts one eviction and one admission.
    """
    prev_tier = np.asarray(prev_tier)
    new_tier = np.asarray(new_tier)
    changed = prev_tier != new_tier
    p = np.zeros(prev_tier.shape)
    rows = np.broadcast_to(np.arange(prev_tier.shape[0])[:, None], prev_tier.shape)
    left = changed & (prev_tier >= 0)
    p[left] += eviction_costs[rows[left], prev_tier[left]]
    entered = changed & (new_tier >= 0)
    p[entered] += admission_costs[rows[entered], new_tier[entered]]
    return p


class VirtualPlane:
    """VIP queues for one network; ``step`` advances one slot."""

    def __init__(self, model: NetworkModel, catalog: ObjectCatalog, routing: RoutingTable,
                 tiers: list[NodeCacheConfig] | NodeCacheConfig, params: PolicyParams,
                 method="tiered"):
        self.model = model
        self.catalog = catalog
        self.params = params
        self.method = method
        N, K = model.num_nodes, catalog.num_objects
        if isinstance(tiers, NodeCacheConfig):
            tiers = [tiers] * N
        self.tiers = tiers
        self.N, self.K = N, K
        J = max((len(t) for t in tiers), default=0)
        self.J = J
        # per-node arrays padded to J tiers (padding rows are never used)
        self.rates = np.zeros((N, J))
        self.ca = np.zeros((N, J))
        self.ce = np.zeros((N, J))
        self.caps = np.zeros((N, J), dtype=np.int64)
        for n, t in enumerate(tiers):
            m = len(t)
            self.caps[n, :m] = t.capacities
            self.rates[n, :m] = t.read_rates
            self.ca[n, :m] = t.admission_costs
            self.ce[n, :m] = t.eviction_costs

        self.links = model.links
        self.la = np.array([a for a, _ in self.links], dtype=np.int64)
        self.lb = np.array([b for _, b in self.links], dtype=np.int64)
        # VIPs travel a->b while data returns b->a
        self.rev_cap = np.array([model.capacity[(b, a)] for a, b in self.links])
        self.perm = routing.link_mask(self.links)
        self.src_mask = np.zeros((N, K), dtype=bool)
        self.src_mask[catalog.source, np.arange(K)] = True
        self._allowed = (~self.src_mask).astype(np.uint8)
        self._perm8 = self.perm.astype(np.uint8)

        self.t = 1
        self.V = np.zeros((N, K))
        self.tier_of = np.full((N, K), -1, dtype=np.int64)
        self.last_penalty = 0.0
        self.last_allocation = None

    # -- slot phases -------------------------------------------------------

    def benefits(self):
        """``(N, K, J)`` caching benefits for every node at once."""
        b = self.V[:, :, None] * self.rates[:, None, :] - self.params.omega * self.ca[:, None, :]
        n, k = np.nonzero(self.tier_of >= 0)
        j = self.tier_of[n, k]
        b[n, k, j] += self.params.omega * (self.ca[n, j] + self.ce[n, j])
        return b

    def cache_phase(self):
        if self.method == "tiered":
            return rap.cache_phase(self.V, self.tier_of, self.rates, self.ca, self.ce, self.caps,
                                   self.params.omega, self._allowed)
        new_tier = np.empty_like(self.tier_of)
        for n in range(self.N):
            b = compute_benefits(self.V[n], self.tier_of[n], self.tiers[n], self.params)
            new_tier[n] = decide_caching(b, self.tiers[n], exclude=self.src_mask[n],
                                         method=self.method)
        return new_tier

    def forward_phase(self) -> ForwardingAllocation:
        obj, mu, w = rap.max_differential(self.V, self.la, self.lb, self._perm8, self.rev_cap)
        return ForwardingAllocation(obj, mu, w)

    def step(self, arrivals) -> ForwardingAllocation:
        """Run caching, forwarding, settlement, penalty and queue update for one slot."""
        new_tier = self.cache_phase()
        alloc = self.forward_phase()
        settle_transmissions(self.V, alloc, self.la, self.lb)
        p = compute_penalties(self.tier_of, new_tier, self.ca, self.ce)
        self.V = evolve_queues(self.V, alloc, arrivals, new_tier, self.rates,
                               self.la, self.lb, self.src_mask)
        self.tier_of = new_tier
        self.last_penalty = float(p.sum())
        self.last_allocation = alloc
        self.t += 1
        return alloc

    def cache_states(self) -> np.ndarray:
        """Binary ``(N, K, J)`` view of the current placement."""
        s = np.zeros((self.N, self.K, self.J), dtype=bool)
        n, k = np.nonzero(self.tier_of >= 0)
        s[n, k, self.tier_of[n, k]] = True
        return s


def backpressure_forwarding(V, perm, la, lb, rev_cap) -> ForwardingAllocation:
    """Max-differential object per link; ties go to the lowest object id."""
    W = V[la] - V[lb]
    W = np.where(perm, W, -np.inf)
    L = len(la)
    if W.shape[1] == 0:
        k = np.full(L, -1, dtype=np.int64)
        return ForwardingAllocation(k, np.zeros(L), np.zeros(L))
    kstar = np.argmax(W, axis=1)
    wmax = W[np.arange(L), kstar]
    active = wmax > 0
    obj = np.where(active, kstar, -1)
    mu = np.where(active, rev_cap, 0.0)
    return ForwardingAllocation(obj, mu, np.where(active, wmax, 0.0))


def settle_transmissions(V, alloc: ForwardingAllocation, la, lb):
    """Fill ``alloc.v``: what each link actually carries given the backlog.

    Links leaving the same node for the same object share that node's
    backlog; they drain in order of decreasing differential, then receiver id.
    """
    groups = {}
    for l in np.flatnonzero(alloc.obj >= 0):
        groups.setdefault((int(la[l]), int(alloc.obj[l])), []).append(int(l))
    v = alloc.v
    for (a, k), ls in groups.items():
        remaining = V[a, k]
        ls.sort(key=lambda l: (-alloc.w[l], lb[l]))
        for l in ls:
            take = min(alloc.mu[l], remaining)
            v[l] = take
            remaining -= take
    return alloc


def evolve_queues(V, alloc: ForwardingAllocation, arrivals, new_tier, rates, la, lb, src_mask):
    N, K = V.shape
    act = np.flatnonzero(alloc.obj >= 0)
    out_mu = np.zeros((N, K))
    in_v = np.zeros((N, K))
    np.add.at(out_mu, (la[act], alloc.obj[act]), alloc.mu[act])
    np.add.at(in_v, (lb[act], alloc.obj[act]), alloc.v[act])
    drain = np.where(new_tier >= 0,
                     np.take_along_axis(rates, np.maximum(new_tier, 0), axis=1), 0.0)
    nxt = np.maximum(V - out_mu, 0.0) + arrivals + in_v - drain
    nxt = np.maximum(nxt, 0.0)
    nxt[src_mask] = 0.0
    return nxt


class ArrivalSampler:
    """Per-slot request counts: Poisson(lambda) per node, Zipf object choice."""

    def __init__(self, num_nodes, catalog: ObjectCatalog, count_rng, object_rng):
        self.N = num_nodes
        self.K = catalog.num_objects
        self.rate = catalog.arrival_rate
        self.cdf = np.cumsum(zipf_pmf(self.K, catalog.zipf_exponent))
        self.count_rng = count_rng
        self.object_rng = object_rng

    def sample(self):
        A = np.zeros((self.N, self.K))
        if self.rate == 0:
            return A
        counts = self.count_rng.poisson(self.rate, size=self.N)
        total = int(counts.sum())
        if total:
            objs = np.searchsorted(self.cdf, self.object_rng.random(total), side="right")
            objs = np.minimum(objs, self.K - 1)
            nodes = np.repeat(np.arange(self.N), counts)
            np.add.at(A, (nodes, objs), 1.0)
        return A


@dataclass
class VirtualRun:
    omega: float
    seed: int
    records: list = field(default_factory=list)

    @property
    def avg_backlog(self):
        return self.records[-1].cumavg_backlog if self.records else 0.0

    @property
    def avg_penalty(self):
        return self.records[-1].cumavg_penalty if self.records else 0.0

    def to_csv(self, path):
        import csv
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["slot", "total_backlog", "total_penalty", "cumavg_backlog", "cumavg_penalty"])
            for r in self.records:
                w.writerow([r.slot, repr(r.total_backlog), repr(r.total_penalty),
                            repr(r.cumavg_backlog), repr(r.cumavg_penalty)])


def run_virtual(model, catalog, routing, tiers, params: PolicyParams, slots: int, seed,
                check=None, method="tiered") -> VirtualRun:
    """Drive the virtual plane alone with synthetic Poisson/Zipf arrivals.

    The backlog recorded for slot t is the total VIP count at the start of
    slot t+1, i.e. after that slot's update. ``check(plane)`` is called after
    every slot when given.
    """
    if slots < 1:
        raise ValueError("slots must be at least 1")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    # children 0-3 feed sources and the data-plane workload for the same seed
    count_ss, obj_ss = ss.spawn(6)[4:]
    sampler = ArrivalSampler(model.num_nodes, catalog, np.random.default_rng(count_ss),
                             np.random.default_rng(obj_ss))
    plane = VirtualPlane(model, catalog, routing, tiers, params, method=method)
    run = VirtualRun(params.omega, seed)
    sum_b = sum_p = 0.0
    for t in range(1, slots + 1):
        plane.step(sampler.sample())
        if check is not None:
            check(plane)
        backlog = float(plane.V.sum())
        sum_b += backlog
        sum_p += plane.last_penalty
        run.records.append(SlotRecord(t, backlog, plane.last_penalty, sum_b / t, sum_p / t))
    return run
