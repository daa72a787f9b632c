"""Continuous-time data plane: requests, device queues, links and caching.

One event loop per run. Requests are forwarded instantly (request packets
are negligibly small); data objects return along the reverse request path
through FIFO link queues. Each cache tier is a device controller serving
reads and writes (one shared FIFO by default). The virtual plane, when a policy needs it, advances at every
slot boundary using the requests that entered the network in that slot.
"""
from __future__ import annotations

import heapq
import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import (MigrationBuffer, NetworkModel, NodeCacheConfig, ObjectCatalog,
                    RoutingTable, TierSpec, assign_sources, build_routing, zipf_pmf)


class SimulationError(RuntimeError):
    """An action or event broke a simulator invariant."""


@dataclass
class Request:
    id: int
    obj: int
    origin: int
    time: float
    path: list = field(default_factory=list)
    server_tier: int = -1  # -1: served by the content source
    done: float | None = None


@dataclass(frozen=True)
class Action:
    """One caching step returned by a policy.

    ``admit``: place ``obj`` in ``tier``, first evicting ``victim`` (if any)
    into the migration buffer. ``from_buffer`` marks ``obj`` as the object
    currently staged in the buffer. ``drop``: discard the buffered ``obj``.
    """

    kind: str
    obj: int
    tier: int = -1
    victim: int | None = None
    from_buffer: bool = False


class Server:
    """Single FIFO server; jobs are ``(kind, payload, service_time)``."""

    def __init__(self):
        self.jobs: deque = deque()
        self.token = 0


class TierRuntime:
    """One cache device.

    ``device_model="split"`` gives reads and writes separate FIFO servers,
    and an object becomes readable once its write completes. ``"shared"``
    puts both through one controller queue in arrival order; a read issued
    after an admission then always completes after that write, so the object
    is readable at once and queued writes are never withdrawn.
    """

    def __init__(self, spec: TierSpec, device_model="shared"):
        self.spec = spec
        # obj -> written flag; dict order is admission order
        self.contents: dict[int, bool] = {}
        self.shared = device_model == "shared"
        if device_model == "split":
            self.servers = (Server(), Server())
        elif device_model == "shared":
            srv = Server()
            self.servers = (srv, srv)
        else:
            raise ValueError(f"unknown device model {device_model!r}")

    @property
    def full(self):
        return len(self.contents) >= self.spec.capacity


class NodeRuntime:
    def __init__(self, config: NodeCacheConfig, device_model="shared"):
        self.tiers = [TierRuntime(t, device_model) for t in config.tiers]
        self.where: dict[int, int] = {}
        self.buffer = MigrationBuffer()

    def hit_tier(self, obj):
        """Tier that can serve ``obj`` now, or None (absent or still being written)."""
        j = self.where.get(obj)
        if j is not None and self.tiers[j].contents[obj]:
            return j
        return None


class SlidingWindow:
    """Received and sent VIP totals over the last ``T`` completed slots.

    Each link carries at most one object per slot, so a slot is stored as
    the per-link ``(obj, v)`` pair and window sums are kept incrementally.
    """

    def __init__(self, T, num_nodes, num_objects, la, lb):
        self.T = int(T)
        self.la = np.asarray(la)
        self.lb = np.asarray(lb)
        self.recv = np.zeros((num_nodes, num_objects))
        self.sent = np.zeros((len(la), num_objects))
        self.history = deque()

    def push(self, obj, v):
        act = np.flatnonzero((obj >= 0) & (v > 0))
        rec = (act, obj[act].copy(), v[act].copy())
        self._add(rec, 1.0)
        self.history.append(rec)
        if len(self.history) > self.T:
            self._add(self.history.popleft(), -1.0)

    def _add(self, rec, sign):
        links, objs, v = rec
        np.add.at(self.sent, (links, objs), sign * v)
        np.add.at(self.recv, (self.lb[links], objs), sign * v)
        if sign < 0:
            # sums are of integral VIP counts in practice; guard against drift anyway
            self.sent[links, objs] = np.where(self.sent[links, objs] < 1e-9, 0.0, self.sent[links, objs])
            self.recv[self.lb[links], objs] = np.where(self.recv[self.lb[links], objs] < 1e-9, 0.0,
                                                       self.recv[self.lb[links], objs])


def cache_score(window: SlidingWindow, node, obj):
    """Average VIPs for ``obj`` received by ``node`` per slot over the window."""
    return window.recv[node, obj] / window.T


def cache_benefit(score_k, score_kprime, tier: TierSpec, full: bool, omega: float) -> float:
    if full:
        return tier.read_rate * (score_k - score_kprime) - omega * (tier.admission_cost + tier.eviction_cost)
    return tier.read_rate * score_k - omega * tier.admission_cost


def on_data_arrival(obj, node: NodeRuntime, scores, omega) -> list[Action]:
    """Score-driven admission with migration cascade.

    ``scores`` is indexable by object (cache scores or access counts). The
    object goes to the tier of highest positive benefit, displacing that
    tier's lowest-scored resident when full; a displaced object is then
    treated as a new arrival, restricted to tiers not yet touched by this
    cascade, and dropped when none benefits. The cascade is therefore at
    most one step per tier.
    """
    contents = [list(t.contents) for t in node.tiers]
    used = set()
    actions = []
    cur, staged = obj, False
    while True:
        best = None
        s_cur = scores[cur]
        for j, t in enumerate(node.tiers):
            if j in used:
                continue
            victim = None
            if len(contents[j]) >= t.spec.capacity:
                res = contents[j]
                rs = scores[res]
                i = int(np.argmin(rs))
                victim = res[i]
                cb = cache_benefit(s_cur, rs[i], t.spec, True, omega)
            else:
                cb = cache_benefit(s_cur, 0.0, t.spec, False, omega)
            if best is None or cb > best[0]:
                best = (cb, j, victim)
        if best is None or not best[0] > 0:
            if staged:
                actions.append(Action("drop", cur, from_buffer=True))
            return actions
        _, j, victim = best
        actions.append(Action("admit", cur, j, victim, staged))
        used.add(j)
        if victim is not None:
            contents[j].remove(victim)
        contents[j].append(cur)
        if victim is None:
            return actions
        cur, staged = victim, True


@dataclass
class RunMetrics:
    topology: str
    policy: str
    omega: float
    tier2_capacity: int | None
    seed: int
    generated: int = 0
    completed: int = 0
    total_delay: float = 0.0
    baseline_delay: float | None = None
    delay_fraction: float | None = None
    hits: list = field(default_factory=list)
    source_served: int = 0
    total_penalty: float = 0.0
    admissions: list = field(default_factory=list)
    evictions: list = field(default_factory=list)
    drops: int = 0
    end_time: float = 0.0
    slots: int = 0

    @property
    def hits_t1(self):
        return self.hits[0] if self.hits else 0

    @property
    def hits_t2(self):
        return self.hits[1] if len(self.hits) > 1 else 0

    @property
    def total_hits(self):
        return int(sum(self.hits))

    @property
    def tier1_share(self):
        return self.hits_t1 / self.total_hits if self.total_hits else 0.0

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


# event kinds; the integer also orders simultaneous events deterministically via seq
_ARRIVAL, _DATA, _JOB, _SLOT = range(4)
_READ, _WRITE = 0, 1


class Simulator:
    """Event loop for one run of one policy over a fixed workload."""

    def __init__(self, model: NetworkModel, catalog: ObjectCatalog, routing: RoutingTable,
                 cache: NodeCacheConfig, policy, omega=0.0, window=100, slot_length=1.0,
                 device_model="shared"):
        self.model = model
        self.catalog = catalog
        self.routing = routing
        self.cache = cache
        self.policy = policy
        self.omega = float(omega)
        self.slot_length = float(slot_length)
        N, K = model.num_nodes, catalog.num_objects
        self.N, self.K, self.J = N, K, len(cache)
        self.nodes = [NodeRuntime(cache, device_model) for _ in range(N)]
        self.links = model.links
        self.link_index = {l: i for i, l in enumerate(self.links)}
        self.link_busy = np.zeros(len(self.links))
        self.link_time = np.array([1.0 / model.capacity[l] for l in self.links])
        self.rtt: dict[tuple[int, int], float] = {}
        la = [a for a, _ in self.links]
        lb = [b for _, b in self.links]
        self.window = SlidingWindow(window, N, K, la, lb)
        self.plane = None
        if getattr(policy, "uses_virtual_plane", False):
            from .virtual import PolicyParams, VirtualPlane
            self.plane = VirtualPlane(model, catalog, routing, _slot_tiers(cache, self.slot_length),
                                      PolicyParams(self.omega))
        self.A = np.zeros((N, K))
        self.now = 0.0
        self.heap = []
        self.seq = 0
        self.requests: list[Request] = []
        self.delays = []
        self.log = []  # (time, node, kind, obj, tier)
        self.hits = [0] * self.J
        self.admissions = [0] * self.J
        self.evictions = [0] * self.J
        self.penalty = 0.0
        self.source_served = 0
        self.drops = 0
        self.slots = 0
        policy.bind(self)

    # -- event plumbing ----------------------------------------------------

    def _push(self, t, kind, payload):
        if t < self.now:
            raise SimulationError(f"event scheduled in the past ({t} < {self.now})")
        heapq.heappush(self.heap, (t, self.seq, kind, payload))
        self.seq += 1

    def run(self, times, origins, objs) -> None:
        for t, n, k in zip(times, origins, objs):
            self._push(float(t), _ARRIVAL, (int(n), int(k)))
        if self.plane is not None and self.heap:
            self._push(self.slot_length, _SLOT, None)
        while self.heap:
            t, _, kind, payload = heapq.heappop(self.heap)
            self.now = t
            if kind == _ARRIVAL:
                self._arrival(*payload)
            elif kind == _DATA:
                self._data(*payload)
            elif kind == _JOB:
                self._job_done(*payload)
            else:
                self._slot()

    # -- requests ----------------------------------------------------------

    def _arrival(self, origin, obj):
        req = Request(len(self.requests), obj, origin, self.now, [origin])
        self.requests.append(req)
        self.A[origin, obj] += 1
        self.policy.on_request(origin, obj)
        n = origin
        src = self.catalog.source[obj]
        while True:
            nr = self.nodes[n]
            j = nr.hit_tier(obj)
            if j is not None:
                self.policy.on_hit(n, obj, j)
                self.hits[j] += 1
                req.server_tier = j
                tier = nr.tiers[j]
                self._enqueue(n, j, _READ, (req, len(req.path) - 1), 1.0 / tier.spec.read_rate)
                return
            if n == src:
                self.source_served += 1
                self._data(req, len(req.path) - 1, True)
                return
            hops = self.routing.next_hops(n, obj)
            if not hops:
                raise SimulationError(f"no permitted next hop at node {n} for object {obj}")
            n = self.policy.forward_choice(n, obj, hops)
            req.path.append(n)

    def _data(self, req: Request, i: int, at_server: bool):
        """Data for ``req`` is at ``req.path[i]``."""
        n = req.path[i]
        if not at_server:
            self.rtt[(n, req.path[i + 1])] = self.now - req.time
            if self.policy.caches and n != self.catalog.source[req.obj] and req.obj not in self.nodes[n].where:
                for act in self.policy.on_data_arrival(n, req.obj):
                    self.apply(n, act)
        if i == 0:
            req.done = self.now
            self.delays.append(self.now - req.time)
            return
        l = self.link_index[(n, req.path[i - 1])]
        depart = max(self.now, self.link_busy[l]) + self.link_time[l]
        self.link_busy[l] = depart
        self._push(depart, _DATA, (req, i - 1, False))

    # -- cache actions -----------------------------------------------------

    def apply(self, node: int, act: Action):
        nr = self.nodes[node]
        if act.from_buffer:
            if nr.buffer.item != act.obj:
                raise SimulationError(f"object {act.obj} is not in the migration buffer at node {node}")
            nr.buffer.take()
        if act.kind == "drop":
            if not act.from_buffer:
                raise SimulationError("only the buffered object can be dropped")
            self.drops += 1
            self.log.append((self.now, node, "drop", act.obj, -1))
            return
        if act.kind != "admit":
            raise SimulationError(f"unknown action {act.kind!r}")
        j = act.tier
        tier = nr.tiers[j]
        if act.victim is not None:
            self._evict(node, act.victim, j)
        if tier.full:
            raise SimulationError(f"tier {j} at node {node} is full")
        if act.obj in nr.where:
            raise SimulationError(f"object {act.obj} already cached at node {node}")
        tier.contents[act.obj] = tier.shared
        nr.where[act.obj] = j
        self.admissions[j] += 1
        self.penalty += tier.spec.admission_cost
        self.log.append((self.now, node, "admit", act.obj, j))
        self._enqueue(node, j, _WRITE, act.obj, 1.0 / tier.spec.write_rate)

    def _evict(self, node, obj, j):
        nr = self.nodes[node]
        tier = nr.tiers[j]
        if nr.where.get(obj) != j:
            raise SimulationError(f"object {obj} is not in tier {j} at node {node}")
        written = tier.contents.pop(obj)
        del nr.where[obj]
        if not written:
            self._cancel_write(node, j, obj)
        self.evictions[j] += 1
        self.penalty += tier.spec.eviction_cost
        self.log.append((self.now, node, "evict", obj, j))
        dropped = nr.buffer.put(obj)
        if dropped is not None:
            # buffer was occupied: the staged object leaves the node
            self.drops += 1
            self.log.append((self.now, node, "drop", dropped, -1))

    def _enqueue(self, node, j, kind, payload, service):
        srv = self.nodes[node].tiers[j].servers[kind]
        srv.jobs.append((kind, payload, service))
        if len(srv.jobs) == 1:
            self._start_job(node, j, kind)

    def _start_job(self, node, j, sid):
        srv = self.nodes[node].tiers[j].servers[sid]
        srv.token += 1
        self._push(self.now + srv.jobs[0][2], _JOB, (node, j, sid, srv.token))

    def _cancel_write(self, node, j, obj):
        srv = self.nodes[node].tiers[j].servers[_WRITE]
        for i, (kind, payload, _) in enumerate(srv.jobs):
            if kind == _WRITE and payload == obj:
                break
        else:
            raise SimulationError(f"no pending write for object {obj} at node {node}")
        del srv.jobs[i]
        if i == 0:
            srv.token += 1  # invalidates the scheduled completion
            if srv.jobs:
                self._start_job(node, j, _WRITE)

    def _job_done(self, node, j, sid, token):
        tier = self.nodes[node].tiers[j]
        srv = tier.servers[sid]
        if token != srv.token:
            return
        kind, payload, _ = srv.jobs.popleft()
        if srv.jobs:
            self._start_job(node, j, sid)
        if kind == _WRITE:
            if payload in tier.contents:
                tier.contents[payload] = True
        else:
            self._data(*payload, True)

    # -- virtual plane -----------------------------------------------------

    def _slot(self):
        alloc = self.plane.step(self.A)
        self.window.push(alloc.obj, alloc.v)
        self.A = np.zeros_like(self.A)
        self.slots += 1
        if self.heap:
            self._push(self.now + self.slot_length, _SLOT, None)

    # -- results -----------------------------------------------------------

    @property
    def total_delay(self):
        return math.fsum(self.delays)

    def check_invariants(self):
        for n, nr in enumerate(self.nodes):
            seen = {}
            for j, t in enumerate(nr.tiers):
                if len(t.contents) > t.spec.capacity:
                    raise SimulationError(f"tier {j} over capacity at node {n}")
                for k in t.contents:
                    if k in seen:
                        raise SimulationError(f"object {k} in two tiers at node {n}")
                    seen[k] = j
            if seen != nr.where:
                raise SimulationError(f"placement index out of sync at node {n}")
            if nr.buffer.item is not None:
                raise SimulationError(f"migration buffer not empty at node {n}")


def _slot_tiers(cache: NodeCacheConfig, slot_length):
    """Tier rates rescaled from objects/second to objects/slot."""
    if slot_length == 1.0:
        return cache
    return NodeCacheConfig(tuple(
        TierSpec(t.capacity, t.read_rate * slot_length, t.write_rate * slot_length,
                 t.admission_cost, t.eviction_cost) for t in cache.tiers))


def recompute_penalty(log, cache: NodeCacheConfig) -> float:
    """Total penalty rebuilt from an action log."""
    total = 0.0
    for _, _, kind, _, j in log:
        if kind == "admit":
            total += cache.tiers[j].admission_cost
        elif kind == "evict":
            total += cache.tiers[j].eviction_cost
    return total


def generate_workload(num_nodes, catalog: ObjectCatalog, duration, time_rng, object_rng):
    """Poisson request arrivals at every node over ``[0, duration)``.

    Returns ``(times, origins, objects)`` sorted by time (then node).
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    lam = catalog.arrival_rate
    if lam == 0:
        e = np.zeros(0)
        return e, e.astype(np.int64), e.astype(np.int64)
    times, nodes = [], []
    for n in range(num_nodes):
        chunk = int(lam * duration + 10 * math.sqrt(lam * duration) + 10)
        t = np.cumsum(time_rng.exponential(1.0 / lam, size=chunk))
        while t[-1] < duration:
            more = t[-1] + np.cumsum(time_rng.exponential(1.0 / lam, size=chunk))
            t = np.concatenate([t, more])
        t = t[t < duration]
        times.append(t)
        nodes.append(np.full(len(t), n, dtype=np.int64))
    times = np.concatenate(times)
    nodes = np.concatenate(nodes)
    order = np.lexsort((nodes, times))
    times, nodes = times[order], nodes[order]
    cdf = np.cumsum(zipf_pmf(catalog.num_objects, catalog.zipf_exponent))
    objs = np.minimum(np.searchsorted(cdf, object_rng.random(len(times)), side="right"),
                      catalog.num_objects - 1)
    return times, nodes, objs.astype(np.int64)


@dataclass
class Scenario:
    """Everything a run needs that is shared between a policy and its baseline."""

    model: NetworkModel
    catalog: ObjectCatalog
    routing: RoutingTable
    cache: NodeCacheConfig
    workload: tuple
    policy_seed: np.random.SeedSequence


def build_scenario(config, seed) -> Scenario:
    from .topology import make_topology
    model = make_topology(config.topology, config.link_capacity, config.regular_nodes,
                          config.topology_seed)
    src_ss, time_ss, obj_ss, pol_ss = np.random.SeedSequence(seed).spawn(4)
    catalog = assign_sources(model, config.num_objects, np.random.default_rng(src_ss),
                             config.zipf_exponent, config.arrival_rate)
    routing = build_routing(model, catalog)
    workload = generate_workload(model.num_nodes, catalog, config.duration,
                                 np.random.default_rng(time_ss), np.random.default_rng(obj_ss))
    return Scenario(model, catalog, routing, config.cache_config(), workload, pol_ss)


def simulate(scenario: Scenario, policy_name, omega=0.0, window=100, slot_length=1.0,
             device_model="shared") -> Simulator:
    from .policies import make_policy
    policy = make_policy(policy_name, omega, np.random.default_rng(scenario.policy_seed))
    sim = Simulator(scenario.model, scenario.catalog, scenario.routing, scenario.cache, policy,
                    omega, window, slot_length, device_model)
    sim.run(*scenario.workload)
    return sim


def metrics_from(sim: Simulator, config, seed) -> RunMetrics:
    return RunMetrics(
        topology=config.topology, policy=config.policy, omega=config.omega,
        tier2_capacity=config.tier2_capacity, seed=int(seed),
        generated=len(sim.requests), completed=len(sim.delays),
        total_delay=sim.total_delay, hits=list(sim.hits), source_served=sim.source_served,
        total_penalty=sim.penalty, admissions=list(sim.admissions),
        evictions=list(sim.evictions), drops=sim.drops, end_time=sim.now, slots=sim.slots,
    )


def run_scenario(config, seed=None, baseline=True, baseline_delay=None, return_sim=False):
    """Simulate ``config`` for one seed (default: its first seed).

    The no-caching baseline replays the identical workload with caches off
    and least-response-time forwarding; pass ``baseline_delay`` to reuse a
    previously computed value.
    """
    seed = config.seeds[0] if seed is None else seed
    sc = build_scenario(config, seed)
    sim = simulate(sc, config.policy, config.omega, config.window, config.slot_length,
                   config.device_model)
    m = metrics_from(sim, config, seed)
    if baseline and baseline_delay is None:
        if config.policy == "none":
            baseline_delay = m.total_delay
        else:
            baseline_delay = simulate(sc, "none", 0.0, config.window, config.slot_length,
                                      config.device_model).total_delay
    if baseline_delay is not None:
        m.baseline_delay = baseline_delay
        m.delay_fraction = m.total_delay / baseline_delay if baseline_delay > 0 else 1.0
    return (m, sim) if return_sim else m
