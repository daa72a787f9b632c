"""Network, object catalog, cache tiers and shortest-path routing."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np


class ModelError(ValueError):
    """Raised for malformed networks, catalogs or tier configurations."""


@dataclass(frozen=True)
class NetworkModel:
    """Directed graph with per-link capacities (objects/second).

    Nodes are the integers ``0..N-1``; ``names`` carries display labels.
    Every link must have its reverse present.
    """

    names: tuple[str, ...]
    capacity: dict[tuple[int, int], float]

    def __post_init__(self):
        n = len(self.names)
        if n == 0:
            raise ModelError("network has no nodes")
        for (a, b), c in self.capacity.items():
            if a == b:
                raise ModelError(f"self-link at node {self.names[a]}")
            if not (0 <= a < n and 0 <= b < n):
                raise ModelError(f"link ({a},{b}) references unknown node")
            if not c > 0:
                raise ModelError(f"link ({a},{b}) has non-positive capacity {c}")
            if (b, a) not in self.capacity:
                raise ModelError(f"link ({a},{b}) has no reverse link")

    @classmethod
    def from_edges(cls, names, edges) -> "NetworkModel":
        """Build from undirected ``(a, b, capacity)`` triples; ``a``/``b`` are
        indices or names. Both directions get the same capacity."""
        names = tuple(str(x) for x in names)
        index = {name: i for i, name in enumerate(names)}
        cap = {}
        for a, b, c in edges:
            a = index[str(a)] if not isinstance(a, (int, np.integer)) else int(a)
            b = index[str(b)] if not isinstance(b, (int, np.integer)) else int(b)
            cap[(a, b)] = float(c)
            cap[(b, a)] = float(c)
        return cls(names, cap)

    @property
    def num_nodes(self) -> int:
        return len(self.names)

    @property
    def links(self) -> list[tuple[int, int]]:
        return sorted(self.capacity)

    def neighbors(self, n: int) -> list[int]:
        return sorted(b for (a, b) in self.capacity if a == n)

    def undirected_edges(self) -> list[tuple[int, int, float]]:
        return [(a, b, c) for (a, b), c in sorted(self.capacity.items()) if a < b]

    def hop_distances(self) -> np.ndarray:
        """All-pairs BFS hop counts; unreachable pairs are -1."""
        n = self.num_nodes
        adj = [self.neighbors(i) for i in range(n)]
        dist = np.full((n, n), -1, dtype=np.int64)
        for s in range(n):
            dist[s, s] = 0
            q = deque([s])
            while q:
                u = q.popleft()
                for w in adj[u]:
                    if dist[s, w] < 0:
                        dist[s, w] = dist[s, u] + 1
                        q.append(w)
        return dist


@dataclass(frozen=True)
class ObjectCatalog:
    """Objects ``0..K-1`` with their content sources and demand parameters."""

    source: np.ndarray
    zipf_exponent: float = 0.75
    arrival_rate: float = 10.0

    def __post_init__(self):
        if len(self.source) == 0:
            raise ModelError("catalog has no objects")
        if self.zipf_exponent < 0:
            raise ModelError("zipf exponent must be non-negative")
        if self.arrival_rate < 0:
            raise ModelError("arrival rate must be non-negative")

    @property
    def num_objects(self) -> int:
        return len(self.source)


@dataclass(frozen=True)
class TierSpec:
    capacity: int
    read_rate: float
    write_rate: float
    admission_cost: float
    eviction_cost: float

    def __post_init__(self):
        if self.capacity < 1:
            raise ModelError("tier capacity must be at least 1")
        if not (self.read_rate > 0 and self.write_rate > 0):
            raise ModelError("tier rates must be positive")
        if self.admission_cost < 0 or self.eviction_cost < 0:
            raise ModelError("tier costs must be non-negative")


@dataclass(frozen=True)
class NodeCacheConfig:
    """Ordered cache tiers of one node, fastest readout first.

    Each node also owns a one-object migration buffer; it is a runtime
    structure (see :class:`MigrationBuffer`), not configuration.
    """

    tiers: tuple[TierSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        rates = [t.read_rate for t in self.tiers]
        if any(r1 < r2 for r1, r2 in zip(rates, rates[1:])):
            raise ModelError(f"tiers must be in descending readout-rate order, got {rates}")

    def __len__(self):
        return len(self.tiers)

    @property
    def capacities(self) -> np.ndarray:
        return np.array([t.capacity for t in self.tiers], dtype=np.int64)

    @property
    def read_rates(self) -> np.ndarray:
        return np.array([t.read_rate for t in self.tiers], dtype=float)

    @property
    def admission_costs(self) -> np.ndarray:
        return np.array([t.admission_cost for t in self.tiers], dtype=float)

    @property
    def eviction_costs(self) -> np.ndarray:
        return np.array([t.eviction_cost for t in self.tiers], dtype=float)


class MigrationBuffer:
    """Single-object staging area used while an object changes tier."""

    def __init__(self):
        self.item = None

    def put(self, obj):
        """Stage ``obj``; returns any object that had to be dropped to make room."""
        dropped = self.item
        self.item = obj
        return dropped

    def take(self):
        obj, self.item = self.item, None
        return obj


class RoutingTable:
    """Per-object permitted links: next hops on minimum-hop paths to the source."""

    def __init__(self, model: NetworkModel, source: np.ndarray, dist: np.ndarray):
        self.model = model
        self.source = np.asarray(source, dtype=np.int64)
        self.dist = dist
        n = model.num_nodes
        # next_hops[d][u]: neighbours of u one hop closer to destination d
        self._next = [[[] for _ in range(n)] for _ in range(n)]
        for (a, b) in model.links:
            for d in range(n):
                if dist[b, d] == dist[a, d] - 1:
                    self._next[d][a].append(b)

    def next_hops(self, node: int, obj: int) -> list[int]:
        return self._next[self.source[obj]][node]

    def permitted(self, obj: int) -> set[tuple[int, int]]:
        d = self.source[obj]
        return {(a, b) for a in range(self.model.num_nodes) for b in self._next[d][a]}

    def link_mask(self, links) -> np.ndarray:
        """Boolean ``(len(links), K)`` matrix; True where the link is permitted for k."""
        la = np.array([a for a, _ in links], dtype=np.int64)
        lb = np.array([b for _, b in links], dtype=np.int64)
        src = self.source
        return self.dist[lb][:, src] == self.dist[la][:, src] - 1


def build_routing(model: NetworkModel, catalog: ObjectCatalog) -> RoutingTable:
    dist = model.hop_distances()
    for k, s in enumerate(catalog.source):
        unreachable = np.flatnonzero(dist[:, s] < 0)
        if len(unreachable):
            u = unreachable[0]
            raise ModelError(
                f"graph is disconnected: node {model.names[u]} cannot reach "
                f"source {model.names[s]} of object {k}"
            )
    return RoutingTable(model, catalog.source, dist)


def assign_sources(model: NetworkModel, num_objects: int, seed, zipf_exponent=0.75,
                   arrival_rate=10.0) -> ObjectCatalog:
    """Draw each object's source uniformly and independently over the nodes.

    ``seed`` may be an int, a ``SeedSequence`` or a ``Generator``.
    """
    if num_objects < 1:
        raise ModelError("need at least one object")
    if model.num_nodes == 0:
        raise ModelError("network has no nodes")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    source = rng.integers(0, model.num_nodes, size=num_objects)
    return ObjectCatalog(source=source, zipf_exponent=zipf_exponent, arrival_rate=arrival_rate)


def zipf_pmf(num_objects: int, exponent: float) -> np.ndarray:
    """Zipf popularity over ranks 1..K; index 0 is the most popular object."""
    if num_objects < 1:
        raise ModelError("zipf distribution needs at least one object")
    if exponent < 0:
        raise ModelError("zipf exponent must be non-negative")
    w = np.arange(1, num_objects + 1, dtype=float) ** (-float(exponent))
    return w / math.fsum(w)
