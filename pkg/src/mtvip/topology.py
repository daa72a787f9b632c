"""Built-in and file-based topologies."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import ModelError, NetworkModel

ABILENE_NODES = (
    "Seattle", "Sunnyvale", "LosAngeles", "Denver", "KansasCity", "Houston",
    "Chicago", "Indianapolis", "Atlanta", "Washington", "NewYork",
)

ABILENE_EDGES = (
    ("Seattle", "Sunnyvale"), ("Seattle", "Denver"),
    ("Sunnyvale", "LosAngeles"), ("Sunnyvale", "Denver"),
    ("LosAngeles", "Houston"), ("Denver", "KansasCity"),
    ("KansasCity", "Houston"), ("KansasCity", "Indianapolis"),
    ("Houston", "Atlanta"), ("Indianapolis", "Chicago"),
    ("Indianapolis", "Atlanta"), ("Chicago", "NewYork"),
    ("Atlanta", "Washington"), ("Washington", "NewYork"),
)

BUILTIN = ("abilene", "grid", "regular")


def abilene(capacity=10.0) -> NetworkModel:
    return NetworkModel.from_edges(ABILENE_NODES, [(a, b, capacity) for a, b in ABILENE_EDGES])


def grid(rows=4, cols=4, capacity=10.0) -> NetworkModel:
    names = [f"{r},{c}" for r in range(rows) for c in range(cols)]
    edges = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                edges.append((i, i + 1, capacity))
            if r + 1 < rows:
                edges.append((i, i + cols, capacity))
    return NetworkModel.from_edges(names, edges)


def _connected(n, edges):
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == n


def random_regular(num_nodes=16, degree=3, capacity=10.0, seed=0, max_tries=10000) -> NetworkModel:
    """Uniform simple ``degree``-regular graph via the pairing model.

    Pairings with self-loops or multi-edges are rejected, as are disconnected
    results, so the accepted graph is uniform over connected simple graphs.
    """
    if num_nodes * degree % 2:
        raise ModelError("num_nodes * degree must be even")
    if degree >= num_nodes:
        raise ModelError("degree must be smaller than the node count")
    rng = np.random.default_rng(seed)
    points = np.repeat(np.arange(num_nodes), degree)
    for _ in range(max_tries):
        perm = rng.permutation(points)
        pairs = perm.reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        edges = {tuple(sorted(map(int, p))) for p in pairs}
        if len(edges) != len(pairs):
            continue
        edges = sorted(edges)
        if not _connected(num_nodes, edges):
            continue
        return NetworkModel.from_edges(
            [str(i) for i in range(num_nodes)], [(a, b, capacity) for a, b in edges]
        )
    raise ModelError(f"no simple connected {degree}-regular graph after {max_tries} pairings")


def load_topology(path, capacity=None) -> NetworkModel:
    """Read a JSON topology file.

    Format: ``{"nodes": [...], "edges": [[a, b], [a, b, capacity], ...],
    "capacity": default}``. Edges are undirected; both directions are created.
    """
    data = json.loads(Path(path).read_text())
    default = data.get("capacity", 10.0) if capacity is None else capacity
    edges = []
    for e in data["edges"]:
        if len(e) == 2:
            edges.append((e[0], e[1], default))
        elif len(e) == 3:
            edges.append((e[0], e[1], e[2]))
        else:
            raise ModelError(f"bad edge entry {e!r}")
    return NetworkModel.from_edges(data["nodes"], edges)


def save_topology(model: NetworkModel, path):
    data = {
        "nodes": list(model.names),
        "edges": [[model.names[a], model.names[b], c] for a, b, c in model.undirected_edges()],
    }
    Path(path).write_text(json.dumps(data, indent=2))


def make_topology(spec: str, capacity=10.0, regular_nodes=16, topology_seed=0, grid_shape=(4, 4)):
    """Resolve a builtin name (``abilene``, ``grid``, ``regular``) or a file path."""
    if spec == "abilene":
        return abilene(capacity)
    if spec == "grid":
        return grid(*grid_shape, capacity=capacity)
    if spec == "regular":
        return random_regular(regular_nodes, 3, capacity, seed=topology_seed)
    p = Path(spec)
    if not p.exists():
        raise ModelError(f"unknown topology {spec!r} (not a builtin and no such file)")
    return load_topology(p, capacity)
