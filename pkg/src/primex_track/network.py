"""Directed communication graphs over sensor and communication nodes."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import TopologyError

DEGREE_TOLERANCE = 0.2


@dataclass(frozen=True, eq=False)
class NetworkGraph:
    """Nodes ``0..node_count-1``; an edge ``(j, i)`` means j transmits to i."""

    node_count: int
    sensor_ids: tuple[int, ...]
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.node_count < 1:
            raise TopologyError("a network needs at least one node")
        sensors = tuple(sorted(int(s) for s in self.sensor_ids))
        if len(set(sensors)) != len(sensors):
            raise TopologyError("duplicate sensor ids")
        if sensors and (sensors[0] < 0 or sensors[-1] >= self.node_count):
            raise TopologyError(f"sensor ids must lie in 0..{self.node_count - 1}")
        edges = frozenset((int(j), int(i)) for j, i in self.edges)
        for j, i in edges:
            if not (0 <= j < self.node_count and 0 <= i < self.node_count):
                raise TopologyError(f"edge ({j}, {i}) references an unknown node")
            if i == j:
                raise TopologyError(f"self-loop on node {i}")
        object.__setattr__(self, "sensor_ids", sensors)
        object.__setattr__(self, "edges", edges)

    @cached_property
    def comm_ids(self) -> tuple[int, ...]:
        sensors = set(self.sensor_ids)
        return tuple(i for i in range(self.node_count) if i not in sensors)

    @cached_property
    def _in_lists(self) -> tuple[tuple[int, ...], ...]:
        lists: list[list[int]] = [[] for _ in range(self.node_count)]
        for j, i in self.edges:
            lists[i].append(j)
        return tuple(tuple(sorted(l)) for l in lists)

    @cached_property
    def sensor_rank(self) -> dict[int, int]:
        """Node id -> rank among sorted sensor ids."""
        return {s: r for r, s in enumerate(self.sensor_ids)}

    def is_sensor(self, i: int) -> bool:
        return i in self.sensor_rank

    @cached_property
    def padded_in_neighbors(self) -> np.ndarray:
        """``(N, max_in_degree)`` ascending in-neighbor ids, padded with -1."""
        width = max((len(l) for l in self._in_lists), default=0)
        out = np.full((self.node_count, width), -1, dtype=np.int64)
        for i, l in enumerate(self._in_lists):
            out[i, : len(l)] = l
        return out

    @cached_property
    def adjacency(self) -> np.ndarray:
        """``A[i, j] = 1`` iff j is an in-neighbor of i."""
        a = np.zeros((self.node_count, self.node_count))
        for j, i in self.edges:
            a[i, j] = 1.0
        return a


def in_neighbors(g: NetworkGraph, i: int) -> list[int]:
    """In-neighbors of node ``i`` in ascending order."""
    if not 0 <= i < g.node_count:
        raise TopologyError(f"unknown node id {i}")
    return list(g._in_lists[i])


@dataclass(frozen=True)
class TopologyDiagnostics:
    connected: bool
    component_count: int
    average_in_degree: float
    bidirectionality_violations: tuple[tuple[int, int], ...]

    @property
    def ok(self) -> bool:
        return self.connected and not self.bidirectionality_violations


def _components(n: int, pairs: Iterable[tuple[int, int]]) -> int:
    adj: list[set[int]] = [set() for _ in range(n)]
    for a, b in pairs:
        adj[a].add(b)
        adj[b].add(a)
    seen = [False] * n
    count = 0
    for start in range(n):
        if seen[start]:
            continue
        count += 1
        seen[start] = True
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
    return count


def validate(g: NetworkGraph) -> TopologyDiagnostics:
    """Report connectivity (undirected sense), mean in-degree and one-way edges."""
    components = _components(g.node_count, g.edges)
    violations = tuple(sorted((j, i) for j, i in g.edges if (i, j) not in g.edges))
    return TopologyDiagnostics(
        connected=components == 1,
        component_count=components,
        average_in_degree=len(g.edges) / g.node_count,
        bidirectionality_violations=violations,
    )


def generate_topology(
    seed, node_count: int, sensor_count: int, target_avg_degree: float
) -> NetworkGraph:
    """Random connected bidirectional graph with a given average degree.

    A random spanning tree guarantees connectivity; random extra edges are
    then added until the edge count matches the target degree. Physical
    positions play no role.
    """
    n = node_count
    if n < 1 or not 0 <= sensor_count <= n:
        raise TopologyError(f"infeasible node/sensor counts ({n}, {sensor_count})")
    if n > 1 and not target_avg_degree <= n - 1:
        raise TopologyError(f"average degree {target_avg_degree} exceeds {n - 1} for {n} nodes")
    n_edges = int(round(target_avg_degree * n / 2))
    if n_edges < n - 1:
        raise TopologyError(
            f"average degree {target_avg_degree} is below the spanning-tree minimum {2 * (n - 1) / n:.3f}"
        )
    if abs(2 * n_edges / n - target_avg_degree) > DEGREE_TOLERANCE:
        raise TopologyError(f"cannot match average degree {target_avg_degree} with {n} nodes")

    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    undirected: set[tuple[int, int]] = set()
    for pos in range(1, n):
        u = int(order[pos])
        v = int(order[rng.integers(pos)])
        undirected.add((min(u, v), max(u, v)))

    missing = [(a, b) for a in range(n) for b in range(a + 1, n) if (a, b) not in undirected]
    extra = n_edges - len(undirected)
    if extra > 0:
        picks = rng.choice(len(missing), size=extra, replace=False)
        undirected.update(missing[p] for p in sorted(picks))

    sensors = rng.choice(n, size=sensor_count, replace=False)
    edges = {(a, b) for a, b in undirected} | {(b, a) for a, b in undirected}
    return NetworkGraph(n, tuple(int(s) for s in sensors), frozenset(edges))


def graph_to_dict(g: NetworkGraph) -> dict:
    return {
        "nodes": g.node_count,
        "sensors": list(g.sensor_ids),
        "edges": [list(e) for e in sorted(g.edges)],
    }


def graph_from_dict(data: dict) -> NetworkGraph:
    unknown = set(data) - {"nodes", "sensors", "edges"}
    if unknown:
        raise TopologyError(f"unknown topology keys: {sorted(unknown)}")
    try:
        nodes = data["nodes"]
        sensors = data["sensors"]
        edges = data["edges"]
    except KeyError as exc:
        raise TopologyError(f"topology is missing field {exc.args[0]!r}") from None
    if isinstance(nodes, list):
        if sorted(nodes) != list(range(len(nodes))):
            raise TopologyError("node ids must be 0..N-1")
        nodes = len(nodes)
    pairs = []
    for e in edges:
        if len(e) != 2:
            raise TopologyError(f"edge {e!r} is not a [from, to] pair")
        pairs.append((int(e[0]), int(e[1])))
    return NetworkGraph(int(nodes), tuple(sensors), frozenset(pairs))


def load_topology(path: str | Path) -> NetworkGraph:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise TopologyError(f"cannot read topology file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise TopologyError(f"topology file {path} is not valid JSON: {exc}") from exc
    try:
        return graph_from_dict(data)
    except TopologyError as exc:
        raise TopologyError(f"{path}: {exc}") from exc


def save_topology(g: NetworkGraph, path: str | Path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(g), indent=2) + "\n")
