"""Sensor field deployment, grid clustering and the alive-node neighbour graph.

Per-node state lives in flat numpy arrays on :class:`Topology` so the compiled
forwarding kernel can share it; :class:`Node` is a view onto one row.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import ConfigError, NetworkConfig, stream


class TopologyError(LookupError):
    pass


def euclid(x0, y0, x1, y1) -> float:
    # sqrt of the sum of squares, never math.hypot: the compiled kernel must
    # reproduce every distance bit for bit.
    dx = x0 - x1
    dy = y0 - y1
    return math.sqrt(dx * dx + dy * dy)


class Node:
    __slots__ = ("_topo", "id")

    def __init__(self, topo, node_id):
        self._topo = topo
        self.id = node_id

    def __repr__(self):
        return (f"Node(id={self.id}, pos=({self.x:.2f}, {self.y:.2f}), "
                f"cluster={self.cluster}, energy={self.residual_energy:.6g}, alive={self.alive})")

    x = property(lambda self: float(self._topo.x[self.id]))
    y = property(lambda self: float(self._topo.y[self.id]))
    cluster = property(lambda self: int(self._topo.cluster[self.id]))
    dist_to_bs = property(lambda self: float(self._topo.dist_to_bs[self.id]))
    alive = property(lambda self: bool(self._topo.alive[self.id]))
    is_cluster_head = property(lambda self: bool(self._topo.is_head[self.id]))
    is_compromised = property(lambda self: bool(self._topo.is_compromised[self.id]))

    @property
    def position(self):
        return (self.x, self.y)

    @property
    def residual_energy(self) -> float:
        return float(self._topo.residual[self.id])

    @residual_energy.setter
    def residual_energy(self, value):
        self._topo.residual[self.id] = value


@dataclass
class Cluster:
    cell: int
    center: tuple
    members: list = field(default_factory=list)
    head: Optional[int] = None
    compromised: Optional[int] = None

    @property
    def active(self) -> bool:
        return self.head is not None


class Topology:
    """Nodes, grid clusters and a symmetric adjacency over alive nodes."""

    def __init__(self, config: NetworkConfig, xs, ys, clusters):
        self.config = config
        self.bs = tuple(float(v) for v in config.bs_position)
        n = len(xs)
        self.x = np.asarray(xs, dtype=np.float64)
        self.y = np.asarray(ys, dtype=np.float64)
        self.dist_to_bs = np.array(
            [euclid(self.x[i], self.y[i], *self.bs) for i in range(n)], dtype=np.float64
        )
        self.cluster = np.zeros(n, dtype=np.int64)
        self.alive = np.ones(n, dtype=np.bool_)
        self.residual = np.full(n, config.initial_energy, dtype=np.float64)
        self.is_head = np.zeros(n, dtype=np.bool_)
        self.is_compromised = np.zeros(n, dtype=np.bool_)
        self.clusters = clusters
        for c in clusters:
            self.cluster[c.members] = c.cell
            if c.head is not None:
                self.is_head[c.head] = True
            if c.compromised is not None:
                self.is_compromised[c.compromised] = True
        self.nodes = [Node(self, i) for i in range(n)]
        self._retired = set()
        # Static CSR over the deployment graph; the kernel masks by `alive`.
        self.nbr_ptr, self.nbr_idx = _csr(self.x, self.y, config.radio_range)
        self.adjacency = [
            set(self.nbr_idx[self.nbr_ptr[i]:self.nbr_ptr[i + 1]].tolist()) for i in range(n)
        ]

    def __len__(self):
        return len(self.nodes)

    def node(self, node_id: int) -> Node:
        if not 0 <= node_id < len(self.nodes):
            raise TopologyError(f"unknown node {node_id}")
        return self.nodes[node_id]

    def neighbors(self, node_id: int):
        """Alive nodes within radio range, sorted by id."""
        if not self.node(node_id).alive:
            raise TopologyError(f"node {node_id} is dead")
        return sorted(v for v in self.adjacency[node_id] if self.alive[v])

    def distance(self, u: int, v: int) -> float:
        return euclid(self.x[u], self.y[u], self.x[v], self.y[v])

    def reaches_bs(self, node_id: int) -> bool:
        return self.dist_to_bs[node_id] <= self.config.radio_range

    def alive_count(self) -> int:
        return int(self.alive.sum())

    def active_clusters(self):
        return [c for c in self.clusters if c.head is not None]

    def mark_dead(self, node_id: int) -> None:
        """Retire a node: drop it from the graph and hand on cluster headship.

        Idempotent. Also completes the bookkeeping for nodes whose ``alive``
        flag was already cleared by the forwarding kernel.
        """
        self.node(node_id)
        if node_id in self._retired:
            return
        self._retired.add(node_id)
        self.alive[node_id] = False
        self.residual[node_id] = 0.0
        for v in self.adjacency[node_id]:
            self.adjacency[v].discard(node_id)
        self.adjacency[node_id] = set()
        cluster = self.clusters[self.cluster[node_id]]
        if cluster.head == node_id:
            self.is_head[node_id] = False
            cluster.head = None
            alive = [m for m in cluster.members if self.alive[m]]
            if alive:
                heir = min(alive, key=lambda m: (-self.residual[m], m))
                self.is_head[heir] = True
                cluster.head = heir

    def rebuild_adjacency(self):
        """From-scratch adjacency over alive nodes (reference for audits)."""
        n = len(self.nodes)
        adjacency = [set() for _ in range(n)]
        live = np.flatnonzero(self.alive)
        r = self.config.radio_range
        for i in live:
            for j in live:
                if i != j and euclid(self.x[i], self.y[i], self.x[j], self.y[j]) <= r:
                    adjacency[i].add(int(j))
        return adjacency

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "x", "y", "cluster", "is_head"])
            for i in range(len(self.nodes)):
                w.writerow([i, repr(float(self.x[i])), repr(float(self.y[i])),
                            int(self.cluster[i]), int(self.is_head[i])])


def _csr(x, y, radio_range):
    n = len(x)
    dx = x[:, None] - x[None, :]
    dy = y[:, None] - y[None, :]
    within = np.sqrt(dx * dx + dy * dy) <= radio_range
    np.fill_diagonal(within, False)
    counts = within.sum(axis=1)
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    idx = np.nonzero(within)[1].astype(np.int64)  # row-major, so sorted per row
    return ptr, idx


def deploy(config: NetworkConfig, rng=None) -> Topology:
    """Round-robin placement: node i lands uniformly inside grid cell i mod cells.

    Heads are the member nearest the cell centre (ties to lowest id); one
    non-head member per cell is marked compromised.
    """
    if rng is None:
        rng = stream(config.rng_seed, "deploy")
    g = config.grid_size
    cells = config.cell_count
    if config.node_count < cells:
        raise ConfigError(f"node_count {config.node_count} is below the {cells} grid cells")
    side = config.cluster_cell
    clusters = []
    for cell in range(cells):
        row, col = divmod(cell, g)
        clusters.append(Cluster(cell, ((col + 0.5) * side, (row + 0.5) * side)))
    xs, ys = [], []
    for i in range(config.node_count):
        cell = i % cells
        row, col = divmod(cell, g)
        xs.append((col + rng.random()) * side)
        ys.append((row + rng.random()) * side)
        clusters[cell].members.append(i)
    for c in clusters:
        cx, cy = c.center
        c.head = min(c.members, key=lambda m: (euclid(xs[m], ys[m], cx, cy), m))
        others = [m for m in c.members if m != c.head]
        if others:
            c.compromised = others[int(rng.integers(len(others)))]
    return Topology(config, xs, ys, clusters)
