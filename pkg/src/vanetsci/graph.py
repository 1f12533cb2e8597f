"""One-hop communication graphs over vehicle snapshots."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from .exceptions import ConfigError

# neighbour buckets visited from each bucket so every unordered pair is seen once
_HALF_PLANE = ((0, 0), (1, -1), (1, 0), (1, 1), (0, 1))


@dataclass(frozen=True)
class RangeModel:
    """Radio ranges in metres.

    Urban links use ``los_range_m`` between vehicles on the same street
    line and ``nlos_range_m`` otherwise; highway links use
    ``highway_range_m`` on the along-road coordinate.  ``axis_tol_m`` is how
    far off a grid line a vehicle may sit and still count as on it, which
    also makes vehicles inside an intersection belong to both streets.
    """

    los_range_m: float = 250.0
    nlos_range_m: float = 140.0
    highway_range_m: float = 250.0
    axis_tol_m: float = 2.5

    def __post_init__(self):
        if not 0 < self.nlos_range_m <= self.los_range_m:
            raise ConfigError("need 0 < nlos_range_m <= los_range_m")
        if self.highway_range_m <= 0:
            raise ConfigError("highway_range_m must be > 0")
        if self.axis_tol_m < 0:
            raise ConfigError("axis_tol_m must be >= 0")


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True


@dataclass(frozen=True, eq=False)
class CommGraph:
    n: int
    adjacency: tuple  # per node, sorted tuple of neighbour indices
    component_id: np.ndarray
    component_sizes: tuple

    @classmethod
    def from_edges(cls, n, edges) -> "CommGraph":
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ValueError("edge endpoint out of range")
        edges = edges[edges[:, 0] != edges[:, 1]]
        neigh = [set() for _ in range(n)]
        uf = UnionFind(n)
        for u, v in edges.tolist():
            neigh[u].add(v)
            neigh[v].add(u)
            uf.union(u, v)
        adjacency = tuple(tuple(sorted(s)) for s in neigh)
        roots = [uf.find(i) for i in range(n)]
        # label components by their smallest member for a canonical order
        label_of = {}
        for i, r in enumerate(roots):
            label_of.setdefault(r, len(label_of))
        component_id = np.array([label_of[r] for r in roots], dtype=np.int64)
        sizes = tuple(np.bincount(component_id, minlength=len(label_of)).tolist()) if n else ()
        return cls(n, adjacency, component_id, sizes)

    @property
    def degrees(self) -> np.ndarray:
        return np.fromiter((len(a) for a in self.adjacency), dtype=np.int64, count=self.n)

    def neighbors(self, node):
        return self.adjacency[node]

    def has_edge(self, u, v) -> bool:
        return v in self.adjacency[u]

    def edges(self) -> np.ndarray:
        """Canonical ``(u, v)`` rows with ``u < v``, lexicographically sorted."""
        out = [(u, v) for u, nb in enumerate(self.adjacency) for v in nb if u < v]
        return np.array(out, dtype=np.int64).reshape(-1, 2)

    @property
    def n_edges(self) -> int:
        return int(sum(len(a) for a in self.adjacency) // 2)

    def to_sparse(self) -> sparse.csr_matrix:
        e = self.edges()
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        data = np.ones(rows.size, dtype=np.int64)
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))


def components(graph: CommGraph) -> list:
    """Connected components as sets of node indices, ordered by smallest member."""
    groups = [set() for _ in graph.component_sizes]
    for node, label in enumerate(graph.component_id.tolist()):
        groups[label].add(node)
    return groups


# -- link rule ------------------------------------------------------------------

def _street_lines(xy, block_size_m, tol):
    """Grid-line indices a position lies on (-1 if none) for each axis."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    on = []
    for col in (1, 0):  # horizontal lines fix y, vertical lines fix x
        idx = np.rint(xy[:, col] / block_size_m)
        close = np.abs(xy[:, col] - idx * block_size_m) <= tol
        on.append(np.where(close, idx, -1).astype(np.int64))
    return on[0], on[1]


def is_link(a, b, model: RangeModel = RangeModel(), scenario="urban",
            block_size_m=125.0) -> bool:
    """Whether vehicles ``a`` and ``b`` can talk directly.

    Links are deterministic: inside range they always succeed.
    """
    ax, ay = a.pos if hasattr(a, "pos") else a
    bx, by = b.pos if hasattr(b, "pos") else b
    if scenario == "highway":
        return abs(ax - bx) <= model.highway_range_m
    if scenario != "urban":
        raise ConfigError(f"unknown scenario {scenario!r}")
    d = math.hypot(ax - bx, ay - by)
    if d <= model.nlos_range_m:
        return True
    if d > model.los_range_m:
        return False
    (ha, hb), (va, vb) = _street_lines([(ax, ay), (bx, by)], block_size_m, model.axis_tol_m)
    return bool((ha >= 0 and ha == hb) or (va >= 0 and va == vb))


def _link_mask(P, h, v, i, j, model, scenario):
    if scenario == "highway":
        return np.abs(P[i, 0] - P[j, 0]) <= model.highway_range_m
    d = np.hypot(P[i, 0] - P[j, 0], P[i, 1] - P[j, 1])
    shared = ((h[i] >= 0) & (h[i] == h[j])) | ((v[i] >= 0) & (v[i] == v[j]))
    return (d <= model.nlos_range_m) | ((d <= model.los_range_m) & shared)


def _prepare(positions, model, scenario, block_size_m):
    P = np.asarray(positions, dtype=float).reshape(-1, 2)
    if scenario == "urban":
        h, v = _street_lines(P, block_size_m, model.axis_tol_m)
        reach = model.los_range_m
    elif scenario == "highway":
        h = v = np.full(len(P), -1, dtype=np.int64)
        reach = model.highway_range_m
    else:
        raise ConfigError(f"unknown scenario {scenario!r}")
    return P, h, v, reach


def link_edges(positions, model: RangeModel = RangeModel(), scenario="urban",
               block_size_m=125.0) -> np.ndarray:
    """Edge array for raw positions, using a grid-bucket index.

    Buckets are squares of the longest range, so only pairs in the same or
    adjacent buckets can be linked.
    """
    P, h, v, reach = _prepare(positions, model, scenario, block_size_m)
    n = len(P)
    if n < 2:
        return np.zeros((0, 2), dtype=np.int64)
    keys = np.floor(P / reach).astype(np.int64)
    if scenario == "highway":
        keys[:, 1] = 0
    buckets = {}
    for idx, key in enumerate(map(tuple, keys.tolist())):
        buckets.setdefault(key, []).append(idx)
    buckets = {k: np.array(val, dtype=np.int64) for k, val in buckets.items()}

    found = []
    for (bx, by), members in buckets.items():
        for dx, dy in _HALF_PLANE:
            other = buckets.get((bx + dx, by + dy))
            if other is None:
                continue
            if dx == 0 and dy == 0:
                iu, ju = np.triu_indices(members.size, k=1)
                i, j = members[iu], members[ju]
            else:
                i = np.repeat(members, other.size)
                j = np.tile(other, members.size)
            if i.size == 0:
                continue
            keep = _link_mask(P, h, v, i, j, model, scenario)
            found.append(np.stack([np.minimum(i[keep], j[keep]),
                                   np.maximum(i[keep], j[keep])], axis=1))
    if not found:
        return np.zeros((0, 2), dtype=np.int64)
    edges = np.concatenate(found)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    return edges[order]


def brute_force_edges(snapshot, model: RangeModel = RangeModel()) -> np.ndarray:
    """Exhaustive pair check with :func:`is_link`; slow, used as an oracle."""
    scenario = snapshot.scenario
    block = getattr(snapshot.config, "block_size_m", 125.0)
    vs = snapshot.vehicles
    out = [(i, j) for i in range(len(vs)) for j in range(i + 1, len(vs))
           if is_link(vs[i], vs[j], model, scenario, block)]
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def build_graph(snapshot, model: RangeModel = RangeModel(), method="grid") -> CommGraph:
    """Communication graph of a snapshot; node ``i`` is ``snapshot.vehicles[i]``."""
    if method == "grid":
        edges = link_edges(snapshot.positions, model, snapshot.scenario,
                           getattr(snapshot.config, "block_size_m", 125.0))
    elif method == "brute":
        edges = brute_force_edges(snapshot, model)
    else:
        raise ValueError(f"unknown method {method!r}")
    return CommGraph.from_edges(len(snapshot), edges)


def torus_graph(points, radius, box) -> CommGraph:
    """Disc-range geometric graph on a periodic box (1-D or 2-D points)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    box = np.broadcast_to(np.asarray(box, dtype=float), (pts.shape[1],))
    tree = cKDTree(np.mod(pts, box), boxsize=box)
    pairs = tree.query_pairs(radius, output_type="ndarray")
    return CommGraph.from_edges(len(pts), pairs)


def write_edge_list(graph: CommGraph, path) -> Path:
    path = Path(path)
    rows = ["u,v"] + [f"{u},{v}" for u, v in graph.edges().tolist()]
    path.write_text("\n".join(rows) + "\n")
    return path
