"""Network-science metrics on communication graphs.

All functions take a :class:`~vanetsci.graph.CommGraph`.  Metrics that have
no value on a graph (for example clustering on a graph without any
connected triple) raise :class:`~vanetsci.exceptions.UndefinedMetricError`
rather than returning a placeholder.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass

import numpy as np
from scipy.sparse.csgraph import shortest_path
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import UndefinedMetricError
from .graph import CommGraph

CLUSTERING_MODES = ("transitivity", "node_average")


@dataclass(frozen=True)
class DegreeHistogram:
    counts: dict
    n: int

    @property
    def probs(self) -> dict:
        return {k: c / self.n for k, c in self.counts.items()}

    @property
    def degrees(self) -> np.ndarray:
        return np.array(sorted(self.counts), dtype=float)

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([self.counts[k] / self.n for k in sorted(self.counts)])

    @classmethod
    def from_degrees(cls, degrees) -> "DegreeHistogram":
        values, counts = np.unique(np.asarray(degrees, dtype=np.int64), return_counts=True)
        return cls(dict(zip(values.tolist(), counts.tolist())), int(counts.sum()))

    def merge(self, other: "DegreeHistogram") -> "DegreeHistogram":
        counts = dict(self.counts)
        for k, c in other.counts.items():
            counts[k] = counts.get(k, 0) + c
        return DegreeHistogram(counts, self.n + other.n)


@dataclass(frozen=True)
class MetricReport:
    n: int
    aspl: float
    clustering_network: float
    clustering_node_avg: float
    connectivity: float
    component_count: int
    scale_param: float = float("nan")
    scenario: str = ""
    density: float = float("nan")
    seed: object = None

    CSV_HEADER = ("scenario,density,scale_param,n,aspl,clust_trans,clust_node_avg,"
                  "connectivity,components,seed")

    def to_csv_row(self) -> str:
        vals = [self.scenario, self.density, self.scale_param, self.n, self.aspl,
                self.clustering_network, self.clustering_node_avg, self.connectivity,
                self.component_count, "" if self.seed is None else self.seed]
        return ",".join(_fmt(v) for v in vals)

    def as_dict(self):
        return asdict(self)


def _fmt(v):
    if isinstance(v, float):
        return "nan" if np.isnan(v) else repr(v)
    return str(v)


def degree_distribution(graph: CommGraph) -> DegreeHistogram:
    if graph.n == 0:
        raise UndefinedMetricError("degree distribution of an empty graph")
    return DegreeHistogram.from_degrees(graph.degrees)


def node_clustering(graph: CommGraph, node) -> float:
    """Fraction of neighbour pairs of ``node`` that are linked; 0 below degree 2."""
    nb = graph.adjacency[node]
    k = len(nb)
    if k < 2:
        return 0.0
    nb_set = set(nb)
    links = sum(1 for u in nb for w in graph.adjacency[u] if w in nb_set)
    return (links / 2) / (k * (k - 1) / 2)


def _triangles_and_triples(graph: CommGraph):
    A = graph.to_sparse()
    deg = np.asarray(A.sum(axis=1)).ravel()
    # each triangle appears 6 times in the sum over (A @ A) * A
    closed = int((A @ A).multiply(A).sum())
    triangles = closed // 6
    triples = int((deg * (deg - 1) // 2).sum())
    return triangles, triples, deg, A


def network_clustering(graph: CommGraph, mode="transitivity") -> float:
    """Network clustering coefficient.

    ``transitivity`` is 3 x triangles / connected triples, i.e. the
    probability that two neighbours of a common node are linked.
    ``node_average`` is the mean of :func:`node_clustering` over nodes of
    degree at least 2.
    """
    if mode not in CLUSTERING_MODES:
        raise ValueError(f"mode must be one of {CLUSTERING_MODES}")
    triangles, triples, deg, A = _triangles_and_triples(graph)
    if triples == 0:
        raise UndefinedMetricError("no node has two or more neighbours")
    if mode == "transitivity":
        return 3 * triangles / triples
    # per-node closed pairs come from the diagonal of A^3 = 2 x triangles at node
    tri_at = np.asarray((A @ A).multiply(A).sum(axis=1)).ravel() / 2
    mask = deg >= 2
    local = tri_at[mask] / (deg[mask] * (deg[mask] - 1) / 2)
    return math.fsum(local) / local.size


def average_shortest_path(graph: CommGraph) -> float:
    """Mean hop count over unordered pairs that are connected.

    Pairs in different components are left out, so sparse, fragmented
    graphs still get a finite value.
    """
    sizes = np.asarray(graph.component_sizes, dtype=np.int64)
    pairs = int((sizes * (sizes - 1) // 2).sum())
    if pairs == 0:
        raise UndefinedMetricError("graph has no connected pair of nodes")
    A = graph.to_sparse()
    total = 0.0
    # BFS per component keeps the dense distance block small
    for comp in _component_members(graph):
        if comp.size < 2:
            continue
        if comp.size == 2:
            total += 1.0
            continue
        sub = A[comp][:, comp]
        dist = shortest_path(sub, method="D", directed=False, unweighted=True)
        total += dist.sum() / 2
    return total / pairs


def _component_members(graph):
    order = np.argsort(graph.component_id, kind="stable")
    bounds = np.cumsum((0,) + tuple(graph.component_sizes))
    return [order[bounds[i]:bounds[i + 1]] for i in range(len(graph.component_sizes))]


def bfs_hops(graph: CommGraph, source) -> dict:
    """Hop distance from ``source`` to every reachable node."""
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in graph.adjacency[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def connectivity_fraction(graph: CommGraph) -> float:
    """Fraction of ordered node pairs joined by some multi-hop path."""
    if graph.n < 2:
        raise UndefinedMetricError("connectivity needs at least two nodes")
    sizes = np.asarray(graph.component_sizes, dtype=np.int64)
    return float((sizes * (sizes - 1)).sum() / (graph.n * (graph.n - 1)))


def node_connectivity(graph: CommGraph, node) -> float:
    if graph.n < 2:
        raise UndefinedMetricError("connectivity needs at least two nodes")
    size = graph.component_sizes[graph.component_id[node]]
    return (size - 1) / (graph.n - 1)


def _or_nan(fn, *args):
    try:
        return float(fn(*args))
    except UndefinedMetricError:
        return float("nan")


def metric_report(graph: CommGraph, scale_param=float("nan"), scenario="",
                  density=float("nan"), seed=None) -> MetricReport:
    """All scalar metrics at once; undefined ones are reported as NaN."""
    return MetricReport(
        n=graph.n,
        aspl=_or_nan(average_shortest_path, graph),
        clustering_network=_or_nan(network_clustering, graph, "transitivity"),
        clustering_node_avg=_or_nan(network_clustering, graph, "node_average"),
        connectivity=_or_nan(connectivity_fraction, graph),
        component_count=len(graph.component_sizes),
        scale_param=scale_param,
        scenario=scenario,
        density=density,
        seed=seed,
    )


class GraphMetrics(TransformerMixin, BaseEstimator):
    """Map a sequence of graphs to rows of scalar metrics.

    Parameters
    ----------
    metrics : tuple of str, default all
        Columns to produce, any of ``aspl``, ``clust_trans``,
        ``clust_node_avg``, ``connectivity``, ``components``, ``n``.

    Examples
    --------
    >>> from vanetsci.graph import CommGraph
    >>> tri = CommGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    >>> GraphMetrics(metrics=("clust_trans", "connectivity")).fit_transform([tri])
    array([[1., 1.]])
    """

    _COLUMNS = {
        "aspl": lambda g: _or_nan(average_shortest_path, g),
        "clust_trans": lambda g: _or_nan(network_clustering, g, "transitivity"),
        "clust_node_avg": lambda g: _or_nan(network_clustering, g, "node_average"),
        "connectivity": lambda g: _or_nan(connectivity_fraction, g),
        "components": lambda g: float(len(g.component_sizes)),
        "n": lambda g: float(g.n),
    }

    def __init__(self, metrics=("aspl", "clust_trans", "clust_node_avg",
                                "connectivity", "components", "n")):
        self.metrics = metrics

    def fit(self, X, y=None):
        unknown = [m for m in self.metrics if m not in self._COLUMNS]
        if unknown:
            raise ValueError(f"unknown metrics {unknown}")
        self.feature_names_out_ = np.array(self.metrics, dtype=object)
        self.n_features_out_ = len(self.metrics)
        return self

    def transform(self, X):
        graphs = list(X)
        for g in graphs:
            if not isinstance(g, CommGraph):
                raise TypeError(f"expected CommGraph, got {type(g).__name__}")
        out = np.empty((len(graphs), len(self.metrics)))
        for i, g in enumerate(graphs):
            for j, m in enumerate(self.metrics):
                out[i, j] = self._COLUMNS[m](g)
        return out

    def get_feature_names_out(self, input_features=None):
        return np.array(self.metrics, dtype=object)
