import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vanetsci.exceptions import UndefinedMetricError
from vanetsci.graph import CommGraph
from vanetsci.metrics import (
    DegreeHistogram,
    GraphMetrics,
    MetricReport,
    average_shortest_path,
    bfs_hops,
    connectivity_fraction,
    degree_distribution,
    metric_report,
    network_clustering,
    node_clustering,
    node_connectivity,
)

import oracles


def random_edges(rng, n, p):
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    return list(zip(iu[keep].tolist(), ju[keep].tolist()))


def test_triangle_plus_tail():
    g = CommGraph.from_edges(4, [(0, 1), (1, 2), (0, 2), (2, 3)])
    assert network_clustering(g) == pytest.approx(3 * 1 / 5)
    assert node_clustering(g, 2) == pytest.approx(1 / 3)
    assert node_clustering(g, 3) == 0.0
    assert network_clustering(g, "node_average") == pytest.approx((1 + 1 + 1 / 3) / 3)
    assert average_shortest_path(g) == pytest.approx((1 + 1 + 2 + 1 + 2 + 1) / 6)
    assert connectivity_fraction(g) == 1.0


def test_path_graph_aspl():
    n = 6
    g = CommGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)])
    expected = sum(j - i for i in range(n) for j in range(i + 1, n)) / (n * (n - 1) / 2)
    assert average_shortest_path(g) == pytest.approx(expected)
    assert bfs_hops(g, 0) == {i: i for i in range(n)}


def test_connectivity_two_components():
    g = CommGraph.from_edges(5, [(0, 1), (1, 2), (3, 4)])
    assert connectivity_fraction(g) == pytest.approx((3 * 2 + 2 * 1) / 20)
    assert node_connectivity(g, 0) == pytest.approx(2 / 4)
    assert node_connectivity(g, 4) == pytest.approx(1 / 4)


def test_undefined_metrics_raise():
    empty = CommGraph.from_edges(0, [])
    lonely = CommGraph.from_edges(3, [])
    with pytest.raises(UndefinedMetricError):
        degree_distribution(empty)
    with pytest.raises(UndefinedMetricError):
        network_clustering(lonely)
    with pytest.raises(UndefinedMetricError):
        average_shortest_path(lonely)
    with pytest.raises(UndefinedMetricError):
        connectivity_fraction(CommGraph.from_edges(1, []))
    assert connectivity_fraction(lonely) == 0.0
    with pytest.raises(ValueError):
        network_clustering(CommGraph.from_edges(3, [(0, 1), (1, 2)]), mode="bogus")


def test_report_uses_nan_for_undefined():
    r = metric_report(CommGraph.from_edges(3, [(0, 1)]), scale_param=2.0, scenario="urban",
                      density=10.0, seed=1)
    assert math.isnan(r.clustering_network)
    assert r.aspl == 1.0
    assert r.component_count == 2
    row = r.to_csv_row().split(",")
    assert len(row) == len(MetricReport.CSV_HEADER.split(","))


def test_degree_histogram():
    g = CommGraph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    h = degree_distribution(g)
    assert h.counts == {1: 3, 3: 1}
    assert h.probs == {1: 0.75, 3: 0.25}
    assert h.probabilities.sum() == pytest.approx(1.0)
    merged = h.merge(DegreeHistogram.from_degrees([0, 1]))
    assert merged.n == 6 and merged.counts == {0: 1, 1: 4, 3: 1}


def test_graph_metrics_transformer():
    tri = CommGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    pair = CommGraph.from_edges(3, [(0, 1)])
    tf = GraphMetrics(metrics=("aspl", "connectivity", "n"))
    out = tf.fit_transform([tri, pair])
    assert out.shape == (2, 3)
    assert out[1].tolist() == [1.0, pytest.approx(2 / 6), 3.0]
    assert list(tf.get_feature_names_out()) == ["aspl", "connectivity", "n"]
    assert tf.get_params() == {"metrics": ("aspl", "connectivity", "n")}
    with pytest.raises(ValueError):
        GraphMetrics(metrics=("bogus",)).fit([tri])
    with pytest.raises(TypeError):
        tf.transform([[1, 2]])


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 25).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)),
                                             max_size=60))))
def test_metrics_match_oracles_property(case):
    n, edges = case
    g = CommGraph.from_edges(n, edges)
    adj = oracles.adjacency_sets(n, edges)
    assert g.degrees.tolist() == [len(a) for a in adj]
    assert connectivity_fraction(g) == pytest.approx(oracles.connectivity(adj), abs=1e-12)
    ref = oracles.transitivity(adj)
    if ref is None:
        with pytest.raises(UndefinedMetricError):
            network_clustering(g)
    else:
        assert network_clustering(g) == pytest.approx(ref, abs=1e-12)
        assert network_clustering(g, "node_average") == pytest.approx(
            oracles.node_average_clustering(adj), abs=1e-12)
    ref = oracles.aspl(adj)
    if ref is None:
        with pytest.raises(UndefinedMetricError):
            average_shortest_path(g)
    else:
        assert average_shortest_path(g) == pytest.approx(ref, abs=1e-12)
    # clustering is a probability; connectivity too
    assert 0.0 <= connectivity_fraction(g) <= 1.0
