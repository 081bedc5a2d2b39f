#!/usr/bin/env python3
# -*- coding: utf-8 -*

import numpy as np
import pytest

from collections import deque
from scipy.spatial.transform import Rotation

from heteroagg_core.aggregation import build_hetero_aggregate
from heteroagg_core.constants import Label
from heteroagg_core.descriptors import (
    LabelAbsent,
    average_cluster_size,
    batch_average_cluster_size,
    cluster_size_histogram,
    descriptor_report,
    hetero_coordination,
    homo_coordination,
    observable_clusters,
    total_coordination
)
from heteroagg_core.geometry import Aggregate, contact_graph, in_contact
from heteroagg_core.models import GrowthConfig, ModelParams
from heteroagg_core.streams import RandomStream


def _line(labels):
    """
    Straight chain of touching particles of radius 10 nm.
    """
    return Aggregate(
        positions=[(20.0 * i, 0.0, 0.0) for i in range(len(labels))],
        radii=[10.0] * len(labels),
        labels=labels)


@pytest.fixture()
def star():
    """
    Label 1 center touching four label 0 arms that do not touch each other.
    """
    return Aggregate(
        positions=[(0, 0, 0), (20, 0, 0), (-20, 0, 0), (0, 20, 0), (0, -20, 0)],
        radii=[10.0] * 5,
        labels=[1, 0, 0, 0, 0])


"""
Testing Observable Clusters
"""


def test_chain_clusters(chain):
    assert observable_clusters(chain, Label.WO3) == [[0, 1]]
    assert observable_clusters(chain, Label.TIO2) == [[2]]
    assert average_cluster_size(chain, Label.WO3) == 2.0
    assert average_cluster_size(chain, Label.TIO2) == 1.0


def test_alternating_clusters():
    a = _line([0, 1, 0, 1])

    assert observable_clusters(a, Label.WO3) == [[0], [2]]
    assert average_cluster_size(a, Label.TIO2) == 1.0


def test_star_clusters(star):
    assert observable_clusters(star, Label.WO3) == [[1], [2], [3], [4]]
    assert cluster_size_histogram(star, Label.WO3) == [4]
    assert average_cluster_size(star, Label.TIO2) == 1.0


def test_histogram(chain):
    assert cluster_size_histogram(chain, Label.WO3) == [0, 1]
    assert cluster_size_histogram(chain, Label.TIO2) == [1]
    assert cluster_size_histogram(_line([0, 0, 0]), Label.TIO2) == []


def test_label_absent():
    a = _line([0, 0, 0])

    assert observable_clusters(a, Label.TIO2) == []
    with pytest.raises(LabelAbsent):
        average_cluster_size(a, Label.TIO2)


def test_clusters_partition_label(aggregate):
    for label in Label:
        clusters = observable_clusters(aggregate, label)
        members = sorted(i for c in clusters for i in c)
        histogram = cluster_size_histogram(aggregate, label)

        assert members == np.flatnonzero(aggregate.labels == label).tolist()
        assert sum(k * h for k, h in enumerate(histogram, start=1)) == len(members)


"""
Testing Coordination Numbers
"""


def test_chain_coordination(chain):
    assert hetero_coordination(chain) == pytest.approx(2 / 3)
    assert homo_coordination(chain) == pytest.approx(2 / 3)
    assert total_coordination(chain) == pytest.approx(4 / 3)


def test_star_coordination(star):
    assert hetero_coordination(star) == pytest.approx(8 / 5)
    assert homo_coordination(star) == 0.0
    assert total_coordination(star) == pytest.approx(8 / 5)


def test_coordination_of_single_particle():
    a = Aggregate([(0, 0, 0)], [5.0], [1])

    assert hetero_coordination(a) == 0.0
    assert total_coordination(a) == 0.0


def test_coordination_sum(aggregate):
    assert hetero_coordination(aggregate) + homo_coordination(aggregate) == \
        pytest.approx(total_coordination(aggregate))
    assert total_coordination(aggregate) >= 2 * (len(aggregate) - 1) / len(aggregate)


"""
Testing Descriptor Report
"""


def test_chain_report(chain):
    report = descriptor_report(chain)

    assert report.n_particles == 3
    assert report.mixing_ratio == pytest.approx(2 / 3)
    assert report.z_hetero == pytest.approx(2 / 3)
    assert report.z_total == pytest.approx(4 / 3)
    assert report.fractal_dim is not None
    assert report.avg_cluster_size(Label.WO3) == 2.0
    assert report.cluster_size_histogram_label1 == [1]


def test_degenerate_report(touching_pair):
    report = descriptor_report(touching_pair)

    assert report.fractal_dim is None
    assert report.fractal_dim_volume is None
    assert report.z_hetero == 1.0


def test_report_without_label():
    report = descriptor_report(_line([0, 0, 0]))

    assert report.mixing_ratio == 1.0
    assert report.avg_cluster_size_label1 is None
    assert report.cluster_size_histogram_label1 == []


def test_report_invariance(aggregate, rng):
    rotation = Rotation.random(random_state=rng.generator).as_matrix()
    moved = aggregate.rotated(rotation).translated([100.0, 0.0, -50.0])
    moved = moved.permuted(rng.permutation(len(aggregate)))

    expected = descriptor_report(aggregate)
    report = descriptor_report(moved)

    assert report.n_particles == expected.n_particles
    assert report.mixing_ratio == expected.mixing_ratio
    assert report.z_hetero == pytest.approx(expected.z_hetero)
    assert report.z_total == pytest.approx(expected.z_total)
    assert report.fractal_dim == pytest.approx(expected.fractal_dim)
    assert report.avg_cluster_size_label0 == pytest.approx(
        expected.avg_cluster_size_label0)
    assert report.cluster_size_histogram_label0 == \
        expected.cluster_size_histogram_label0
    assert report.cluster_size_histogram_label1 == \
        expected.cluster_size_histogram_label1


"""
Testing Batch Averages
"""


def test_batch_average_cluster_size(chain):
    batch = [chain, _line([0, 1, 0, 1])]

    assert batch_average_cluster_size(batch, Label.WO3) == pytest.approx(1.5)
    assert batch_average_cluster_size(batch, Label.WO3, pooled=True) == \
        pytest.approx(4 / 3)


def test_batch_skips_absent_label(chain):
    batch = [chain, _line([0, 0, 0, 0])]

    assert batch_average_cluster_size(batch, Label.TIO2) == 1.0
    assert batch_average_cluster_size(batch[1:], Label.TIO2) is None
    assert batch_average_cluster_size(batch[1:], Label.TIO2, pooled=True) is None


"""
Testing Against Pairwise Scans
"""


@pytest.fixture(scope="module")
def random_aggregates():
    master = RandomStream(404)
    growth = GrowthConfig(target_size_min=10, target_size_max=30)
    aggregates = []
    for k in range(100):
        stream = master.child(k)
        theta = ModelParams(
            float(stream.uniform(1.5, 2.5)), float(stream.uniform(0.1, 0.9)),
            int(stream.integers(1, 7)), int(stream.integers(1, 7)))
        aggregates.append(build_hetero_aggregate(theta, growth, stream))

    return aggregates


def _scanned_edges(a):
    particles = a.particles
    return {
        (i, j)
        for i in range(len(a)) for j in range(i + 1, len(a))
        if in_contact(particles[i], particles[j])}


def _searched_clusters(a, label, edges):
    neighbors = {i: set() for i in range(len(a))}
    for i, j in edges:
        if a.labels[i] == label and a.labels[j] == label:
            neighbors[i].add(j)
            neighbors[j].add(i)

    seen, clusters = set(), []
    for start in range(len(a)):
        if a.labels[start] != label or start in seen:
            continue

        seen.add(start)
        cluster, queue = [], deque([start])
        while queue:
            i = queue.popleft()
            cluster.append(i)
            for j in sorted(neighbors[i] - seen):
                seen.add(j)
                queue.append(j)

        clusters.append(sorted(cluster))

    return clusters


def test_contact_graph_matches_scan(random_aggregates):
    for a in random_aggregates:
        assert contact_graph(a).edges == _scanned_edges(a)


def test_descriptors_match_scan(random_aggregates):
    for a in random_aggregates:
        edges = _scanned_edges(a)
        hetero = sum(1 for i, j in edges if a.labels[i] != a.labels[j])

        for label in Label:
            assert observable_clusters(a, label) == \
                _searched_clusters(a, int(label), edges)
        assert hetero_coordination(a) == 2 * hetero / len(a)
        assert total_coordination(a) == 2 * len(edges) / len(a)
