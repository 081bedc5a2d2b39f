#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Structural descriptors of aggregates.
"""
import logging
import numpy as np

from typing import Iterable, List, Optional

from .constants import Label, Weighting
from .geometry import (
    Aggregate,
    DegenerateGeometry,
    contact_graph,
    fractal_dimension,
    mixing_ratio
)
from .models import DescriptorReport
from .unionfind import UnionFind

_logger = logging.getLogger(__name__)


class LabelAbsent(LookupError):
    pass


"""
Observable clusters
"""


def observable_clusters(a: Aggregate, label: Label) -> List[List[int]]:
    """
    Partitions the particles of the label into maximal connected same-label
    components, ordered by smallest particle index.
    """
    label = int(Label(label))
    if not np.any(a.labels == label):
        return []

    components = UnionFind(len(a))
    for i, j in contact_graph(a).edges:
        if a.labels[i] == label and a.labels[j] == label:
            components.union(i, j)

    return [g for g in components.groups() if a.labels[g[0]] == label]


def average_cluster_size(a: Aggregate, label: Label) -> float:
    """
    Returns the mean cardinality of the observable clusters of the label.
    """
    clusters = observable_clusters(a, label)
    if not clusters:
        raise LabelAbsent(
            f"{a} has no particles of label {Label(label).material}.")

    return sum(len(c) for c in clusters) / len(clusters)


def cluster_size_histogram(a: Aggregate, label: Label) -> List[int]:
    """
    Returns counts of observable clusters by size; entry k - 1 counts the
    clusters of k particles.
    """
    sizes = [len(c) for c in observable_clusters(a, label)]
    if not sizes:
        return []

    return np.bincount(sizes)[1:].tolist()


"""
Coordination numbers
"""


def hetero_coordination(a: Aggregate) -> float:
    """
    Returns the mean number of contacts per particle with the other
    material.
    """
    if len(a) == 0:
        raise DegenerateGeometry("Coordination of an empty aggregate.")

    hetero = sum(
        1 for i, j in contact_graph(a).edges if a.labels[i] != a.labels[j])
    return 2.0 * hetero / len(a)


def homo_coordination(a: Aggregate) -> float:
    if len(a) == 0:
        raise DegenerateGeometry("Coordination of an empty aggregate.")

    homo = sum(
        1 for i, j in contact_graph(a).edges if a.labels[i] == a.labels[j])
    return 2.0 * homo / len(a)


def total_coordination(a: Aggregate) -> float:
    """
    Returns the mean number of contacts per particle.
    """
    if len(a) == 0:
        raise DegenerateGeometry("Coordination of an empty aggregate.")

    return 2.0 * len(contact_graph(a).edges) / len(a)


"""
Report
"""


def _fractal_dimension_or_none(a: Aggregate, weighting: Weighting):
    try:
        return fractal_dimension(a, weighting=weighting)
    except DegenerateGeometry:
        return None


def _average_or_none(a: Aggregate, label: Label) -> Optional[float]:
    try:
        return average_cluster_size(a, label)
    except LabelAbsent:
        return None


def descriptor_report(a: Aggregate) -> DescriptorReport:
    """
    Computes all structural descriptors of the aggregate.
    """
    edges = contact_graph(a).edges
    n = len(a)
    hetero = sum(1 for i, j in edges if a.labels[i] != a.labels[j])

    return DescriptorReport(
        n_particles=n,
        mixing_ratio=mixing_ratio(a),
        z_hetero=2.0 * hetero / n,
        z_total=2.0 * len(edges) / n,
        fractal_dim=_fractal_dimension_or_none(a, Weighting.EQUAL_MASS),
        fractal_dim_volume=_fractal_dimension_or_none(
            a, Weighting.VOLUME_MASS),
        avg_cluster_size_label0=_average_or_none(a, Label.WO3),
        avg_cluster_size_label1=_average_or_none(a, Label.TIO2),
        cluster_size_histogram_label0=cluster_size_histogram(a, Label.WO3),
        cluster_size_histogram_label1=cluster_size_histogram(a, Label.TIO2))


def batch_average_cluster_size(
    aggregates: Iterable[Aggregate],
    label: Label,
    pooled: bool = False
) -> Optional[float]:
    """
    Averages the observable cluster size of the label over a batch.

    By default the per-aggregate averages are averaged, aggregates without
    the label skipped. With pooled=True all clusters of the batch are
    averaged at once. Returns None if no aggregate contains the label.
    """
    if pooled:
        sizes = [
            len(c) for a in aggregates for c in observable_clusters(a, label)]
        return float(np.mean(sizes)) if sizes else None

    means = [
        m for m in (_average_or_none(a, label) for a in aggregates)
        if m is not None]
    if not means:
        _logger.debug(f"No {Label(label).material} particles in batch.")
        return None

    return float(np.mean(means))
