#!/usr/bin/env python3
# -*- coding: utf-8 -*

import math
import numpy as np
import pytest

from scipy.spatial.transform import Rotation

from heteroagg_core.constants import Label, Weighting
from heteroagg_core.geometry import (
    Aggregate,
    ContactGraph,
    DegenerateGeometry,
    GeometryError,
    GeometryParseError,
    Particle,
    contact_graph,
    dump_geometry,
    fractal_dimension,
    in_contact,
    is_connected,
    is_valid_aggregate,
    mixing_ratio,
    overlaps,
    parse_geometry,
    radius_of_gyration,
    read_geometry,
    validate_aggregate,
    write_geometry
)

"""
Testing Particles
"""


@pytest.mark.parametrize("position, radius", [
    ((0.0, 0.0, 0.0), 0.0),
    ((0.0, 0.0, 0.0), -1.0),
    ((0.0, math.nan, 0.0), 1.0),
    ((0.0, 0.0), 1.0),
])
def test_invalid_particle(position, radius):
    with pytest.raises(GeometryError):
        Particle(position, radius)


def test_invalid_aggregate_label():
    with pytest.raises(GeometryError):
        Aggregate([(0, 0, 0)], [1.0], [2])


@pytest.mark.parametrize("distance, expected", [
    (2.0, True),
    (2.02, True),
    (2.03, False),
    (1.5, True),
])
def test_in_contact(distance, expected):
    p = Particle((0.0, 0.0, 0.0), 1.0)
    q = Particle((distance, 0.0, 0.0), 1.0)

    assert in_contact(p, q) is expected


@pytest.mark.parametrize("distance, expected", [
    (2.0, False),
    (2.0 - 1e-10, False),
    (2.0 - 1e-6, True),
    (1.0, True),
])
def test_overlaps(distance, expected):
    p = Particle((0.0, 0.0, 0.0), 1.0)
    q = Particle((distance, 0.0, 0.0), 1.0)

    assert overlaps(p, q) is expected


"""
Testing Contact Graph
"""


def test_contact_graph_of_chain(chain):
    graph = contact_graph(chain)

    assert graph.edges == frozenset({(0, 1), (1, 2)})
    assert graph.degrees().tolist() == [1, 2, 1]
    assert is_connected(graph)


def test_disconnected_graph():
    assert not is_connected(ContactGraph(3, frozenset({(0, 1)})))
    assert is_connected(ContactGraph(1))


def test_validate_overlapping_aggregate():
    a = Aggregate([(0, 0, 0), (15, 0, 0)], [10.0, 10.0], [0, 0])

    with pytest.raises(GeometryError):
        validate_aggregate(a)


def test_validate_disconnected_aggregate():
    a = Aggregate([(0, 0, 0), (30, 0, 0)], [10.0, 10.0], [0, 0])

    assert not is_valid_aggregate(a)
    with pytest.raises(GeometryError):
        validate_aggregate(a)


def test_validate_chain(chain, touching_pair):
    validate_aggregate(chain)
    validate_aggregate(touching_pair)


"""
Testing Structural Quantities
"""


def test_mixing_ratio(chain, touching_pair):
    assert mixing_ratio(chain) == pytest.approx(2 / 3)
    assert mixing_ratio(touching_pair) == 0.5


def test_radius_of_gyration_equal_mass(touching_pair, chain):
    assert radius_of_gyration(touching_pair) == pytest.approx(10.0)
    assert radius_of_gyration(chain) == pytest.approx(math.sqrt(800 / 3))


def test_radius_of_gyration_volume_mass():
    a = Aggregate([(0, 0, 0), (3, 0, 0)], [1.0, 2.0], [0, 1])

    assert radius_of_gyration(a, Weighting.EQUAL_MASS) == pytest.approx(1.5)
    assert radius_of_gyration(a, Weighting.VOLUME_MASS) == pytest.approx(
        math.sqrt(8 / 9))


def test_fractal_dimension_of_chain(chain):
    expected = math.log(3 / 1.3) / math.log(math.sqrt(800 / 3) / 10.0)

    assert fractal_dimension(chain) == pytest.approx(expected)


def test_fractal_dimension_degenerate(touching_pair):
    single = Aggregate([(0, 0, 0)], [5.0], [0])

    with pytest.raises(DegenerateGeometry):
        fractal_dimension(single)

    # R_g equals the mean radius.
    with pytest.raises(DegenerateGeometry):
        fractal_dimension(touching_pair)


def test_rigid_motion_invariance(aggregate):
    rotation = Rotation.from_euler("xyz", [0.3, -1.1, 2.0]).as_matrix()
    moved = aggregate.rotated(rotation).translated([5.0, -3.0, 12.0])

    assert radius_of_gyration(moved) == pytest.approx(
        radius_of_gyration(aggregate))
    assert contact_graph(moved).edges == contact_graph(aggregate).edges


def test_particles_view(chain):
    particles = chain.particles

    assert len(particles) == 3
    assert particles[2] == Particle((40.0, 0.0, 0.0), 10.0, Label.TIO2)
    assert Aggregate.from_particles(particles).labels.tolist() == [0, 0, 1]


"""
Testing Text Format
"""


def test_geometry_text_roundtrip(aggregate, tmp_path):
    path = tmp_path / "aggregate.xyz"
    write_geometry(path, aggregate)
    loaded = read_geometry(path)

    np.testing.assert_array_equal(loaded.positions, aggregate.positions)
    np.testing.assert_array_equal(loaded.radii, aggregate.radii)
    np.testing.assert_array_equal(loaded.labels, aggregate.labels)
    np.testing.assert_array_equal(loaded.cluster_ids, aggregate.cluster_ids)
    assert loaded.provenance == aggregate.provenance
    assert dump_geometry(loaded) == dump_geometry(aggregate)


def test_geometry_text_header(aggregate):
    lines = dump_geometry(aggregate).splitlines()

    assert lines[1] == f"# seed={aggregate.provenance.seed}"
    assert lines[2].startswith("# theta_df=1.8 theta_rho=0.5")
    assert len([line for line in lines if not line.startswith("#")]) == len(aggregate)


@pytest.mark.parametrize("text, line_number", [
    ("0 0 0 1 0\n1 2 3\n", 2),
    ("# comment\n0 0 0 1 0\n2 0 0 -1 1\n", 3),
    ("0 0 0 1 7\n", 1),
    ("0 0 zero 1 0\n", 1),
])
def test_geometry_parse_error(text, line_number):
    with pytest.raises(GeometryParseError) as err:
        parse_geometry(text)

    assert err.value.line_number == line_number
    assert f"line {line_number}" in str(err.value)


def test_empty_geometry():
    with pytest.raises(GeometryParseError):
        parse_geometry("# nothing\n")
