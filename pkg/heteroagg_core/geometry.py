#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Particles, aggregates and their structural quantities.
"""
from __future__ import annotations

import json
import math
import numpy as np

from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple
from marshmallow import ValidationError
from scipy.spatial.distance import pdist

from .constants import (
    Label,
    Weighting,
    CONTACT_SLACK,
    FRACTAL_PREFACTOR,
    GEOMETRY_EPSILON
)
from .models import Provenance
from .unionfind import UnionFind

DEGENERATE_TOLERANCE = 1e-12

GEOMETRY_HEADER = "# heteroagg geometry v1"
PROVENANCE_PREFIX = "# provenance="

"""
Exceptions
"""


class GeometryError(ValueError):
    pass


class DegenerateGeometry(GeometryError):
    pass


class GeometryParseError(GeometryError):
    def __init__(self, message: str, line_number: int = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"

        super().__init__(message)
        self.line_number = line_number


"""
Particle and Aggregate
"""


@dataclass(frozen=True)
class Particle:
    """
    Labeled sphere; position and radius in nm.
    """
    position: Tuple[float, float, float]
    radius: float
    label: Label = Label.WO3

    def __post_init__(self):
        position = tuple(float(x) for x in self.position)
        if len(position) != 3 or not all(math.isfinite(x) for x in position):
            raise GeometryError(
                f"Particle position must be three finite values, got {self.position}.")

        if not (math.isfinite(self.radius) and self.radius > 0):
            raise GeometryError(
                f"Particle radius must be positive, got {self.radius}.")

        object.__setattr__(self, "position", position)
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "label", Label(self.label))


@dataclass
class Aggregate:
    """
    Ordered set of particles stored column-wise.

    cluster_ids holds the primary cluster index of every particle when the
    aggregate comes from the generator.
    """
    positions: np.ndarray
    radii: np.ndarray
    labels: np.ndarray
    cluster_ids: Optional[np.ndarray] = None
    provenance: Optional[Provenance] = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        self.radii = np.asarray(self.radii, dtype=float).reshape(-1)
        self.labels = np.asarray(self.labels, dtype=np.int8).reshape(-1)

        n = len(self.positions)
        if len(self.radii) != n or len(self.labels) != n:
            raise GeometryError(
                "Positions, radii and labels must have equal length.")

        if not np.all(np.isfinite(self.positions)):
            raise GeometryError("Particle positions must be finite.")

        if not np.all(self.radii > 0):
            raise GeometryError("Particle radii must be positive.")

        if not np.all(np.isin(self.labels, [int(Label.WO3), int(Label.TIO2)])):
            raise GeometryError("Particle labels must be 0 or 1.")

        if self.cluster_ids is not None:
            self.cluster_ids = np.asarray(self.cluster_ids, dtype=int)

    def __len__(self) -> int:
        return len(self.radii)

    def __str__(self) -> str:
        return f"Aggregate: {len(self)} particles, rho={mixing_ratio(self):.3f}"

    @classmethod
    def from_particles(
        cls,
        particles: Iterable[Particle],
        provenance: Provenance = None
    ) -> Aggregate:
        particles = list(particles)
        return cls(
            positions=[p.position for p in particles],
            radii=[p.radius for p in particles],
            labels=[int(p.label) for p in particles],
            provenance=provenance)

    @property
    def particles(self) -> List[Particle]:
        return [
            Particle(tuple(x), r, Label(int(label)))
            for x, r, label in zip(self.positions, self.radii, self.labels)]

    def particle(self, i: int) -> Particle:
        return Particle(
            tuple(self.positions[i]), self.radii[i], Label(int(self.labels[i])))

    def translated(self, offset: Sequence[float]) -> Aggregate:
        """
        Returns a copy moved by offset.
        """
        return Aggregate(
            self.positions + np.asarray(offset, dtype=float),
            self.radii.copy(), self.labels.copy(),
            self._copy_cluster_ids(), self.provenance)

    def rotated(self, rotation: np.ndarray) -> Aggregate:
        """
        Returns a copy rotated by a 3x3 matrix about the origin.
        """
        return Aggregate(
            self.positions @ np.asarray(rotation, dtype=float).T,
            self.radii.copy(), self.labels.copy(),
            self._copy_cluster_ids(), self.provenance)

    def permuted(self, order: Sequence[int]) -> Aggregate:
        order = np.asarray(order, dtype=int)
        cluster_ids = None
        if self.cluster_ids is not None:
            cluster_ids = self.cluster_ids[order]

        return Aggregate(
            self.positions[order], self.radii[order], self.labels[order],
            cluster_ids, self.provenance)

    def _copy_cluster_ids(self):
        if self.cluster_ids is None:
            return None
        return self.cluster_ids.copy()


@dataclass(frozen=True)
class ContactGraph:
    """
    Contact relation of an aggregate as an undirected edge set.
    """
    n: int
    edges: FrozenSet[Tuple[int, int]] = field(default_factory=frozenset)

    def neighbors(self) -> List[List[int]]:
        adjacency = [[] for _ in range(self.n)]
        for i, j in sorted(self.edges):
            adjacency[i].append(j)
            adjacency[j].append(i)

        return adjacency

    def degrees(self) -> np.ndarray:
        degrees = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            degrees[i] += 1
            degrees[j] += 1

        return degrees


"""
Predicates
"""


def in_contact(p: Particle, q: Particle, slack: float = CONTACT_SLACK) -> bool:
    """
    Returns True if the particles satisfy the contact rule.
    """
    return math.dist(p.position, q.position) <= slack * (p.radius + q.radius)


def overlaps(p: Particle, q: Particle, epsilon: float = GEOMETRY_EPSILON) -> bool:
    """
    Returns True if the spheres intersect beyond the tangency slack.
    """
    return math.dist(p.position, q.position) < p.radius + q.radius - epsilon


def _pair_indices(n: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(n, k=1)


def contact_mask(a: Aggregate, slack: float = CONTACT_SLACK) -> np.ndarray:
    """
    Returns the condensed boolean contact vector over pairs i < j.
    """
    if len(a) < 2:
        return np.zeros(0, dtype=bool)

    rows, cols = _pair_indices(len(a))
    return pdist(a.positions) <= slack * (a.radii[rows] + a.radii[cols])


def contact_graph(a: Aggregate, slack: float = CONTACT_SLACK) -> ContactGraph:
    """
    Materializes the contact relation of the aggregate.
    """
    mask = contact_mask(a, slack)
    rows, cols = _pair_indices(len(a))
    edges = frozenset(
        (int(i), int(j)) for i, j in zip(rows[mask], cols[mask]))

    return ContactGraph(n=len(a), edges=edges)


def is_connected(g: ContactGraph) -> bool:
    """
    Returns True if every pair of nodes is joined by a contact chain.
    """
    if g.n <= 1:
        return True

    components = UnionFind(g.n)
    components.union_all(g.edges)
    return components.number_of_groups == 1


def has_overlap(a: Aggregate, epsilon: float = GEOMETRY_EPSILON) -> bool:
    if len(a) < 2:
        return False

    rows, cols = _pair_indices(len(a))
    return bool(np.any(
        pdist(a.positions) < a.radii[rows] + a.radii[cols] - epsilon))


def validate_aggregate(a: Aggregate) -> None:
    """
    Raises GeometryError if particles overlap or the aggregate is not
    connected.
    """
    if has_overlap(a):
        raise GeometryError(f"{a} contains overlapping particles.")

    if not is_connected(contact_graph(a)):
        raise GeometryError(f"{a} is not connected.")


def is_valid_aggregate(a: Aggregate) -> bool:
    try:
        validate_aggregate(a)
    except GeometryError:
        return False

    return True


"""
Structural quantities
"""


def mixing_ratio(a: Aggregate) -> float:
    """
    Returns the fraction of particles with label 0.
    """
    if len(a) == 0:
        raise GeometryError("Mixing ratio of an empty aggregate.")

    return float(np.count_nonzero(a.labels == int(Label.WO3))) / len(a)


def particle_masses(radii: np.ndarray, weighting: Weighting) -> np.ndarray:
    if Weighting(weighting) == Weighting.VOLUME_MASS:
        return np.asarray(radii, dtype=float) ** 3

    return np.ones(len(radii))


def center_of_mass(
    a: Aggregate,
    weighting: Weighting = Weighting.EQUAL_MASS
) -> np.ndarray:
    masses = particle_masses(a.radii, weighting)
    return masses @ a.positions / masses.sum()


def gyration_radius(positions: np.ndarray, masses: np.ndarray) -> float:
    """
    Radius of gyration of point masses.
    """
    masses = np.asarray(masses, dtype=float)
    center = masses @ positions / masses.sum()
    squared = np.sum((positions - center) ** 2, axis=1)
    return math.sqrt(float(masses @ squared / masses.sum()))


def radius_of_gyration(
    a: Aggregate,
    weighting: Weighting = Weighting.EQUAL_MASS
) -> float:
    """
    Returns the radius of gyration (nm) about the center of mass.
    """
    if len(a) == 0:
        raise GeometryError("Radius of gyration of an empty aggregate.")

    return gyration_radius(a.positions, particle_masses(a.radii, weighting))


def fractal_dimension(
    a: Aggregate,
    k_f: float = FRACTAL_PREFACTOR,
    weighting: Weighting = Weighting.EQUAL_MASS
) -> float:
    """
    Returns log(N / k_f) / log(R_g / a) with a the mean particle radius.
    """
    n = len(a)
    if n < 2:
        raise DegenerateGeometry(
            f"Fractal dimension needs at least two particles, got {n}.")

    ratio = radius_of_gyration(a, weighting) / float(np.mean(a.radii))
    if ratio <= 0 or abs(ratio - 1.0) <= DEGENERATE_TOLERANCE:
        raise DegenerateGeometry(
            f"Fractal dimension undefined for R_g / a = {ratio}.")

    return math.log(n / k_f) / math.log(ratio)


"""
Text format
"""


def _format_value(value: float) -> str:
    return format(float(value), ".17g")


def dump_geometry(a: Aggregate) -> str:
    """
    Serializes the aggregate as 'x y z r label' lines with '#' headers.
    """
    lines = [GEOMETRY_HEADER]
    provenance = a.provenance
    if provenance is not None:
        if provenance.seed is not None:
            lines.append(f"# seed={provenance.seed}")

        if provenance.theta is not None:
            theta = provenance.theta
            lines.append(
                f"# theta_df={_format_value(theta.theta_df)} "
                f"theta_rho={_format_value(theta.theta_rho)} "
                f"theta_0={theta.theta_0} theta_1={theta.theta_1}")

        lines.append(PROVENANCE_PREFIX + json.dumps(
            provenance.dump(), sort_keys=True, separators=(",", ":")))

    for (x, y, z), r, label in zip(a.positions, a.radii, a.labels):
        lines.append(" ".join([
            _format_value(x), _format_value(y), _format_value(z),
            _format_value(r), str(int(label))]))

    return "\n".join(lines) + "\n"


def parse_geometry(text: str) -> Aggregate:
    """
    Parses the text format written by dump_geometry.
    """
    positions, radii, labels = [], [], []
    provenance = None

    for line_number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue

        if stripped.startswith(PROVENANCE_PREFIX):
            try:
                provenance = Provenance.load(
                    json.loads(stripped[len(PROVENANCE_PREFIX):]))
            except (ValueError, ValidationError) as err:
                raise GeometryParseError(
                    f"Invalid provenance record: {err}", line_number)
            continue

        if stripped.startswith("#"):
            continue

        fields = stripped.split()
        if len(fields) != 5:
            raise GeometryParseError(
                f"Expected 'x y z r label', got {len(fields)} fields.",
                line_number)

        try:
            x, y, z, r = (float(v) for v in fields[:4])
            label = Label.parse(fields[4])
            Particle((x, y, z), r, label)
        except (ValueError, GeometryError) as err:
            raise GeometryParseError(str(err), line_number)

        positions.append((x, y, z))
        radii.append(r)
        labels.append(int(label))

    if not radii:
        raise GeometryParseError("Geometry contains no particles.")

    aggregate = Aggregate(
        positions=positions, radii=radii, labels=labels, provenance=provenance)

    if provenance is not None and sum(provenance.cluster_sizes) == len(aggregate):
        aggregate.cluster_ids = np.repeat(
            np.arange(len(provenance.cluster_sizes)), provenance.cluster_sizes)

    return aggregate


def write_geometry(path, a: Aggregate) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_geometry(a))


def read_geometry(path) -> Aggregate:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_geometry(fh.read())
