#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Two stage cluster-cluster aggregation of hetero-aggregates.

Primary clusters are grown particle by particle, then attached to the
growing aggregate one by one. Every placement puts the new center of mass
at the distance that keeps the merged equal-mass system on the fractal
scaling law N / k_f = (R_g / a)^D_f.
"""
from __future__ import annotations

import logging
import math
import numpy as np

from dataclasses import dataclass
from typing import List, Optional, Tuple
from scipy.spatial.distance import cdist
from scipy.spatial.transform import Rotation

from .constants import Label, GEOMETRY_EPSILON
from .geometry import Aggregate, gyration_radius
from .logging import Loggable
from .models import GrowthConfig, ModelParams, Provenance, RadiusDistribution
from .streams import RandomStream

_logger = logging.getLogger(__name__)

# Relative margin keeping sampled contact distances strictly inside the
# contact band.
CONTACT_BAND_MARGIN = 1e-9

# Centers closer than this are treated as coincident.
COINCIDENCE_TOLERANCE = 1e-12

"""
Exceptions
"""


class AggregationError(RuntimeError):
    pass


class InvalidParams(AggregationError, ValueError):
    pass


class InfeasiblePlacement(AggregationError):
    pass


class PlacementExhausted(AggregationError):
    pass


class GenerationFailed(AggregationError):
    pass


"""
Primary Cluster
"""


@dataclass
class PrimaryCluster:
    """
    Homogeneous cluster built in the first aggregation stage.
    """
    particles: Aggregate
    label: Label
    clamped_placements: int = 0
    restarts: int = 0

    def __len__(self) -> int:
        return len(self.particles)


"""
Sampling
"""


def sample_radius(dist: RadiusDistribution, rng: RandomStream) -> float:
    """
    Draws a particle radius from the moment matched log-normal law.
    """
    if dist.std == 0:
        return float(dist.mean)

    return float(rng.lognormal(dist.log_mu, dist.log_sigma))


def sample_radii(
    dist: RadiusDistribution,
    rng: RandomStream,
    n: int
) -> np.ndarray:
    return np.array([sample_radius(dist, rng) for _ in range(n)])


def placement_radius(
    n_a: int,
    n_c: int,
    r_a: float,
    r_c: float,
    a: float,
    d_f: float,
    k_f: float
) -> float:
    """
    Returns the center of mass distance at which merging two sets of
    n_a and n_c particles with radii of gyration r_a and r_c yields a
    set of fractal dimension d_f for mean particle radius a.

    Raises InfeasiblePlacement if no such distance exists.
    """
    if n_a < 1 or n_c < 1:
        raise InvalidParams(
            f"Particle counts must be positive, got {n_a} and {n_c}.")

    n = n_a + n_c
    radicand = (
        a ** 2 * n ** 2 / (n_a * n_c) * (n / k_f) ** (2.0 / d_f)
        - n / n_c * r_a ** 2
        - n / n_a * r_c ** 2)

    if radicand < 0:
        raise InfeasiblePlacement(
            f"No placement distance for n_a={n_a}, n_c={n_c}, "
            f"R_a={r_a:.4g}, R_c={r_c:.4g}, D_f={d_f}.")

    return math.sqrt(radicand)


def _unit_vector(rng: RandomStream) -> np.ndarray:
    while True:
        v = rng.normal(size=3)
        norm = np.linalg.norm(v)
        if norm > COINCIDENCE_TOLERANCE:
            return v / norm


def sample_on_sphere(
    center: np.ndarray,
    d: float,
    rng: RandomStream
) -> np.ndarray:
    """
    Draws a point uniformly from the sphere of radius d about center.
    """
    if d < 0:
        raise InvalidParams(f"Sphere radius must not be negative, got {d}.")

    center = np.asarray(center, dtype=float)
    if d == 0:
        return center.copy()

    return center + d * _unit_vector(rng)


def sample_label(theta: ModelParams, rng: RandomStream) -> Label:
    """
    Draws a primary cluster label, 1 with probability
    (1 - rho) c0 / ((1 - rho) c0 + rho c1).
    """
    denominator = ((1.0 - theta.theta_rho) * theta.theta_0
                   + theta.theta_rho * theta.theta_1)
    if denominator <= 0:
        raise InvalidParams(f"Label law undefined for {theta}.")

    p_one = (1.0 - theta.theta_rho) * theta.theta_0 / denominator
    return Label.TIO2 if rng.random() < p_one else Label.WO3


"""
Constrained placement
"""


@dataclass
class _Placement:
    offset: np.ndarray
    clamped: bool


def _reachable_intervals(
    distances: np.ndarray,
    low: np.ndarray,
    high: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Returns per candidate the interval of sphere radii about the center of
    mass whose sphere meets the candidate's contact shell.
    """
    lower = np.maximum.reduce([
        np.zeros_like(distances), distances - high, low - distances])
    upper = distances + high
    return lower, upper


def _clamp_distance(d: float, lower: np.ndarray, upper: np.ndarray) -> float:
    endpoints = np.concatenate([lower, upper])
    return float(endpoints[np.argmin(np.abs(endpoints - d))])


def _place(
    positions: np.ndarray,
    radii: np.ndarray,
    offsets: np.ndarray,
    new_radii: np.ndarray,
    d: float,
    cfg: GrowthConfig,
    rng: RandomStream
) -> _Placement:
    """
    Finds a translation of the body given by offsets (relative to its
    center of mass) onto the sphere of radius d about the center of mass of
    positions, such that the body touches and does not overlap the existing
    particles.

    If no contact is possible on that sphere, the nearest sphere that
    admits contact is used instead.
    """
    center = positions.mean(axis=0)

    sums = radii[:, None] + new_radii[None, :]
    shell_centers = (positions[:, None, :] - offsets[None, :, :]).reshape(-1, 3)
    low = sums.reshape(-1)
    high = cfg.contact_slack * low * (1.0 - CONTACT_BAND_MARGIN)
    distances = np.linalg.norm(shell_centers - center, axis=1)

    lower, upper = _reachable_intervals(distances, low, high)
    reachable = (lower <= d) & (d <= upper)
    clamped = not reachable.any()
    if clamped:
        d = _clamp_distance(d, lower, upper)
        reachable = (lower <= d + COINCIDENCE_TOLERANCE) & (
            d - COINCIDENCE_TOLERANCE <= upper)

    candidates = np.flatnonzero(reachable)
    limit = cfg.contact_slack * (radii[:, None] + new_radii[None, :])
    floor = radii[:, None] + new_radii[None, :] - GEOMETRY_EPSILON

    for _ in range(cfg.max_position_attempts):
        k = candidates[rng.integers(0, len(candidates))]
        com = _point_on_shell_circle(
            center, d, shell_centers[k], distances[k], low[k], high[k], rng)

        separation = cdist(positions, com + offsets)
        if np.any(separation < floor):
            continue
        if np.any(separation <= limit):
            return _Placement(offset=com, clamped=clamped)

    raise PlacementExhausted(
        f"No contact placement at distance {d:.4g} nm after "
        f"{cfg.max_position_attempts} attempts.")


def _point_on_shell_circle(
    center: np.ndarray,
    d: float,
    shell_center: np.ndarray,
    distance: float,
    low: float,
    high: float,
    rng: RandomStream
) -> np.ndarray:
    """
    Draws a point at distance d from center whose distance to shell_center
    lies in [low, high].
    """
    if distance < COINCIDENCE_TOLERANCE:
        return sample_on_sphere(center, d, rng)

    rho_low = max(low, abs(distance - d))
    rho_high = max(rho_low, min(high, distance + d))
    rho = rng.uniform(rho_low, rho_high)

    axis = (shell_center - center) / distance
    h = (distance ** 2 + d ** 2 - rho ** 2) / (2.0 * distance)
    s = math.sqrt(max(d ** 2 - h ** 2, 0.0))

    while True:
        v = _unit_vector(rng)
        w = v - (v @ axis) * axis
        norm = np.linalg.norm(w)
        if norm > 1e-8:
            break

    return center + h * axis + s * w / norm


"""
Aggregation
"""


def _equal_mass_gyration(positions: np.ndarray) -> float:
    return gyration_radius(positions, np.ones(len(positions)))


def grow_primary_cluster(
    size: int,
    theta_df: float,
    label: Label,
    dist: RadiusDistribution,
    cfg: GrowthConfig,
    rng: RandomStream
) -> PrimaryCluster:
    """
    Grows a homogeneous cluster of exactly size particles.

    The first particle sits at the origin. Every further particle is placed
    on the fractal scaling sphere about the current center of mass; a
    failed placement restarts the cluster from scratch.
    """
    if size < 1:
        raise InvalidParams(f"Cluster size must be positive, got {size}.")

    label = Label(label)
    for restart in range(cfg.max_restarts + 1):
        try:
            particles, clamped = _grow_once(size, theta_df, dist, cfg, rng)
        except (InfeasiblePlacement, PlacementExhausted) as err:
            _logger.debug(
                f"Restarting primary cluster of size {size} ({restart}): {err}")
            continue

        aggregate = Aggregate(
            positions=particles[0], radii=particles[1],
            labels=np.full(size, int(label)))
        return PrimaryCluster(aggregate, label, clamped, restart)

    raise GenerationFailed(
        f"Primary cluster of size {size} at D_f={theta_df} failed "
        f"after {cfg.max_restarts} restarts.")


def _grow_once(
    size: int,
    theta_df: float,
    dist: RadiusDistribution,
    cfg: GrowthConfig,
    rng: RandomStream
) -> Tuple[Tuple[np.ndarray, np.ndarray], int]:
    positions = np.zeros((1, 3))
    radii = np.array([sample_radius(dist, rng)])
    clamped = 0

    for i in range(1, size):
        radius = sample_radius(dist, rng)
        a = (radii.sum() + radius) / (i + 1)
        d = placement_radius(
            i, 1, _equal_mass_gyration(positions), 0.0, a,
            theta_df, cfg.k_f)

        placement = _place(
            positions, radii, np.zeros((1, 3)), np.array([radius]),
            d, cfg, rng)
        clamped += int(placement.clamped)

        positions = np.vstack([positions, placement.offset])
        radii = np.append(radii, radius)

    return (positions, radii), clamped


def attach_cluster(
    agg: Aggregate,
    cluster: PrimaryCluster,
    theta_df: float,
    cfg: GrowthConfig,
    rng: RandomStream
) -> Aggregate:
    """
    Returns the union of agg and a randomly oriented copy of the cluster,
    rigidly translated onto the fractal scaling sphere about the aggregate's
    center of mass.

    Raises PlacementExhausted if no touching, non-overlapping position is
    found.
    """
    return _attach(agg, cluster, theta_df, cfg, rng)[0]


def _attach(
    agg: Aggregate,
    cluster: PrimaryCluster,
    theta_df: float,
    cfg: GrowthConfig,
    rng: RandomStream
) -> Tuple[Aggregate, bool]:
    body = cluster.particles
    offsets = body.positions - body.positions.mean(axis=0)
    if len(body) > 1:
        offsets = Rotation.random(random_state=rng.generator).apply(offsets)

    n_a, n_c = len(agg), len(body)
    a = (agg.radii.sum() + body.radii.sum()) / (n_a + n_c)
    d = placement_radius(
        n_a, n_c,
        _equal_mass_gyration(agg.positions), _equal_mass_gyration(offsets),
        a, theta_df, cfg.k_f)

    placement = _place(
        agg.positions, agg.radii, offsets, body.radii, d, cfg, rng)

    cluster_ids = None
    if agg.cluster_ids is not None:
        next_id = int(agg.cluster_ids.max()) + 1 if len(agg) else 0
        cluster_ids = np.concatenate([
            agg.cluster_ids, np.full(n_c, next_id)])

    merged = Aggregate(
        positions=np.vstack([agg.positions, placement.offset + offsets]),
        radii=np.concatenate([agg.radii, body.radii]),
        labels=np.concatenate([agg.labels, body.labels]),
        cluster_ids=cluster_ids,
        provenance=agg.provenance)
    return merged, placement.clamped


def build_hetero_aggregate(
    theta: ModelParams,
    cfg: GrowthConfig,
    rng: RandomStream,
    dist: Optional[RadiusDistribution] = None
) -> Aggregate:
    """
    Builds a hetero-aggregate of at least T particles, T drawn uniformly
    from the target size range.

    Primary clusters of size theta_0 (label 0) or theta_1 (label 1) are
    attached until the target is reached; the last cluster is kept whole.
    A cluster that cannot be attached is regrown with the same label.
    """
    dist = dist or RadiusDistribution()
    target_size = int(rng.integers(cfg.target_size_min, cfg.target_size_max + 1))

    sizes: List[int] = []
    labels: List[Label] = []
    clamped, restarts = 0, 0

    label = sample_label(theta, rng)
    first = grow_primary_cluster(
        theta.cluster_size(label), theta.theta_df, label, dist, cfg, rng)
    aggregate = first.particles.translated(
        -first.particles.positions.mean(axis=0))
    aggregate.cluster_ids = np.zeros(len(first), dtype=int)
    sizes.append(len(first))
    labels.append(label)
    clamped += first.clamped_placements
    restarts += first.restarts

    while len(aggregate) < target_size:
        label = sample_label(theta, rng)
        size = theta.cluster_size(label)

        for attempt in range(cfg.max_restarts + 1):
            cluster = grow_primary_cluster(
                size, theta.theta_df, label, dist, cfg, rng)
            clamped += cluster.clamped_placements
            restarts += cluster.restarts
            try:
                aggregate, was_clamped = _attach(
                    aggregate, cluster, theta.theta_df, cfg, rng)
            except (InfeasiblePlacement, PlacementExhausted) as err:
                restarts += 1
                _logger.debug(
                    f"Regrowing {label.material} cluster of size {size} "
                    f"at {len(aggregate)} particles ({attempt}): {err}")
                continue

            clamped += int(was_clamped)
            break
        else:
            raise GenerationFailed(
                f"Could not attach a cluster of size {size} to "
                f"{len(aggregate)} particles for {theta} after "
                f"{cfg.max_restarts} restarts.")

        sizes.append(size)
        labels.append(label)

    aggregate = aggregate.translated(-aggregate.positions.mean(axis=0))
    aggregate.provenance = Provenance(
        seed=rng.seed,
        spawn_key=list(rng.spawn_key),
        theta=theta,
        target_size=target_size,
        cluster_sizes=sizes,
        cluster_labels=labels,
        clamped_placements=clamped,
        restarts=restarts)

    return aggregate


class AggregateGenerator(Loggable):
    """
    Generates hetero-aggregates for a fixed radius law and growth
    configuration.
    """

    def __init__(
        self,
        radius: RadiusDistribution = None,
        growth: GrowthConfig = None
    ) -> None:
        super().__init__()
        self.radius = radius or RadiusDistribution()
        self.growth = (growth or GrowthConfig()).check()

    def primary_cluster(
        self,
        size: int,
        theta_df: float,
        label: Label,
        rng: RandomStream
    ) -> PrimaryCluster:
        return grow_primary_cluster(
            size, theta_df, label, self.radius, self.growth, rng)

    def generate(self, theta: ModelParams, rng: RandomStream) -> Aggregate:
        theta.check()
        aggregate = build_hetero_aggregate(
            theta, self.growth, rng, self.radius)

        provenance = aggregate.provenance
        self.logger.debug(
            f"Generated {aggregate} for {theta} from {rng}: "
            f"{len(provenance.cluster_sizes)} clusters, "
            f"{provenance.clamped_placements} clamped placements, "
            f"{provenance.restarts} restarts.")

        return aggregate
