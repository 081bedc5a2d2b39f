#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Error metrics, descriptor distribution comparison and the threshold
baseline for mixing ratio estimation.
"""
from __future__ import annotations

import csv
import io
import logging
import numpy as np

from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .aggregation import build_hetero_aggregate
from .constants import GAP_SET_N_MAX, HISTOGRAM_BINS
from .descriptors import descriptor_report
from .models import (
    BaseModel,
    GrowthConfig,
    ModelParams,
    RadiusDistribution,
    format_float
)
from .render import ImageGrid
from .storage import DatasetStorage
from .streams import RandomStream

_logger = logging.getLogger(__name__)

# Descriptor name to DescriptorReport field.
COMPARED_DESCRIPTORS = OrderedDict([
    ("s_label1", "avg_cluster_size_label1"),
    ("z_hetero", "z_hetero"),
    ("z_total", "z_total"),
])

DEFAULT_BACKGROUND_RANGE = (0.0, 0.02)
DEFAULT_MATERIAL_RANGE = (0.05, 0.5)

"""
Exceptions
"""


class MetricsError(ValueError):
    pass


class ConstantTruth(MetricsError):
    pass


"""
Error metrics
"""


@dataclass
class PairedSeries:
    """
    Ground truth y and predictions y_hat of equal length.
    """
    y: np.ndarray
    y_hat: np.ndarray

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        self.y_hat = np.asarray(self.y_hat, dtype=float).reshape(-1)

        if len(self.y) != len(self.y_hat):
            raise MetricsError(
                f"Series lengths differ: {len(self.y)} and {len(self.y_hat)}.")
        if len(self.y) == 0:
            raise MetricsError("Series must not be empty.")
        if not (np.all(np.isfinite(self.y)) and np.all(np.isfinite(self.y_hat))):
            raise MetricsError("Series values must be finite.")

    def __len__(self) -> int:
        return len(self.y)


def mse(s: PairedSeries) -> float:
    return float(np.mean((s.y - s.y_hat) ** 2))


def mae(s: PairedSeries) -> float:
    return float(np.mean(np.abs(s.y - s.y_hat)))


def r_squared(s: PairedSeries) -> float:
    """
    Coefficient of determination 1 - MSE(y, y_hat) / MSE(y, mean(y)).
    """
    spread = float(np.mean((s.y - s.y.mean()) ** 2))
    if spread == 0:
        raise ConstantTruth("R^2 undefined for constant ground truth.")

    return 1.0 - mse(s) / spread


def mae_by_size(
    s: PairedSeries,
    sizes: Sequence[int],
    edges: Sequence[float]
) -> List[Tuple[float, float, int, Optional[float]]]:
    """
    Returns (left, right, count, MAE) per size bin [left, right); the last
    bin includes its right edge. MAE is None for empty bins.
    """
    sizes = np.asarray(sizes, dtype=float)
    if len(sizes) != len(s):
        raise MetricsError("Need one size per series element.")

    errors = np.abs(s.y - s.y_hat)
    bins = []
    for i, (left, right) in enumerate(zip(edges[:-1], edges[1:])):
        last = i == len(edges) - 2
        mask = (sizes >= left) & ((sizes <= right) if last else (sizes < right))
        count = int(mask.sum())
        bins.append((
            float(left), float(right), count,
            float(errors[mask].mean()) if count else None))

    return bins


def batch_size_curve(
    estimates: Sequence[float],
    truths: Sequence[float],
    groups: Sequence,
    nus: Sequence[int],
    rng: RandomStream
) -> Dict[int, Optional[float]]:
    """
    Returns, per batch size nu, the MAE of batch mean estimates against the
    mean truth of their group. Groups are split into floor(n / nu) random
    batches; groups with fewer than nu members do not contribute.
    """
    estimates = np.asarray(estimates, dtype=float)
    truths = np.asarray(truths, dtype=float)
    members = OrderedDict()
    for i, group in enumerate(groups):
        members.setdefault(group, []).append(i)

    curve = {}
    for nu in nus:
        errors = []
        for indices in members.values():
            order = np.asarray(indices)[rng.permutation(len(indices))]
            for start in range(0, len(order) - nu + 1, nu):
                batch = order[start:start + nu]
                errors.append(abs(
                    estimates[batch].mean() - truths[batch].mean()))

        curve[int(nu)] = float(np.mean(errors)) if errors else None

    return curve


"""
Attainable coordination numbers
"""


def gap_lower_bound(n_max: int = GAP_SET_N_MAX) -> float:
    """
    Returns the largest total coordination number below 2 that an
    aggregate of at most n_max particles can have.
    """
    return 2.0 * (n_max - 1) / n_max


def gap_set_check(values: Sequence[float], n_max: int = GAP_SET_N_MAX) -> bool:
    """
    Returns True if no value lies strictly between gap_lower_bound(n_max)
    and 2.
    """
    lower = gap_lower_bound(n_max)
    return not any(lower < v < 2.0 for v in values)


"""
Descriptor distribution comparison
"""


@dataclass
class ConfigComparison(BaseModel):
    theta: ModelParams
    theta_hat: ModelParams
    samples: int
    truth_means: Dict[str, Optional[float]] = field(default_factory=dict)
    estimate_means: Dict[str, Optional[float]] = field(default_factory=dict)
    standard_errors: Dict[str, Optional[float]] = field(default_factory=dict)


@dataclass
class DescriptorComparison(BaseModel):
    descriptor: str
    mae: Optional[float] = None
    standard_error: Optional[float] = None
    r_squared: Optional[float] = None
    n_configs: int = 0


@dataclass
class DescriptorHistogram(BaseModel):
    config_index: int
    descriptor: str
    edges: List[float] = field(default_factory=list)
    truth_counts: List[int] = field(default_factory=list)
    estimate_counts: List[int] = field(default_factory=list)


@dataclass
class ComparisonReport(BaseModel):
    """
    Discrepancy between descriptor distributions under theta and
    theta_hat.
    """
    per_config_samples: int
    configs: List[ConfigComparison] = field(default_factory=list)
    descriptors: List[DescriptorComparison] = field(default_factory=list)
    histograms: List[DescriptorHistogram] = field(default_factory=list)

    def descriptor(self, name: str) -> DescriptorComparison:
        for comparison in self.descriptors:
            if comparison.descriptor == name:
                return comparison

        raise KeyError(name)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow([
            "descriptor", "mae", "standard_error", "r_squared", "n_configs",
            "per_config_samples"])
        for d in self.descriptors:
            writer.writerow([
                d.descriptor, format_float(d.mae),
                format_float(d.standard_error), format_float(d.r_squared),
                d.n_configs, self.per_config_samples])

        return buffer.getvalue()

    def histograms_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow([
            "config_index", "descriptor", "bin_left", "bin_right",
            "truth_count", "estimate_count"])
        for h in self.histograms:
            for i in range(len(h.truth_counts)):
                writer.writerow([
                    h.config_index, h.descriptor,
                    format_float(h.edges[i]), format_float(h.edges[i + 1]),
                    h.truth_counts[i], h.estimate_counts[i]])

        return buffer.getvalue()


@dataclass
class _SampleJob:
    theta: ModelParams
    rng: RandomStream
    samples: int
    growth: GrowthConfig
    radius: RadiusDistribution


def _sample_descriptors(job: _SampleJob) -> Dict[str, List[float]]:
    values = {name: [] for name in COMPARED_DESCRIPTORS}
    for k in range(job.samples):
        aggregate = build_hetero_aggregate(
            job.theta, job.growth, job.rng.child(k), job.radius)
        report = descriptor_report(aggregate)
        for name, attribute in COMPARED_DESCRIPTORS.items():
            value = getattr(report, attribute)
            if value is not None:
                values[name].append(value)

    return values


def _mean(values: List[float]) -> Optional[float]:
    return float(np.mean(values)) if values else None


def _standard_error(
    truth: List[float],
    estimate: List[float]
) -> Optional[float]:
    """
    Returns the standard error of the difference of the two sample means.
    """
    if len(truth) < 2 or len(estimate) < 2:
        return None

    return float(np.sqrt(
        np.var(truth, ddof=1) / len(truth)
        + np.var(estimate, ddof=1) / len(estimate)))


def compare_descriptor_distributions(
    config_pairs: Sequence[Tuple[ModelParams, ModelParams]],
    per_config_samples: int,
    rng: RandomStream,
    growth: GrowthConfig = None,
    radius: RadiusDistribution = None,
    jobs: int = 1,
    bins: int = HISTOGRAM_BINS
) -> ComparisonReport:
    """
    Generates per_config_samples aggregates under theta and under theta_hat
    for every pair and compares the descriptor means across pairs.
    """
    if per_config_samples < 1:
        raise MetricsError(
            f"Need at least one sample per configuration, got {per_config_samples}.")

    growth = growth or GrowthConfig()
    radius = radius or RadiusDistribution()

    sample_jobs = []
    for i, (theta, theta_hat) in enumerate(config_pairs):
        stream = rng.child(i)
        sample_jobs.append(_SampleJob(
            theta, stream.child(0), per_config_samples, growth, radius))
        sample_jobs.append(_SampleJob(
            theta_hat, stream.child(1), per_config_samples, growth, radius))

    if jobs > 1 and len(sample_jobs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            sampled = list(executor.map(_sample_descriptors, sample_jobs))
    else:
        sampled = [_sample_descriptors(job) for job in sample_jobs]

    report = ComparisonReport(per_config_samples=per_config_samples)
    for i, (theta, theta_hat) in enumerate(config_pairs):
        truth, estimate = sampled[2 * i], sampled[2 * i + 1]
        report.configs.append(ConfigComparison(
            theta=theta,
            theta_hat=theta_hat,
            samples=per_config_samples,
            truth_means={n: _mean(v) for n, v in truth.items()},
            estimate_means={n: _mean(v) for n, v in estimate.items()},
            standard_errors={
                n: _standard_error(truth[n], estimate[n]) for n in truth}))

        for name in COMPARED_DESCRIPTORS:
            combined = truth[name] + estimate[name]
            if not combined:
                continue

            edges = np.histogram_bin_edges(combined, bins=bins)
            report.histograms.append(DescriptorHistogram(
                config_index=i,
                descriptor=name,
                edges=edges.tolist(),
                truth_counts=np.histogram(truth[name], edges)[0].tolist(),
                estimate_counts=np.histogram(estimate[name], edges)[0].tolist()))

    for name in COMPARED_DESCRIPTORS:
        pairs = [
            (c.truth_means[name], c.estimate_means[name])
            for c in report.configs
            if c.truth_means[name] is not None
            and c.estimate_means[name] is not None]
        comparison = DescriptorComparison(descriptor=name, n_configs=len(pairs))
        if pairs:
            series = PairedSeries(*zip(*pairs))
            comparison.mae = mae(series)
            errors = [
                c.standard_errors[name] for c in report.configs
                if c.standard_errors.get(name) is not None]
            if errors:
                comparison.standard_error = float(
                    np.sqrt(np.mean(np.square(errors))))
            try:
                comparison.r_squared = r_squared(series)
            except ConstantTruth:
                _logger.debug(f"R^2 of {name} undefined, truth means constant.")
        report.descriptors.append(comparison)

    return report


"""
Threshold baseline
"""


def _image_values(img) -> Tuple[np.ndarray, float]:
    if isinstance(img, ImageGrid):
        return img.values, img.pixel_area
    return np.asarray(img, dtype=float), 1.0


def _mixing_estimate(
    values: np.ndarray,
    pixel_area: float,
    t_bg: float,
    t_mat: float,
    mean_area_0: float,
    mean_area_1: float
) -> Optional[float]:
    area_0 = np.count_nonzero(values > t_mat) * pixel_area
    area_1 = np.count_nonzero((values > t_bg) & (values <= t_mat)) * pixel_area
    if area_0 == 0 and area_1 == 0:
        return None

    n_0 = area_0 / mean_area_0
    n_1 = area_1 / mean_area_1
    return n_0 / (n_0 + n_1)


def threshold_mixing_ratio(
    img,
    t_bg: float,
    t_mat: float,
    mean_area_0: float,
    mean_area_1: float
) -> float:
    """
    Estimates the mixing ratio from an image: pixels above t_mat count as
    label 0, pixels in (t_bg, t_mat] as label 1, and the areas are
    converted to particle counts by the mean projected particle areas.
    Returns 0.5 if no pixel is classified.
    """
    if not 0 <= t_bg < t_mat:
        raise MetricsError(
            f"Thresholds must satisfy 0 <= t_bg < t_mat, got {t_bg}, {t_mat}.")

    values, pixel_area = _image_values(img)
    estimate = _mixing_estimate(
        values, pixel_area, t_bg, t_mat, mean_area_0, mean_area_1)
    if estimate is None:
        _logger.warning(
            f"No pixel above background {t_bg}, mixing ratio set to 0.5.")
        return 0.5

    return estimate


@dataclass
class BaselineSample:
    image: object
    mixing_ratio: float


@dataclass
class ThresholdCalibration(BaseModel):
    t_bg: float
    t_mat: float
    mae: float
    grid_resolution: int
    mean_area_0: float
    mean_area_1: float

    def estimate(self, img) -> float:
        return threshold_mixing_ratio(
            img, self.t_bg, self.t_mat, self.mean_area_0, self.mean_area_1)


def threshold_grid(
    grid_resolution: int,
    bg_range: Tuple[float, float] = DEFAULT_BACKGROUND_RANGE,
    mat_range: Tuple[float, float] = DEFAULT_MATERIAL_RANGE
) -> List[Tuple[float, float]]:
    """
    Returns the candidate (t_bg, t_mat) pairs with t_bg < t_mat, in scan
    order.
    """
    if grid_resolution < 1:
        raise MetricsError(
            f"Grid resolution must be positive, got {grid_resolution}.")

    return [
        (float(t_bg), float(t_mat))
        for t_bg in np.linspace(*bg_range, grid_resolution)
        for t_mat in np.linspace(*mat_range, grid_resolution)
        if t_bg < t_mat]


def baseline_mae(
    samples: Sequence[BaselineSample],
    t_bg: float,
    t_mat: float,
    mean_area_0: float,
    mean_area_1: float
) -> float:
    estimates = []
    for sample in samples:
        values, pixel_area = _image_values(sample.image)
        estimate = _mixing_estimate(
            values, pixel_area, t_bg, t_mat, mean_area_0, mean_area_1)
        estimates.append(0.5 if estimate is None else estimate)

    return mae(PairedSeries([s.mixing_ratio for s in samples], estimates))


def calibrate_thresholds(
    samples: Sequence[BaselineSample],
    grid_resolution: int,
    mean_area_0: float = None,
    mean_area_1: float = None,
    bg_range: Tuple[float, float] = DEFAULT_BACKGROUND_RANGE,
    mat_range: Tuple[float, float] = DEFAULT_MATERIAL_RANGE
) -> ThresholdCalibration:
    """
    Brute force search for the thresholds minimizing the MAE of the
    threshold estimate against the true mixing ratio. Ties keep the first
    pair in scan order.
    """
    if not samples:
        raise MetricsError("Calibration needs at least one sample.")

    default_area = RadiusDistribution().mean_projected_area
    mean_area_0 = mean_area_0 or default_area
    mean_area_1 = mean_area_1 or default_area

    best = None
    for t_bg, t_mat in threshold_grid(grid_resolution, bg_range, mat_range):
        error = baseline_mae(samples, t_bg, t_mat, mean_area_0, mean_area_1)
        if best is None or error < best[2]:
            best = (t_bg, t_mat, error)

    if best is None:
        raise MetricsError(
            f"No threshold pair with t_bg < t_mat in {bg_range} x {mat_range}.")

    return ThresholdCalibration(
        t_bg=best[0], t_mat=best[1], mae=best[2],
        grid_resolution=grid_resolution,
        mean_area_0=mean_area_0, mean_area_1=mean_area_1)


def load_baseline_samples(
    entries,
    storage: DatasetStorage
) -> List[BaselineSample]:
    """
    Loads the stored images of manifest entries in detector fraction units.
    """
    samples = []
    for entry in entries:
        samples.append(BaselineSample(
            storage.get_image(entry), entry.descriptors.mixing_ratio))

    return samples
