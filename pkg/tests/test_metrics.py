#!/usr/bin/env python3
# -*- coding: utf-8 -*

import logging
import math
import numpy as np
import pytest

from scipy import stats

from heteroagg_core.aggregation import build_hetero_aggregate
from heteroagg_core.descriptors import descriptor_report, total_coordination
from heteroagg_core.metrics import (
    BaselineSample,
    ConstantTruth,
    MetricsError,
    PairedSeries,
    ThresholdCalibration,
    baseline_mae,
    batch_size_curve,
    calibrate_thresholds,
    compare_descriptor_distributions,
    gap_lower_bound,
    gap_set_check,
    load_baseline_samples,
    mae,
    mae_by_size,
    mse,
    r_squared,
    threshold_grid,
    threshold_mixing_ratio
)
from heteroagg_core.geometry import mixing_ratio
from heteroagg_core.intensity import default_intensity_model
from heteroagg_core.models import (
    GrowthConfig,
    ManifestEntry,
    ModelParams,
    RadiusDistribution
)
from heteroagg_core.render import ImageGrid, compose
from heteroagg_core.streams import RandomStream

"""
Testing Error Metrics
"""


def test_error_metrics():
    s = PairedSeries([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 5.0])

    assert mse(s) == pytest.approx(0.25)
    assert mae(s) == pytest.approx(0.25)
    assert r_squared(s) == pytest.approx(0.8)


def test_perfect_prediction():
    s = PairedSeries([0.1, 0.5, 0.9], [0.1, 0.5, 0.9])

    assert mse(s) == 0.0
    assert r_squared(s) == 1.0


def test_constant_truth():
    with pytest.raises(ConstantTruth):
        r_squared(PairedSeries([0.5, 0.5], [0.4, 0.6]))


@pytest.mark.parametrize("y, y_hat", [
    ([1.0, 2.0], [1.0]),
    ([], []),
    ([1.0, math.nan], [1.0, 2.0]),
])
def test_invalid_series(y, y_hat):
    with pytest.raises(MetricsError):
        PairedSeries(y, y_hat)


def test_mae_by_size():
    s = PairedSeries([1.0, 1.0, 1.0, 1.0], [1.0, 1.0, 1.0, 2.0])
    bins = mae_by_size(s, [10, 20, 30, 40], [0, 20, 40])

    assert bins[0] == (0.0, 20.0, 1, 0.0)
    assert bins[1][2] == 3
    assert bins[1][3] == pytest.approx(1 / 3)
    assert mae_by_size(s, [10, 20, 30, 40], [100, 200]) == [
        (100.0, 200.0, 0, None)]


def test_batch_size_curve(rng):
    truths = np.linspace(0.1, 0.9, 24)
    groups = [i // 12 for i in range(24)]

    exact = batch_size_curve(truths, truths, groups, [1, 4, 12, 13], rng)
    assert exact == {1: 0.0, 4: 0.0, 12: 0.0, 13: None}

    shifted = batch_size_curve(truths + 0.1, truths, groups, [1, 6], rng)
    assert shifted[1] == pytest.approx(0.1)
    assert shifted[6] == pytest.approx(0.1)


"""
Testing Coordination Gap
"""


def test_gap_set():
    assert gap_lower_bound(80) == pytest.approx(1.975)
    assert not gap_set_check([1.5, 1.98])
    assert gap_set_check([1.5, 1.975, 2.0, 2.4])


def test_generated_aggregates_avoid_gap(aggregates):
    values = [total_coordination(a) for a in aggregates]

    assert gap_set_check(values, max(len(a) for a in aggregates))


"""
Testing Descriptor Comparison
"""


def test_compare_descriptor_distributions(small_growth):
    pairs = [
        (ModelParams(1.8, 0.5, 3, 3), ModelParams(1.8, 0.5, 3, 3)),
        (ModelParams(2.1, 0.3, 2, 4), ModelParams(2.0, 0.4, 2, 4)),
    ]
    report = compare_descriptor_distributions(
        pairs, 4, RandomStream(8), growth=small_growth, bins=5)

    assert [d.descriptor for d in report.descriptors] == [
        "s_label1", "z_hetero", "z_total"]
    assert report.descriptor("z_total").n_configs == 2
    assert report.descriptor("z_total").mae >= 0
    assert report.descriptor("z_total").standard_error is not None
    assert report.configs[0].standard_errors["z_total"] >= 0
    assert len(report.configs) == 2
    assert report.configs[1].theta_hat == pairs[1][1]

    for histogram in report.histograms:
        assert len(histogram.edges) == 6
        if histogram.descriptor != "s_label1":
            assert sum(histogram.truth_counts) == 4
            assert sum(histogram.estimate_counts) == 4

    lines = report.to_csv().splitlines()
    assert lines[0] == (
        "descriptor,mae,standard_error,r_squared,n_configs,per_config_samples")
    assert len(lines) == 4

    again = compare_descriptor_distributions(
        pairs, 4, RandomStream(8), growth=small_growth, bins=5)
    assert again.dump() == report.dump()


def test_compare_needs_samples(theta):
    with pytest.raises(MetricsError):
        compare_descriptor_distributions([(theta, theta)], 0, RandomStream(1))


@pytest.mark.slow
def test_same_theta_same_distribution(theta, small_growth):
    first, second = RandomStream(21), RandomStream(22)
    z_first = [
        descriptor_report(build_hetero_aggregate(
            theta, small_growth, first.child(k))).z_total
        for k in range(60)]
    z_second = [
        descriptor_report(build_hetero_aggregate(
            theta, small_growth, second.child(k))).z_total
        for k in range(60)]

    assert stats.ks_2samp(z_first, z_second).pvalue > 0.001


# Spans the sweep ranges of every parameter. Z_total is close to
# 2 (N - 1) / N for all of them, so the target size is fixed and the
# sample count raised until the spread of its means across configurations
# dominates the sampling error.
SELF_COMPARISON_CONFIGS = [
    ModelParams(1.5, 0.1, 1, 6),
    ModelParams(1.6, 0.9, 6, 1),
    ModelParams(1.7, 0.3, 2, 5),
    ModelParams(1.8, 0.7, 5, 2),
    ModelParams(1.9, 0.5, 3, 3),
    ModelParams(2.1, 0.2, 4, 1),
    ModelParams(2.2, 0.8, 1, 4),
    ModelParams(2.3, 0.4, 6, 6),
    ModelParams(2.4, 0.6, 2, 2),
    ModelParams(2.5, 0.5, 1, 1),
]


@pytest.mark.slow
def test_self_comparison():
    report = compare_descriptor_distributions(
        [(theta, theta) for theta in SELF_COMPARISON_CONFIGS], 800,
        RandomStream(2024),
        growth=GrowthConfig(target_size_min=50, target_size_max=50), jobs=4)

    for d in report.descriptors:
        assert d.n_configs == len(SELF_COMPARISON_CONFIGS)
        assert d.mae <= 2 * d.standard_error
        assert d.r_squared >= 0.95


"""
Testing Threshold Baseline
"""


def _two_phase_image(k_0, k_1, size=16):
    values = np.zeros(size * size)
    values[:k_0] = 0.3
    values[k_0:k_0 + k_1] = 0.03
    return values.reshape(size, size)


def test_threshold_mixing_ratio():
    image = np.array([[0.0, 0.01, 0.3], [0.3, 0.3, 0.0]])

    assert threshold_mixing_ratio(image, 0.005, 0.1, 1.0, 1.0) == 0.75
    assert threshold_mixing_ratio(image, 0.005, 0.1, 3.0, 1.0) == 0.5


def test_threshold_mixing_ratio_empty(caplog):
    with caplog.at_level(logging.WARNING):
        estimate = threshold_mixing_ratio(np.zeros((4, 4)), 0.01, 0.1, 1.0, 1.0)

    assert estimate == 0.5
    assert "mixing ratio set to 0.5" in caplog.text


@pytest.mark.parametrize("t_bg, t_mat", [(0.1, 0.1), (0.2, 0.1), (-0.1, 0.1)])
def test_invalid_thresholds(t_bg, t_mat):
    with pytest.raises(MetricsError):
        threshold_mixing_ratio(np.zeros((2, 2)), t_bg, t_mat, 1.0, 1.0)


def test_threshold_grid():
    grid = threshold_grid(3)

    assert len(grid) == 9
    assert grid[0] == (0.0, 0.05)
    assert grid[-1] == pytest.approx((0.02, 0.5))
    assert threshold_grid(2, (0.0, 1.0), (0.0, 1.0)) == [(0.0, 1.0)]

    with pytest.raises(MetricsError):
        threshold_grid(0)


def test_calibrate_thresholds():
    samples = [
        BaselineSample(_two_phase_image(k, 40 - k), k / 40)
        for k in (0, 10, 25, 40)]
    calibration = calibrate_thresholds(samples, 20, 1.0, 1.0)

    assert calibration.mae == 0.0
    assert calibration.t_bg == 0.0
    assert calibration.t_mat == 0.05
    assert calibration.estimate(_two_phase_image(30, 10)) == 0.75
    assert ThresholdCalibration.load(calibration.dump()) == calibration

    # Both phases counted as label 0.
    assert baseline_mae(samples, 0.0, 0.02, 1.0, 1.0) == pytest.approx(
        np.mean([1.0, 0.75, 0.375, 0.0]))


def _disks(centers, radius, value, size=96):
    rows, cols = np.indices((size, size))
    image = np.zeros((size, size))
    for row, col in centers:
        image[(rows - row) ** 2 + (cols - col) ** 2 <= radius ** 2] = value

    return image


def test_threshold_mixing_ratio_of_disks():
    image = _disks([(20, 20), (20, 70), (70, 20)], 10, 0.3)
    image += _disks([(70, 70)], 10, 0.03)
    area = math.pi * 10 ** 2
    grid = ImageGrid(96, 96, 1.0, [0.0, 0.0], image)

    assert threshold_mixing_ratio(grid, 0.01, 0.1, area, area) == \
        pytest.approx(0.75)
    assert threshold_mixing_ratio(grid, 0.01, 0.1, area, 3 * area) == \
        pytest.approx(0.9)


def test_threshold_mixing_ratio_decreases_with_t_mat(rng):
    image = rng.uniform(0.0, 0.5, size=(32, 32))
    estimates = [
        threshold_mixing_ratio(image, 0.01, t_mat, 1.0, 1.0)
        for t_mat in np.linspace(0.02, 0.49, 25)]

    assert all(a >= b for a, b in zip(estimates, estimates[1:]))
    assert estimates[0] > estimates[-1]


def test_calibration_is_grid_optimal(aggregates, small_render):
    model = default_intensity_model()
    samples = []
    for k, a in enumerate(aggregates):
        image = compose(a, small_render, model, RandomStream(k))
        samples.append(BaselineSample(image, mixing_ratio(a)))

    area = RadiusDistribution().mean_projected_area
    calibration = calibrate_thresholds(samples, 8, area, area)

    assert (calibration.t_bg, calibration.t_mat) in threshold_grid(8)
    for t_bg, t_mat in threshold_grid(8):
        assert baseline_mae(samples, t_bg, t_mat, area, area) >= \
            calibration.mae


def test_calibrate_needs_samples():
    with pytest.raises(MetricsError):
        calibrate_thresholds([], 5)


def test_load_baseline_samples(aggregate, storage, small_render, linear_model, rng):
    grid = compose(aggregate, small_render, linear_model, rng)
    geometry_key = storage.store_geometry(aggregate)
    image_key, metadata = storage.store_image(grid, small_render, rng)
    report = descriptor_report(aggregate)
    entry = ManifestEntry(
        id="000000", theta=aggregate.provenance.theta, seed=7,
        geometry_path=geometry_key, image_path=image_key,
        descriptors=report, image=metadata)
    storage.store_entry(entry)

    samples = load_baseline_samples([entry], storage)

    assert len(samples) == 1
    assert samples[0].mixing_ratio == report.mixing_ratio
    assert samples[0].image.pixel_size == small_render.pixel_size
    np.testing.assert_allclose(
        samples[0].image.values, grid.values, atol=metadata.v_max / 65535)
