#!/usr/bin/env python3
# -*- coding: utf-8 -*

import math
import marshmallow
import pytest

from heteroagg_core.constants import Label, ScanMode
from heteroagg_core.models import (
    DESCRIPTOR_COLUMNS,
    DescriptorReport,
    GrowthConfig,
    ModelParams,
    Provenance,
    RadiusDistribution,
    RenderConfig,
    SweepSpec
)

"""
Testing Model Parameters
"""


@pytest.mark.parametrize("data", [
    {"theta_df": 0.5, "theta_rho": 0.5, "theta_0": 3, "theta_1": 3},
    {"theta_df": 3.0, "theta_rho": 0.5, "theta_0": 3, "theta_1": 3},
    {"theta_df": 1.8, "theta_rho": 1.5, "theta_0": 3, "theta_1": 3},
    {"theta_df": 1.8, "theta_rho": 0.5, "theta_0": 0, "theta_1": 3},
    {"theta_df": 1.8, "theta_rho": 0.5, "theta_0": 3},
])
def test_load_invalid_params(data):
    with pytest.raises(marshmallow.ValidationError):
        ModelParams.load(data)


def test_params_from_string():
    theta = ModelParams.from_string("1.8, 0.5, 3, 6")

    assert theta.theta_df == 1.8
    assert theta.theta_rho == 0.5
    assert theta.theta_0 == 3
    assert theta.theta_1 == 6
    assert theta.key == (1.8, 0.5, 3, 6)


@pytest.mark.parametrize("text", ["1.8,0.5,3", "0.5,0.5,3,3", "a,b,c,d"])
def test_params_from_invalid_string(text):
    with pytest.raises(marshmallow.ValidationError):
        ModelParams.from_string(text)


@pytest.mark.parametrize("theta, expected", [
    (ModelParams(1.8, 0.5, 3, 3), 0.5),
    (ModelParams(1.8, 0.1, 1, 6), 0.6),
    (ModelParams(1.8, 0.0, 2, 5), 1.0),
    (ModelParams(1.8, 1.0, 2, 5), 0.0),
])
def test_label_one_probability(theta, expected):
    assert theta.label_one_probability == pytest.approx(expected)


def test_cluster_size():
    theta = ModelParams(2.0, 0.5, 2, 5)

    assert theta.cluster_size(Label.WO3) == 2
    assert theta.cluster_size(Label.TIO2) == 5


"""
Testing Generator Configuration
"""


def test_radius_distribution_moments():
    dist = RadiusDistribution(12.0, 3.0)

    mean = math.exp(dist.log_mu + dist.log_sigma ** 2 / 2)
    variance = (math.exp(dist.log_sigma ** 2) - 1) * mean ** 2
    assert mean == pytest.approx(12.0)
    assert math.sqrt(variance) == pytest.approx(3.0)
    assert dist.mean_projected_area == pytest.approx(math.pi * 153.0)


def test_growth_config_defaults():
    cfg = GrowthConfig().check()

    assert cfg.k_f == 1.3
    assert cfg.contact_slack == 1.01
    assert cfg.target_size_range == (20, 80)


@pytest.mark.parametrize("kwargs", [
    {"target_size_min": 50, "target_size_max": 40},
    {"max_position_attempts": 0},
    {"contact_slack": 0.9},
])
def test_growth_config_invalid(kwargs):
    with pytest.raises(marshmallow.ValidationError):
        GrowthConfig(**kwargs).check()


"""
Testing Render Configuration
"""


def test_render_config_load():
    cfg = RenderConfig.load({"scan_mode": "row", "dose": None, "width": 64})

    assert cfg.scan_mode == ScanMode.ROW
    assert cfg.dose is None
    assert cfg.width == 64
    assert cfg.beta == 0.0211
    assert cfg.dump()["scan_mode"] == "row"


@pytest.mark.parametrize("data", [
    {"beta": 0.0},
    {"beta": 2.0},
    {"dose": -1.0},
    {"scan_sigma": -0.1},
    {"scan_mode": "column"},
])
def test_render_config_invalid(data):
    with pytest.raises(marshmallow.ValidationError):
        RenderConfig.load(data)


"""
Testing Sweep Specification
"""


def test_sweep_spec_defaults():
    spec = SweepSpec().check()

    assert spec.df_values == [1.5, 1.6, 1.7, 1.8, 1.9, 2.0, 2.1, 2.2, 2.3, 2.4, 2.5]
    assert spec.rho_values == [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
    assert spec.c0_values == [1, 2, 3, 4, 5, 6]
    assert spec.aggregates_per_config == 50


@pytest.mark.parametrize("kwargs", [
    {"aggregates_per_triple": 5},
    {"df_values": [1.8], "df_choices_per_triple": 2},
    {"rho_values": []},
])
def test_sweep_spec_invalid(kwargs):
    with pytest.raises(marshmallow.ValidationError):
        SweepSpec(**kwargs).check()


"""
Testing Records
"""


def test_provenance_dump_and_load():
    provenance = Provenance(
        seed=7,
        spawn_key=[1, 2],
        theta=ModelParams(1.8, 0.5, 3, 3),
        target_size=20,
        cluster_sizes=[3, 3],
        cluster_labels=[Label.WO3, Label.TIO2])

    data = provenance.dump()
    assert data["cluster_labels"] == [0, 1]

    loaded = Provenance.load(data)
    assert loaded == provenance
    assert loaded.cluster_labels == [Label.WO3, Label.TIO2]


def test_descriptor_report_csv_row():
    report = DescriptorReport(
        n_particles=3,
        mixing_ratio=2 / 3,
        z_hetero=2 / 3,
        z_total=4 / 3,
        fractal_dim=1.7,
        avg_cluster_size_label0=2.0,
        cluster_size_histogram_label0=[0, 1],
        cluster_size_histogram_label1=[1])

    row = report.csv_row()
    assert len(row) == len(DESCRIPTOR_COLUMNS)
    assert row[DESCRIPTOR_COLUMNS.index("avg_cluster_size_label1")] == ""
    assert row[DESCRIPTOR_COLUMNS.index("cluster_size_histogram_label0")] == "0;1"

    parsed = DescriptorReport.from_csv_row(dict(zip(DESCRIPTOR_COLUMNS, row)))
    assert parsed == report
    assert parsed.avg_cluster_size(Label.TIO2) is None
