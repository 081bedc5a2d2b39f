#!/usr/bin/env python3
# -*- coding: utf-8 -*

import pytest

from heteroagg_core.aggregation import build_hetero_aggregate
from heteroagg_core.constants import Label
from heteroagg_core.geometry import Aggregate
from heteroagg_core.intensity import IntensityModel
from heteroagg_core.models import GrowthConfig, ModelParams, RenderConfig
from heteroagg_core.storage import LocalDatasetStorage
from heteroagg_core.streams import RandomStream


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "slow: calibration runs over many generated aggregates")


@pytest.fixture()
def rng():
    return RandomStream(1234)


@pytest.fixture()
def touching_pair():
    """
    Two touching particles of radius 10 nm with labels 0 and 1.
    """
    return Aggregate(
        positions=[(-10.0, 0.0, 0.0), (10.0, 0.0, 0.0)],
        radii=[10.0, 10.0],
        labels=[Label.WO3, Label.TIO2])


@pytest.fixture()
def chain():
    """
    Straight chain of three touching particles, labels 0, 0, 1.
    """
    return Aggregate(
        positions=[(0.0, 0.0, 0.0), (20.0, 0.0, 0.0), (40.0, 0.0, 0.0)],
        radii=[10.0, 10.0, 10.0],
        labels=[0, 0, 1])


@pytest.fixture()
def small_growth():
    return GrowthConfig(target_size_min=10, target_size_max=20)


@pytest.fixture()
def theta():
    return ModelParams(1.8, 0.5, 3, 3)


@pytest.fixture()
def aggregate(theta, small_growth):
    return build_hetero_aggregate(theta, small_growth, RandomStream(7))


@pytest.fixture()
def aggregates(theta, small_growth):
    master = RandomStream(11)
    return [
        build_hetero_aggregate(theta, small_growth, master.child(k))
        for k in range(10)]


@pytest.fixture()
def small_render():
    """
    Noiseless 128 x 128 grid at 4 nm/px.
    """
    return RenderConfig(
        width=128, height=128, pixel_size=4.0, dose=None, scan_sigma=0.0)


@pytest.fixture()
def linear_model():
    return IntensityModel.linear(0.01)


@pytest.fixture()
def storage(tmp_path):
    return LocalDatasetStorage(tmp_path / "dataset")
