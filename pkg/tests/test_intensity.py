#!/usr/bin/env python3
# -*- coding: utf-8 -*

import numpy as np
import pytest

from heteroagg_core.constants import Label
from heteroagg_core.intensity import (
    IntensityCurve,
    IntensityModel,
    IntensityModelError,
    default_intensity_model,
    dump_lut,
    load_lut,
    parse_lut
)

"""
Testing Intensity Curves
"""


@pytest.mark.parametrize("thickness, intensity", [
    ([0.0, 1.0], [0.1, 0.2]),
    ([1.0, 2.0], [0.0, 0.2]),
    ([0.0, 2.0, 1.0], [0.0, 0.1, 0.2]),
    ([0.0, 1.0, 2.0], [0.0, 0.3, 0.2]),
    ([0.0, 1.0], [0.0, 1.5]),
    ([0.0], [0.0]),
])
def test_invalid_curve(thickness, intensity):
    with pytest.raises(IntensityModelError):
        IntensityCurve("bad", thickness, intensity)


def test_curve_interpolation():
    curve = IntensityCurve("c", [0.0, 10.0, 20.0], [0.0, 0.5, 0.6])

    assert curve(5.0) == pytest.approx(0.25)
    assert curve(15.0) == pytest.approx(0.55)
    assert curve(500.0) == pytest.approx(0.6)
    assert curve.t_max == 20.0


def test_model_needs_both_labels():
    curve = IntensityCurve("c", [0.0, 1.0], [0.0, 0.1])

    with pytest.raises(IntensityModelError):
        IntensityModel({Label.WO3: [curve]})


"""
Testing Intensity Models
"""


def test_linear_model(linear_model):
    curve = linear_model.variants(Label.TIO2)[0]

    assert curve(20.0) == pytest.approx(0.2)
    assert curve(200.0) == pytest.approx(1.0)
    assert linear_model.covers(100.0)
    assert not linear_model.covers(101.0)


def test_default_model():
    model = default_intensity_model()

    assert len(model.variants(Label.WO3)) == 10
    assert len(model.variants(Label.TIO2)) == 10
    assert model.variants(Label.WO3)[0].name == "WO3-gamma-tilt0"
    assert model.variants(Label.TIO2)[9].name == "TiO2-anatase-tilt4"
    assert model.t_max == 200.0
    assert model.dominates(Label.WO3, Label.TIO2)
    assert not model.dominates(Label.TIO2, Label.WO3)


def test_single_variant_model():
    model = default_intensity_model(variants=1)
    curve = model.variants(Label.WO3)[0]

    assert curve.name == "WO3-gamma-tilt0"
    assert curve(200.0) == pytest.approx(0.6 * -np.expm1(-5.0))

    with pytest.raises(IntensityModelError):
        default_intensity_model(variants=0)


def test_choose_is_uniform(rng):
    model = default_intensity_model(variants=4)
    n = 4000
    names = [model.choose(Label.WO3, rng).name for _ in range(n)]

    for curve in model.variants(Label.WO3):
        assert names.count(curve.name) / n == pytest.approx(
            0.25, abs=4 * np.sqrt(0.25 * 0.75 / n))


"""
Testing LUT Files
"""


def test_lut_roundtrip(tmp_path):
    model = default_intensity_model(variants=3)
    path = tmp_path / "curves.lut"
    path.write_text(dump_lut(model))

    loaded = load_lut(path)
    for label in Label:
        for expected, curve in zip(model.variants(label), loaded.variants(label)):
            assert curve.name == expected.name
            np.testing.assert_array_equal(curve.thickness, expected.thickness)
            np.testing.assert_array_equal(curve.intensity, expected.intensity)


def test_lut_unordered_samples():
    model = parse_lut(
        "# material variant thickness intensity\n"
        "TiO2 a 10 0.1\n"
        "TiO2 a 0 0\n"
        "1 b 0 0\n"
        "1 b 10 0.2\n"
        "WO3 c 0 0\n"
        "WO3 c 10 0.5\n")

    assert [c.name for c in model.variants(Label.TIO2)] == ["a", "b"]
    assert model.variants(Label.TIO2)[0](5.0) == pytest.approx(0.05)


@pytest.mark.parametrize("text", [
    "WO3 c 0 0\nWO3 c 10\n",
    "ZnO c 0 0\n",
    "WO3 c 0 0\nWO3 c 10 0.5\n",
    "WO3 c 0 0\nWO3 c 10 0.5\nTiO2 d 0 0\nTiO2 d 10 -1\n",
])
def test_invalid_lut(text):
    with pytest.raises(IntensityModelError):
        parse_lut(text)
