#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Thickness to intensity curves per material.
"""
from __future__ import annotations

import logging
import numpy as np

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from .constants import Label
from .streams import RandomStream

_logger = logging.getLogger(__name__)

DEFAULT_VARIANTS = 10
DEFAULT_T_MAX = 200.0
DEFAULT_T_SAMPLES = 401
VARIANT_SPREAD = 0.1

# Saturation intensity (detector fraction) and decay length (nm).
DEFAULT_CURVE_PARAMETERS = {
    Label.WO3: (0.60, 40.0),
    Label.TIO2: (0.20, 60.0),
}

CRYSTAL_PHASES = {
    Label.WO3: ("gamma", "delta"),
    Label.TIO2: ("rutile", "anatase"),
}


class IntensityModelError(ValueError):
    pass


@dataclass(frozen=True)
class IntensityCurve:
    """
    Monotone piecewise linear thickness (nm) to intensity curve; constant
    beyond the last sample.
    """
    name: str
    thickness: np.ndarray
    intensity: np.ndarray

    def __post_init__(self):
        thickness = np.asarray(self.thickness, dtype=float)
        intensity = np.asarray(self.intensity, dtype=float)
        object.__setattr__(self, "thickness", thickness)
        object.__setattr__(self, "intensity", intensity)

        if thickness.ndim != 1 or thickness.shape != intensity.shape:
            raise IntensityModelError(
                f"Curve {self.name}: thickness and intensity must be "
                "equally long sequences.")
        if len(thickness) < 2:
            raise IntensityModelError(
                f"Curve {self.name} needs at least two samples.")
        if thickness[0] != 0 or intensity[0] != 0:
            raise IntensityModelError(
                f"Curve {self.name} must start at intensity(0) = 0.")
        if np.any(np.diff(thickness) <= 0):
            raise IntensityModelError(
                f"Curve {self.name}: thickness samples must increase.")
        if np.any(np.diff(intensity) < 0):
            raise IntensityModelError(
                f"Curve {self.name} is not monotone nondecreasing.")
        if np.any(intensity > 1):
            raise IntensityModelError(
                f"Curve {self.name} exceeds detector fraction 1.")

    def __call__(self, thickness) -> np.ndarray:
        return np.interp(thickness, self.thickness, self.intensity)

    @property
    def t_max(self) -> float:
        return float(self.thickness[-1])


@dataclass
class IntensityModel:
    """
    Set of intensity curves per particle label. A particle renders with
    one of its label's curves drawn uniformly.
    """
    curves: Dict[Label, List[IntensityCurve]] = field(default_factory=dict)

    def __post_init__(self):
        for label in Label:
            if not self.curves.get(label):
                raise IntensityModelError(
                    f"No intensity curves for {label.material}.")

    def variants(self, label: Label) -> List[IntensityCurve]:
        return self.curves[Label(label)]

    def choose(self, label: Label, rng: RandomStream) -> IntensityCurve:
        """
        Draws a variant of the label uniformly.
        """
        variants = self.variants(label)
        return variants[int(rng.integers(0, len(variants)))]

    @property
    def t_max(self) -> float:
        return min(c.t_max for curves in self.curves.values() for c in curves)

    def covers(self, max_radius: float) -> bool:
        """
        Returns True if every curve is sampled up to the longest chord of a
        particle of max_radius.
        """
        return self.t_max >= 2.0 * max_radius

    def dominates(self, bright: Label, dark: Label, samples: int = 256) -> bool:
        """
        Returns True if every curve of bright is at least every curve of
        dark at all thicknesses.
        """
        t = np.linspace(0.0, self.t_max, samples)
        lowest = np.min([c(t) for c in self.variants(bright)], axis=0)
        highest = np.max([c(t) for c in self.variants(dark)], axis=0)
        return bool(np.all(lowest >= highest))

    @classmethod
    def linear(cls, slope: float, t_max: float = DEFAULT_T_MAX) -> IntensityModel:
        """
        Single variant model I = slope * t for all labels, capped at 1.
        """
        t = np.linspace(0.0, t_max, DEFAULT_T_SAMPLES)
        intensity = np.minimum(slope * t, 1.0)
        return cls({
            label: [IntensityCurve(f"{label.material}-linear", t, intensity)]
            for label in Label})


def _variant_names(label: Label, n: int) -> List[str]:
    phases = CRYSTAL_PHASES[label]
    per_phase = -(-n // len(phases))
    return [
        f"{label.material}-{phases[i // per_phase]}-tilt{i % per_phase}"
        for i in range(n)]


def default_intensity_model(
    variants: int = DEFAULT_VARIANTS,
    t_max: float = DEFAULT_T_MAX
) -> IntensityModel:
    """
    Builds saturating exponential curves I(t) = I_inf (1 - exp(-t / l)) per
    material with variants spread by up to 10 % in I_inf and l.
    """
    if variants < 1:
        raise IntensityModelError(f"Need at least one variant, got {variants}.")

    t = np.linspace(0.0, t_max, DEFAULT_T_SAMPLES)
    if variants == 1:
        saturation_factors = np.ones(1)
    else:
        saturation_factors = np.linspace(
            1.0 - VARIANT_SPREAD, 1.0 + VARIANT_SPREAD, variants)
    decay_factors = saturation_factors[::-1]

    curves = {}
    for label, (saturation, decay) in DEFAULT_CURVE_PARAMETERS.items():
        names = _variant_names(label, variants)
        curves[label] = [
            IntensityCurve(
                name,
                t,
                saturation * s * -np.expm1(-t / (decay * l)))
            for name, s, l in zip(names, saturation_factors, decay_factors)]

    return IntensityModel(curves)


"""
LUT files
"""


def parse_lut(text: str) -> IntensityModel:
    """
    Parses 'material variant thickness intensity' lines; lines starting
    with '#' are ignored. Samples of a variant may come in any order.
    """
    samples: Dict[Tuple[Label, str], List[Tuple[float, float]]] = OrderedDict()
    for line_number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue

        fields = line.split()
        if len(fields) != 4:
            raise IntensityModelError(
                f"line {line_number}: expected 'material variant thickness "
                f"intensity', got {len(fields)} fields.")

        try:
            label = Label.parse(fields[0])
            thickness, intensity = float(fields[2]), float(fields[3])
        except ValueError as err:
            raise IntensityModelError(f"line {line_number}: {err}")

        samples.setdefault((label, fields[1]), []).append(
            (thickness, intensity))

    curves: Dict[Label, List[IntensityCurve]] = {}
    for (label, name), points in samples.items():
        points.sort()
        curves.setdefault(label, []).append(IntensityCurve(
            name, [t for t, _ in points], [i for _, i in points]))

    model = IntensityModel(curves)
    _logger.debug(
        "Parsed intensity LUT with "
        + ", ".join(f"{len(v)} {k.material}" for k, v in curves.items())
        + " variants.")
    return model


def load_lut(path) -> IntensityModel:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_lut(fh.read())


def dump_lut(model: IntensityModel) -> str:
    lines = ["# material variant thickness intensity"]
    for label in Label:
        for curve in model.variants(label):
            for t, i in zip(curve.thickness, curve.intensity):
                lines.append(
                    f"{label.material} {curve.name} "
                    f"{format(float(t), '.17g')} {format(float(i), '.17g')}")

    return "\n".join(lines) + "\n"
