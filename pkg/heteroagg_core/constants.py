#!/usr/bin/env python3
# -*- coding: utf-8 -*-

from enum import Enum, IntEnum

"""
Constants
"""

CONFIG_PATH_ENV = "HETEROAGG_CONFIG"
LOG_LEVEL_ENV = "HETEROAGG_LOG_LEVEL"

# Contact rule: particles touch if their distance is at most
# CONTACT_SLACK times the sum of their radii.
CONTACT_SLACK = 1.01

# Absolute slack (nm) on the overlap predicate.
GEOMETRY_EPSILON = 1e-9

FRACTAL_PREFACTOR = 1.3

DEFAULT_RADIUS_MEAN = 12.0
DEFAULT_RADIUS_STD = 3.0

DEFAULT_TARGET_SIZE_MIN = 20
DEFAULT_TARGET_SIZE_MAX = 80
DEFAULT_MAX_POSITION_ATTEMPTS = 1000
DEFAULT_MAX_RESTARTS = 100

# Semi-convergence angle (rad), electron dose (e/A^2), beam displacement (nm)
DEFAULT_BETA = 0.0211
DEFAULT_DOSE = 149.0
DEFAULT_SCAN_SIGMA = 0.01

DEFAULT_IMAGE_SIZE = 512
DEFAULT_PIXEL_SIZE = 1.0
DEFAULT_QUANTIZE_LEVELS = 256
BLUR_TRUNCATE = 4.0
FOV_BLUR_MARGIN = 3.0
POISSON_LAMBDA_LIMIT = 1e6

ANGSTROM_PER_NM = 10.0

DEFAULT_INVERSION_THRESHOLD = 0.001
DEFAULT_MAX_SHIFT_PX = 25

DEFAULT_BATCH_SIZE = 12
DEFAULT_MIN_PER_CONFIG = 20
DEFAULT_TRAIN_FRACTION = 0.6

HISTOGRAM_BINS = 20
GAP_SET_N_MAX = 80

PGM_MAXVAL = 65535

REFERENCE_BASELINE_MAE = 0.078
REFERENCE_COMPARISON_MAE = {
    "s_label1": 2.165,
    "z_hetero": 0.056,
    "z_total": 0.007,
}


"""
Enums
"""


class Label(IntEnum):
    """
    Particle material label.
    """
    WO3 = 0
    TIO2 = 1

    @property
    def material(self) -> str:
        return MATERIAL_NAMES[self]

    @classmethod
    def parse(cls, value) -> "Label":
        """
        Parses a label from its integer value or material name.
        """
        if isinstance(value, str):
            text = value.strip()
            for label, name in MATERIAL_NAMES.items():
                if text.lower() == name.lower():
                    return label
            return cls(int(text))

        return cls(int(value))


MATERIAL_NAMES = {
    Label.WO3: "WO3",
    Label.TIO2: "TiO2",
}


class Weighting(Enum):
    """
    Particle masses entering the radius of gyration.
    """
    EQUAL_MASS = "equal-mass"
    VOLUME_MASS = "volume-mass"


class Split(Enum):
    """
    Dataset split tags.
    """
    TRAIN = "train"
    EVAL = "eval"


class ScanMode(Enum):
    """
    Granularity of the scan-noise beam displacement.
    """
    PIXEL = "pixel"
    ROW = "row"
