#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Image preprocessing and augmentation.

Functions take a 2D array or an ImageGrid and return plain arrays, since
preprocessed values leave the non-negative intensity domain.
"""
import warnings
import numpy as np

from typing import Tuple, Union
from scipy.ndimage import rotate, shift as ndi_shift

from .constants import (
    DEFAULT_INVERSION_THRESHOLD,
    DEFAULT_MAX_SHIFT_PX,
    DEFAULT_QUANTIZE_LEVELS
)
from .render import ImageGrid
from .streams import RandomStream

Image = Union[np.ndarray, ImageGrid]

RIGHT_ANGLE = 90.0


class ConstantImage(UserWarning):
    pass


def _values(img: Image) -> np.ndarray:
    if isinstance(img, ImageGrid):
        return img.values
    return np.asarray(img, dtype=float)


def quantize(values: np.ndarray, levels: int = DEFAULT_QUANTIZE_LEVELS) -> np.ndarray:
    """
    Rounds values in [-0.5, 0.5] to the nearest of levels equidistant
    points spanning that interval.
    """
    if levels < 2:
        raise ValueError(f"Need at least two levels, got {levels}.")

    steps = levels - 1
    k = np.clip(np.rint((np.asarray(values) + 0.5) * steps), 0, steps)
    return k / steps - 0.5


def preprocess(img: Image, levels: int = DEFAULT_QUANTIZE_LEVELS) -> np.ndarray:
    """
    Scales the image's [min, max] affinely onto [-0.5, 0.5] and quantizes
    it to levels values. A constant image becomes all zeros.
    """
    values = _values(img)
    low, high = float(values.min()), float(values.max())
    if high == low:
        warnings.warn(
            f"Constant image (value {low}) preprocessed to zeros.",
            ConstantImage)
        return np.zeros_like(values, dtype=float)

    # With an even number of levels the midpoint rounds to the nearest
    # lattice value, half a step (1 / 510 for 256 levels) away from 0.
    return quantize((values - low) / (high - low) - 0.5, levels)


def invert_nonbackground(
    img: Image,
    t: float = DEFAULT_INVERSION_THRESHOLD
) -> np.ndarray:
    """
    Replaces every value p >= t by 1 / p; values below t, including the
    zero background, are kept.
    """
    values = _values(img).astype(float, copy=True)
    mask = values >= t
    values[mask] = 1.0 / values[mask]
    return values


def augment_with(
    img: Image,
    angle: float,
    flip: bool,
    offset: Tuple[int, int],
    background: float = 0.0
) -> np.ndarray:
    """
    Rotates by angle (degrees, counter clockwise), mirrors left to right if
    flip, then translates by the integer (row, column) offset.
    """
    values = _values(img).astype(float, copy=True)

    quarter_turns, remainder = divmod(float(angle), RIGHT_ANGLE)
    quarter_turns = int(quarter_turns) % 4
    keeps_shape = quarter_turns % 2 == 0 or values.shape[0] == values.shape[1]
    if remainder == 0 and keeps_shape:
        values = np.rot90(values, quarter_turns)
    else:
        values = rotate(
            values, angle, reshape=False, order=1,
            mode="constant", cval=background)

    if flip:
        values = np.fliplr(values)

    if any(offset):
        values = ndi_shift(
            values, offset, order=0, mode="constant", cval=background)

    return np.ascontiguousarray(values)


def augment(
    img: Image,
    rng: RandomStream,
    max_shift_px: int = DEFAULT_MAX_SHIFT_PX,
    background: float = 0.0
) -> np.ndarray:
    """
    Applies a random rotation, a mirror flip with probability 0.5 and an
    integer shift of at most max_shift_px per axis.
    """
    angle = float(rng.uniform(0.0, 360.0))
    flip = bool(rng.random() < 0.5)
    offset = tuple(int(v) for v in rng.integers(
        -max_shift_px, max_shift_px + 1, size=2))

    return augment_with(img, angle, flip, offset, background)
