#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Synthetic STEM image formation.

Every particle is projected to a thickness map, translated to intensity
with a randomly chosen curve of its material and blurred according to
its distance from the focal plane. The particle maps are summed, then
shot noise and scan noise are applied.
"""
from __future__ import annotations

import math
import numpy as np

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple
from scipy.ndimage import gaussian_filter, map_coordinates

from .constants import (
    Label,
    ScanMode,
    ANGSTROM_PER_NM,
    BLUR_TRUNCATE,
    FOV_BLUR_MARGIN,
    POISSON_LAMBDA_LIMIT
)
from .geometry import Aggregate, Particle
from .intensity import IntensityModel, default_intensity_model, load_lut
from .logging import Loggable
from .models import RenderConfig
from .streams import RandomStream


class FieldOfViewOverflow(ValueError):
    pass


"""
Image Grid
"""


@dataclass
class ImageGrid:
    """
    Pixel image with world coordinates in nm.

    origin is the world (x, y) of the center of pixel (0, 0); values are
    indexed [row, column] with rows along y.
    """
    width: int
    height: int
    pixel_size: float
    origin: np.ndarray = field(default_factory=lambda: np.zeros(2))
    values: Optional[np.ndarray] = None
    variants: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(
                f"Grid must have at least one pixel, got {self.width}x{self.height}.")
        if not self.pixel_size > 0:
            raise ValueError(
                f"Pixel size must be positive, got {self.pixel_size}.")

        self.origin = np.asarray(self.origin, dtype=float)
        if self.values is None:
            self.values = np.zeros((self.height, self.width))
        self.values = np.asarray(self.values, dtype=float)

        if self.values.shape != (self.height, self.width):
            raise ValueError(
                f"Values of shape {self.values.shape} do not match "
                f"{self.width}x{self.height} grid.")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("Grid values must be finite and not negative.")

    @classmethod
    def centered(cls, width: int, height: int, pixel_size: float) -> ImageGrid:
        """
        Returns an empty grid whose center lies at world (0, 0).
        """
        origin = -0.5 * pixel_size * np.array([width - 1, height - 1])
        return cls(width, height, pixel_size, origin)

    @classmethod
    def from_config(cls, cfg: RenderConfig) -> ImageGrid:
        return cls.centered(cfg.width, cfg.height, cfg.pixel_size)

    def with_values(self, values: np.ndarray) -> ImageGrid:
        return ImageGrid(
            self.width, self.height, self.pixel_size, self.origin.copy(),
            values, list(self.variants))

    @property
    def pixel_area(self) -> float:
        return self.pixel_size ** 2

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        """
        Returns the world extent (x_min, x_max, y_min, y_max) covered by the
        pixels.
        """
        half = 0.5 * self.pixel_size
        x_min, y_min = self.origin - half
        return (
            x_min, x_min + self.width * self.pixel_size,
            y_min, y_min + self.height * self.pixel_size)

    def pixel_index(self, x: float, y: float) -> Tuple[float, float]:
        """
        Returns the fractional (row, column) of world point (x, y).
        """
        return ((y - self.origin[1]) / self.pixel_size,
                (x - self.origin[0]) / self.pixel_size)

    def window(self, x: float, y: float, radius: float) -> Tuple[slice, slice]:
        """
        Returns the pixel slices covering the square of half width radius
        about (x, y), clipped to the grid.
        """
        row, col = self.pixel_index(x, y)
        extent = radius / self.pixel_size
        rows = slice(
            max(int(math.floor(row - extent)), 0),
            min(int(math.ceil(row + extent)) + 1, self.height))
        cols = slice(
            max(int(math.floor(col - extent)), 0),
            min(int(math.ceil(col + extent)) + 1, self.width))
        return rows, cols

    def coordinates(self, rows: slice = None, cols: slice = None):
        """
        Returns world x and y of the pixel centers as broadcastable arrays.
        """
        rows = rows or slice(0, self.height)
        cols = cols or slice(0, self.width)
        ys = self.origin[1] + self.pixel_size * np.arange(rows.start, rows.stop)
        xs = self.origin[0] + self.pixel_size * np.arange(cols.start, cols.stop)
        return xs[None, :], ys[:, None]


"""
Projection
"""


def _chord(x, y, center_x, center_y, radius) -> np.ndarray:
    squared = radius ** 2 - (x - center_x) ** 2 - (y - center_y) ** 2
    return 2.0 * np.sqrt(np.clip(squared, 0.0, None))


def thickness_map(p: Particle, grid: ImageGrid) -> np.ndarray:
    """
    Returns the chord length (nm) of the vertical ray through every pixel
    center.
    """
    xs, ys = grid.coordinates()
    return _chord(xs, ys, p.position[0], p.position[1], p.radius)


def particle_intensity_map(
    p: Particle,
    grid: ImageGrid,
    model: IntensityModel,
    rng: RandomStream
) -> np.ndarray:
    """
    Returns the unblurred intensity map of the particle for a variant of
    its material drawn from rng.
    """
    return model.choose(p.label, rng)(thickness_map(p, grid))


def sigma_stem(z: float, beta: float) -> float:
    """
    Returns the defocus blur (nm) of a particle at height z below or above
    the focal plane for semi-convergence angle beta.
    """
    return abs(z) * math.tan(beta)


def defocus_blur(values: np.ndarray, sigma_px: float) -> np.ndarray:
    """
    Gaussian blur with standard deviation sigma_px, zero outside the map.
    """
    if sigma_px < 0:
        raise ValueError(f"Blur sigma must not be negative, got {sigma_px}.")
    if sigma_px == 0:
        return np.array(values, dtype=float)

    return gaussian_filter(
        np.asarray(values, dtype=float), sigma_px,
        mode="constant", cval=0.0, truncate=BLUR_TRUNCATE)


"""
Composition
"""


def _check_field_of_view(
    grid: ImageGrid,
    x: float,
    y: float,
    radius: float,
    sigma: float,
    index: int
) -> None:
    x_min, x_max, y_min, y_max = grid.bounds
    reach = radius + FOV_BLUR_MARGIN * sigma
    if (x - reach < x_min or x + reach > x_max
            or y - reach < y_min or y + reach > y_max):
        raise FieldOfViewOverflow(
            f"Particle {index} at ({x:.1f}, {y:.1f}) nm with reach "
            f"{reach:.1f} nm exceeds the {grid.width}x{grid.height} field "
            f"of view at {grid.pixel_size} nm/px.")


def compose(
    a: Aggregate,
    cfg: RenderConfig,
    model: IntensityModel,
    rng: RandomStream,
    center: Optional[Sequence[float]] = None
) -> ImageGrid:
    """
    Returns the noiseless image of the aggregate.

    The aggregate is shifted so that center (default: its equal-mass
    center of mass) projects to the grid center and lies in the focal
    plane. The chosen variant of every particle is recorded on the grid.
    """
    grid = ImageGrid.from_config(cfg)
    if center is None:
        center = a.positions.mean(axis=0)
    positions = a.positions - np.asarray(center, dtype=float)

    total = np.zeros_like(grid.values)
    compensation = np.zeros_like(grid.values)
    variants = []

    for index, ((x, y, z), radius, label) in enumerate(
            zip(positions, a.radii, a.labels)):
        sigma = sigma_stem(z, cfg.beta)
        _check_field_of_view(grid, x, y, radius, sigma, index)

        curve = model.choose(Label(int(label)), rng)
        variants.append(curve.name)

        sigma_px = sigma / cfg.pixel_size
        margin = (int(BLUR_TRUNCATE * sigma_px + 0.5) + 2) * cfg.pixel_size
        rows, cols = grid.window(x, y, radius + margin)
        xs, ys = grid.coordinates(rows, cols)
        patch = defocus_blur(curve(_chord(xs, ys, x, y, radius)), sigma_px)

        # Kahan summation over particles.
        corrected = patch - compensation[rows, cols]
        updated = total[rows, cols] + corrected
        compensation[rows, cols] = (updated - total[rows, cols]) - corrected
        total[rows, cols] = updated

    grid.values = np.clip(total, 0.0, None)
    grid.variants = variants
    return grid


"""
Noise
"""


def apply_shot_noise(
    img: ImageGrid,
    cfg: RenderConfig,
    rng: RandomStream
) -> ImageGrid:
    """
    Replaces every pixel by an electron count with mean
    dose * pixel area * value, converted back to detector fraction.
    A dose of None leaves the image unchanged.
    """
    if cfg.dose is None:
        return img.with_values(img.values.copy())

    scale = cfg.dose * (img.pixel_size * ANGSTROM_PER_NM) ** 2
    lam = scale * img.values

    counts = np.zeros_like(lam)
    small = lam <= POISSON_LAMBDA_LIMIT
    counts[small] = rng.poisson(lam[small])
    large = ~small
    if np.any(large):
        counts[large] = np.clip(
            rng.normal(lam[large], np.sqrt(lam[large])), 0.0, None)

    return img.with_values(counts / scale)


def scan_displacements(
    shape: Tuple[int, int],
    sigma_px: float,
    mode: ScanMode,
    rng: RandomStream
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draws (row, column) beam displacements in pixels, per pixel or shared
    along each scan row.
    """
    height, width = shape
    if ScanMode(mode) == ScanMode.ROW:
        drawn = rng.normal(0.0, sigma_px, size=(2, height, 1))
        drawn = np.broadcast_to(drawn, (2, height, width))
    else:
        drawn = rng.normal(0.0, sigma_px, size=(2, height, width))

    return drawn[0], drawn[1]


def apply_scan_noise(
    img: ImageGrid,
    cfg: RenderConfig,
    rng: RandomStream
) -> ImageGrid:
    """
    Resamples every pixel at a randomly displaced beam position with
    bilinear interpolation, clamping at the edges.
    """
    if cfg.scan_sigma == 0:
        return img.with_values(img.values.copy())

    rows, cols = np.indices(img.values.shape, dtype=float)
    d_rows, d_cols = scan_displacements(
        img.values.shape, cfg.scan_sigma / img.pixel_size, cfg.scan_mode, rng)

    values = map_coordinates(
        img.values, [rows + d_rows, cols + d_cols], order=1, mode="nearest")
    return img.with_values(np.clip(values, 0.0, None))


def render(
    a: Aggregate,
    cfg: RenderConfig,
    model: IntensityModel,
    rng: RandomStream
) -> ImageGrid:
    """
    Composes the aggregate image, then applies shot and scan noise.
    """
    image = compose(a, cfg, model, rng)
    image = apply_shot_noise(image, cfg, rng)
    return apply_scan_noise(image, cfg, rng)


class StemRenderer(Loggable):
    """
    Renders aggregates for one render configuration.
    """

    def __init__(
        self,
        config: RenderConfig = None,
        model: IntensityModel = None
    ) -> None:
        super().__init__()
        self.config = config or RenderConfig()
        self.config.check()

        if model is None and self.config.intensity_lut:
            self.logger.info(
                f"Loading intensity curves from {self.config.intensity_lut}")
            model = load_lut(self.config.intensity_lut)
        self.model = model or default_intensity_model()

    def render(self, a: Aggregate, rng: RandomStream) -> ImageGrid:
        image = render(a, self.config, self.model, rng)
        self.logger.debug(
            f"Rendered {a} on {image.width}x{image.height} grid, "
            f"max intensity {image.values.max():.4g}.")
        return image
