#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Models and Schemas:
- ModelParams
- RadiusDistribution
- GrowthConfig
- RenderConfig
- SweepSpec
- Provenance
- DescriptorReport
- ImageMetadata
- ManifestEntry
"""

import math
import marshmallow_dataclass

from functools import partial
from typing import Any, List, Optional, Tuple
from marshmallow import EXCLUDE, ValidationError
from marshmallow.validate import Length, Range
from marshmallow_dataclass import NewType
from marshmallow_enum import EnumField
from dataclasses import dataclass, field

from .constants import (
    Label,
    ScanMode,
    Split,
    CONTACT_SLACK,
    FRACTAL_PREFACTOR,
    DEFAULT_RADIUS_MEAN,
    DEFAULT_RADIUS_STD,
    DEFAULT_TARGET_SIZE_MIN,
    DEFAULT_TARGET_SIZE_MAX,
    DEFAULT_MAX_POSITION_ATTEMPTS,
    DEFAULT_MAX_RESTARTS,
    DEFAULT_BETA,
    DEFAULT_DOSE,
    DEFAULT_SCAN_SIGMA,
    DEFAULT_IMAGE_SIZE,
    DEFAULT_PIXEL_SIZE,
    DEFAULT_QUANTIZE_LEVELS
)

THETA_DELIMITER = ","
HISTOGRAM_DELIMITER = ";"

"""
Custom Fields and Types
"""

LabelType = NewType(
    "LabelType", Label, field=partial(EnumField, Label, by_value=True))

SplitType = NewType(
    "SplitType", Split, field=partial(EnumField, Split, by_value=True))

ScanModeType = NewType(
    "ScanModeType",
    ScanMode,
    field=partial(
        EnumField,
        ScanMode,
        by_value=True))


CACHED_SCHEMAS = {}


class BaseModel:
    """
    Base model with method for loading, dumping and validating.
    """

    class Meta:
        unknown = EXCLUDE

    @classmethod
    def schema(cls):
        """
        Returns the cached schema instance of this model.
        """
        global CACHED_SCHEMAS
        if cls not in CACHED_SCHEMAS:
            CACHED_SCHEMAS[cls] = marshmallow_dataclass.class_schema(cls)()

        return CACHED_SCHEMAS[cls]

    @classmethod
    def valid(cls, data: Any) -> dict:
        """
        Returns the validation errors of data (empty if valid).
        """
        return cls.schema().validate(data)

    @classmethod
    def load(cls, data: Any):
        """
        Loads the dataclass based with data
        """
        return cls.schema().load(data)

    def dump(self) -> dict:
        """
        Dumps the dataclass to dict.
        """
        return self.schema().dump(self)

    def check(self):
        """
        Validates the instance against its schema.

        Raises ValidationError for out of range fields.
        """
        errors = self.valid(self.dump())
        if errors:
            raise ValidationError(errors)

        return self


def _positive(**kwargs) -> dict:
    return dict(validate=Range(min=0.0, min_inclusive=False), **kwargs)


"""
Model Parameters
"""


@dataclass
class ModelParams(BaseModel):
    """
    Parameter vector of the hetero-aggregate model.
    """
    theta_df: float = field(metadata=dict(validate=Range(
        min=1.0, max=3.0, min_inclusive=False, max_inclusive=False)))
    theta_rho: float = field(metadata=dict(validate=Range(min=0.0, max=1.0)))
    theta_0: int = field(metadata=dict(validate=Range(min=1)))
    theta_1: int = field(metadata=dict(validate=Range(min=1)))

    def __str__(self) -> str:
        return "theta=({df}, {rho}, {c0}, {c1})".format(
            df=self.theta_df, rho=self.theta_rho,
            c0=self.theta_0, c1=self.theta_1)

    @property
    def key(self) -> Tuple[float, float, int, int]:
        """
        Returns the configuration key used to group entries.
        """
        return (self.theta_df, self.theta_rho, self.theta_0, self.theta_1)

    @property
    def label_one_probability(self) -> float:
        """
        Returns P(L=1) of the primary cluster labels.
        """
        denominator = ((1.0 - self.theta_rho) * self.theta_0
                       + self.theta_rho * self.theta_1)
        if denominator <= 0:
            return math.nan

        return (1.0 - self.theta_rho) * self.theta_0 / denominator

    def cluster_size(self, label: Label) -> int:
        """
        Returns the primary cluster size for the label.
        """
        return self.theta_0 + int(label) * (self.theta_1 - self.theta_0)

    @classmethod
    def from_string(cls, text: str) -> "ModelParams":
        """
        Parses 'df,rho,c0,c1' and validates the result.
        """
        parts = [p.strip() for p in str(text).split(THETA_DELIMITER)]
        if len(parts) != 4:
            raise ValidationError(
                f"Theta must have four comma separated values, got '{text}'.")

        return cls.load({
            "theta_df": parts[0],
            "theta_rho": parts[1],
            "theta_0": parts[2],
            "theta_1": parts[3]})


"""
Generator Configuration
"""


@dataclass
class RadiusDistribution(BaseModel):
    """
    Log-normal radius law, given by mean and standard deviation in nm.
    """
    mean: float = field(default=DEFAULT_RADIUS_MEAN, metadata=_positive())
    std: float = field(default=DEFAULT_RADIUS_STD,
                       metadata=dict(validate=Range(min=0.0)))

    @property
    def log_sigma(self) -> float:
        return math.sqrt(math.log1p((self.std / self.mean) ** 2))

    @property
    def log_mu(self) -> float:
        return math.log(self.mean) - 0.5 * self.log_sigma ** 2

    @property
    def mean_projected_area(self) -> float:
        """
        Returns E[pi r^2] in nm^2.
        """
        return math.pi * (self.std ** 2 + self.mean ** 2)


@dataclass
class GrowthConfig(BaseModel):
    """
    Configuration of the two stage aggregation.
    """
    k_f: float = field(default=FRACTAL_PREFACTOR, metadata=_positive())
    contact_slack: float = field(
        default=CONTACT_SLACK, metadata=dict(validate=Range(min=1.0)))
    max_position_attempts: int = field(
        default=DEFAULT_MAX_POSITION_ATTEMPTS,
        metadata=dict(validate=Range(min=1)))
    max_restarts: int = field(
        default=DEFAULT_MAX_RESTARTS, metadata=dict(validate=Range(min=0)))
    target_size_min: int = field(
        default=DEFAULT_TARGET_SIZE_MIN, metadata=dict(validate=Range(min=1)))
    target_size_max: int = field(
        default=DEFAULT_TARGET_SIZE_MAX, metadata=dict(validate=Range(min=1)))

    @property
    def target_size_range(self) -> Tuple[int, int]:
        return (self.target_size_min, self.target_size_max)

    def check(self):
        super().check()
        if self.target_size_min > self.target_size_max:
            raise ValidationError({
                "target_size_min": [
                    "Target size interval "
                    f"[{self.target_size_min}, {self.target_size_max}] is empty."]})

        return self


@dataclass
class Provenance(BaseModel):
    """
    Origin of a generated aggregate.
    """
    seed: Optional[int] = None
    spawn_key: List[int] = field(default_factory=list)
    theta: Optional[ModelParams] = None
    target_size: Optional[int] = None
    cluster_sizes: List[int] = field(default_factory=list)
    cluster_labels: List[LabelType] = field(default_factory=list)
    clamped_placements: int = 0
    restarts: int = 0


"""
Render Configuration
"""


@dataclass
class RenderConfig(BaseModel):
    """
    Image formation parameters.

    A dose of None disables shot noise.
    """
    beta: float = field(default=DEFAULT_BETA, metadata=dict(validate=Range(
        min=0.0, max=math.pi / 2, min_inclusive=False, max_inclusive=False)))
    dose: Optional[float] = field(default=DEFAULT_DOSE, metadata=_positive())
    scan_sigma: float = field(
        default=DEFAULT_SCAN_SIGMA, metadata=dict(validate=Range(min=0.0)))
    scan_mode: ScanModeType = ScanMode.PIXEL
    width: int = field(
        default=DEFAULT_IMAGE_SIZE, metadata=dict(validate=Range(min=1)))
    height: int = field(
        default=DEFAULT_IMAGE_SIZE, metadata=dict(validate=Range(min=1)))
    pixel_size: float = field(default=DEFAULT_PIXEL_SIZE, metadata=_positive())
    quantize_levels: int = field(
        default=DEFAULT_QUANTIZE_LEVELS, metadata=dict(validate=Range(min=2)))
    write_raw: bool = False
    intensity_lut: Optional[str] = None


"""
Dataset Sweep
"""


def _default_df_values() -> List[float]:
    return [round(1.5 + 0.1 * i, 1) for i in range(11)]


def _default_rho_values() -> List[float]:
    return [round(0.1 * i, 1) for i in range(1, 10)]


def _default_cluster_sizes() -> List[int]:
    return list(range(1, 7))


@dataclass
class SweepSpec(BaseModel):
    """
    Parameter grid of a dataset sweep.
    """
    df_values: List[float] = field(
        default_factory=_default_df_values,
        metadata=dict(validate=Length(min=1)))
    rho_values: List[float] = field(
        default_factory=_default_rho_values,
        metadata=dict(validate=Length(min=1)))
    c0_values: List[int] = field(
        default_factory=_default_cluster_sizes,
        metadata=dict(validate=Length(min=1)))
    c1_values: List[int] = field(
        default_factory=_default_cluster_sizes,
        metadata=dict(validate=Length(min=1)))
    aggregates_per_triple: int = field(
        default=100, metadata=dict(validate=Range(min=1)))
    df_choices_per_triple: int = field(
        default=2, metadata=dict(validate=Range(min=1)))
    fov_retries: int = field(default=10, metadata=dict(validate=Range(min=0)))

    @property
    def aggregates_per_config(self) -> int:
        return self.aggregates_per_triple // self.df_choices_per_triple

    def check(self):
        super().check()
        if self.aggregates_per_triple % self.df_choices_per_triple != 0:
            raise ValidationError({
                "aggregates_per_triple": [
                    "Must be divisible by df_choices_per_triple "
                    f"({self.df_choices_per_triple})."]})

        if self.df_choices_per_triple > len(set(self.df_values)):
            raise ValidationError({
                "df_choices_per_triple": [
                    "Cannot draw more fractal dimensions than df_values holds."]})

        for theta_df in self.df_values:
            for theta_rho in self.rho_values:
                ModelParams(
                    theta_df, theta_rho,
                    min(self.c0_values), min(self.c1_values)).check()

        return self


"""
Descriptor Report
"""

DESCRIPTOR_COLUMNS = [
    "n_particles",
    "fractal_dim",
    "fractal_dim_volume",
    "mixing_ratio",
    "avg_cluster_size_label0",
    "avg_cluster_size_label1",
    "z_hetero",
    "z_total",
    "cluster_size_histogram_label0",
    "cluster_size_histogram_label1",
]


def format_float(value: Optional[float]) -> str:
    """
    Formats a float to 17 significant digits, absent values as empty string.
    """
    if value is None:
        return ""

    return format(float(value), ".17g")


def parse_float(text: str) -> Optional[float]:
    text = text.strip()
    return float(text) if text else None


@dataclass
class DescriptorReport(BaseModel):
    """
    Structural descriptors of one aggregate.

    Average cluster sizes are None when the label is absent.
    """
    n_particles: int
    mixing_ratio: float
    z_hetero: float
    z_total: float
    fractal_dim: Optional[float] = None
    fractal_dim_volume: Optional[float] = None
    avg_cluster_size_label0: Optional[float] = None
    avg_cluster_size_label1: Optional[float] = None
    cluster_size_histogram_label0: List[int] = field(default_factory=list)
    cluster_size_histogram_label1: List[int] = field(default_factory=list)

    def avg_cluster_size(self, label: Label) -> Optional[float]:
        if Label(label) == Label.WO3:
            return self.avg_cluster_size_label0

        return self.avg_cluster_size_label1

    def csv_row(self) -> List[str]:
        """
        Returns the report in DESCRIPTOR_COLUMNS order.
        """
        row = []
        for column in DESCRIPTOR_COLUMNS:
            value = getattr(self, column)
            if column == "n_particles":
                row.append(str(value))
            elif column.startswith("cluster_size_histogram"):
                row.append(HISTOGRAM_DELIMITER.join(str(v) for v in value))
            else:
                row.append(format_float(value))

        return row

    @classmethod
    def from_csv_row(cls, row: dict) -> "DescriptorReport":
        """
        Parses a report from a dict keyed by DESCRIPTOR_COLUMNS.
        """
        def histogram(text: str) -> List[int]:
            text = text.strip()
            if not text:
                return []
            return [int(v) for v in text.split(HISTOGRAM_DELIMITER)]

        return cls(
            n_particles=int(row["n_particles"]),
            mixing_ratio=parse_float(row["mixing_ratio"]),
            z_hetero=parse_float(row["z_hetero"]),
            z_total=parse_float(row["z_total"]),
            fractal_dim=parse_float(row["fractal_dim"]),
            fractal_dim_volume=parse_float(row["fractal_dim_volume"]),
            avg_cluster_size_label0=parse_float(
                row["avg_cluster_size_label0"]),
            avg_cluster_size_label1=parse_float(
                row["avg_cluster_size_label1"]),
            cluster_size_histogram_label0=histogram(
                row["cluster_size_histogram_label0"]),
            cluster_size_histogram_label1=histogram(
                row["cluster_size_histogram_label1"]))


"""
Images
"""


@dataclass
class ImageMetadata(BaseModel):
    """
    Sidecar record of a written image.
    """
    width: int
    height: int
    pixel_size: float
    v_max: float
    config_hash: str
    seed: Optional[int] = None
    spawn_key: List[int] = field(default_factory=list)
    theta: Optional[ModelParams] = None
    origin: List[float] = field(default_factory=list)
    variants: List[str] = field(default_factory=list)
    raw_path: Optional[str] = None


"""
Manifest Entry
"""


@dataclass
class ManifestEntry(BaseModel):
    """
    One (aggregate, image, theta) triplet of a dataset.
    """
    id: str
    theta: ModelParams
    seed: int
    geometry_path: str
    image_path: str
    descriptors: DescriptorReport
    split: Optional[SplitType] = None
    attempt: int = 0
    image: Optional[ImageMetadata] = None

    @property
    def n_particles(self) -> int:
        return self.descriptors.n_particles
