#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Run configuration: INI files merged with command line overrides.
"""
import configparser
import json
import logging
import os

from dataclasses import dataclass, field
from typing import Dict, Optional
from marshmallow import ValidationError, fields
from marshmallow.validate import Range

from .constants import (
    CONFIG_PATH_ENV,
    DEFAULT_BATCH_SIZE,
    DEFAULT_MAX_SHIFT_PX,
    DEFAULT_MIN_PER_CONFIG,
    DEFAULT_TRAIN_FRACTION
)
from .models import (
    BaseModel,
    GrowthConfig,
    RadiusDistribution,
    RenderConfig,
    SweepSpec
)
from .streams import SEED_BITS

_logger = logging.getLogger(__name__)

LIST_DELIMITER = ","
NONE_VALUES = ("", "none", "null")


class ConfigError(ValueError):
    pass


@dataclass
class RunSection(BaseModel):
    seed: int = field(default=0, metadata=dict(
        validate=Range(min=0, max=2 ** SEED_BITS - 1)))
    jobs: int = field(default=1, metadata=dict(validate=Range(min=1)))
    count: int = field(default=1, metadata=dict(validate=Range(min=0)))
    per_config_samples: int = field(
        default=200, metadata=dict(validate=Range(min=1)))
    grid_resolution: int = field(
        default=20, metadata=dict(validate=Range(min=1)))
    max_shift_px: int = field(
        default=DEFAULT_MAX_SHIFT_PX, metadata=dict(validate=Range(min=0)))
    out: Optional[str] = None


@dataclass
class SplitSection(BaseModel):
    fraction: float = field(default=DEFAULT_TRAIN_FRACTION, metadata=dict(
        validate=Range(min=0.0, max=1.0, min_inclusive=False,
                       max_inclusive=False)))
    min_per_config: int = field(
        default=DEFAULT_MIN_PER_CONFIG, metadata=dict(validate=Range(min=1)))
    nu: int = field(
        default=DEFAULT_BATCH_SIZE, metadata=dict(validate=Range(min=1)))
    exclude_infeasible: bool = False


@dataclass
class RunConfig(BaseModel):
    """
    Resolved configuration of a command.
    """
    run: RunSection = field(default_factory=RunSection)
    radius: RadiusDistribution = field(default_factory=RadiusDistribution)
    growth: GrowthConfig = field(default_factory=GrowthConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    split: SplitSection = field(default_factory=SplitSection)

    def check(self):
        super().check()
        self.growth.check()
        self.sweep.check()
        return self

    def to_json(self) -> str:
        return json.dumps(self.dump(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.load(json.loads(text))


SECTIONS = {
    "run": RunSection,
    "radius": RadiusDistribution,
    "growth": GrowthConfig,
    "render": RenderConfig,
    "sweep": SweepSpec,
    "split": SplitSection,
}


def _section_data(name: str, items: Dict[str, str]) -> dict:
    """
    Converts the raw strings of a section for loading: list fields are
    split at commas, empty or 'none' values of optional fields become None.
    """
    schema_fields = SECTIONS[name].schema().fields
    data = {}
    for key, value in items.items():
        if key not in schema_fields:
            raise ConfigError(f"Unknown option '{key}' in section [{name}].")

        schema_field = schema_fields[key]
        value = value.strip()
        if isinstance(schema_field, fields.List):
            data[key] = [
                v.strip() for v in value.split(LIST_DELIMITER) if v.strip()]
        elif schema_field.allow_none and value.lower() in NONE_VALUES:
            data[key] = None
        else:
            data[key] = value

    return data


def parse_config(text: str) -> dict:
    """
    Parses INI text into nested config data.
    """
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"Invalid config file: {err}")

    data = {}
    for name in parser.sections():
        if name not in SECTIONS:
            raise ConfigError(f"Unknown config section [{name}].")
        data[name] = _section_data(name, dict(parser.items(name)))

    return data


def config_path(path: Optional[str] = None) -> Optional[str]:
    return path or os.environ.get(CONFIG_PATH_ENV) or None


def load_config(
    path: Optional[str] = None,
    overrides: Optional[Dict[str, dict]] = None
) -> RunConfig:
    """
    Loads the config file (or the file named by HETEROAGG_CONFIG), applies
    per section overrides and validates the result.

    Raises ConfigError for unreadable files or unknown options and
    ValidationError for invalid values.
    """
    data = {}
    path = config_path(path)
    if path:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as err:
            raise ConfigError(f"Cannot read config file {path}: {err}")

        _logger.debug(f"Loading config from {path}")
        data = parse_config(text)

    for section, values in (overrides or {}).items():
        data.setdefault(section, {}).update(
            {k: v for k, v in values.items() if v is not None})

    try:
        return RunConfig.load(data).check()
    except ValidationError:
        raise
    except (TypeError, ValueError) as err:
        raise ConfigError(f"Invalid configuration: {err}")
