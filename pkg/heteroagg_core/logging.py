#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Logging
"""

import logging
import os

from .constants import LOG_LEVEL_ENV

LOGGER_NAMESPACE = "heteroagg_core"
LOG_FORMAT = "%(asctime)s %(levelname)s [%(name)s] %(message)s"


def default_level() -> int:
    """
    Returns the log level from the environment, INFO if unset or unknown.
    """
    level = logging.getLevelName(
        os.environ.get(LOG_LEVEL_ENV, "INFO").upper())
    return level if isinstance(level, int) else logging.INFO


def configure_logging(verbose: bool = False) -> None:
    """
    Configures the root handler once for command line runs.
    """
    level = logging.DEBUG if verbose else default_level()
    logging.basicConfig(level=level, format=LOG_FORMAT)
    logging.getLogger(LOGGER_NAMESPACE).setLevel(level)


logging.getLogger(LOGGER_NAMESPACE).setLevel(default_level())


class Loggable:
    def __init__(self):
        # Child of the package logger, so module and class records share
        # one level.
        self.logger = logging.getLogger(
            f"{LOGGER_NAMESPACE}.{self.__class__.__name__}")
