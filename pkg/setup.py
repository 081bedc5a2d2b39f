#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Hetero-Aggregate Core
"""

import setuptools

with open("requirements.txt", "r") as fh:
    requirements = fh.read().splitlines()

setuptools.setup(
    name='heteroagg-core',
    version='0.1.0',
    packages=setuptools.find_packages(exclude=["tests", "examples*"]),
    include_package_data=True,
    install_requires=requirements,
    entry_points={
        "console_scripts": [
            "heteroagg=heteroagg_core.cli:main",
        ],
    })
