#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Seeded random streams
"""
from __future__ import annotations

import numpy as np

from typing import Sequence, Tuple

SEED_BITS = 64


class RandomStream:
    """
    Deterministic random stream identified by a seed and a spawn key.

    Child streams are derived from (seed, spawn key + index), so every
    aggregate of a sweep can be reproduced on its own, independent of
    scheduling order.
    """

    def __init__(self, seed: int, spawn_key: Sequence[int] = ()) -> None:
        seed = int(seed)
        if seed < 0 or seed >= 2 ** SEED_BITS:
            raise ValueError(
                f"Seed must be an unsigned {SEED_BITS} bit integer, got {seed}.")

        self.seed = seed
        self.spawn_key: Tuple[int, ...] = tuple(int(k) for k in spawn_key)
        self.sequence = np.random.SeedSequence(
            entropy=self.seed, spawn_key=self.spawn_key)
        self.generator = np.random.Generator(np.random.PCG64(self.sequence))

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, spawn_key={self.spawn_key})"

    def child(self, index: int) -> RandomStream:
        """
        Returns the child stream with the given index.
        """
        return RandomStream(self.seed, self.spawn_key + (int(index),))

    def derive_seed(self, index: int) -> int:
        """
        Returns a 64 bit seed derived from this stream's identity and index.
        """
        sequence = np.random.SeedSequence(
            entropy=self.seed, spawn_key=self.spawn_key + (int(index),))
        return int(sequence.generate_state(1, dtype=np.uint64)[0])

    """
    Draws
    """

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self.generator.uniform(low, high, size)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def lognormal(self, mean: float, sigma: float, size=None):
        return self.generator.lognormal(mean, sigma, size)

    def integers(self, low: int, high: int, size=None):
        """
        Draws integers from the half-open interval [low, high).
        """
        return self.generator.integers(low, high, size)

    def random(self, size=None):
        return self.generator.random(size)

    def poisson(self, lam, size=None):
        return self.generator.poisson(lam, size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def choice(self, values, size=None, replace: bool = True):
        return self.generator.choice(values, size=size, replace=replace)
