#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Disjoint sets
"""

from collections import defaultdict
from typing import Iterable, List, Tuple

import numpy as np


class UnionFind:
    """
    Union-find over the indices 0..n-1 with union by size and path
    compression.
    """

    def __init__(self, n: int) -> None:
        self.parents = np.arange(n)
        self.sizes = np.ones(n, dtype=int)

    def __len__(self) -> int:
        return len(self.parents)

    def find(self, i: int) -> int:
        """
        Returns the root of the up-tree containing i.
        """
        root = i
        while self.parents[root] != root:
            root = self.parents[root]

        while self.parents[i] != root:
            self.parents[i], i = root, self.parents[i]

        return int(root)

    def union(self, i: int, j: int) -> int:
        """
        Unites the sets of i and j, the smaller tree is linked below the
        larger one. Returns the new root.
        """
        root_i, root_j = self.find(i), self.find(j)
        if root_i == root_j:
            return root_i

        large, small = root_i, root_j
        if self.sizes[root_i] < self.sizes[root_j]:
            large, small = small, large

        self.sizes[large] += self.sizes[small]
        self.sizes[small] = 0
        self.parents[small] = large
        return large

    def union_all(self, pairs: Iterable[Tuple[int, int]]) -> None:
        for i, j in pairs:
            self.union(i, j)

    def groups(self) -> List[List[int]]:
        """
        Returns the disjoint sets as sorted index lists, ordered by their
        smallest member.
        """
        groups = defaultdict(list)
        for i in range(len(self.parents)):
            groups[self.find(i)].append(i)

        return sorted(groups.values(), key=lambda group: group[0])

    @property
    def number_of_groups(self) -> int:
        return len({self.find(i) for i in range(len(self.parents))})
