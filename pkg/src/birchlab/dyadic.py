"""Dyadic cubes on Z^n: side 2^k, corner in 2^k Z^n, half-open lattice boxes.

The complement of a union of disjoint dyadic subcubes inside a cube is again
a disjoint union of dyadic cubes; `complement_decomposition` produces that
canonical decomposition, which is how witness sets are represented without
materializing point sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .util import InvalidConfigError


@dataclass(frozen=True)
class DyadicCube:
    level: int  # side = 2**level
    corner: tuple  # in 2^level * Z^n

    def __post_init__(self):
        if self.level < 0:
            raise InvalidConfigError("level must be >= 0")
        side = self.side
        if any(c % side for c in self.corner):
            raise InvalidConfigError("corner must lie on the level grid")

    @property
    def side(self) -> int:
        return 1 << self.level

    @property
    def dimension(self) -> int:
        return len(self.corner)

    @property
    def size(self) -> int:
        """Number of lattice points |Q| = side^n."""
        return self.side**self.dimension

    def box(self):
        """Half-open lattice box (lo, hi)."""
        lo = np.array(self.corner, dtype=np.int64)
        return lo, lo + self.side

    def triple_box(self):
        """3Q: the concentric tripled cube, |3Q| = 3^n |Q|."""
        lo = np.array(self.corner, dtype=np.int64)
        return lo - self.side, lo + 2 * self.side

    def children(self):
        if self.level == 0:
            return []
        h = self.side >> 1
        n = self.dimension
        out = []
        for mask in range(1 << n):
            corner = tuple(
                self.corner[i] + (h if (mask >> i) & 1 else 0) for i in range(n)
            )
            out.append(DyadicCube(self.level - 1, corner))
        return out

    def contains_cube(self, other: "DyadicCube") -> bool:
        if other.level > self.level:
            return False
        return all(
            self.corner[i] <= other.corner[i]
            and other.corner[i] + other.side <= self.corner[i] + self.side
            for i in range(self.dimension)
        )

    def contains_point(self, x) -> bool:
        return all(
            self.corner[i] <= x[i] < self.corner[i] + self.side
            for i in range(self.dimension)
        )

    def disjoint_from(self, other: "DyadicCube") -> bool:
        """Dyadic cubes are nested or disjoint."""
        return not (self.contains_cube(other) or other.contains_cube(self))


def complement_decomposition(root: DyadicCube, removed):
    """Maximal dyadic cubes covering root minus the removed subcubes.

    removed: pairwise disjoint dyadic cubes, each contained in root.
    """
    removed = list(removed)
    for r in removed:
        if not root.contains_cube(r):
            raise InvalidConfigError("removed cube not inside the root")
    out = []

    def rec(q: DyadicCube, rem):
        if not rem:
            out.append(q)
            return
        if any(r.contains_cube(q) for r in rem):
            return
        for child in q.children():
            rec(child, [r for r in rem if not child.disjoint_from(r)])

    rec(root, removed)
    return out


def cubes_total_size(cubes) -> int:
    return sum(c.size for c in cubes)


def all_dyadic_subcubes(root: DyadicCube, proper: bool = True):
    """Every dyadic subcube of root, top-down (excluding root if proper)."""
    stack = [root]
    while stack:
        q = stack.pop()
        if q is not root or not proper:
            yield q
        stack.extend(q.children())
