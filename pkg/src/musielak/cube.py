"""Axis-aligned cubes and dyadic addressing."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np


@dataclass(frozen=True)
class Cube:
    """Closed cube ``center + [-half_width, half_width]^n``.

    ``address`` holds the child indices from the root when the cube comes
    from a dyadic subdivision; child ``j`` sits in the upper half along axis
    ``k`` when bit ``n-1-k`` of ``j`` is set (row-major order).
    """

    center: tuple
    half_width: float
    address: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if self.address is not None:
            object.__setattr__(self, "address", tuple(int(a) for a in self.address))

    @classmethod
    def unit(cls, n):
        return cls((0.5,) * n, 0.5, ())

    @property
    def dim(self):
        return len(self.center)

    @property
    def side(self):
        return 2.0 * self.half_width

    @property
    def volume(self):
        return self.side ** self.dim

    @property
    def lo(self):
        return np.array(self.center) - self.half_width

    @property
    def hi(self):
        return np.array(self.center) + self.half_width

    @property
    def depth(self):
        return None if self.address is None else len(self.address)

    def contains(self, x, tol=1e-12):
        """Membership of points ``x`` (shape (..., n)) in the closed cube."""
        x = np.asarray(x, dtype=float)
        d = np.abs(x - np.array(self.center))
        return np.all(d <= self.half_width * (1 + tol) + tol, axis=-1)

    def contains_cube(self, other, tol=0.0):
        return bool(np.all(other.lo >= self.lo - tol) and np.all(other.hi <= self.hi + tol))

    def interiors_meet(self, other):
        return bool(np.all(np.abs(np.array(self.center) - np.array(other.center))
                           < self.half_width + other.half_width))

    def dilate(self, factor):
        return Cube(self.center, self.half_width * factor)

    def concentric(self, half_width):
        return Cube(self.center, half_width)

    def child(self, j):
        n = self.dim
        offs = [((j >> (n - 1 - k)) & 1) for k in range(n)]
        q = 0.5 * self.half_width
        c = tuple(self.center[k] + (q if offs[k] else -q) for k in range(n))
        addr = None if self.address is None else self.address + (j,)
        return Cube(c, q, addr)

    def children(self):
        return [self.child(j) for j in range(2 ** self.dim)]

    def label(self):
        if self.address is None:
            return "c" + ",".join(f"{c:.6g}" for c in self.center) + f"r{self.half_width:.6g}"
        return "root" if not self.address else ".".join(str(a) for a in self.address)


def dyadic_cube_at(root, depth, idx):
    """The dyadic sub-cube of ``root`` at ``depth`` with integer position ``idx``."""
    n = root.dim
    q = root.half_width / 2 ** depth
    center = tuple(root.lo[a] + (2 * idx[a] + 1) * q for a in range(n))
    addr = []
    for level in range(depth):
        shift = depth - 1 - level
        j = 0
        for a in range(n):
            j = (j << 1) | ((idx[a] >> shift) & 1)
        addr.append(j)
    return Cube(center, q, tuple(addr))


def dyadic_cubes(root, depth):
    """All dyadic sub-cubes of ``root`` at exactly ``depth`` levels, row-major."""
    return [dyadic_cube_at(root, depth, idx) for idx in product(range(2 ** depth), repeat=root.dim)]


def interior_dyadic_cubes(root, min_depth=2, max_depth=3):
    """Dyadic cubes that do not touch the boundary of ``root``."""
    out = []
    for d in range(min_depth, max_depth + 1):
        for q in dyadic_cubes(root, d):
            if np.all(q.lo > root.lo + 1e-12 * root.side) and np.all(q.hi < root.hi - 1e-12 * root.side):
                out.append(q)
    return out
