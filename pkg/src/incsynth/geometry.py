"""Axis-aligned boxes and the uniform grid partition of the state domain."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Box:
    """Closed hyperrectangle ``[lo, hi]``; ``empty`` boxes contain no point."""

    lo: np.ndarray
    hi: np.ndarray
    empty: bool = False

    @classmethod
    def from_bounds(cls, lo, hi) -> "Box":
        lo = np.asarray(lo, dtype=float).reshape(-1)
        hi = np.asarray(hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError(f"bound shapes differ: {lo.shape} vs {hi.shape}")
        return cls(lo, hi, bool(np.any(lo > hi)))

    @classmethod
    def empty_box(cls, n: int) -> "Box":
        return cls(np.full(n, np.inf), np.full(n, -np.inf), True)

    @classmethod
    def whole_space(cls, n: int) -> "Box":
        return cls(np.full(n, -np.inf), np.full(n, np.inf), False)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    @property
    def center(self) -> np.ndarray:
        return (self.lo + self.hi) / 2.0

    def contains_point(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return (not self.empty) and bool(np.all(self.lo <= x) and np.all(x <= self.hi))

    def contains_box(self, other: "Box") -> bool:
        if other.empty:
            return True
        if self.empty:
            return False
        return bool(np.all(self.lo <= other.lo) and np.all(other.hi <= self.hi))

    def volume(self) -> float:
        if self.empty:
            return 0.0
        return float(np.prod(self.hi - self.lo))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Box):
            return NotImplemented
        if self.empty or other.empty:
            return self.empty == other.empty
        return bool(np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi))

    def __hash__(self):
        if self.empty:
            return hash(("empty", self.dim))
        return hash((tuple(self.lo), tuple(self.hi)))

    def __repr__(self) -> str:
        if self.empty:
            return f"Box(empty, dim={self.dim})"
        return f"Box(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


class GridPartition:
    """Uniform grid over a box domain.

    Cells are half-open ``[lo, hi)`` except along the domain's upper face,
    which belongs to the last cell of each axis. Cells are numbered in
    C order over their multi-index; ``sink`` (== ``cell_count``) stands for
    everything outside the domain.
    """

    def __init__(self, domain: Box, cells_per_dim):
        cells = tuple(int(c) for c in np.atleast_1d(cells_per_dim))
        if domain.empty or any(c < 1 for c in cells) or len(cells) != domain.dim:
            raise ValueError("grid needs a nonempty domain and a positive cell count per axis")
        self.domain = domain
        self.cells_per_dim = cells
        self.cell_count = int(math.prod(cells))
        self.width = (domain.hi - domain.lo) / np.asarray(cells, dtype=float)
        # edges[d][i] is the lower boundary of cell i along axis d
        self._edges = [
            domain.lo[d] + np.arange(cells[d] + 1) * self.width[d] for d in range(domain.dim)
        ]
        for d in range(domain.dim):
            self._edges[d][-1] = domain.hi[d]

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def sink(self) -> int:
        return self.cell_count

    def states(self) -> range:
        return range(self.cell_count)

    def multi_index(self, s: int) -> tuple[int, ...]:
        if s == self.sink:
            raise ValueError("the sink has no multi-index")
        return tuple(int(i) for i in np.unravel_index(s, self.cells_per_dim))

    def flat_index(self, idx) -> int:
        return int(np.ravel_multi_index(tuple(idx), self.cells_per_dim))

    def cell_box(self, s: int) -> Box:
        idx = self.multi_index(s)
        lo = [self._edges[d][i] for d, i in enumerate(idx)]
        hi = [self._edges[d][i + 1] for d, i in enumerate(idx)]
        return Box.from_bounds(lo, hi)

    def cell_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Arrays ``(lo, hi)`` of shape ``(cell_count, n)`` for every cell."""
        grids = np.meshgrid(*[np.arange(c) for c in self.cells_per_dim], indexing="ij")
        idx = np.stack([g.reshape(-1) for g in grids], axis=1)
        lo = np.empty(idx.shape, dtype=float)
        hi = np.empty(idx.shape, dtype=float)
        for d in range(self.dim):
            lo[:, d] = self._edges[d][idx[:, d]]
            hi[:, d] = self._edges[d][idx[:, d] + 1]
        return lo, hi

    def axis_index(self, v: float, d: int) -> int:
        """Half-open cell index of coordinate ``v`` on axis ``d``, clamped to the axis."""
        edges = self._edges[d]
        n = self.cells_per_dim[d]
        i = int(np.searchsorted(edges, v, side="right")) - 1
        return min(max(i, 0), n - 1)

    def translate(self, x) -> int:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.dim:
            raise ValueError(f"expected a {self.dim}-vector, got {x.shape[0]}")
        if not self.domain.contains_point(x):
            return self.sink
        return self.flat_index([self.axis_index(x[d], d) for d in range(self.dim)])

    def translate_many(self, xs: np.ndarray) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        inside = np.all((xs >= self.domain.lo) & (xs <= self.domain.hi), axis=1)
        idx = []
        for d in range(self.dim):
            i = np.searchsorted(self._edges[d], xs[:, d], side="right") - 1
            idx.append(np.clip(i, 0, self.cells_per_dim[d] - 1))
        flat = np.ravel_multi_index(tuple(idx), self.cells_per_dim)
        return np.where(inside, flat, self.sink)

    def cells_touching(self, box: Box) -> tuple[list[int], bool]:
        """Cells sharing a point with ``box`` and whether it pokes out of the domain.

        Returns an empty list when the box misses the domain entirely.
        """
        if box.empty:
            return [], False
        dom = self.domain
        outside = bool(np.any(box.lo < dom.lo) or np.any(box.hi > dom.hi))
        if np.any(box.hi < dom.lo) or np.any(box.lo > dom.hi):
            return [], True
        ranges = []
        for d in range(self.dim):
            a = max(box.lo[d], dom.lo[d])
            b = min(box.hi[d], dom.hi[d])
            ranges.append(range(self.axis_index(a, d), self.axis_index(b, d) + 1))
        return [self.flat_index(idx) for idx in itertools.product(*ranges)], outside

    def cells_inside(self, box: Box) -> list[int]:
        """Cells whose closed region is contained in ``box``."""
        if box.empty:
            return []
        ranges = []
        for d in range(self.dim):
            edges = self._edges[d]
            first = int(np.searchsorted(edges, box.lo[d], side="left"))
            last = int(np.searchsorted(edges, box.hi[d], side="right")) - 2
            if first > last:
                return []
            ranges.append(range(first, last + 1))
        return [self.flat_index(idx) for idx in itertools.product(*ranges)]

    def to_dict(self) -> dict:
        return {
            "domain": {"lo": self.domain.lo.tolist(), "hi": self.domain.hi.tolist()},
            "cells_per_dim": list(self.cells_per_dim),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GridPartition":
        dom = data["domain"]
        return cls(Box.from_bounds(dom["lo"], dom["hi"]), data["cells_per_dim"])

    def __repr__(self) -> str:
        return f"GridPartition(domain={self.domain!r}, cells_per_dim={self.cells_per_dim})"
