"""Learning reachable-set bounds of an unknown system from noisy samples.

A sample ``(x, u, y)`` with ``y = f(x, u) + w`` and ``w`` in ``[l, h]`` bounds
``f(., u)`` everywhere through the Lipschitz constant. Per cell we keep two
running aggregates per input,

    lo = max_i (y_i - L * Dmax(x_i, cell))
    hi = min_i (y_i + L * Dmax(x_i, cell))

where ``Dmax`` is the largest sup-norm distance from ``x_i`` to a corner of
the cell. The over box is ``[lo - h + l, hi - l + h]`` and the under box is
``[hi, lo]``. Both only tighten when samples are appended.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import InconsistentDataWarning, NoDataForInput, OutOfDomain
from .geometry import Box, GridPartition


@dataclass(frozen=True)
class Sample:
    x: tuple
    u: int
    x_plus: tuple

    def __post_init__(self):
        x = tuple(float(v) for v in np.atleast_1d(self.x))
        y = tuple(float(v) for v in np.atleast_1d(self.x_plus))
        if len(x) != len(y) or not x:
            raise ValueError("state and successor must share a positive dimension")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "x_plus", y)
        object.__setattr__(self, "u", int(self.u))


@dataclass(frozen=True)
class NoiseSupport:
    l: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        l = np.atleast_1d(np.asarray(self.l, dtype=float))
        h = np.atleast_1d(np.asarray(self.h, dtype=float))
        if l.shape != h.shape or np.any(l > h):
            raise ValueError("noise support needs l <= h componentwise")
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "h", h)

    def __eq__(self, other) -> bool:
        if not isinstance(other, NoiseSupport):
            return NotImplemented
        return np.array_equal(self.l, other.l) and np.array_equal(self.h, other.h)

    __hash__ = None

    @classmethod
    def symmetric(cls, radius: float, n: int) -> "NoiseSupport":
        return cls(np.full(n, -float(radius)), np.full(n, float(radius)))


@dataclass(frozen=True)
class LearnerConfig:
    lipschitz: float
    noise: NoiseSupport
    # each cell is split into subdivisions**n subcells when extremizing bounds
    subdivisions: int = 1
    # the system is known to keep the gridded domain invariant: clip over boxes to it
    clip_to_domain: bool = False

    def __post_init__(self):
        if self.lipschitz < 0:
            raise ValueError("Lipschitz bound must be nonnegative")
        if self.subdivisions < 1:
            raise ValueError("subdivisions must be at least 1")


class Dataset:
    """Append-only sample store with a per-input index."""

    def __init__(self, n: int, n_inputs: int, samples: Iterable[Sample] = ()):
        if n < 1 or n_inputs < 1:
            raise ValueError("dimension and input count must be positive")
        self.n = int(n)
        self.n_inputs = int(n_inputs)
        self._x: list[tuple] = []
        self._u: list[int] = []
        self._y: list[tuple] = []
        self._by_input: list[list[int]] = [[] for _ in range(self.n_inputs)]
        self.extend(samples)

    def append(self, s: Sample) -> None:
        if len(s.x) != self.n:
            raise ValueError(f"sample dimension {len(s.x)} differs from dataset dimension {self.n}")
        if not 0 <= s.u < self.n_inputs:
            raise ValueError(f"input id {s.u} outside 0..{self.n_inputs - 1}")
        self._by_input[s.u].append(len(self._u))
        self._x.append(s.x)
        self._u.append(s.u)
        self._y.append(s.x_plus)

    def extend(self, samples: Iterable[Sample]) -> None:
        for s in samples:
            self.append(s)

    def add_arrays(self, X, U, Y) -> list[Sample]:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        added = [Sample(tuple(x), int(u), tuple(y)) for x, u, y in zip(X, np.asarray(U).reshape(-1), Y)]
        self.extend(added)
        return added

    def __len__(self) -> int:
        return len(self._u)

    def __iter__(self) -> Iterator[Sample]:
        for x, u, y in zip(self._x, self._u, self._y):
            yield Sample(x, u, y)

    def __getitem__(self, i: int) -> Sample:
        return Sample(self._x[i], self._u[i], self._y[i])

    def count(self, u: int) -> int:
        return len(self._by_input[u])

    def for_input(self, u: int) -> tuple[np.ndarray, np.ndarray]:
        """Arrays ``(X, Y)`` of all samples recorded with input ``u``."""
        idx = self._by_input[u]
        if not idx:
            return np.empty((0, self.n)), np.empty((0, self.n))
        X = np.array([self._x[i] for i in idx], dtype=float)
        Y = np.array([self._y[i] for i in idx], dtype=float)
        return X, Y

    def prefix(self, k: int) -> "Dataset":
        return Dataset(self.n, self.n_inputs, itertools.islice(iter(self), k))

    def copy(self) -> "Dataset":
        return self.prefix(len(self))


def _fmt(v: float) -> str:
    return repr(float(v))


def write_dataset(path, d: Dataset, noise: NoiseSupport) -> None:
    """Write the line-oriented dataset format.

    Header: ``n m ; l_1 .. l_n ; h_1 .. h_n``; one record per line:
    ``x_1 .. x_n ; u_id ; y_1 .. y_n``.
    """
    lines = [f"{d.n} {d.n_inputs} ; {' '.join(map(_fmt, noise.l))} ; {' '.join(map(_fmt, noise.h))}"]
    for s in d:
        lines.append(f"{' '.join(map(_fmt, s.x))} ; {s.u} ; {' '.join(map(_fmt, s.x_plus))}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_records(lines: Iterable[str], n: int) -> list[Sample]:
    out = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.split() for p in line.split(";")]
        if len(parts) != 3 or len(parts[1]) != 1 or len(parts[0]) != n or len(parts[2]) != n:
            raise ValueError(f"malformed sample record on line {lineno}: {line!r}")
        out.append(Sample(tuple(map(float, parts[0])), int(parts[1][0]), tuple(map(float, parts[2]))))
    return out


def read_dataset(path) -> tuple[Dataset, NoiseSupport]:
    with open(path, encoding="ascii") as fh:
        header = fh.readline()
        head = [p.split() for p in header.split(";")]
        if len(head) != 3 or len(head[0]) != 2:
            raise ValueError(f"malformed dataset header: {header.strip()!r}")
        n, m = int(head[0][0]), int(head[0][1])
        noise = NoiseSupport(np.array(head[1], dtype=float), np.array(head[2], dtype=float))
        d = Dataset(n, m, parse_records(fh, n))
    return d, noise


def read_samples(path, n: int) -> list[Sample]:
    """Read bare sample records, skipping a dataset header if present."""
    with open(path, encoding="ascii") as fh:
        lines = fh.readlines()
    if lines:
        groups = [g.split() for g in lines[0].split(";")]
        if len(groups) == 3 and (len(groups[0]) != n or len(groups[1]) != 1):
            lines = lines[1:]
    return parse_records(lines, n)


def bounds_at_point(x_star, u: int, d: Dataset, cfg: LearnerConfig) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise lower and upper bounds on ``f(x_star, u)``."""
    X, Y = d.for_input(u)
    if X.shape[0] == 0:
        raise NoDataForInput(f"no samples recorded for input {u}")
    x_star = np.asarray(x_star, dtype=float).reshape(-1)
    dist = np.max(np.abs(X - x_star), axis=1)[:, None]
    check_f = np.max(Y - cfg.lipschitz * dist, axis=0) - cfg.noise.h
    hat_f = np.min(Y + cfg.lipschitz * dist, axis=0) - cfg.noise.l
    if np.any(check_f > hat_f):
        warnings.warn(
            f"learned lower bound exceeds upper bound at {x_star.tolist()} for input {u}; "
            "Lipschitz constant or noise support is too small",
            InconsistentDataWarning,
            stacklevel=2,
        )
    return check_f, hat_f


def corner_distance(X: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Largest sup-norm distance from each row of ``X`` to a corner of each box.

    ``X`` has shape ``(N, n)``; ``lo``/``hi`` have shape ``(C, n)``; the
    result has shape ``(N, C)``. Per axis the farthest face is at distance
    ``|x - mid| + half_width``.
    """
    mid = (lo + hi) / 2.0
    half = (hi - lo) / 2.0
    out = None
    for d in range(X.shape[1]):
        dd = np.abs(X[:, d:d + 1] - mid[None, :, d])
        dd += half[None, :, d]
        out = dd if out is None else np.maximum(out, dd, out=out)
    return out


def subcell_bounds(lo: np.ndarray, hi: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Split boxes ``(C, n)`` into ``k**n`` subboxes each: arrays ``(C, k**n, n)``."""
    C, n = lo.shape
    if k == 1:
        return lo[:, None, :], hi[:, None, :]
    steps = np.arange(k + 1) / k
    offs = np.array(list(itertools.product(range(k), repeat=n)))  # (K, n)
    w = hi - lo
    sub_lo = lo[:, None, :] + w[:, None, :] * steps[offs][None, :, :]
    sub_hi = lo[:, None, :] + w[:, None, :] * steps[offs + 1][None, :, :]
    return sub_lo, sub_hi


def _boxes_from_aggregates(lo_k: np.ndarray, hi_k: np.ndarray, noise: NoiseSupport) -> tuple[Box, Box]:
    """Under and over boxes of one cell from per-subcell aggregates ``(K, n)``."""
    lo_min = lo_k.min(axis=0)
    hi_max = hi_k.max(axis=0)
    over = Box.from_bounds(lo_min - noise.h + noise.l, hi_max - noise.l + noise.h)
    under = Box.from_bounds(hi_max, lo_min)
    return under, over


def cell_reach_boxes(s, u: int, d: Dataset, cfg: LearnerConfig, cell: Box,
                     domain: Box | None = None) -> tuple[Box, Box]:
    """Under and over boxes for the one-step reachable set of ``cell`` under ``u``.

    With no data for ``u`` the over box is ``domain`` (or all of space) and
    the under box is empty.
    """
    X, Y = d.for_input(u)
    n = cell.dim
    if X.shape[0] == 0:
        return Box.empty_box(n), (domain if domain is not None else Box.whole_space(n))
    sub_lo, sub_hi = subcell_bounds(cell.lo[None, :], cell.hi[None, :], cfg.subdivisions)
    dm = corner_distance(X, sub_lo[0], sub_hi[0])  # (N, K)
    lo_k = np.max(Y[:, None, :] - cfg.lipschitz * dm[:, :, None], axis=0)
    hi_k = np.min(Y[:, None, :] + cfg.lipschitz * dm[:, :, None], axis=0)
    return _boxes_from_aggregates(lo_k, hi_k, cfg.noise)


def abstract_reach_sets(under: Box, over: Box, grid: GridPartition) -> tuple[frozenset, frozenset]:
    """Cells surely reached (contained in ``under``) and possibly reached (touching ``over``).

    The sink is added to the over set when ``over`` leaves the domain.
    """
    touching, outside = grid.cells_touching(over)
    if not over.empty and not touching:
        raise OutOfDomain(f"over-approximation {over!r} misses the gridded domain")
    f_over = set(touching)
    if outside:
        f_over.add(grid.sink)
    f_under = frozenset(c for c in grid.cells_inside(under) if c in f_over)
    return f_under, frozenset(f_over)


def clip_box(box: Box, domain: Box) -> Box:
    """Project ``box`` onto ``domain`` by clamping both corners.

    Unlike intersection this never empties a nonempty box (a box beyond a
    face collapses onto that face) and it preserves inclusion, so learned
    sets stay monotone when boxes shrink out of the domain.
    """
    if box.empty:
        return box
    return Box.from_bounds(np.clip(box.lo, domain.lo, domain.hi), np.clip(box.hi, domain.lo, domain.hi))


def reach_sets_or_sink(under: Box, over: Box, grid: GridPartition) -> tuple[frozenset, frozenset]:
    """Like :func:`abstract_reach_sets` but maps an out-of-domain over box to the sink."""
    try:
        return abstract_reach_sets(under, over, grid)
    except OutOfDomain:
        return frozenset(), frozenset([grid.sink])


@dataclass
class ReachLearner:
    """Incrementally maintained per-cell aggregates for every input."""

    grid: GridPartition
    cfg: LearnerConfig
    n_inputs: int
    chunk: int = 2048
    lo: np.ndarray = field(init=False, repr=False)
    hi: np.ndarray = field(init=False, repr=False)
    counts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        cell_lo, cell_hi = self.grid.cell_bounds()
        self._sub_lo, self._sub_hi = subcell_bounds(cell_lo, cell_hi, self.cfg.subdivisions)
        C, K, n = self._sub_lo.shape
        self._flat_lo = self._sub_lo.reshape(C * K, n)
        self._flat_hi = self._sub_hi.reshape(C * K, n)
        self.lo = np.full((self.n_inputs, C, K, n), -np.inf)
        self.hi = np.full((self.n_inputs, C, K, n), np.inf)
        self.counts = np.zeros(self.n_inputs, dtype=int)

    @property
    def n_cells(self) -> int:
        return self.grid.cell_count

    def fold(self, samples: Sequence[Sample]) -> set[tuple[int, int]]:
        """Absorb samples; return the ``(cell, input)`` pairs whose aggregates changed."""
        changed: set[tuple[int, int]] = set()
        if not samples:
            return changed
        by_u: dict[int, list[Sample]] = {}
        for s in samples:
            by_u.setdefault(s.u, []).append(s)
        C, K, n = self._sub_lo.shape
        L = self.cfg.lipschitz
        for u, group in by_u.items():
            X = np.array([s.x for s in group], dtype=float)
            Y = np.array([s.x_plus for s in group], dtype=float)
            new_lo = np.full((C * K, n), -np.inf)
            new_hi = np.full((C * K, n), np.inf)
            for a in range(0, X.shape[0], self.chunk):
                xs, ys = X[a:a + self.chunk], Y[a:a + self.chunk]
                dm = corner_distance(xs, self._flat_lo, self._flat_hi)  # (N, CK)
                if L != 1.0:
                    dm *= L
                for d in range(n):
                    col = ys[:, d:d + 1]
                    np.maximum(new_lo[:, d], (col - dm).max(axis=0), out=new_lo[:, d])
                    np.minimum(new_hi[:, d], (col + dm).min(axis=0), out=new_hi[:, d])
            new_lo = np.maximum(self.lo[u], new_lo.reshape(C, K, n))
            new_hi = np.minimum(self.hi[u], new_hi.reshape(C, K, n))
            diff = np.any((new_lo != self.lo[u]) | (new_hi != self.hi[u]), axis=(1, 2))
            self.lo[u] = new_lo
            self.hi[u] = new_hi
            self.counts[u] += len(group)
            changed.update((int(c), u) for c in np.flatnonzero(diff))
        return changed

    def reach_boxes(self, s: int, u: int) -> tuple[Box, Box]:
        if self.counts[u] == 0:
            return Box.empty_box(self.grid.dim), Box.whole_space(self.grid.dim)
        return _boxes_from_aggregates(self.lo[u, s], self.hi[u, s], self.cfg.noise)

    def reach_sets(self, s: int, u: int) -> tuple[frozenset, frozenset]:
        """Abstract under and over successor sets of ``(s, u)``.

        Crossed aggregates leave an empty over box: the data contradict the
        assumed Lipschitz bound or noise support. That is reported and the
        pair is sent to the sink.
        """
        under, over = self.reach_boxes(s, u)
        if over.empty:
            warnings.warn(f"inconsistent data for cell {s}, input {u}: Lipschitz bound or noise "
                          "support is too small", InconsistentDataWarning, stacklevel=2)
            return frozenset(), frozenset([self.grid.sink])
        if self.cfg.clip_to_domain:
            over = clip_box(over, self.grid.domain)
        return reach_sets_or_sink(under, over, self.grid)

    @classmethod
    def from_dataset(cls, grid: GridPartition, cfg: LearnerConfig, d: Dataset) -> "ReachLearner":
        learner = cls(grid, cfg, d.n_inputs)
        learner.fold(list(d))
        return learner
