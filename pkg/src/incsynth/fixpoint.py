"""Nested fixpoint evaluation for fair Büchi games over dense boolean vertex sets."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FlavorMismatch, NotWinning, RangeTooSmall
from .game import BUCHI, FAIR, NORMAL, P0, P1, GameGraph, Spec
from .pm import PmFlavor, ProgressMeasure, pm_range


class Transformers:
    """Controllable and fair predecessor operators of one game.

    Every operator maps a boolean array over the vertex index space to
    another; retired vertices are never members.
    """

    def __init__(self, g: GameGraph):
        src, dst, fm, owner, alive = g.arrays()
        self.n = n = g.n
        self.src, self.dst = src, dst
        self.fsrc, self.fdst = src[fm], dst[fm]
        self.alive = alive
        self.v0 = alive & (owner == P0)
        self.v1 = alive & (owner == P1)
        self.outdeg = np.bincount(src, minlength=n)
        self.fairdeg = np.bincount(self.fsrc, minlength=n)
        self.vf = alive & (self.fairdeg > 0)

    def _count(self, H: np.ndarray) -> np.ndarray:
        return np.bincount(self.src[H[self.dst]], minlength=self.n)

    def _fcount(self, H: np.ndarray) -> np.ndarray:
        return np.bincount(self.fsrc[H[self.fdst]], minlength=self.n)

    def pre1_forall(self, H):
        return self.v1 & (self._count(H) == self.outdeg)

    def pre0_exists(self, H):
        return self.v0 & (self._count(H) > 0)

    def pre0_forall(self, H):
        return self.v0 & (self._count(H) == self.outdeg)

    def pre1_exists(self, H):
        return self.v1 & (self._count(H) > 0)

    def cpre0(self, H):
        c = self._count(H)
        return (self.v1 & (c == self.outdeg)) | (self.v0 & (c > 0))

    def cpre1(self, H):
        c = self._count(H)
        return (self.v0 & (c == self.outdeg)) | (self.v1 & (c > 0))

    def lpre_exists(self, H):
        return self.vf & (self._fcount(H) > 0)

    def lpre_forall(self, H):
        return self.vf & (self._fcount(H) == self.fairdeg)

    def full(self) -> np.ndarray:
        return self.alive.copy()

    def empty(self) -> np.ndarray:
        return np.zeros(self.n, dtype=bool)

    def mask(self, vertices) -> np.ndarray:
        m = np.zeros(self.n, dtype=bool)
        m[list(vertices)] = True
        return m & self.alive


def transformers(g: GameGraph) -> Transformers:
    return Transformers(g)


def _check(g: GameGraph, spec: Spec) -> None:
    if g.flavor not in (FAIR, NORMAL) or spec.kind != BUCHI:
        raise FlavorMismatch("fixpoint solver expects a fair Büchi game")


@dataclass
class FixpointTrace:
    """Outer iterates ``Y^0 = {} <= Y^1 <= ...`` of the P1 fixpoint."""

    snapshots: list = field(default_factory=list)
    inner_iterations: int = 0

    def to_dict(self) -> dict:
        return {
            "snapshots": [np.flatnonzero(y).tolist() for y in self.snapshots],
            "inner_iterations": self.inner_iterations,
        }


def solve_psi(g: GameGraph, spec: Spec, L: int | None = None, hint: str = "general",
              trace: FixpointTrace | None = None) -> tuple[frozenset, ProgressMeasure]:
    """P1's winning region and the rank measure read off the outer iterates.

    ``rho(v) = i`` when ``v`` first appears in ``Y^{i+1}``, top when ``v``
    never does.
    """
    _check(g, spec)
    T = Transformers(g)
    notB = T.alive & ~T.mask(spec.B)
    not_vf = T.alive & ~T.vf
    if L is None:
        L = pm_range(g, spec, hint)
    rank = np.full(g.n, L + 1, dtype=np.int64)
    Y = T.empty()
    if trace is not None:
        trace.snapshots.append(Y.copy())
    i = 0
    while True:
        outer = notB | T.cpre1(Y)
        escape = not_vf | T.pre1_exists(Y)
        X = T.full()
        while True:
            X_new = outer & T.cpre1(X) & (T.lpre_forall(X) | escape)
            if trace is not None:
                trace.inner_iterations += 1
            if np.array_equal(X_new, X):
                break
            X = X_new
        if np.array_equal(X, Y):
            break
        fresh = X & ~Y
        if i > L:
            raise RangeTooSmall(f"rank {i} exceeds range {L}")
        rank[fresh] = i
        Y = X
        i += 1
        if trace is not None:
            trace.snapshots.append(Y.copy())
    rho = ProgressMeasure(rank.tolist(), L, PmFlavor.FAIR_BUCHI_DIRECT)
    return frozenset(np.flatnonzero(Y).tolist()), rho


def _psi0_rounds(T: Transformers, Bm: np.ndarray, Y: np.ndarray, ranks: np.ndarray | None = None) -> np.ndarray:
    """Inner least fixpoint of the P0 formula for a fixed ``Y``; optionally record entry ranks."""
    base = Bm & T.cpre0(Y)
    fair_ok = T.pre1_forall(Y)
    X = T.empty()
    k = 0
    while True:
        X_new = base | T.cpre0(X) | (T.lpre_exists(X) & fair_ok)
        if ranks is not None:
            ranks[X_new & ~X] = k
        if np.array_equal(X_new, X):
            return X
        X = X_new
        k += 1


def solve_Psi(g: GameGraph, spec: Spec) -> frozenset:
    """P0's winning region of a fair Büchi game."""
    _check(g, spec)
    T = Transformers(g)
    Bm = T.mask(spec.B)
    Y = T.full()
    while True:
        X = _psi0_rounds(T, Bm, Y)
        if np.array_equal(X, Y):
            return frozenset(np.flatnonzero(Y).tolist())
        Y = X


@dataclass
class Policy:
    """Controller read off the final attractor ranks.

    ``moves`` maps winning P0 vertices to a successor; for abstraction games
    ``inputs`` maps winning cells to an input id.
    """

    moves: dict
    inputs: dict
    ranks: dict

    def vertex_move(self, v: int) -> int:
        if v not in self.moves:
            raise NotWinning(f"vertex {v} is outside the winning region")
        return self.moves[v]

    def __call__(self, s: int) -> int:
        if s not in self.inputs:
            raise NotWinning(f"cell {s} is outside the winning region")
        return self.inputs[s]

    def to_dict(self) -> dict:
        return {"inputs": {str(k): v for k, v in sorted(self.inputs.items())}}


def synth_controller(g: GameGraph, spec: Spec, win0) -> Policy:
    """Rank-decreasing P0 strategy inside ``win0``, ties to the lowest vertex index."""
    _check(g, spec)
    T = Transformers(g)
    Y = T.mask(win0)
    ranks = np.full(g.n, -1, dtype=np.int64)
    X = _psi0_rounds(T, T.mask(spec.B), Y, ranks)
    if not np.array_equal(X, Y):
        raise NotWinning("given set is not P0's winning region")
    moves, inputs, rank_of = {}, {}, {}
    for v in np.flatnonzero(Y & T.v0).tolist():
        w = min((w for w in g.succ[v] if Y[w]), key=lambda w: (ranks[w], w))
        moves[v] = w
        rank_of[v] = int(ranks[v])
    idx = g.abstract
    if idx is not None:
        by_su = {vid: key for key, vid in idx.su.items()}
        for v, w in moves.items():
            if v < idx.n_cells and w in by_su:
                inputs[v] = by_su[w][1]
    return Policy(moves, inputs, rank_of)
