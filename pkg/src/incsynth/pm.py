"""Progress measures and worklist lifting for (co)fair coBüchi-style games.

A measure maps vertices to ``0..L`` or top (stored as ``L + 1``). The
minimising player is the one trying to visit ``B`` only finitely often; a
vertex ends at top exactly when the opponent wins from it.
"""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np

from .errors import FlavorMismatch, RangeTooSmall, VertexIsTop
from .game import BUCHI, COBUCHI, COFAIR, FAIR, NORMAL, P0, P1, GameGraph, Spec


class PmFlavor(str, Enum):
    # cofair coBüchi game: P0 minimises, fair edges leave P0 vertices
    COFAIR_COBUCHI = "cofair_cobuchi"
    # normal coBüchi game: P0 minimises, no fairness
    PLAIN_COBUCHI = "plain_cobuchi"
    # fair Büchi game read from P1's side: P1 minimises, fair edges leave P1 vertices
    FAIR_BUCHI_DIRECT = "fair_buchi_direct"


_MINIMISER = {PmFlavor.COFAIR_COBUCHI: P0, PmFlavor.PLAIN_COBUCHI: P0, PmFlavor.FAIR_BUCHI_DIRECT: P1}


def _check_flavor(g: GameGraph, spec: Spec, flavor: PmFlavor) -> None:
    ok = {
        PmFlavor.COFAIR_COBUCHI: (g.flavor in (COFAIR, NORMAL) and spec.kind == COBUCHI),
        PmFlavor.PLAIN_COBUCHI: (g.flavor == NORMAL and spec.kind == COBUCHI),
        PmFlavor.FAIR_BUCHI_DIRECT: (g.flavor in (FAIR, NORMAL) and spec.kind == BUCHI),
    }[flavor]
    if not ok:
        raise FlavorMismatch(f"{flavor.value} lifting does not apply to a {g.flavor} {spec.kind} game")


@dataclass
class ProgressMeasure:
    values: list
    L: int
    flavor: PmFlavor | None = None

    @classmethod
    def zeros(cls, n: int, L: int, flavor: PmFlavor | None = None) -> "ProgressMeasure":
        return cls([0] * n, L, flavor)

    @property
    def top(self) -> int:
        return self.L + 1

    def __getitem__(self, v: int) -> int:
        return self.values[v]

    def is_top(self, v: int) -> bool:
        return self.values[v] >= self.top

    def top_set(self, vertices: Iterable[int]) -> frozenset:
        t = self.top
        return frozenset(v for v in vertices if self.values[v] >= t)

    def leq(self, other: "ProgressMeasure", vertices: Iterable[int]) -> bool:
        """Pointwise order, comparing top with top regardless of range."""
        return all(self.norm(v) <= other.norm(v) for v in vertices)

    def norm(self, v: int) -> float:
        x = self.values[v]
        return float("inf") if x >= self.top else x

    def copy(self) -> "ProgressMeasure":
        return ProgressMeasure(list(self.values), self.L, self.flavor)

    def extend(self, n: int) -> None:
        if len(self.values) < n:
            self.values.extend([0] * (n - len(self.values)))

    def to_dict(self, vertices: Iterable[int] | None = None) -> dict:
        vs = range(len(self.values)) if vertices is None else vertices
        return {
            "L": self.L,
            "flavor": self.flavor.value if self.flavor else None,
            "values": {str(v): ("top" if self.values[v] >= self.top else self.values[v]) for v in vs},
        }

    @classmethod
    def from_dict(cls, data: dict, n: int | None = None) -> "ProgressMeasure":
        L = int(data["L"])
        vals = {int(k): (L + 1 if x == "top" else int(x)) for k, x in data["values"].items()}
        size = n if n is not None else (max(vals) + 1 if vals else 0)
        values = [0] * size
        for k, x in vals.items():
            values[k] = x
        fl = data.get("flavor")
        return cls(values, L, PmFlavor(fl) if fl else None)


def pm_range(g: GameGraph, spec: Spec, hint: str = "general") -> int:
    """Measure range: ``|B| + |V^f|`` in general, ``|S| + |B|`` for abstract games.

    ``S`` counts the cell vertices of the abstraction, sink included.
    """
    B = sum(1 for v in spec.B if g.alive[v])
    if hint == "general":
        return B + len(g.fair_vertices())
    if hint == "abstract":
        S = sum(1 for v in g.vertices() if g.labels[v] is not None and g.labels[v][0] in ("cell", "sink"))
        return S + B
    raise ValueError(f"unknown range hint {hint!r}")


def _in_b(g: GameGraph, spec: Spec) -> bytearray:
    mark = bytearray(g.n)
    for v in spec.B:
        if v < g.n:
            mark[v] = 1
    return mark


def pr(v: int, rho: ProgressMeasure, g: GameGraph, spec: Spec, flavor: PmFlavor) -> int:
    """Best value the minimiser can guarantee from the successors of ``v``."""
    vals = rho.values
    top = rho.top
    mini = _MINIMISER[flavor]
    if g.owner[v] != mini:
        return max(vals[w] for w in g.succ[v])
    low = min(vals[w] for w in g.succ[v])
    if flavor is not PmFlavor.PLAIN_COBUCHI and g.fair[v] and v not in spec.B:
        return min(max(vals[w] for w in g.fair[v]), min(low + 1, top))
    return low


def lift(rho: ProgressMeasure, v: int, g: GameGraph, spec: Spec, flavor: PmFlavor) -> ProgressMeasure:
    """Copy of ``rho`` with ``v`` raised to ``pr(v) + [v in B]`` (capped at top)."""
    out = rho.copy()
    val = min(pr(v, rho, g, spec, flavor) + (1 if v in spec.B else 0), rho.top)
    if val > out.values[v]:
        out.values[v] = val
    return out


@dataclass
class LiftStats:
    lifts: int = 0
    pops: int = 0


def solve_by_lifting(g: GameGraph, spec: Spec, flavor: PmFlavor, init: ProgressMeasure | None = None,
                     seed: Iterable[int] | None = None, L: int | None = None, order: str = "fifo",
                     rng: random.Random | None = None, stats: LiftStats | None = None,
                     in_place: bool = False) -> ProgressMeasure:
    """Least fixpoint of the lifting operator at or above ``init``.

    ``seed`` must cover every vertex where ``init`` may violate the
    progress condition; it defaults to all vertices.
    """
    _check_flavor(g, spec, flavor)
    if init is None:
        if L is None:
            L = pm_range(g, spec)
        rho = ProgressMeasure.zeros(g.n, L, flavor)
    else:
        rho = init if in_place else init.copy()
        rho.extend(g.n)
        if L is not None and L != rho.L:
            raise RangeTooSmall(f"initial measure has range {rho.L}, requested {L}")
    rho.flavor = flavor
    top = rho.top
    vals = rho.values
    if any(x > top for x in vals):
        raise RangeTooSmall("initial measure holds values above top")
    succ, fair, pred, owner, alive = g.succ, g.fair, g.pred, g.owner, g.alive
    inb = _in_b(g, spec)
    mini = _MINIMISER[flavor]
    use_fair = flavor is not PmFlavor.PLAIN_COBUCHI

    vs = range(g.n) if seed is None else seed
    queued = bytearray(g.n)
    items = []
    for v in vs:
        if alive[v] and not queued[v] and vals[v] < top:
            queued[v] = 1
            items.append(v)
    if order == "rounds":
        lifts, pops = _lift_rounds(g, inb, mini, use_fair, rho, items)
        if stats is not None:
            stats.lifts += lifts
            stats.pops += pops
        return rho
    if order == "fifo":
        work = deque(items)
        pop = work.popleft
    elif order == "lifo":
        work = items
        pop = work.pop
    elif order == "random":
        rng = rng or random.Random(0)
        work = items

        def pop():
            i = rng.randrange(len(work))
            work[i], work[-1] = work[-1], work[i]
            return work.pop()
    else:
        raise ValueError(f"unknown worklist order {order!r}")
    push = work.append
    get = vals.__getitem__
    lifts = pops = 0
    while work:
        v = pop()
        queued[v] = 0
        pops += 1
        cur = vals[v]
        if cur >= top:
            continue
        ss = succ[v]
        if owner[v] != mini:
            p = max(map(get, ss))
        else:
            p = min(map(get, ss))
            fs = fair[v]
            if use_fair and fs and not inb[v]:
                p += 1
                q = max(map(get, fs))
                if q < p:
                    p = q
        p += inb[v]
        if p > top:
            p = top
        if p > cur:
            vals[v] = p
            lifts += 1
            for w in pred[v]:
                if not queued[w] and vals[w] < top:
                    queued[w] = 1
                    push(w)
    if stats is not None:
        stats.lifts += lifts
        stats.pops += pops
    return rho


def _ranges(starts: np.ndarray, lens: np.ndarray) -> np.ndarray:
    offsets = np.cumsum(lens) - lens
    return np.repeat(starts - offsets, lens) + np.arange(int(lens.sum()))


def _csr(rows: list) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    lens = np.fromiter((len(r) for r in rows), dtype=np.int64, count=len(rows))
    ptr = np.zeros(len(rows), dtype=np.int64)
    if len(rows) > 1:
        ptr[1:] = np.cumsum(lens)[:-1]
    flat = np.fromiter((w for r in rows for w in r), dtype=np.int64, count=int(lens.sum()))
    return ptr, lens, flat


def _lift_rounds(g: GameGraph, inb: bytearray, mini: int, use_fair: bool, rho: ProgressMeasure,
                 items: list) -> tuple[int, int]:
    """Synchronous lifting: every queued vertex is lifted against last round's values.

    Only vertices below top can change, so the adjacency is built for those alone.
    """
    top = rho.top
    vals = np.asarray(rho.values, dtype=np.int64)
    alive = np.asarray(g.alive, dtype=bool)
    cand = np.flatnonzero(alive & (vals < top))
    if not items or cand.size == 0:
        return 0, 0
    loc = np.full(g.n, -1, dtype=np.int64)
    loc[cand] = np.arange(cand.size)
    cl = cand.tolist()
    s_ptr, s_len, s_dst = _csr([g.succ[v] for v in cl])
    f_ptr, f_len, f_dst = _csr([g.fair[v] for v in cl])
    is_min = np.asarray(g.owner, dtype=np.int8)[cand] == mini
    in_b = np.frombuffer(bytes(inb), dtype=np.uint8)[cand].astype(np.int64)
    fair_rule = is_min & (f_len > 0) & (in_b == 0) if use_fair else np.zeros(cand.size, dtype=bool)
    # predecessor lists restricted to candidates
    src_loc = np.repeat(np.arange(cand.size), s_len)
    dst_loc = loc[s_dst]
    keep = dst_loc >= 0
    src_loc, dst_loc = src_loc[keep], dst_loc[keep]
    order = np.argsort(dst_loc, kind="stable")
    p_src = src_loc[order]
    p_len = np.bincount(dst_loc, minlength=cand.size)
    p_ptr = np.cumsum(p_len) - p_len

    active = np.unique(loc[np.asarray(items, dtype=np.int64)])
    active = active[active >= 0]
    lifts = pops = 0
    while active.size:
        pops += int(active.size)
        lens = s_len[active]
        seg = np.cumsum(lens) - lens
        sv = vals[s_dst[_ranges(s_ptr[active], lens)]]
        p = np.where(is_min[active], np.minimum.reduceat(sv, seg), np.maximum.reduceat(sv, seg))
        fr = fair_rule[active]
        if fr.any():
            fa = active[fr]
            fl = f_len[fa]
            q = np.maximum.reduceat(vals[f_dst[_ranges(f_ptr[fa], fl)]], np.cumsum(fl) - fl)
            p[fr] = np.minimum(p[fr] + 1, q)
        p = np.minimum(p + in_b[active], top)
        gv = cand[active]
        up = p > vals[gv]
        if not up.any():
            break
        raised = active[up]
        vals[gv[up]] = p[up]
        lifts += int(up.sum())
        nxt = p_src[_ranges(p_ptr[raised], p_len[raised])]
        nxt = np.unique(nxt)
        active = nxt[vals[cand[nxt]] < top]
    out = rho.values
    for v, x in zip(cl, vals[cand].tolist()):
        out[v] = x
    return lifts, pops


def is_progress_measure(rho: ProgressMeasure, g: GameGraph, spec: Spec, flavor: PmFlavor) -> bool:
    """Whether ``rho(v) >= pr(v) + [v in B]`` (capped) holds at every vertex."""
    for v in g.vertices():
        want = min(pr(v, rho, g, spec, flavor) + (1 if v in spec.B else 0), rho.top)
        if rho.values[v] < want:
            return False
    return True


def gadgetize(g: GameGraph, spec: Spec) -> tuple[GameGraph, Spec]:
    """Normal coBüchi game equivalent to a cofair coBüchi game on the original vertices.

    Each fair vertex ``v`` outside ``B`` is routed through a P1 vertex over
    its fair successors and a P0 vertex in ``B`` over all its successors.
    Fair edges of fair vertices in ``B`` become plain edges.
    """
    if g.flavor not in (COFAIR, NORMAL) or spec.kind != COBUCHI:
        raise FlavorMismatch("gadgets apply to cofair coBüchi games")
    h = GameGraph(NORMAL)
    for v in range(g.n):
        h.add_vertex(g.owner[v], g.labels[v])
        h.alive[v] = g.alive[v]
    B = set(spec.B)
    for v in g.vertices():
        if g.fair[v] and v not in spec.B:
            left = h.add_vertex(P1, ("gadget_l", v))
            right = h.add_vertex(P0, ("gadget_r", v))
            B.add(right)
            h.add_edge(v, left)
            h.add_edge(v, right)
            for w in g.fair[v]:
                h.add_edge(left, w)
            for w in g.succ[v]:
                h.add_edge(right, w)
        else:
            for w in g.succ[v]:
                h.add_edge(v, w)
    return h, Spec(COBUCHI, frozenset(B))


class MinStrategy(dict):
    """Positional strategy; looking up a vertex with no winning move raises."""

    def __init__(self, moves: dict, top_vertices: frozenset):
        super().__init__(moves)
        self.top_vertices = top_vertices

    def __missing__(self, v):
        if v in self.top_vertices:
            raise VertexIsTop(f"vertex {v} has value top; no winning move")
        raise KeyError(v)


def extract_min_strategy(rho: ProgressMeasure, g: GameGraph, player: int = P0) -> MinStrategy:
    """Send each non-top vertex of ``player`` to its least-valued successor (lowest index on ties)."""
    if any(g.owner[v] == player for v in g.fair_vertices()):
        raise FlavorMismatch(f"player {player} owns fair vertices; minimal successors need not win")
    moves = {}
    tops = set()
    for v in g.vertices():
        if g.owner[v] != player:
            continue
        if rho.is_top(v):
            tops.add(v)
            continue
        moves[v] = min(g.succ[v], key=lambda w: (rho.values[w], w))
    return MinStrategy(moves, frozenset(tops))


def reset_cone(g: GameGraph, rho: ProgressMeasure, sources: Iterable[int]) -> set[int]:
    """Zero ``sources`` and every non-top vertex reaching them through non-top vertices.

    Adding fair edges at a vertex can lower the least fixpoint there, and
    the drop can travel to predecessors whose value depends on it. Top
    values elsewhere stay put: on cells and on the vertices choosing among
    branches the winning region can only grow. The reset measure lies
    below the new least fixpoint again. Returns the reset vertices.
    """
    vals, top, pred, alive = rho.values, rho.top, g.pred, g.alive
    todo = [v for v in sources if alive[v]]
    cone = set(todo)
    while todo:
        v = todo.pop()
        for p in pred[v]:
            if p not in cone and vals[p] < top:
                cone.add(p)
                todo.append(p)
    for v in cone:
        vals[v] = 0
    return cone
