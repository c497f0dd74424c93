"""Abstract fair Büchi games built from per-cell reachable sets, and their deltas.

Vertex layout: cell ``s`` is vertex ``s`` and the sink is vertex
``n_cells``; each (cell, input) pair then gets a P1 vertex ``s^u`` followed by
its branch vertices ``s^u_0 .. s^u_m``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import DanglingBranch, MonotonicityViolation
from .game import BUCHI, FAIR, P0, P1, GameGraph, Spec


@dataclass(frozen=True)
class ApproxEntry:
    under: frozenset
    over: frozenset
    # fixed order of over - under; branch j >= 1 targets slots[j - 1]
    slots: tuple

    @property
    def m(self) -> int:
        return len(self.slots)


class ApproxTable:
    """Under/over abstract successor sets for every non-absorbing (cell, input)."""

    def __init__(self, n_cells: int, n_inputs: int, absorbing: Iterable[int] = ()):
        self.n_cells = int(n_cells)
        self.n_inputs = int(n_inputs)
        self.absorbing = frozenset(int(s) for s in absorbing)
        self.entries: dict[tuple[int, int], ApproxEntry] = {}

    @property
    def sink(self) -> int:
        return self.n_cells

    def pairs(self) -> list[tuple[int, int]]:
        return [(s, u) for s in range(self.n_cells) if s not in self.absorbing for u in range(self.n_inputs)]

    def set_entry(self, s: int, u: int, under, over, slots: Sequence[int] | None = None) -> None:
        under, over = frozenset(under), frozenset(over)
        if not under <= over:
            raise ValueError(f"under set of ({s},{u}) is not inside its over set")
        if not over:
            raise ValueError(f"over set of ({s},{u}) is empty")
        if slots is None:
            slots = sorted(over - under)
        if set(slots) != over - under or len(slots) != len(over - under):
            raise ValueError(f"slot order of ({s},{u}) does not enumerate over - under")
        self.entries[(s, u)] = ApproxEntry(under, over, tuple(slots))

    def __getitem__(self, key) -> ApproxEntry:
        return self.entries[key]

    def refine(self, s: int, u: int, under, over) -> None:
        """Replace an entry while keeping the inherited slot order.

        Successors that were not uncertain before go last; such growth is
        not a refinement and :func:`diff_approx` rejects it.
        """
        under, over = frozenset(under), frozenset(over)
        old = self.entries.get((s, u))
        if old is None:
            self.set_entry(s, u, under, over)
            return
        kept = [t for t in old.slots if t in over and t not in under]
        extra = sorted(over - under - set(kept))
        self.set_entry(s, u, under, over, kept + extra)

    def copy(self) -> "ApproxTable":
        t = ApproxTable(self.n_cells, self.n_inputs, self.absorbing)
        t.entries = dict(self.entries)
        return t

    def __eq__(self, other) -> bool:
        return (isinstance(other, ApproxTable) and self.n_cells == other.n_cells
                and self.n_inputs == other.n_inputs and self.absorbing == other.absorbing
                and self.entries == other.entries)

    def to_dict(self) -> dict:
        return {
            "n_cells": self.n_cells,
            "n_inputs": self.n_inputs,
            "absorbing": sorted(self.absorbing),
            "entries": [
                {"s": s, "u": u, "under": sorted(e.under), "over": sorted(e.over), "slots": list(e.slots)}
                for (s, u), e in sorted(self.entries.items())
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ApproxTable":
        t = cls(data["n_cells"], data["n_inputs"], data.get("absorbing", ()))
        for e in data["entries"]:
            t.set_entry(int(e["s"]), int(e["u"]), e["under"], e["over"], [int(x) for x in e["slots"]])
        return t


def table_from_learner(learner, absorbing: Iterable[int] = ()) -> ApproxTable:
    tab = ApproxTable(learner.n_cells, learner.n_inputs, absorbing)
    for s, u in tab.pairs():
        under, over = learner.reach_sets(s, u)
        tab.set_entry(s, u, under, over)
    return tab


@dataclass
class AbstractIndex:
    """Bookkeeping that ties vertices of an abstract game back to (cell, input)."""

    n_cells: int
    n_inputs: int
    absorbing: frozenset
    su: dict = field(default_factory=dict)
    zero: dict = field(default_factory=dict)
    branch: dict = field(default_factory=dict)  # (s,u) -> {target: vertex}
    retained: dict = field(default_factory=dict)  # (s,u) -> [vertex], branches kept after under-growth
    under: dict = field(default_factory=dict)  # (s,u) -> set of common fair targets
    placeholder: set = field(default_factory=set)  # pairs whose zero branch points at the sink

    @property
    def sink(self) -> int:
        return self.n_cells

    def branches(self, s: int, u: int) -> list[int]:
        return [self.zero[(s, u)], *self.branch[(s, u)].values(), *self.retained.get((s, u), [])]

    def copy(self) -> "AbstractIndex":
        return AbstractIndex(
            self.n_cells, self.n_inputs, self.absorbing, dict(self.su), dict(self.zero),
            {k: dict(v) for k, v in self.branch.items()},
            {k: list(v) for k, v in self.retained.items()},
            {k: set(v) for k, v in self.under.items()},
            set(self.placeholder),
        )

    def to_dict(self) -> dict:
        pairs = sorted(self.su)
        return {
            "n_cells": self.n_cells,
            "n_inputs": self.n_inputs,
            "absorbing": sorted(self.absorbing),
            "pairs": [
                {
                    "s": s, "u": u, "su": self.su[(s, u)], "zero": self.zero[(s, u)],
                    "branch": [[t, v] for t, v in self.branch[(s, u)].items()],
                    "retained": self.retained.get((s, u), []),
                    "under": sorted(self.under[(s, u)]),
                    "placeholder": (s, u) in self.placeholder,
                }
                for s, u in pairs
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AbstractIndex":
        idx = cls(data["n_cells"], data["n_inputs"], frozenset(data["absorbing"]))
        for p in data["pairs"]:
            key = (int(p["s"]), int(p["u"]))
            idx.su[key] = int(p["su"])
            idx.zero[key] = int(p["zero"])
            idx.branch[key] = {int(t): int(v) for t, v in p["branch"]}
            if p["retained"]:
                idx.retained[key] = [int(v) for v in p["retained"]]
            idx.under[key] = {int(t) for t in p["under"]}
            if p["placeholder"]:
                idx.placeholder.add(key)
        return idx


def build_abstract_game(tab: ApproxTable, B: Iterable[int]) -> tuple[GameGraph, Spec]:
    """Fair Büchi game of an approximation table; Büchi set ``B`` on cell vertices.

    Absorbing cells and the sink carry a P0 self-loop. A zero branch whose
    under set is empty gets a fair edge to the sink so every vertex keeps a
    successor.
    """
    B = frozenset(int(b) for b in B)
    if any(not 0 <= b < tab.n_cells for b in B):
        raise ValueError("Büchi set must consist of grid cells")
    g = GameGraph(FAIR)
    idx = AbstractIndex(tab.n_cells, tab.n_inputs, tab.absorbing)
    for s in range(tab.n_cells):
        g.add_vertex(P0, ("cell", s))
    sink = g.add_vertex(P0, ("sink",))
    g.add_edge(sink, sink)
    for s in tab.absorbing:
        g.add_edge(s, s)
    for s, u in tab.pairs():
        e = tab[(s, u)]
        su = g.add_vertex(P1, ("su", s, u))
        g.add_edge(s, su)
        idx.su[(s, u)] = su
        idx.under[(s, u)] = set(e.under)
        z = g.add_vertex(P1, ("br", s, u, 0))
        g.add_edge(su, z)
        idx.zero[(s, u)] = z
        for t in sorted(e.under):
            g.add_edge(z, t, fair=True)
        if not e.under:
            g.add_edge(z, sink, fair=True)
            idx.placeholder.add((s, u))
        branches = {}
        for j, t in enumerate(e.slots, start=1):
            b = g.add_vertex(P1, ("br", s, u, j))
            g.add_edge(su, b)
            for w in sorted(e.under):
                g.add_edge(b, w, fair=True)
            g.add_edge(b, t, fair=True)
            branches[t] = b
        idx.branch[(s, u)] = branches
    g.abstract = idx
    return g, Spec(BUCHI, B)


def abstract_census(tab: ApproxTable) -> dict:
    """Vertex and edge counts the construction must produce, from set sizes alone."""
    n_v0 = tab.n_cells + 1
    n_v1 = 0
    n_edges = 1 + len(tab.absorbing)
    for (s, u), e in tab.entries.items():
        m = e.m
        n_v1 += 2 + m
        n_edges += 1 + (1 + m)  # s -> s^u and s^u -> branches
        n_edges += max(len(e.under), 1) + m * (len(e.under) + 1)
    return {"v0": n_v0, "v1": n_v1, "edges": n_edges}


@dataclass(frozen=True)
class GraphDelta:
    """Atomic game edit: ``add`` a fair target to every branch, or ``remove`` one branch."""

    kind: str  # "add" or "remove"
    s: int
    u: int
    target: int
    j: int | None = None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "s": self.s, "u": self.u, "target": self.target, "j": self.j}


def diff_approx(old: ApproxTable, new: ApproxTable) -> list[GraphDelta]:
    """Atomic deltas turning ``old`` into ``new``; additions of each pair come first."""
    if old.pairs() != new.pairs():
        raise MonotonicityViolation("tables cover different (cell, input) pairs")
    deltas: list[GraphDelta] = []
    for key in old.pairs():
        a, b = old[key], new[key]
        if a == b:
            continue
        if not a.under <= b.under:
            raise MonotonicityViolation(f"under set of {key} lost {sorted(a.under - b.under)}")
        if not b.over <= a.over:
            raise MonotonicityViolation(f"over set of {key} gained {sorted(b.over - a.over)}")
        slots = list(a.slots)
        for t in sorted(b.under - a.under):
            deltas.append(GraphDelta("add", key[0], key[1], t))
            slots.remove(t)
        for t in sorted(a.over - b.over):
            deltas.append(GraphDelta("remove", key[0], key[1], t, slots.index(t) + 1))
            slots.remove(t)
    return deltas


def apply_to_table(tab: ApproxTable, d: GraphDelta) -> None:
    e = tab[(d.s, d.u)]
    if d.target not in e.slots:
        raise ValueError(f"delta target {d.target} is not an uncertain successor of ({d.s},{d.u})")
    slots = [t for t in e.slots if t != d.target]
    if d.kind == "add":
        tab.set_entry(d.s, d.u, e.under | {d.target}, e.over, slots)
    else:
        tab.set_entry(d.s, d.u, e.under, e.over - {d.target}, slots)


def apply_delta(g: GameGraph, d: GraphDelta, gained: set | None = None) -> set[int]:
    """Patch an abstract game in place; return vertices to re-examine.

    The result holds every vertex whose successor set changed and their
    predecessors. Vertices that gained fair edges are also added to
    ``gained`` when given.
    """
    idx: AbstractIndex = g.abstract
    key = (d.s, d.u)
    changed: set[int] = set()
    if d.kind == "add":
        if d.target in idx.under[key]:
            return set()
        for b in idx.branches(d.s, d.u):
            if g.add_edge(b, d.target, fair=True):
                changed.add(b)
        if key in idx.placeholder:
            z = idx.zero[key]
            g.remove_edge(z, idx.sink)
            idx.placeholder.discard(key)
            changed.add(z)
        idx.under[key].add(d.target)
        if gained is not None:
            gained |= changed
        moved = idx.branch[key].pop(d.target, None)
        if moved is not None:
            idx.retained.setdefault(key, []).append(moved)
    elif d.kind == "remove":
        b = idx.branch[key].get(d.target)
        if b is None:
            raise ValueError(f"no branch of {key} targets {d.target}")
        su = idx.su[key]
        if len(g.succ[su]) <= 1:
            raise DanglingBranch(f"removing branch {b} would strand {su}")
        del idx.branch[key][d.target]
        g.remove_vertex(b)
        changed.add(su)
    else:
        raise ValueError(f"unknown delta kind {d.kind!r}")
    touched = set(changed)
    for v in changed:
        touched |= g.pred[v]
    return touched


def canonical_key(g: GameGraph, v: int):
    """Label of ``v`` that is stable between patched and rebuilt games.

    Branch vertices are keyed by their fair successor set since retained
    branches duplicate the zero branch.
    """
    label = g.labels[v]
    if label is not None and label[0] == "br":
        return ("br", label[1], label[2], frozenset(g.fair[v]))
    return label


def canonical_values(g: GameGraph, values: Sequence) -> dict:
    """Map canonical keys to values; duplicate keys must agree."""
    out = {}
    for v in g.vertices():
        k = canonical_key(g, v)
        if k in out and out[k] != values[v]:
            raise AssertionError(f"duplicate vertices {k} carry different values")
        out[k] = values[v]
    return out


def canonical_structure(g: GameGraph) -> frozenset:
    """Edge set over canonical keys, for isomorphism checks up to retained branches."""
    out = set()
    for v in g.vertices():
        kv = canonical_key(g, v)
        out.add((kv, g.owner[v], None, None))
        for w in g.succ[v]:
            out.add((kv, g.owner[v], canonical_key(g, w), w in g.fair[v]))
    return frozenset(out)
