"""Two-player game graphs with optional fair edges, specs and play checks."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import BrokenLasso, FlavorMismatch

P0, P1 = 0, 1
NORMAL, FAIR, COFAIR = "normal", "fair", "cofair"
BUCHI, COBUCHI = "buchi", "cobuchi"
_DUAL_FLAVOR = {NORMAL: NORMAL, FAIR: COFAIR, COFAIR: FAIR}
_DUAL_KIND = {BUCHI: COBUCHI, COBUCHI: BUCHI}


@dataclass(frozen=True)
class Spec:
    kind: str
    B: frozenset

    def __post_init__(self):
        if self.kind not in (BUCHI, COBUCHI):
            raise ValueError(f"unknown spec kind {self.kind!r}")
        object.__setattr__(self, "B", frozenset(int(v) for v in self.B))


@dataclass(frozen=True)
class WinningPartition:
    win0: frozenset
    win1: frozenset

    def check(self, vertices: Iterable[int]) -> None:
        vs = frozenset(vertices)
        if self.win0 & self.win1 or (self.win0 | self.win1) != vs:
            raise AssertionError("winning regions do not partition the vertex set")


class GameGraph:
    """Directed graph over dense integer vertices owned by P0 or P1.

    ``fair[v]`` lists the fair successors of ``v`` and is a subset of
    ``succ[v]``. Removed vertices are retired (``alive[v]`` false) and their
    index is never reused, so per-vertex arrays stay valid across edits.
    """

    def __init__(self, flavor: str = NORMAL):
        if flavor not in _DUAL_FLAVOR:
            raise ValueError(f"unknown flavor {flavor!r}")
        self.flavor = flavor
        self.owner: list[int] = []
        self.succ: list[list[int]] = []
        self.fair: list[list[int]] = []
        self.pred: list[set[int]] = []
        self.alive: list[bool] = []
        self.labels: list = []
        self.abstract = None  # index of an abstraction game, if any

    # construction -------------------------------------------------------
    def add_vertex(self, owner: int, label=None) -> int:
        if owner not in (P0, P1):
            raise ValueError(f"owner must be 0 or 1, got {owner}")
        self.owner.append(owner)
        self.succ.append([])
        self.fair.append([])
        self.pred.append(set())
        self.alive.append(True)
        self.labels.append(label)
        return len(self.owner) - 1

    def add_edge(self, v: int, w: int, fair: bool = False) -> bool:
        """Add ``v -> w`` (fair if requested); return whether anything changed."""
        changed = False
        if w not in self.succ[v]:
            self.succ[v].append(w)
            self.pred[w].add(v)
            changed = True
        if fair and w not in self.fair[v]:
            self.fair[v].append(w)
            changed = True
        return changed

    def remove_edge(self, v: int, w: int) -> None:
        self.succ[v].remove(w)
        if w in self.fair[v]:
            self.fair[v].remove(w)
        self.pred[w].discard(v)

    def remove_vertex(self, v: int) -> None:
        for w in self.succ[v]:
            self.pred[w].discard(v)
        for p in list(self.pred[v]):
            self.succ[p].remove(v)
            if v in self.fair[p]:
                self.fair[p].remove(v)
        self.succ[v] = []
        self.fair[v] = []
        self.pred[v] = set()
        self.alive[v] = False

    # queries ------------------------------------------------------------
    @property
    def n(self) -> int:
        """Size of the index space, including retired vertices."""
        return len(self.owner)

    def vertices(self) -> list[int]:
        return [v for v in range(self.n) if self.alive[v]]

    def fair_vertices(self) -> set[int]:
        return {v for v in range(self.n) if self.alive[v] and self.fair[v]}

    def edge_count(self) -> int:
        return sum(len(self.succ[v]) for v in range(self.n) if self.alive[v])

    def validate(self) -> None:
        """Check totality, fair-subset and flavor/ownership invariants."""
        for v in self.vertices():
            if not self.succ[v]:
                raise AssertionError(f"vertex {v} has no successor")
            if not set(self.fair[v]) <= set(self.succ[v]):
                raise AssertionError(f"fair successors of {v} are not edges")
            for w in self.succ[v]:
                if not self.alive[w]:
                    raise AssertionError(f"edge {v}->{w} points to a retired vertex")
            if self.fair[v]:
                if self.flavor == NORMAL:
                    raise FlavorMismatch(f"normal game has fair edges at {v}")
                want = P1 if self.flavor == FAIR else P0
                if self.owner[v] != want:
                    raise FlavorMismatch(f"fair edge at {v} owned by P{self.owner[v]} in a {self.flavor} game")

    def copy(self) -> "GameGraph":
        g = GameGraph(self.flavor)
        g.owner = list(self.owner)
        g.succ = [list(s) for s in self.succ]
        g.fair = [list(s) for s in self.fair]
        g.pred = [set(s) for s in self.pred]
        g.alive = list(self.alive)
        g.labels = list(self.labels)
        g.abstract = self.abstract.copy() if self.abstract is not None else None
        return g

    def arrays(self):
        """Edge arrays for vectorised set computations.

        Returns ``(src, dst, fair_mask, owner, alive)`` as numpy arrays.
        """
        src, dst, fm = [], [], []
        for v in range(self.n):
            if not self.alive[v]:
                continue
            fs = self.fair[v]
            for w in self.succ[v]:
                src.append(v)
                dst.append(w)
                fm.append(w in fs)
        return (np.asarray(src, dtype=np.int64), np.asarray(dst, dtype=np.int64),
                np.asarray(fm, dtype=bool), np.asarray(self.owner, dtype=np.int8),
                np.asarray(self.alive, dtype=bool))

    def structure(self) -> tuple:
        """Hashable structural summary used for equality checks."""
        return (self.flavor, tuple(self.owner), tuple(self.alive),
                tuple(tuple(sorted(s)) for s in self.succ),
                tuple(tuple(sorted(s)) for s in self.fair))

    def __eq__(self, other) -> bool:
        return isinstance(other, GameGraph) and self.structure() == other.structure()

    def __repr__(self) -> str:
        return f"GameGraph(flavor={self.flavor}, vertices={len(self.vertices())}, edges={self.edge_count()})"

    # serialisation ------------------------------------------------------
    def to_dict(self, spec: Spec | None = None) -> dict:
        B = spec.B if spec is not None else frozenset()
        verts = []
        for v in range(self.n):
            fair = sorted(self.fair[v])
            verts.append({
                "id": v,
                "owner": self.owner[v],
                "alive": self.alive[v],
                "fair": fair,
                "plain": sorted(w for w in self.succ[v] if w not in self.fair[v]),
                "buchi": v in B,
                "label": _label_to_json(self.labels[v]),
            })
        out = {"flavor": self.flavor, "vertices": verts}
        if spec is not None:
            out["spec"] = {"kind": spec.kind, "B": sorted(spec.B)}
        if self.abstract is not None:
            out["abstract"] = self.abstract.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> tuple["GameGraph", Spec | None]:
        g = cls(data["flavor"])
        for rec in data["vertices"]:
            g.add_vertex(int(rec["owner"]), _label_from_json(rec.get("label")))
        for rec in data["vertices"]:
            v = int(rec["id"])
            for w in rec.get("fair", []):
                g.add_edge(v, int(w), fair=True)
            for w in rec.get("plain", []):
                g.add_edge(v, int(w))
        for rec in data["vertices"]:
            if not rec.get("alive", True):
                g.alive[int(rec["id"])] = False
        spec = None
        if "spec" in data:
            spec = Spec(data["spec"]["kind"], frozenset(data["spec"]["B"]))
        else:
            B = [int(r["id"]) for r in data["vertices"] if r.get("buchi")]
            spec = Spec(BUCHI if g.flavor != COFAIR else COBUCHI, frozenset(B))
        if "abstract" in data:
            from .abstraction import AbstractIndex
            g.abstract = AbstractIndex.from_dict(data["abstract"])
        return g, spec


def _label_to_json(label):
    if isinstance(label, tuple):
        return [_label_to_json(x) for x in label]
    return label


def _label_from_json(label):
    if isinstance(label, list):
        return tuple(_label_from_json(x) for x in label)
    return label


def dump_game(path, g: GameGraph, spec: Spec | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(g.to_dict(spec), fh)


def load_game(path) -> tuple[GameGraph, Spec | None]:
    with open(path) as fh:
        return GameGraph.from_dict(json.load(fh))


def make_game(owners: Sequence[int], edges: Iterable[tuple], fair_edges: Iterable[tuple] = (),
              flavor: str | None = None, labels: Sequence | None = None) -> GameGraph:
    """Build a game from an owner list and edge lists (fair edges are added as edges too)."""
    fair_edges = list(fair_edges)
    if flavor is None:
        flavor = NORMAL if not fair_edges else (FAIR if owners[fair_edges[0][0]] == P1 else COFAIR)
    g = GameGraph(flavor)
    for i, o in enumerate(owners):
        g.add_vertex(o, labels[i] if labels is not None else None)
    for v, w in edges:
        g.add_edge(v, w)
    for v, w in fair_edges:
        g.add_edge(v, w, fair=True)
    return g


def dualize(g: GameGraph, spec: Spec) -> tuple[GameGraph, Spec]:
    """Swap owners, fair/cofair flavor and Büchi/coBüchi on the same target set."""
    d = g.copy()
    d.owner = [1 - o for o in g.owner]
    d.flavor = _DUAL_FLAVOR[g.flavor]
    return d, Spec(_DUAL_KIND[spec.kind], spec.B)


def restrict(g: GameGraph, keep: Iterable[int]) -> tuple[GameGraph, set[int]]:
    """Induced subgraph on ``keep`` (same index space) and the kept vertices left edgeless."""
    keep = {v for v in keep if g.alive[v]}
    h = GameGraph(g.flavor)
    h.owner = list(g.owner)
    h.labels = list(g.labels)
    h.alive = [v in keep for v in range(g.n)]
    h.succ = [[w for w in g.succ[v] if w in keep] if v in keep else [] for v in range(g.n)]
    h.fair = [[w for w in g.fair[v] if w in keep] if v in keep else [] for v in range(g.n)]
    h.pred = [set() for _ in range(g.n)]
    for v in keep:
        for w in h.succ[v]:
            h.pred[w].add(v)
    dead = {v for v in keep if not h.succ[v]}
    return h, dead


def is_fair_play_witness(g: GameGraph, stem: Sequence[int], cycle: Sequence[int]) -> bool:
    """Whether the lasso ``stem cycle^omega`` is a fair play.

    Every fair vertex on the cycle must have all its fair successors on the
    cycle.
    """
    if not cycle:
        raise BrokenLasso("lasso cycle is empty")
    path = list(stem) + list(cycle) + [cycle[0]]
    for v, w in zip(path, path[1:]):
        if not (0 <= v < g.n and g.alive[v] and w in g.succ[v]):
            raise BrokenLasso(f"edge {v}->{w} is not in the game")
    on_cycle = set(cycle)
    return all(set(g.fair[v]) <= on_cycle for v in on_cycle)
