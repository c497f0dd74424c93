"""Brute-force reference solvers for small games.

Fair games are solved by enumerating P0's positional strategies and looking,
in each strategy's graph, for a reachable B-free, fairness-closed strongly
connected set: P1 can trap the play there fairly. Normal games use the
classical attractor construction. Nothing here shares code with the
measure or fixpoint solvers.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import FlavorMismatch, TooLarge
from .game import BUCHI, COBUCHI, COFAIR, FAIR, NORMAL, P0, P1, GameGraph, Spec, dualize

MAX_VERTICES = 12
MAX_STRATEGIES = 1 << 16


@dataclass
class OracleResult:
    win0: frozenset
    win1: frozenset
    strategies: dict = field(default_factory=dict)  # winning vertex -> P0 strategy dict


def _sccs(nodes: Iterable[int], succ) -> list[list[int]]:
    """Strongly connected components of the graph induced on ``nodes`` (Tarjan)."""
    nodes = list(nodes)
    inside = set(nodes)
    index, low, on, stack, out = {}, {}, set(), [], []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter([w for w in succ(root) if w in inside]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on.add(w)
                    work.append((w, iter([x for x in succ(w) if x in inside])))
                    advanced = True
                    break
                if w in on:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(comp)
    return out


def _reach(start: Iterable[int], succ) -> set[int]:
    seen = set(start)
    todo = list(seen)
    while todo:
        v = todo.pop()
        for w in succ(v):
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return seen


def _back_reach(targets: Iterable[int], nodes: Iterable[int], succ) -> set[int]:
    pred: dict[int, list[int]] = {}
    for v in nodes:
        for w in succ(v):
            pred.setdefault(w, []).append(v)
    return _reach(targets, lambda v: pred.get(v, ()))


def fair_traps(nodes: Iterable[int], succ, fair, bad: set[int]) -> list[set[int]]:
    """Maximal candidates for P1 traps: B-free, fairness-closed, strongly connected, with an edge.

    Any set with those properties lies inside one of the returned sets,
    and each returned set has them itself.
    """
    out = []
    todo = [set(v for v in nodes if v not in bad)]
    while todo:
        U = todo.pop()
        for comp in _sccs(U, succ):
            C = set(comp)
            if len(C) == 1:
                v = comp[0]
                if v not in succ(v):
                    continue
            drop = {v for v in C if not set(fair(v)) <= C}
            if drop:
                todo.append(C - drop)
            else:
                out.append(C)
    return out


def _strategy_graph(g: GameGraph, sigma: Mapping[int, int]):
    def succ(v):
        if g.owner[v] == P0 and v in sigma:
            return (sigma[v],)
        return g.succ[v]
    return succ


def _p1_wins_under(g: GameGraph, B: frozenset, sigma: Mapping[int, int], method: str = "scc") -> set[int]:
    """Vertices from which P1 defeats ``sigma`` in the fair Büchi game."""
    succ = _strategy_graph(g, sigma)
    nodes = g.vertices()
    fair = lambda v: g.fair[v]
    if method == "scc":
        traps = fair_traps(nodes, succ, fair, set(B))
    elif method == "subsets":
        traps = _subset_traps(nodes, succ, fair, B)
    else:
        raise ValueError(f"unknown method {method!r}")
    targets = set().union(*traps) if traps else set()
    return _back_reach(targets, nodes, succ)


def _subset_traps(nodes, succ, fair, B) -> list[set[int]]:
    nodes = [v for v in nodes if v not in B]
    found = []
    for r in range(1, len(nodes) + 1):
        for H in itertools.combinations(nodes, r):
            Hs = set(H)
            if any(not set(fair(v)) <= Hs for v in H):
                continue
            if not any(w in Hs for v in H for w in succ(v)):
                continue
            comps = _sccs(H, succ)
            if len(comps) == 1 and (r > 1 or H[0] in succ(H[0])):
                found.append(Hs)
    return found


def _strategies(g: GameGraph):
    p0 = [v for v in g.vertices() if g.owner[v] == P0]
    count = math.prod(len(g.succ[v]) for v in p0) if p0 else 1
    if count > MAX_STRATEGIES:
        raise TooLarge(f"{count} positional strategies exceed the guard of {MAX_STRATEGIES}")
    for choice in itertools.product(*[g.succ[v] for v in p0]):
        yield dict(zip(p0, choice))


def solve_fair_buchi_bruteforce(g: GameGraph, spec: Spec, method: str = "scc",
                                max_vertices: int = MAX_VERTICES) -> OracleResult:
    """Winning regions of a fair Büchi game by strategy enumeration."""
    if g.flavor not in (FAIR, NORMAL) or spec.kind != BUCHI:
        raise FlavorMismatch("expected a fair Büchi game")
    verts = g.vertices()
    if len(verts) > max_vertices:
        raise TooLarge(f"{len(verts)} vertices exceed the oracle guard of {max_vertices}")
    win0: set[int] = set()
    witness: dict[int, dict] = {}
    all_v = set(verts)
    for sigma in _strategies(g):
        good = all_v - _p1_wins_under(g, spec.B, sigma, method)
        for v in good - win0:
            witness[v] = sigma
        win0 |= good
        if win0 == all_v:
            break
    return OracleResult(frozenset(win0), frozenset(all_v - win0), witness)


def solve_cofair_cobuchi_bruteforce(g: GameGraph, spec: Spec, **kw) -> OracleResult:
    """Winning regions of a cofair coBüchi game via its fair Büchi dual."""
    if g.flavor not in (COFAIR, NORMAL) or spec.kind != COBUCHI:
        raise FlavorMismatch("expected a cofair coBüchi game")
    d, dspec = dualize(g, spec)
    r = solve_fair_buchi_bruteforce(d, dspec, **kw)
    return OracleResult(r.win1, r.win0)


def attractor(g: GameGraph, player: int, target: Iterable[int], within: set[int]) -> set[int]:
    """Vertices of the subgame ``within`` from which ``player`` forces a visit to ``target``."""
    attr = set(t for t in target if t in within)
    count = {v: sum(1 for w in g.succ[v] if w in within) for v in within}
    todo = list(attr)
    while todo:
        w = todo.pop()
        for v in g.pred[w]:
            if v not in within or v in attr:
                continue
            if g.owner[v] == player:
                attr.add(v)
                todo.append(v)
            else:
                count[v] -= 1
                if count[v] == 0:
                    attr.add(v)
                    todo.append(v)
    return attr


def _buchi(g: GameGraph, player: int, B: frozenset) -> set[int]:
    """Region where ``player`` can visit ``B`` infinitely often (normal game)."""
    rest = set(g.vertices())
    while True:
        reach = attractor(g, player, B & rest, rest)
        avoid = rest - reach
        if not avoid:
            return rest
        rest -= attractor(g, 1 - player, avoid, rest)


def solve_normal(g: GameGraph, spec: Spec) -> OracleResult:
    """Büchi or coBüchi game without fairness, by repeated attractors."""
    if g.fair_vertices():
        raise FlavorMismatch("solve_normal expects a game without fair edges")
    V = frozenset(g.vertices())
    if spec.kind == BUCHI:
        w0 = frozenset(_buchi(g, P0, spec.B))
        return OracleResult(w0, V - w0)
    w1 = frozenset(_buchi(g, P1, spec.B))
    return OracleResult(V - w1, w1)


def solve(g: GameGraph, spec: Spec, **kw) -> OracleResult:
    """Dispatch on flavor and spec kind."""
    if not g.fair_vertices() and g.flavor == NORMAL:
        return solve_normal(g, spec)
    if spec.kind == BUCHI:
        return solve_fair_buchi_bruteforce(g, spec, **kw)
    return solve_cofair_cobuchi_bruteforce(g, spec, **kw)


def check_policy(g: GameGraph, spec: Spec, policy: Mapping[int, int], start: int) -> bool:
    """Whether every play consistent with ``policy`` from ``start`` meets the winning condition.

    In fair games P1 is held to fairness. P0 vertices reached without a
    policy move count as failures.
    """
    succ = _strategy_graph(g, policy)
    reach = _reach([start], succ)
    if any(g.owner[v] == P0 and v not in policy for v in reach):
        return False
    if spec.kind == BUCHI:
        traps = fair_traps(reach, succ, lambda v: g.fair[v], set(spec.B))
        return not traps
    # coBüchi: no reachable cycle through B
    for comp in _sccs(reach, succ):
        if len(comp) == 1 and comp[0] not in succ(comp[0]):
            continue
        if set(comp) & spec.B:
            return False
    return True
