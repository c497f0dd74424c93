"""Random small games, approximation tables and sample streams for differential testing."""
from __future__ import annotations

import random
from dataclasses import dataclass

from .abstraction import ApproxTable
from .game import BUCHI, FAIR, P0, P1, GameGraph, Spec, dualize
from .geometry import Box, GridPartition
from .learning import LearnerConfig, NoiseSupport, Sample


def random_fair_buchi_game(rng: random.Random, n_max: int = 10, n_min: int = 2,
                           max_out: int = 3, p_fair: float = 0.5, p_b: float = 0.3) -> tuple[GameGraph, Spec]:
    n = rng.randint(n_min, n_max)
    g = GameGraph(FAIR)
    for _ in range(n):
        g.add_vertex(rng.choice((P0, P1)))
    for v in range(n):
        k = rng.randint(1, min(max_out, n))
        targets = rng.sample(range(n), k)
        fair = []
        if g.owner[v] == P1 and rng.random() < p_fair:
            fair = rng.sample(targets, rng.randint(1, len(targets)))
        for w in targets:
            g.add_edge(v, w, fair=w in fair)
    B = frozenset(v for v in range(n) if rng.random() < p_b)
    return g, Spec(BUCHI, B)


def random_cofair_cobuchi_game(rng: random.Random, **kw) -> tuple[GameGraph, Spec]:
    return dualize(*random_fair_buchi_game(rng, **kw))


def random_table(rng: random.Random, n_cells: int, n_inputs: int, n_absorbing: int = 0,
                 max_over: int = 4, p_sink: float = 0.2) -> ApproxTable:
    absorbing = rng.sample(range(n_cells), n_absorbing)
    tab = ApproxTable(n_cells, n_inputs, absorbing)
    for s, u in tab.pairs():
        pool = list(range(n_cells))
        over = set(rng.sample(pool, rng.randint(1, min(max_over, n_cells))))
        if rng.random() < p_sink:
            over.add(n_cells)
        cells = sorted(c for c in over if c != n_cells)
        under = set(c for c in cells if rng.random() < 0.35)
        order = sorted(over - under)
        rng.shuffle(order)
        tab.set_entry(s, u, under, over, order)
    return tab


def random_refinement(rng: random.Random, tab: ApproxTable, p_change: float = 0.3) -> ApproxTable:
    """A table whose under sets grew and over sets shrank relative to ``tab``."""
    new = tab.copy()
    for key in tab.pairs():
        if rng.random() >= p_change:
            continue
        e = tab[key]
        under, over = set(e.under), set(e.over)
        for t in e.slots:
            r = rng.random()
            if r < 0.3 and t != tab.sink:
                under.add(t)
            elif r < 0.6:
                over.discard(t)
        if not over:
            over = {e.slots[0]} if e.slots else set(e.under)
        new.refine(key[0], key[1], under, over)
    return new


@dataclass
class StreamInstance:
    """A small learning problem whose samples arrive in batches."""

    grid: GridPartition
    cfg: LearnerConfig
    n_inputs: int
    goal: frozenset
    obstacles: frozenset
    batches: list


def random_stream(rng: random.Random, max_side: int = 6, max_density: int = 40) -> StreamInstance:
    """Grid of at most ``max_side`` cells per axis with contracting, shifted dynamics.

    ``f(x, u) = x + shift_u + c * (target - x)`` has sup-norm Lipschitz
    constant ``1 - c``, which the learner is given, and the noise radius is
    exact too. Strong contraction and noise near one cell width let under
    sets cover whole cells while over sets stay a few cells wide, so winning
    regions are often nonempty and grow as data arrives.
    """
    nx, ny = rng.randint(2, max_side), rng.randint(2, max_side)
    grid = GridPartition(Box.from_bounds([0.0, 0.0], [float(nx), float(ny)]), (nx, ny))
    n_inputs = rng.randint(2, 4)
    shifts = [(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6)) for _ in range(n_inputs)]
    c = rng.uniform(0.5, 0.9)
    target = (rng.uniform(0, nx), rng.uniform(0, ny))
    r = rng.uniform(1.0, 1.4)
    cfg = LearnerConfig(1.0 - c, NoiseSupport.symmetric(r, 2), clip_to_domain=rng.random() < 0.8)
    cells = list(grid.states())
    tx, ty = min(int(target[0]), nx - 1), min(int(target[1]), ny - 1)
    near = [s for s in cells if max(abs(grid.multi_index(s)[0] - tx), abs(grid.multi_index(s)[1] - ty)) <= 1]
    goal = frozenset(rng.sample(near, rng.randint(1, len(near))))
    free = [s for s in cells if s not in goal]
    obstacles = frozenset(rng.sample(free, min(rng.choice((0, 0, 0, 1)), len(free))))
    samples = []
    for _ in range(rng.randint(max_density // 4, max_density) * nx * ny * n_inputs):
        x = (rng.uniform(0, nx), rng.uniform(0, ny))
        u = rng.randrange(n_inputs)
        y = tuple(x[i] + shifts[u][i] + c * (target[i] - x[i]) + rng.uniform(-r, r) for i in range(2))
        samples.append(Sample(x, u, y))
    # early batches small so the winning region has room to grow
    cuts = sorted(int(len(samples) * rng.random() ** 2) for _ in range(rng.randint(1, 5)))
    bounds = [0, *cuts, len(samples)]
    batches = [samples[a:b] for a, b in zip(bounds, bounds[1:])]
    return StreamInstance(grid, cfg, n_inputs, goal, obstacles, batches)
