"""Document-level operations shared by the command line and the HTTP service.

Every function takes and returns plain JSON-ready structures so both
front ends stay thin.
"""
from __future__ import annotations

from typing import Iterable

import numpy as np

from .abstraction import ApproxTable, build_abstract_game, table_from_learner
from .fixpoint import solve_psi
from .game import GameGraph
from .geometry import Box, GridPartition
from .learning import Dataset, LearnerConfig, NoiseSupport, ReachLearner, Sample
from .pm import PmFlavor, pm_range, solve_by_lifting


def make_grid(cells: Iterable[int], lo: float | None = None, hi: float | None = None) -> GridPartition:
    """Grid with the given cell counts over ``[lo, hi]^n`` (unit cells by default)."""
    cells = [int(c) for c in cells]
    lo = 0.0 if lo is None else float(lo)
    his = [float(hi) if hi is not None else lo + c for c in cells]
    return GridPartition(Box.from_bounds([lo] * len(cells), his), cells)


def config_to_dict(cfg: LearnerConfig) -> dict:
    return {"lipschitz": cfg.lipschitz, "noise": {"l": cfg.noise.l.tolist(), "h": cfg.noise.h.tolist()},
            "subdivisions": cfg.subdivisions, "clip_to_domain": cfg.clip_to_domain}


def config_from_dict(d: dict) -> LearnerConfig:
    noise = NoiseSupport(np.asarray(d["noise"]["l"], dtype=float), np.asarray(d["noise"]["h"], dtype=float))
    return LearnerConfig(float(d["lipschitz"]), noise, int(d.get("subdivisions", 1)),
                         bool(d.get("clip_to_domain", False)))


def samples_from_rows(rows: Iterable) -> list[Sample]:
    return [Sample(tuple(float(v) for v in x), int(u), tuple(float(v) for v in y)) for x, u, y in rows]


def learn_table(dataset: Dataset, grid: GridPartition, cfg: LearnerConfig,
                obstacles: Iterable[int] = ()) -> dict:
    """Approximation-table document for a dataset."""
    learner = ReachLearner.from_dataset(grid, cfg, dataset)
    tab = table_from_learner(learner, obstacles)
    return {"grid": grid.to_dict(), "config": config_to_dict(cfg), "table": tab.to_dict()}


def abstract_game(table_doc: dict, goal: Iterable[int]) -> dict:
    """Game dump of the abstraction of a table document (or a bare table dict)."""
    tab = ApproxTable.from_dict(table_doc.get("table", table_doc))
    g, spec = build_abstract_game(tab, goal)
    return g.to_dict(spec)


def _regions(g: GameGraph, win0: frozenset) -> list[int]:
    if g.abstract is not None:
        return sorted(v for v in win0 if v < g.abstract.n_cells)
    return sorted(win0)


def solve_game(game_doc: dict, method: str = "psi") -> dict:
    """Solve a fair Büchi game dump.

    ``method`` is ``psi`` (nested fixpoint) or ``lifting`` (worklist lifting
    from the zero measure). Returns the measure, P0's winning vertices and the
    region list (cells for abstraction games, vertices otherwise).
    """
    g, spec = GameGraph.from_dict(game_doc)
    if spec is None:
        raise ValueError("game dump carries no specification")
    hint = "abstract" if g.abstract is not None else "general"
    L = pm_range(g, spec, hint)
    if method == "psi":
        _, rho = solve_psi(g, spec, L=L)
    elif method == "lifting":
        rho = solve_by_lifting(g, spec, PmFlavor.FAIR_BUCHI_DIRECT, L=L)
    else:
        raise ValueError(f"unknown method {method!r}")
    win0 = rho.top_set(g.vertices())
    return {"pm": rho.to_dict(g.vertices()), "win0": sorted(win0), "regions": _regions(g, win0)}
