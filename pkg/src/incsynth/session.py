"""End-to-end incremental synthesis: learn, abstract, solve, and re-solve on new data."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .abstraction import (ApproxTable, apply_delta, build_abstract_game, canonical_values,
                          diff_approx, table_from_learner)
from .errors import MonotonicityViolation, NotWinning
from .fixpoint import Policy, solve_psi, synth_controller
from .game import GameGraph, Spec
from .geometry import GridPartition
from .learning import Dataset, LearnerConfig, NoiseSupport, ReachLearner, Sample
from .pm import LiftStats, PmFlavor, ProgressMeasure, pm_range, reset_cone, solve_by_lifting


@dataclass
class StepReport:
    win0_before: frozenset
    win0_after: frozenset
    deltas: list
    lifts: int
    reset: int
    wall_time: float
    policy_emitted: bool = False

    @property
    def deltas_applied(self) -> int:
        return len(self.deltas)

    def to_dict(self) -> dict:
        return {
            "win0_before": sorted(self.win0_before),
            "win0_after": sorted(self.win0_after),
            "deltas": [d.to_dict() for d in self.deltas],
            "deltas_applied": self.deltas_applied,
            "lifts": self.lifts,
            "reset": self.reset,
            "wall_time": self.wall_time,
            "policy_emitted": self.policy_emitted,
        }


@dataclass
class SynthesisSession:
    cfg: LearnerConfig
    grid: GridPartition
    B: frozenset
    I: frozenset
    obstacles: frozenset
    dataset: Dataset
    learner: ReachLearner
    tab: ApproxTable
    game: GameGraph
    spec: Spec
    rho: ProgressMeasure
    win0: frozenset
    policy: Policy | None = None
    influence_filter: bool = False

    @property
    def cells(self) -> range:
        return range(self.grid.cell_count)

    def winning_cells(self) -> frozenset:
        top = self.rho.top
        vals = self.rho.values
        return frozenset(s for s in self.cells if vals[s] >= top)

    def canonical_pm(self) -> dict:
        return canonical_values(self.game, self.rho.values)

    def step(self, samples: Sequence[Sample], synthesize: bool = True, order: str = "rounds") -> StepReport:
        return step(self, samples, synthesize, order)


def solve_abstraction(tab: ApproxTable, B: Iterable[int]) -> tuple[GameGraph, Spec, ProgressMeasure]:
    """Build the game of a table and solve it with the nested fixpoint."""
    game, spec = build_abstract_game(tab, B)
    _, rho = solve_psi(game, spec, L=pm_range(game, spec, "abstract"))
    return game, spec, rho


def lift_deltas(game: GameGraph, spec: Spec, rho: ProgressMeasure, deltas: Sequence,
                order: str = "rounds", stats: LiftStats | None = None) -> set[int]:
    """Apply deltas to ``game`` and lift ``rho`` in place to the new least fixpoint.

    Growing an under set can lower the least fixpoint at the branch vertices
    that gained edges, so those and every non-top vertex that reaches them
    through non-top vertices restart from zero. Returns that reset set.
    """
    touched: set[int] = set()
    gained: set[int] = set()
    for d in deltas:
        touched |= apply_delta(game, d, gained)
    reset = reset_cone(game, rho, gained)
    solve_by_lifting(game, spec, PmFlavor.FAIR_BUCHI_DIRECT, init=rho, seed=touched | reset,
                     order=order, stats=stats, in_place=True)
    return reset


def apply_refinement(game: GameGraph, spec: Spec, rho: ProgressMeasure, old: ApproxTable, new: ApproxTable,
                     order: str = "rounds", stats: LiftStats | None = None) -> list:
    """Diff two tables, patch the game and re-solve incrementally; returns the deltas."""
    deltas = diff_approx(old, new)
    lift_deltas(game, spec, rho, deltas, order, stats)
    return deltas


def _win0_vertices(sess: SynthesisSession) -> frozenset:
    return sess.rho.top_set(sess.game.vertices())


def _policy_wanted(sess: SynthesisSession) -> bool:
    return bool(sess.I & sess.win0)


def initialise(dataset: Dataset, cfg: LearnerConfig, grid: GridPartition, B: Iterable[int],
               I: Iterable[int] = (), obstacles: Iterable[int] = (), synthesize: bool = True,
               influence_filter: bool = False) -> SynthesisSession:
    """Learn the table from scratch, build the game and solve it with the fixpoint solver."""
    B, I, obstacles = frozenset(B), frozenset(I), frozenset(obstacles)
    if any(not 0 <= b < grid.cell_count for b in B | I | obstacles):
        raise ValueError("goal, start and obstacle sets must be grid cells")
    learner = ReachLearner.from_dataset(grid, cfg, dataset)
    tab = table_from_learner(learner, obstacles)
    game, spec, rho = solve_abstraction(tab, B)
    sess = SynthesisSession(cfg, grid, B, I, obstacles, dataset, learner, tab, game, spec, rho,
                            frozenset(), None, influence_filter)
    sess.win0 = sess.winning_cells()
    if synthesize and _policy_wanted(sess):
        sess.policy = synth_controller(game, spec, _win0_vertices(sess))
    return sess


def step(sess: SynthesisSession, samples: Sequence[Sample], synthesize: bool = True,
         order: str = "rounds") -> StepReport:
    """Fold new samples in and re-solve by warm-started lifting.

    ``order`` is the worklist discipline passed to the lifting engine.
    On a monotonicity violation the session is left unchanged.
    """
    t0 = time.perf_counter()
    before = sess.win0
    samples = list(samples)
    lr = sess.learner
    saved = (lr.lo.copy(), lr.hi.copy(), lr.counts.copy())
    changed = lr.fold(samples)
    if not sess.influence_filter:
        inputs = {u for _, u in changed} | {s.u for s in samples}
        changed = {(s, u) for u in inputs for s in sess.cells}
    new_tab = sess.tab.copy()
    for s, u in changed:
        if s in new_tab.absorbing:
            continue
        under, over = lr.reach_sets(s, u)
        new_tab.refine(s, u, under, over)
    try:
        deltas = diff_approx(sess.tab, new_tab)
    except MonotonicityViolation:
        lr.lo, lr.hi, lr.counts = saved
        raise
    sess.dataset.extend(samples)
    stats = LiftStats()
    reset = lift_deltas(sess.game, sess.spec, sess.rho, deltas, order, stats)
    sess.tab = new_tab
    sess.win0 = sess.winning_cells()
    wall = time.perf_counter() - t0
    emitted = False
    if synthesize and _policy_wanted(sess) and (sess.policy is None or sess.win0 != before):
        sess.policy = synth_controller(sess.game, sess.spec, _win0_vertices(sess))
        emitted = True
    return StepReport(before, sess.win0, deltas, stats.lifts, len(reset), wall, emitted)


def controller_lookup(sess: SynthesisSession, x) -> int:
    """Input for state ``x`` from the current policy."""
    s = sess.grid.translate(x)
    if sess.policy is None or s == sess.grid.sink:
        raise NotWinning(f"state {list(np.ravel(x))} has no winning input")
    return sess.policy(s)


def policy_table(sess: SynthesisSession) -> np.ndarray:
    """Input id per cell, -1 where the policy is undefined."""
    out = np.full(sess.grid.cell_count, -1, dtype=int)
    if sess.policy is not None:
        for s, u in sess.policy.inputs.items():
            out[s] = u
    return out


def save_checkpoint(sess: SynthesisSession, path, dataset_path: str | None = None) -> None:
    """JSON checkpoint: configuration, dataset (inline or by path), table, game and measure."""
    data = {
        "grid": sess.grid.to_dict(),
        "lipschitz": sess.cfg.lipschitz,
        "noise": {"l": sess.cfg.noise.l.tolist(), "h": sess.cfg.noise.h.tolist()},
        "subdivisions": sess.cfg.subdivisions,
        "clip_to_domain": sess.cfg.clip_to_domain,
        "B": sorted(sess.B),
        "I": sorted(sess.I),
        "obstacles": sorted(sess.obstacles),
        "n_inputs": sess.dataset.n_inputs,
        "influence_filter": sess.influence_filter,
        "table": sess.tab.to_dict(),
        "game": sess.game.to_dict(sess.spec),
        "pm": sess.rho.to_dict(),
        "win0": sorted(sess.win0),
        "policy": sess.policy.to_dict() if sess.policy else None,
    }
    if dataset_path is not None:
        data["dataset_path"] = str(dataset_path)
    else:
        data["samples"] = [[list(s.x), s.u, list(s.x_plus)] for s in sess.dataset]
    with open(path, "w") as fh:
        json.dump(data, fh)


def load_checkpoint(path) -> SynthesisSession:
    from .learning import read_dataset

    with open(path) as fh:
        data = json.load(fh)
    grid = GridPartition.from_dict(data["grid"])
    noise = NoiseSupport(np.array(data["noise"]["l"]), np.array(data["noise"]["h"]))
    cfg = LearnerConfig(float(data["lipschitz"]), noise, int(data.get("subdivisions", 1)),
                       bool(data.get("clip_to_domain", False)))
    if "dataset_path" in data:
        dataset, _ = read_dataset(data["dataset_path"])
    else:
        dataset = Dataset(grid.dim, int(data["n_inputs"]),
                          (Sample(tuple(x), int(u), tuple(y)) for x, u, y in data["samples"]))
    learner = ReachLearner.from_dataset(grid, cfg, dataset)
    tab = ApproxTable.from_dict(data["table"])
    game, spec = GameGraph.from_dict(data["game"])
    rho = ProgressMeasure.from_dict(data["pm"], game.n)
    sess = SynthesisSession(cfg, grid, frozenset(data["B"]), frozenset(data["I"]),
                            frozenset(data["obstacles"]), dataset, learner, tab, game, spec, rho,
                            frozenset(data["win0"]), None, bool(data.get("influence_filter", False)))
    if _policy_wanted(sess):
        sess.policy = synth_controller(game, spec, _win0_vertices(sess))
    return sess
