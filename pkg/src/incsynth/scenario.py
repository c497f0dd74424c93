"""Ground-truth car dynamics, scenario files, dataset generation and rollouts."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NotWinning
from .geometry import Box, GridPartition
from .learning import Dataset, LearnerConfig, NoiseSupport, Sample

FULL_ANGLES = tuple(k * math.pi / 8 for k in range(9))
FULL_VELOCITIES = (-0.2, -0.1, 0.1, 0.2)


@dataclass(frozen=True)
class CarModel:
    """Planar car: ``x' = x + 10 delta v cos(theta) + w1``, ``y' = y + 10 delta v sin(theta) + w2``.

    Noise is uniform on ``[-noise, noise]^2``; the learner only sees its
    support.
    """

    velocities: tuple = FULL_VELOCITIES
    angles: tuple = (0.0, math.pi / 2)
    delta: float = 1.0
    noise: float = 1.5

    @property
    def inputs(self) -> list[tuple[float, float]]:
        return [(v, th) for th in self.angles for v in self.velocities]

    @property
    def n_inputs(self) -> int:
        return len(self.velocities) * len(self.angles)

    def displacements(self) -> np.ndarray:
        us = np.array(self.inputs, dtype=float)
        return np.stack([10 * self.delta * us[:, 0] * np.cos(us[:, 1]),
                         10 * self.delta * us[:, 0] * np.sin(us[:, 1])], axis=1)

    def noise_support(self) -> NoiseSupport:
        return NoiseSupport.symmetric(self.noise, 2)

    def draw_noise(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(-self.noise, self.noise, size=(size, 2))

    def step(self, X: np.ndarray, U: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        """Successor states for rows of ``X`` under input ids ``U`` (noise-free if no rng)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Y = X + self.displacements()[np.asarray(U, dtype=int)]
        if rng is not None:
            Y = Y + self.draw_noise(rng, X.shape[0])
        return Y

    def to_dict(self) -> dict:
        return {"velocities": list(self.velocities), "angles": list(self.angles),
                "delta": self.delta, "noise": self.noise}

    @classmethod
    def from_dict(cls, d: dict) -> "CarModel":
        return cls(tuple(d.get("velocities", FULL_VELOCITIES)), tuple(d.get("angles", (0.0, math.pi / 2))),
                   float(d.get("delta", 1.0)), float(d.get("noise", 1.5)))


@dataclass
class Region:
    name: str
    box: Box
    budget: int

    def to_dict(self) -> dict:
        return {"name": self.name, "lo": self.box.lo.tolist(), "hi": self.box.hi.tolist(), "budget": self.budget}

    @classmethod
    def from_dict(cls, d: dict) -> "Region":
        return cls(d.get("name", ""), Box.from_bounds(d["lo"], d["hi"]), int(d.get("budget", 0)))


@dataclass
class Scenario:
    """Gridded workspace with goals, obstacles, start cells and data budgets.

    ``base_budget`` samples are spread uniformly over the domain outside the
    low-data ``regions``; each region then gets its own (small) budget.
    ``rooms`` are the areas whose data arrives later, one room at a time.
    """

    domain: Box
    cells: tuple
    goal: frozenset
    obstacles: frozenset
    start: frozenset
    regions: list = field(default_factory=list)
    rooms: list = field(default_factory=list)
    base_budget: int = 0
    lipschitz: float = 1.0
    subdivisions: int = 1
    # treat the domain as invariant (over boxes clipped to it) instead of routing mass to the sink
    clip_to_domain: bool = True
    model: CarModel = field(default_factory=CarModel)
    noise_distribution: str = "uniform"
    seed: int = 0

    def __post_init__(self):
        if self.goal & self.obstacles:
            raise ValueError("goal and obstacle cells overlap")
        n = math.prod(self.cells)
        for name, cs in (("goal", self.goal), ("obstacle", self.obstacles), ("start", self.start)):
            if any(not 0 <= c < n for c in cs):
                raise ValueError(f"{name} cell outside the grid")

    def grid(self) -> GridPartition:
        return GridPartition(self.domain, self.cells)

    def learner_config(self) -> LearnerConfig:
        return LearnerConfig(self.lipschitz, self.model.noise_support(), self.subdivisions, self.clip_to_domain)

    def to_dict(self) -> dict:
        return {
            "domain": {"lo": self.domain.lo.tolist(), "hi": self.domain.hi.tolist()},
            "cells": list(self.cells),
            "goal": sorted(self.goal),
            "obstacles": sorted(self.obstacles),
            "start": sorted(self.start),
            "regions": [r.to_dict() for r in self.regions],
            "rooms": [r.to_dict() for r in self.rooms],
            "base_budget": self.base_budget,
            "lipschitz": self.lipschitz,
            "subdivisions": self.subdivisions,
            "clip_to_domain": self.clip_to_domain,
            "model": self.model.to_dict(),
            "noise_distribution": self.noise_distribution,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        domain = Box.from_bounds(d["domain"]["lo"], d["domain"]["hi"])
        cells = tuple(int(c) for c in d["cells"])
        grid = GridPartition(domain, cells)
        return cls(
            domain=domain,
            cells=cells,
            goal=frozenset(_cell_list(d.get("goal", []), grid)),
            obstacles=frozenset(_cell_list(d.get("obstacles", []), grid)),
            start=frozenset(_cell_list(d.get("start", []), grid)),
            regions=[Region.from_dict(r) for r in d.get("regions", [])],
            rooms=[Region.from_dict(r) for r in d.get("rooms", [])],
            base_budget=int(d.get("base_budget", 0)),
            lipschitz=float(d.get("lipschitz", 1.0)),
            subdivisions=int(d.get("subdivisions", 1)),
            clip_to_domain=bool(d.get("clip_to_domain", True)),
            model=CarModel.from_dict(d.get("model", {})),
            noise_distribution=d.get("noise_distribution", "uniform"),
            seed=int(d.get("seed", 0)),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _cell_list(items, grid: GridPartition) -> list[int]:
    """Cells from a mix of flat ids, multi-indices and ``{"lo", "hi"}`` boxes (cell centers inside)."""
    out = []
    for it in items:
        if isinstance(it, dict):
            box = Box.from_bounds(it["lo"], it["hi"])
            out.extend(s for s in grid.states() if box.contains_point(grid.cell_box(s).center))
        elif isinstance(it, (list, tuple)):
            out.append(grid.flat_index(it))
        else:
            out.append(int(it))
    return out


def _uniform_in(rng: np.random.Generator, box: Box, k: int) -> np.ndarray:
    return rng.uniform(box.lo, box.hi, size=(k, box.dim))


def sample_region(model: CarModel, box: Box, budget: int, rng: np.random.Generator,
                  exclude: Sequence[Box] = ()) -> list[Sample]:
    """``budget`` samples with uniform states in ``box`` (outside ``exclude``) and uniform inputs."""
    X = np.empty((0, box.dim))
    while X.shape[0] < budget:
        cand = _uniform_in(rng, box, max(2 * (budget - X.shape[0]), 16))
        keep = np.ones(cand.shape[0], dtype=bool)
        for ex in exclude:
            keep &= ~np.all((cand >= ex.lo) & (cand <= ex.hi), axis=1)
        X = np.concatenate([X, cand[keep]])[:budget]
    U = rng.integers(0, model.n_inputs, size=budget)
    Y = model.step(X, U, rng)
    return [Sample(tuple(x), int(u), tuple(y)) for x, u, y in zip(X, U, Y)]


def generate_dataset(model: CarModel, scenario: Scenario, budgets: dict | None = None,
                     seed: int | None = None) -> Dataset:
    """Initial dataset: dense outside the low-data regions, region budgets inside them.

    ``budgets`` overrides region budgets by name (``"base"`` for the dense part).
    """
    rng = np.random.default_rng(scenario.seed if seed is None else seed)
    budgets = budgets or {}
    d = Dataset(2, model.n_inputs)
    excl = [r.box for r in scenario.regions]
    d.extend(sample_region(model, scenario.domain, budgets.get("base", scenario.base_budget), rng, excl))
    for r in scenario.regions:
        d.extend(sample_region(model, r.box, budgets.get(r.name, r.budget), rng))
    return d


def room_samples(model: CarModel, scenario: Scenario, seed: int | None = None) -> list[list[Sample]]:
    """Sample batches for each room, in room order."""
    rng = np.random.default_rng((scenario.seed if seed is None else seed) + 1)
    return [sample_region(model, r.box, r.budget, rng) for r in scenario.rooms]


@dataclass
class RolloutStats:
    trajectory: np.ndarray
    cells: np.ndarray
    goal_visits: int
    obstacle_hits: int
    left_domain: bool


def rollout(model: CarModel, controller: Callable, x0, horizon: int, seed: int,
            grid: GridPartition, goal=frozenset(), obstacles=frozenset()) -> RolloutStats:
    """Closed-loop run of ``controller`` (state -> input id) from ``x0``."""
    rng = np.random.default_rng(seed)
    x = np.asarray(x0, dtype=float)
    traj = [x]
    cells = [grid.translate(x)]
    if horizon > 0:
        controller(x)  # raises NotWinning for a losing start
    for _ in range(horizon):
        u = controller(x)
        x = model.step(x[None, :], [u], rng)[0]
        traj.append(x)
        c = grid.translate(x)
        cells.append(c)
        if c == grid.sink or c in obstacles:
            break
    cells_a = np.asarray(cells[1:], dtype=int)
    traj_a = np.asarray(traj[:-1] if horizon == 0 else traj)
    if horizon == 0:
        traj_a = np.empty((0, x.shape[0]))
    return RolloutStats(
        traj_a, cells_a,
        int(np.isin(cells_a, list(goal)).sum()) if goal else 0,
        int(np.isin(cells_a, list(obstacles)).sum()) if obstacles else 0,
        bool(np.any(cells_a == grid.sink)),
    )


def batch_rollouts(model: CarModel, policy_table: np.ndarray, X0: np.ndarray, horizon: int,
                   seed: int, grid: GridPartition, goal=frozenset(), obstacles=frozenset()) -> dict:
    """Vectorised rollouts; ``policy_table[s]`` is the input for cell ``s`` or -1.

    Runs stop counting once they hit an obstacle, leave the domain or reach
    a cell with no policy entry. Returns per-run goal visits and the flags
    ``obstacle_hits``, ``left_domain`` and ``stuck``.
    """
    rng = np.random.default_rng(seed)
    X = np.atleast_2d(np.asarray(X0, dtype=float)).copy()
    k = X.shape[0]
    goal_mask = np.zeros(grid.cell_count + 1, dtype=bool)
    goal_mask[list(goal)] = True
    obs_mask = np.zeros(grid.cell_count + 1, dtype=bool)
    obs_mask[list(obstacles)] = True
    table = np.append(np.asarray(policy_table, dtype=int), -1)
    visits = np.zeros(k, dtype=int)
    hits = np.zeros(k, dtype=bool)
    left = np.zeros(k, dtype=bool)
    stuck = np.zeros(k, dtype=bool)
    live = np.ones(k, dtype=bool)
    cells = grid.translate_many(X)
    if np.any(table[cells] < 0):
        raise NotWinning("some start state lies outside the winning region")
    for _ in range(horizon):
        U = table[cells]
        stuck |= live & (U < 0)
        live &= U >= 0
        if not live.any():
            break
        X[live] = model.step(X[live], U[live], rng)
        cells[live] = grid.translate_many(X[live])
        hit = live & obs_mask[cells]
        hits |= hit
        out = live & (cells == grid.sink)
        left |= out
        live &= ~(hit | out)
        visits += live & goal_mask[cells]
    return {"goal_visits": visits, "obstacle_hits": hits, "left_domain": left, "stuck": stuck}


def write_trajectory_csv(path, stats: RolloutStats) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "x", "y", "cell"])
        for i, (x, c) in enumerate(zip(stats.trajectory[1:], stats.cells), start=1):
            w.writerow([i, repr(float(x[0])), repr(float(x[1])), int(c)])


def corner_scenario(size: int = 20, density: float = 30.0, room_density: float = 30.0,
                   gray_density: float = 0.0, seed: int = 0, model: CarModel | None = None) -> Scenario:
    """Square workspace with a central obstacle, a goal patch and a low-data corner.

    The low-data corner block is split into five vertical strips that form the
    rooms, ordered from the data-rich side towards the wall. Start cells are
    the free cells at least three cells away from the walls. ``density`` is
    samples per cell per input.
    """
    if size < 16:
        raise ValueError("the layout needs a grid of at least 16 x 16 cells")
    model = model or CarModel()
    domain = Box.from_bounds([0.0, 0.0], [float(size), float(size)])
    grid = GridPartition(domain, (size, size))
    c = size / 2
    obstacle_box = Box.from_bounds([c - 1, c - 2], [c + 1, c + 2])
    goal_box = Box.from_bounds([c - 5, c], [c - 3, c + 2])
    # a corner block: beyond the walls there are no samples to borrow bounds from
    gray = Box.from_bounds([size - 5.0, 0.0], [float(size), 5.0])
    in_box = lambda b: frozenset(s for s in grid.states() if b.contains_point(grid.cell_box(s).center))
    obstacles, goal, gray_cells = in_box(obstacle_box), in_box(goal_box), in_box(gray)
    # starts keep a margin from the walls: the abstraction treats the domain as invariant
    # while the real car can be pushed out, so runs starting at a wall often leave it
    margin = 3
    free = [s for s in grid.states()
            if s not in obstacles and s not in gray_cells and s not in goal
            and all(margin <= i < size - margin for i in grid.multi_index(s))]
    m = model.n_inputs
    rooms = []
    w = (gray.hi[0] - gray.lo[0]) / 5
    for i in range(5):
        box = Box.from_bounds([gray.lo[0] + i * w, gray.lo[1]], [gray.lo[0] + (i + 1) * w, gray.hi[1]])
        rooms.append(Region(f"room{i + 1}", box, int(room_density * m * box.volume())))
    return Scenario(
        domain=domain, cells=(size, size), goal=goal, obstacles=obstacles,
        start=frozenset(free), regions=[Region("gray", gray, int(gray_density * m * gray.volume()))],
        rooms=rooms, base_budget=int(density * m * (size * size - gray.volume())), model=model, seed=seed,
    )
