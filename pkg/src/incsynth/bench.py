"""Room-by-room benchmark: incremental step versus from-scratch re-solve."""
from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import RegionMismatch
from .scenario import Region, Scenario, generate_dataset, sample_region
from .session import initialise

CSV_FIELDS = ("stage", "states", "deltas", "lifts", "incremental_s", "recompute_s", "regions_equal")


@dataclass
class BenchRow:
    stage: str
    states: int
    deltas: int
    lifts: int
    incremental_s: float
    recompute_s: float
    regions_equal: bool
    win0: int = 0


def bench_protocol(scenario: Scenario, rooms: Sequence[Region] | None = None, seed: int | None = None,
                   check_measure: bool = False) -> list[BenchRow]:
    """Stream each room's samples into one session and compare with a fresh solve.

    The incremental column covers learner update, deltas and lifting; the
    recompute column covers learning, abstraction and the fixpoint solve on
    the cumulative data. Controller synthesis is left out of both.
    Raises :class:`RegionMismatch` as soon as the two winning regions differ.
    """
    rooms = scenario.rooms if rooms is None else list(rooms)
    seed = scenario.seed if seed is None else seed
    grid = scenario.grid()
    cfg = scenario.learner_config()
    dataset = generate_dataset(scenario.model, scenario, seed=seed)
    sess = initialise(dataset.copy(), cfg, grid, scenario.goal, scenario.start, scenario.obstacles,
                      synthesize=False)
    rng = np.random.default_rng(seed + 1)
    rows = []
    for room in rooms:
        batch = sample_region(scenario.model, room.box, room.budget, rng)
        t0 = time.perf_counter()
        rep = sess.step(batch, synthesize=False)
        inc = time.perf_counter() - t0
        t0 = time.perf_counter()
        fresh = initialise(sess.dataset, cfg, grid, scenario.goal, scenario.start, scenario.obstacles,
                           synthesize=False)
        rec = time.perf_counter() - t0
        equal = fresh.win0 == sess.win0
        if equal and check_measure:
            equal = fresh.canonical_pm() == sess.canonical_pm()
        row = BenchRow(room.name, len(sess.game.vertices()), len(rep.deltas), rep.lifts, inc, rec, equal,
                       len(sess.win0))
        rows.append(row)
        if not equal:
            raise RegionMismatch(f"stage {room.name}: incremental and fresh winning regions differ")
    return rows


def write_csv(rows: Sequence[BenchRow], path_or_fh) -> None:
    own = isinstance(path_or_fh, (str, bytes)) or hasattr(path_or_fh, "__fspath__")
    fh = open(path_or_fh, "w", newline="") if own else path_or_fh
    try:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for r in rows:
            w.writerow([r.stage, r.states, r.deltas, r.lifts, f"{r.incremental_s:.6f}",
                        f"{r.recompute_s:.6f}", str(r.regions_equal).lower()])
    finally:
        if own:
            fh.close()


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def speedup_summary(rows: Sequence[BenchRow]) -> dict:
    fast = sum(1 for r in rows if r.incremental_s <= r.recompute_s / 2)
    return {"rows": len(rows), "rows_2x_faster": fast,
            "all_equal": all(r.regions_equal for r in rows),
            "rows_detail": [asdict(r) for r in rows]}
