"""Acceptance gate: one PASS/FAIL line per criterion, collected in the terminal summary.

Run alone with ``pytest tests/test_acceptance.py -v -s``.
"""
import random
import time

import numpy as np
import pytest

from incsynth.abstraction import apply_delta, build_abstract_game, diff_approx
from incsynth.bench import bench_protocol
from incsynth.errors import NoDataForInput
from incsynth.fixpoint import solve_Psi, solve_psi
from incsynth.fixtures import B as GATE_B, GATE, START, gate_tables
from incsynth.game import dualize
from incsynth.geometry import Box, GridPartition
from incsynth.learning import Dataset, LearnerConfig, NoiseSupport, ReachLearner, Sample, bounds_at_point
from incsynth.oracle import solve
from incsynth.pm import LiftStats, PmFlavor, gadgetize, pm_range, solve_by_lifting
from incsynth.randgen import (random_cofair_cobuchi_game, random_fair_buchi_game, random_refinement, random_stream,
                              random_table)
from incsynth.scenario import batch_rollouts, corner_scenario, generate_dataset, sample_region
from incsynth.session import apply_refinement, initialise, policy_table, solve_abstraction

DIRECT = PmFlavor.FAIR_BUCHI_DIRECT
COFAIR = PmFlavor.COFAIR_COBUCHI
PLAIN = PmFlavor.PLAIN_COBUCHI


def _values(rho, vs):
    return [rho.values[v] for v in vs]


def test_c1_solver_equivalence(report):
    rng = random.Random(1)
    n, bad, t0 = 10_000, [], time.perf_counter()
    for i in range(n):
        g, spec = random_fair_buchi_game(rng, n_max=10)
        V = frozenset(g.vertices())
        vs = sorted(V)
        oracle = solve(g, spec).win0
        Psi = solve_Psi(g, spec)
        win1, rho_psi = solve_psi(g, spec)
        direct = solve_by_lifting(g, spec, DIRECT)
        gd, sd = dualize(g, spec)
        cofair = solve_by_lifting(gd, sd, COFAIR)
        h, hs = gadgetize(gd, sd)
        plain = solve_by_lifting(h, hs, PLAIN)
        ok = (oracle == Psi == V - win1 == direct.top_set(V) == cofair.top_set(V)
              == plain.top_set(h.vertices()) & V)
        ok = ok and solve(gd, sd).win1 == oracle
        ok = ok and _values(rho_psi, vs) == _values(direct, vs) == _values(cofair, vs)
        if not ok:
            bad.append(i)
    dt = time.perf_counter() - t0
    report("criterion 1 solver equivalence", not bad and dt < 300,
           f"{n} games |V|<=10, {len(bad)} mismatches, {dt:.1f}s")
    assert not bad and dt < 300


def test_c2_gadget_reduction(report):
    rng = random.Random(2)
    n, bad = 5_000, []
    for i in range(n):
        g, spec = random_cofair_cobuchi_game(rng, n_max=8)
        V = frozenset(g.vertices())
        k = len([v for v in g.fair_vertices() if v not in spec.B])
        h, hs = gadgetize(g, spec)
        sizes = len(h.vertices()) == len(V) + 2 * k and len(hs.B) == len(spec.B) + k
        direct = solve_by_lifting(g, spec, COFAIR).top_set(V)
        via = solve_by_lifting(h, hs, PLAIN).top_set(h.vertices()) & V
        if not (sizes and direct == via == solve(g, spec).win1):
            bad.append(i)
    report("criterion 2 gadget reduction", not bad, f"{n} cofair games |V|<=8, {len(bad)} mismatches")
    assert not bad


def _consistent_samples(rng, n, m, k, L, r):
    shift = rng.uniform(-1, 1, size=(m, n))
    X = rng.uniform(0, 3, size=(k, n))
    U = rng.integers(0, m, size=k)
    Y = X + shift[U] + (L - 1) * np.sin(X) + rng.uniform(-r, r, size=(k, n))
    return [Sample(tuple(x), int(u), tuple(y)) for x, u, y in zip(X, U, Y)]


def _snapshot(lr, d, cfg, points, m):
    pts = {}
    for u in range(m):
        for j, x in enumerate(points):
            try:
                pts[u, j] = bounds_at_point(x, u, d, cfg)
            except NoDataForInput:
                pass
    sets = {(s, u): lr.reach_sets(s, u) for s in lr.grid.states() for u in range(m)}
    return pts, lr.lo.copy(), lr.hi.copy(), sets


def test_c3_learning_monotone(report):
    rng = np.random.default_rng(3)
    n_sets, bad = 1_000, []
    for i in range(n_sets):
        n = int(rng.integers(1, 4))
        side = int(rng.integers(2, 5 - (n == 3)))
        grid = GridPartition(Box.from_bounds([0] * n, [3] * n), (side,) * n)
        L, r = float(rng.uniform(1, 1.5)), float(rng.uniform(0, 0.6))
        cfg = LearnerConfig(L, NoiseSupport.symmetric(r, n), int(rng.integers(1, 3)), bool(rng.random() < 0.5))
        m = int(rng.integers(1, 3))
        samples = _consistent_samples(rng, n, m, int(rng.integers(1, 30)), L, r)
        cuts = sorted(set(rng.integers(0, len(samples) + 1, size=3).tolist()) | {len(samples)})
        points = rng.uniform(0, 3, size=(4, n))
        lr, d = ReachLearner(grid, cfg, m), Dataset(n, m)
        prev, start = None, 0
        for c in cuts:
            lr.fold(samples[start:c])
            d.extend(samples[start:c])
            start = c
            cur = _snapshot(lr, d, cfg, points, m)
            if prev is not None:
                p_pts, p_lo, p_hi, p_sets = prev
                c_pts, c_lo, c_hi, c_sets = cur
                ok = all(np.all(c_pts[k][0] >= v[0]) and np.all(c_pts[k][1] <= v[1]) for k, v in p_pts.items())
                ok = ok and np.all(c_lo >= p_lo) and np.all(c_hi <= p_hi)
                ok = ok and all(p_sets[k][0] <= c_sets[k][0] and c_sets[k][1] <= p_sets[k][1] for k in p_sets)
                if not ok:
                    bad.append(i)
                    break
            prev = cur
    report("criterion 3 learning monotonicity", not bad, f"{n_sets} datasets in 1-3 dimensions, {len(bad)} violations")
    assert not bad


def _delta_stream(seed, want):
    """Yield (game, spec, delta) for ``want`` atomic deltas on small random abstractions."""
    rng = random.Random(seed)
    made = 0
    while made < want:
        tab = random_table(rng, 3, rng.randint(1, 2), n_absorbing=rng.randint(0, 1), max_over=3)
        g, spec = build_abstract_game(tab, {rng.randrange(3)})
        if len(g.vertices()) > 18:
            continue
        for d in diff_approx(tab, random_refinement(rng, tab, 0.8)):
            yield g, spec, d
            made += 1


def _win0_pairs(want):
    for g, spec, d in _delta_stream(4, want):
        before = solve(g, spec, max_vertices=20).win0
        apply_delta(g, d)
        after = solve(g, spec, max_vertices=20).win0
        yield g, before, after


def test_c4_region_monotone_on_cells_and_choices(report):
    n, bad = 1_000, 0
    for g, before, after in _win0_pairs(n):
        stable = {v for v in g.vertices() if g.labels[v][0] in ("cell", "sink", "su")}
        bad += not (before & stable) <= after
    report("criterion 4 region monotonicity (cell, sink and input-choice vertices)", bad == 0,
           f"{n} atomic deltas, {bad} violations")
    assert bad == 0


@pytest.mark.xfail(strict=True, reason="a branch vertex that gains a fair edge into a losing cell can leave Win0")
def test_c4_region_monotone_all_vertices(report):
    n, bad, example = 1_000, 0, None
    for g, before, after in _win0_pairs(n):
        lost = (before & set(g.vertices())) - after
        if lost:
            bad += 1
            example = example or sorted(g.labels[v] for v in lost)
    report("criterion 4 region monotonicity (every vertex of V_after)", bad == 0,
           f"{n} atomic deltas, {bad} with a vertex leaving Win0, e.g. {example}")
    assert bad == 0


def test_c5_incremental_equals_batch(report):
    n, bad, steps, nonempty, grew = 200, [], 0, 0, 0
    for seed in range(n):
        inst = random_stream(random.Random(seed))
        d = Dataset(2, inst.n_inputs, inst.batches[0])
        sess = initialise(d, inst.cfg, inst.grid, inst.goal, inst.grid.states(), inst.obstacles, synthesize=False)
        for batch in inst.batches[1:]:
            rep = sess.step(batch, synthesize=False)
            steps += 1
            grew += rep.win0_after != rep.win0_before
            fresh = initialise(Dataset(2, inst.n_inputs, list(sess.dataset)), inst.cfg, inst.grid, inst.goal,
                               (), inst.obstacles, synthesize=False)
            if fresh.win0 != sess.win0 or fresh.canonical_pm() != sess.canonical_pm():
                bad.append(seed)
                break
        nonempty += bool(sess.win0)
    report("criterion 5 incremental equals batch", not bad,
           f"{n} schedules, {steps} steps ({grew} changed the region, {nonempty} schedules end nonempty), "
           f"{len(bad)} mismatches")
    assert not bad


def test_c6_gate_golden(report):
    before, after = gate_tables()
    g, spec, rho = solve_abstraction(before, GATE_B)
    lost_before = not rho.is_top(START)
    deltas = apply_refinement(g, spec, rho, before, after, stats=LiftStats())
    one_remove = [(d.kind, d.s, d.target) for d in deltas] == [("remove", GATE, 3)]
    ok = lost_before and one_remove and rho.is_top(START)
    report("criterion 6 gate example", ok,
           f"start losing before: {lost_before}, deltas {[d.to_dict() for d in deltas]}, start winning after: "
           f"{rho.is_top(START)}")
    assert ok


def test_c7_bench(report):
    t0 = time.perf_counter()
    rows = bench_protocol(corner_scenario(20, seed=0))
    dt = time.perf_counter() - t0
    fast = sum(r.incremental_s <= r.recompute_s / 2 for r in rows)
    ok = len(rows) == 5 and all(r.regions_equal for r in rows) and fast >= 4 and dt < 600
    detail = ", ".join(f"{r.stage} {r.incremental_s:.2f}s vs {r.recompute_s:.2f}s" for r in rows)
    report("criterion 7 incremental speed", ok, f"{fast}/5 rows at least 2x faster ({detail}), {dt:.0f}s total")
    assert ok


def test_c8_closed_loop(report):
    sc = corner_scenario(20, seed=0)
    grid = sc.grid()
    d = generate_dataset(sc.model, sc)
    rng = np.random.default_rng(sc.seed + 1)
    for room in sc.rooms:
        d.extend(sample_region(sc.model, room.box, room.budget, rng))
    sess = initialise(d, sc.learner_config(), grid, sc.goal, sc.start, sc.obstacles)
    starts = sorted(set(sc.start) & sess.win0)
    runs = 50
    X0 = np.concatenate([np.random.default_rng(s).uniform(grid.cell_box(s).lo, grid.cell_box(s).hi, (runs, 2))
                         for s in starts])
    res = batch_rollouts(sc.model, policy_table(sess), X0, 500, 8, grid, sc.goal, sc.obstacles)
    hits = int(res["obstacle_hits"].sum())
    frac = float(np.mean(res["goal_visits"] >= 5))
    ok = len(starts) >= 20 and hits == 0 and frac >= 0.99
    report("criterion 8 closed-loop runs", ok,
           f"{len(starts)} winning starts x {runs} runs, {hits} obstacle entries, {frac:.2%} with >= 5 goal visits, "
           f"{int(res['left_domain'].sum())} left the domain")
    assert ok


def test_c9_enhanced_range(report):
    rng = random.Random(9)
    n, bad = 500, []
    for i in range(n):
        tab = random_table(rng, rng.randint(2, 6), rng.randint(1, 3), n_absorbing=rng.randint(0, 1))
        g, spec = build_abstract_game(tab, rng.sample(range(tab.n_cells), rng.randint(1, 2)))
        L_abs, L_gen = pm_range(g, spec, "abstract"), pm_range(g, spec, "general")
        gd, sd = dualize(g, spec)
        V = g.vertices()
        tops = [solve_by_lifting(gd, sd, COFAIR, L=L).top_set(V) for L in (L_abs, L_gen)]
        tops += [solve_by_lifting(g, spec, DIRECT, L=L).top_set(V) for L in (L_abs, L_gen)]
        if not tops[0] == tops[1] == tops[2] == tops[3]:
            bad.append(i)
    report("criterion 9 enhanced range", not bad, f"{n} abstract-game duals, {len(bad)} mismatches")
    assert not bad
