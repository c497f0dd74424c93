import random

import numpy as np
import pytest

from incsynth.abstraction import canonical_values
from incsynth.errors import MonotonicityViolation, NotWinning
from incsynth.fixtures import B, GATE, START, gate_tables
from incsynth.geometry import Box, GridPartition
from incsynth.learning import Dataset, LearnerConfig, NoiseSupport, Sample
from incsynth.oracle import check_policy, solve
from incsynth.pm import LiftStats
from incsynth.randgen import random_stream
from incsynth.session import (apply_refinement, controller_lookup, initialise, load_checkpoint, policy_table,
                              save_checkpoint, solve_abstraction)


def test_gate_start_loses_then_wins():
    before, after = gate_tables()
    g, spec, rho = solve_abstraction(before, B)
    assert not rho.is_top(START)
    stats = LiftStats()
    deltas = apply_refinement(g, spec, rho, before, after, stats=stats)
    assert [d.kind for d in deltas] == ["remove"]
    assert rho.is_top(START) and rho.is_top(GATE)
    g1, spec1, fresh = solve_abstraction(after, B)
    assert canonical_values(g, rho.values) == canonical_values(g1, fresh.values)


def _toy(n_samples=400, seed=0):
    """3 x 3 grid, no noise; input 0 halves the distance to the top corner, input 1 to the bottom one."""
    rng = np.random.default_rng(seed)
    grid = GridPartition(Box.from_bounds([0, 0], [3, 3]), (3, 3))
    targets = np.array([[2.5, 2.5], [0.5, 0.5]])
    X = rng.uniform(0, 3, (n_samples, 2))
    U = rng.integers(0, 2, n_samples)
    d = Dataset(2, 2)
    d.add_arrays(X, U, X + 0.5 * (targets[U] - X))
    cfg = LearnerConfig(0.5, NoiseSupport.symmetric(0.0, 2), clip_to_domain=True)
    return grid, cfg, d


def _full(seed):
    inst = random_stream(random.Random(seed), max_side=3)
    d = Dataset(2, inst.n_inputs, [s for b in inst.batches for s in b])
    return inst, initialise(d, inst.cfg, inst.grid, inst.goal, inst.grid.states(), inst.obstacles)


def test_empty_dataset_wins_nowhere():
    grid, cfg, _ = _toy()
    sess = initialise(Dataset(2, 2), cfg, grid, {8})
    assert sess.win0 == frozenset() and sess.policy is None


def test_contracting_toy_has_no_under_sets():
    # images shrink below a cell, so P1 may always pick the worst successor
    grid, cfg, d = _toy()
    sess = initialise(d, cfg, grid, {8}, I=grid.states())
    assert all(not sess.tab[s, u].under for s, u in sess.tab.pairs())
    assert sess.win0 == solve(sess.game, sess.spec, max_vertices=200).win0 & set(grid.states())


@pytest.mark.parametrize("seed", [22, 47, 132, 284, 0])
def test_small_instances_match_oracle(seed):
    inst, sess = _full(seed)
    oracle = solve(sess.game, sess.spec, max_vertices=400)
    assert sess.rho.top_set(sess.game.vertices()) == oracle.win0
    assert sess.win0
    for s in sess.win0:
        assert check_policy(sess.game, sess.spec, sess.policy.moves, s)


def test_empty_step_changes_nothing():
    grid, cfg, d = _toy()
    sess = initialise(d, cfg, grid, {8}, I={0})
    vals = list(sess.rho.values)
    rep = sess.step([])
    assert rep.deltas_applied == 0 and rep.lifts == 0 and rep.win0_after == rep.win0_before
    assert sess.rho.values == vals


def _stream_check(inst, order="rounds", influence_filter=False):
    d = Dataset(2, inst.n_inputs, inst.batches[0])
    sess = initialise(d, inst.cfg, inst.grid, inst.goal, inst.grid.states(), inst.obstacles,
                      influence_filter=influence_filter)
    for batch in inst.batches[1:]:
        rep = sess.step(batch, order=order)
        assert rep.win0_before <= rep.win0_after
        fresh = initialise(Dataset(2, inst.n_inputs, list(sess.dataset)), inst.cfg, inst.grid, inst.goal,
                           (), inst.obstacles, synthesize=False)
        assert fresh.win0 == sess.win0
        assert fresh.canonical_pm() == sess.canonical_pm()
    return sess


@pytest.mark.parametrize("seed", range(12))
def test_streaming_equals_batch(seed):
    _stream_check(random_stream(random.Random(seed)), order=random.Random(seed).choice(["rounds", "fifo"]))


@pytest.mark.parametrize("seed", range(4))
def test_influence_filter_agrees(seed):
    inst = random_stream(random.Random(100 + seed))
    a = _stream_check(inst, influence_filter=False)
    b = _stream_check(inst, influence_filter=True)
    assert a.win0 == b.win0 and a.canonical_pm() == b.canonical_pm()


def _small_stream():
    for seed in range(500):
        inst = random_stream(random.Random(seed), max_side=3, max_density=12)
        if inst.grid.cell_count <= 4 and inst.n_inputs <= 2 and len(inst.batches) > 1:
            yield inst


def test_emitted_policy_stays_winning():
    checked = 0
    for inst in _small_stream():
        d = Dataset(2, inst.n_inputs, inst.batches[0])
        sess = initialise(d, inst.cfg, inst.grid, inst.goal, inst.grid.states(), inst.obstacles)
        policies = []
        for batch in inst.batches[1:]:
            if sess.policy is not None:
                policies.append((dict(sess.policy.moves), set(sess.win0)))
            sess.step(batch)
            for moves, region in policies:
                for s in region:
                    assert check_policy(sess.game, sess.spec, moves, s)
                    checked += 1
        if checked > 50:
            break
    assert checked > 0


def test_controller_lookup():
    inst, sess = _full(47)
    grid = inst.grid
    for s in sess.win0:
        assert controller_lookup(sess, grid.cell_box(s).center) == sess.policy(s)
        assert policy_table(sess)[s] == sess.policy(s)
    losing = next(s for s in grid.states() if s not in sess.win0)
    with pytest.raises(NotWinning):
        controller_lookup(sess, grid.cell_box(losing).center)
    with pytest.raises(NotWinning):
        controller_lookup(sess, grid.domain.lo - 1.0)


def test_monotonicity_violation_leaves_session_intact(monkeypatch):
    grid, cfg, d = _toy()
    sess = initialise(d, cfg, grid, {8}, I={0})
    snapshot = (sess.tab, len(sess.dataset), sess.learner.lo.copy(), list(sess.rho.values))

    def grow(s, u):
        return frozenset(), frozenset(range(grid.cell_count))

    monkeypatch.setattr(sess.learner, "reach_sets", grow)
    with pytest.raises(MonotonicityViolation):
        sess.step([Sample((0.5, 0.5), 0, (1.5, 0.5))])
    assert sess.tab is snapshot[0] and len(sess.dataset) == snapshot[1]
    np.testing.assert_array_equal(sess.learner.lo, snapshot[2])
    assert sess.rho.values == snapshot[3]


def test_checkpoint_roundtrip(tmp_path):
    inst = random_stream(random.Random(11))
    d = Dataset(2, inst.n_inputs, inst.batches[0])
    sess = initialise(d, inst.cfg, inst.grid, inst.goal, inst.grid.states(), inst.obstacles)
    p = tmp_path / "ck.json"
    save_checkpoint(sess, p)
    back = load_checkpoint(p)
    assert back.win0 == sess.win0 and back.canonical_pm() == sess.canonical_pm()
    assert back.cfg == sess.cfg
    assert (back.policy is None) == (sess.policy is None)
    for batch in inst.batches[1:]:
        a, b = sess.step(batch), back.step(batch)
        assert a.win0_after == b.win0_after
    assert back.canonical_pm() == sess.canonical_pm()


def test_goal_must_be_cells():
    grid, cfg, d = _toy()
    with pytest.raises(ValueError):
        initialise(d, cfg, grid, {9})
