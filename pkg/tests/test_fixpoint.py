import itertools
import json
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from incsynth.abstraction import ApproxTable, build_abstract_game
from incsynth.errors import FlavorMismatch, NotWinning, RangeTooSmall
from incsynth.fixpoint import FixpointTrace, solve_Psi, solve_psi, synth_controller, transformers
from incsynth.fixtures import FORWARD, GATE, START
from incsynth.game import BUCHI, P0, Spec, dualize, make_game
from incsynth.oracle import check_policy, solve
from incsynth.pm import PmFlavor, solve_by_lifting
from incsynth.randgen import random_fair_buchi_game, random_table


def _brute(g, H):
    """Literal quantifier evaluation of every transformer."""
    out = {k: set() for k in ("cpre0", "cpre1", "pre1_forall", "pre0_exists", "pre1_exists", "pre0_forall",
                              "lpre_exists", "lpre_forall")}
    for v in g.vertices():
        s, f, o = g.succ[v], g.fair[v], g.owner[v]
        some, every = any(w in H for w in s), all(w in H for w in s)
        if o == P0:
            out["pre0_exists"].add(v) if some else None
            out["pre0_forall"].add(v) if every else None
            out["cpre0"].add(v) if some else None
            out["cpre1"].add(v) if every else None
        else:
            out["pre1_exists"].add(v) if some else None
            out["pre1_forall"].add(v) if every else None
            out["cpre1"].add(v) if some else None
            out["cpre0"].add(v) if every else None
        if f:
            if any(w in H for w in f):
                out["lpre_exists"].add(v)
            if all(w in H for w in f):
                out["lpre_forall"].add(v)
    return out


@given(st.integers(0, 100_000))
def test_transformers_match_quantifiers(seed):
    rng = random.Random(seed)
    g, _ = random_fair_buchi_game(rng, n_max=9)
    T = transformers(g)
    H = {v for v in g.vertices() if rng.random() < 0.5}
    want = _brute(g, H)
    for name, expected in want.items():
        got = set(np.flatnonzero(getattr(T, name)(T.mask(H))).tolist())
        assert got == expected, name


def test_transformer_edge_cases(gate):
    *_, g0, _, _ = gate
    T = transformers(g0)
    assert np.array_equal(T.cpre1(T.full()), T.full())
    assert not T.lpre_forall(T.empty()).any()


def test_all_b_means_empty_first_iterate():
    g, _ = random_fair_buchi_game(random.Random(5))
    trace = FixpointTrace()
    win1, _ = solve_psi(g, Spec(BUCHI, frozenset(g.vertices())), trace=trace)
    # the chain stops at once: Y^1 equals Y^0 = {}
    assert len(trace.snapshots) == 1 and not trace.snapshots[0].any() and win1 == frozenset()


def _max_full_v1_subset(g, B):
    # union of all subsets of V \ B that carry a full-V1-subgraph
    rest = [v for v in g.vertices() if v not in B]
    best = set()
    for k in range(len(rest) + 1):
        for H in itertools.combinations(rest, k):
            H = set(H)
            ok = all(
                (all(w in H for w in g.succ[v]) if g.owner[v] == P0 else any(w in H for w in g.succ[v]))
                and all(w in H for w in g.fair[v])
                for v in H)
            if ok:
                best |= H
    return best


@pytest.mark.parametrize("seed", range(40))
def test_first_iterate_is_maximal_full_v1_subset(seed):
    g, spec = random_fair_buchi_game(random.Random(seed), n_max=8)
    trace = FixpointTrace()
    solve_psi(g, spec, trace=trace)
    first = set(np.flatnonzero(trace.snapshots[1]).tolist()) if len(trace.snapshots) > 1 else set()
    assert first == _max_full_v1_subset(g, spec.B)


@given(st.integers(0, 100_000))
def test_rank_measure_equals_lifting(seed):
    g, spec = random_fair_buchi_game(random.Random(seed))
    win1, rho = solve_psi(g, spec)
    lifted = solve_by_lifting(g, spec, PmFlavor.FAIR_BUCHI_DIRECT)
    assert rho.values == lifted.values
    assert win1 == frozenset(g.vertices()) - rho.top_set(g.vertices())


@given(st.integers(0, 100_000))
def test_complementarity_and_traces(seed):
    g, spec = random_fair_buchi_game(random.Random(seed), n_max=12)
    trace = FixpointTrace()
    win1, _ = solve_psi(g, spec, trace=trace)
    assert win1 == frozenset(g.vertices()) - solve_Psi(g, spec)
    snaps = trace.snapshots
    assert not snaps[0].any()
    for a, b in zip(snaps, snaps[1:]):
        assert np.all(a <= b) and not np.array_equal(a, b)
    assert json.loads(json.dumps(trace.to_dict()))["snapshots"][0] == []


def test_empty_b_loses_everywhere():
    g, _ = random_fair_buchi_game(random.Random(2))
    assert solve_Psi(g, Spec(BUCHI, set())) == frozenset()


@pytest.mark.parametrize("seed", range(20))
def test_all_b_matches_oracle(seed):
    g, _ = random_fair_buchi_game(random.Random(seed), n_max=8)
    spec = Spec(BUCHI, frozenset(g.vertices()))
    assert solve_Psi(g, spec) == solve(g, spec).win0


def test_gate_black_edges_wins_start(gate):
    *_, g0, g1, spec = gate
    assert START in solve_Psi(g1, spec)
    assert START not in solve_Psi(g0, spec)


def test_policy_uses_direct_edge_into_goal():
    tab = ApproxTable(2, 2, absorbing={1})
    tab.set_entry(0, 0, {0}, {0})
    tab.set_entry(0, 1, {1}, {1})
    g, spec = build_abstract_game(tab, {1})
    pol = synth_controller(g, spec, solve_Psi(g, spec))
    assert pol(0) == 1 and pol.ranks[0] == pol.ranks[0]


def test_gate_policy(gate):
    *_, g1, spec = gate
    pol = synth_controller(g1, spec, solve_Psi(g1, spec))
    assert pol(START) == FORWARD and pol(GATE) == FORWARD
    assert json.loads(json.dumps(pol.to_dict()))["inputs"] == {str(START): FORWARD, str(GATE): FORWARD}


def test_policy_outside_region(gate):
    *_, g0, _, spec = gate
    win0 = solve_Psi(g0, spec)
    pol = synth_controller(g0, spec, win0)
    with pytest.raises(NotWinning):
        pol(START)
    with pytest.raises(NotWinning):
        pol.vertex_move(START)
    with pytest.raises(NotWinning):
        synth_controller(g0, spec, win0 | {START})


@given(st.integers(0, 100_000))
def test_policy_wins_on_random_abstract_games(seed):
    rng = random.Random(seed)
    tab = random_table(rng, rng.randint(2, 7), rng.randint(1, 3), n_absorbing=rng.randint(0, 2))
    g, spec = build_abstract_game(tab, {rng.randrange(tab.n_cells)})
    win0 = solve_Psi(g, spec)
    pol = synth_controller(g, spec, win0)
    for v in win0:
        assert check_policy(g, spec, pol.moves, v)
    assert set(pol.inputs) == {s for s in win0 if s < tab.n_cells and s not in tab.absorbing}


@given(st.integers(0, 100_000))
def test_policy_wins_on_random_games(seed):
    g, spec = random_fair_buchi_game(random.Random(seed), n_max=10)
    win0 = solve_Psi(g, spec)
    pol = synth_controller(g, spec, win0)
    for v in win0:
        assert check_policy(g, spec, pol.moves, v)


def test_rank_overflow_is_reported():
    # a chain of P0 vertices needing rank 2 under a range of 0
    g = make_game([P0, P0, P0], [(0, 1), (1, 2), (2, 2)])
    with pytest.raises(RangeTooSmall):
        solve_psi(g, Spec(BUCHI, {0}), L=0)


def test_fixpoint_flavor_guard():
    g, spec = random_fair_buchi_game(random.Random(0))
    with pytest.raises(FlavorMismatch):
        solve_psi(*dualize(g, spec))
