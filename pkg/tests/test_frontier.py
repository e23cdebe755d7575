"""Frontier process: growth rules, sink completion, boundary diagnostics."""

from fractions import Fraction

import numpy as np
import pytest

import rotorwalk as rw

HALF = Fraction(1, 2)


def test_first_injection_parks_at_root(delta3):
    arena = rw.make_arena(delta3, rw.RotorMatrix.uniform(3), seed=0)
    state = rw.build_frontier(arena, 1)
    assert state.members.tolist() == [0]
    assert state.sink_count == 0
    assert state.realized_height == 0


def test_second_injection_splits_the_root(delta3):
    # the collision at the root re-activates the parked particle; at least
    # one of the two parks at a child one step later
    for seed in range(10):
        arena = rw.make_arena(delta3, rw.RotorMatrix.uniform(3), seed=seed)
        state = rw.build_frontier(arena, 2)
        members = set(state.members.tolist())
        assert 0 not in members
        children = set(arena.children(0))
        assert members <= children
        assert len(members & children) >= 1
        assert state.frontier_size + state.sink_count == 2


def test_conservation_after_every_injection(mixed12):
    arena = rw.make_arena(mixed12, rw.RotorMatrix.uniform(2), seed=3)
    state = rw.new_frontier_state(arena)
    for n in range(1, 200):
        state = rw.frontier_step(arena, state)
        assert state.n == n
        assert state.frontier_size + state.sink_count == n
        assert state.frontier_size == state.members.size


def test_members_hold_untouched_subtrees(delta3):
    # a parked vertex has never been passed through, so nothing below it is
    # visited and its own rotor trace stops at it
    arena = rw.make_arena(delta3, rw.RotorMatrix.uniform(3), seed=5)
    state = rw.build_frontier(arena, 300)
    for m in state.members.tolist():
        kids = arena.children(m)
        if kids is None:
            continue
        for c in kids:
            assert not arena._visited[c]


def brute_force_fill(arena, members, rh):
    """Path-enumeration oracle for the sink completion."""
    members = set(members)
    fill = []
    stack = [(0, 0 in members)]
    while stack:
        x, blocked = stack.pop()
        if blocked:
            continue
        if x in members:
            continue
        if arena.depth_of(x) == rh:
            fill.append(x)
            continue
        for c in arena.children(x) or ():
            stack.append((c, False))
    return sorted(fill)


def test_complete_sink_of_single_member():
    arena = rw.make_arena(rw.OffspringDistribution.delta(3),
                          rw.RotorMatrix.uniform(3), seed=1)
    state = rw.build_frontier(arena, 1)
    sink = rw.complete_sink(arena, state)
    assert sink.tolist() == [0]


def test_complete_sink_antichain_has_no_fill(delta2):
    # once the members cut every root path at the realized height, the fill
    # is empty: S equals the member set
    arena = rw.make_arena(delta2, rw.RotorMatrix.uniform(2), seed=2)
    state = rw.build_frontier(arena, 3)
    # drive until every member sits at depth >= 1 and paths are cut
    n = 3
    while True:
        members = state.members
        depths = arena._depth[members]
        if members.size and depths.min() >= state.realized_height:
            break
        n += 1
        state = rw.extend_frontier(arena, state, n)
        if n > 500:
            pytest.skip("no uniform-level frontier reached in 500 injections")
    sink = rw.complete_sink(arena, state)
    assert set(sink.tolist()) == set(state.members.tolist())


def test_complete_sink_matches_path_enumeration(mixed12):
    for seed in range(8):
        arena = rw.make_arena(mixed12, rw.RotorMatrix.uniform(2), seed=seed)
        state = rw.build_frontier(arena, 40)
        sink = rw.complete_sink(arena, state)
        members = state.members.tolist()
        fill_expected = brute_force_fill(arena, members, state.realized_height)
        fill_actual = sorted(set(sink.tolist()) - set(members))
        assert fill_actual == fill_expected
        for f in fill_actual:
            assert not arena._visited[f]


def test_frontier_escape_consistency(delta3):
    # running the same n particles as one legal sequence against the
    # completed sink reproduces the frontier: one particle per member,
    # nothing on the fill, the rest at the sink
    q = rw.RotorMatrix.uniform(3)
    for seed in (0, 4):
        arena = rw.make_arena(delta3, q, seed=seed)
        state = rw.build_frontier(arena, 400)
        sink = rw.complete_sink(arena, state)
        members = set(state.members.tolist())
        fill = set(sink.tolist()) - members
        arena.reset_rotors()
        out = rw.run_legal_sequence(arena, sink, {0: 400}, scheduler="random:17")
        assert all(out.absorbed[m] == 1 for m in members)
        assert all(out.absorbed[f] == 0 for f in fill)
        assert out.sink_count == state.sink_count


def test_proportion_estimate_holds(mixed12):
    for seed in range(5):
        arena = rw.make_arena(mixed12, rw.RotorMatrix.uniform(2), seed=seed)
        state = rw.build_frontier(arena, 2000)
        sink = rw.complete_sink(arena, state)
        sol = rw.solve_hitting(arena, sink)
        k_const = rw.k_constant(sol)
        assert abs(sol.root_value - state.sink_count / 2000) <= k_const / 2000


def test_growth_on_supercritical(delta3):
    arena = rw.make_arena(delta3, rw.RotorMatrix.uniform(3), seed=9)
    state = rw.build_frontier(arena, 1 << 12)
    ratio = state.frontier_size / state.n
    assert ratio > 0.1  # run-reported growth constant stays well positive
    assert state.realized_height / state.n < 1


def test_realized_height_sublinear(mixed12):
    arena = rw.make_arena(mixed12, rw.RotorMatrix.uniform(2), seed=10)
    state = rw.build_frontier(arena, 4096)
    assert state.realized_height / state.n < 1


def test_path_boundary_ratio_binary(delta2):
    arena = rw.make_arena(delta2, rw.RotorMatrix.uniform(2), seed=11)
    arena.truncate_view(9)
    path = [0]
    while len(path) < 8:
        path.append(arena.children(path[-1])[0])
    L = len(path)
    assert rw.path_boundary_ratio(arena, path) == pytest.approx((L + 1) / L)


def test_path_boundary_ratio_unary():
    arena = rw.make_arena(rw.OffspringDistribution.delta(1),
                          rw.RotorMatrix.uniform(1), seed=12)
    arena.truncate_view(7)
    path = [0]
    while len(path) < 6:
        path.append(arena.children(path[-1])[0])
    assert rw.path_boundary_ratio(arena, path) == pytest.approx(1 / len(path))


def test_path_boundary_ratio_ternary(delta3):
    arena = rw.make_arena(delta3, rw.RotorMatrix.uniform(3), seed=13)
    arena.truncate_view(11)
    path = [0]
    while len(path) < 10:
        path.append(arena.children(path[-1])[1])
    assert rw.path_boundary_ratio(arena, path) == pytest.approx(2.1)


def test_path_boundary_ratio_validates_paths(delta2):
    arena = rw.make_arena(delta2, rw.RotorMatrix.uniform(2), seed=14)
    arena.truncate_view(3)
    c0, c1 = arena.children(0)
    with pytest.raises(rw.ValidationError):
        rw.path_boundary_ratio(arena, [c0, c1])
    with pytest.raises(rw.ValidationError):
        rw.path_boundary_ratio(arena, [0, arena.children(c0)[0]])
    with pytest.raises(rw.ValidationError):
        rw.path_boundary_ratio(arena, [])


def test_frontier_checkpointing_matches_fresh_run(delta3):
    q = rw.RotorMatrix.uniform(3)
    a1 = rw.make_arena(delta3, q, seed=15)
    s1 = rw.build_frontier(a1, 50)
    s1 = rw.extend_frontier(a1, s1, 300)
    a2 = rw.make_arena(delta3, q, seed=15)
    s2 = rw.build_frontier(a2, 300)
    assert s1.members.tolist() == s2.members.tolist()
    assert s1.sink_count == s2.sink_count
    assert s1.realized_height == s2.realized_height


def test_extend_cannot_shrink(delta3):
    arena = rw.make_arena(delta3, rw.RotorMatrix.uniform(3), seed=16)
    state = rw.build_frontier(arena, 10)
    with pytest.raises(rw.ValidationError):
        rw.extend_frontier(arena, state, 5)
