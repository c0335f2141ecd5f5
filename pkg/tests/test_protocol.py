import random

import pytest

from byzgrad.adversary import honest, random_corruption, tournament_liar
from byzgrad.assignment import make_cyclic, make_random_regular
from byzgrad.coding import build_code_context
from byzgrad.errors import AdversaryBudgetExceededError, InfeasibleStateError
from byzgrad.linalg import Matrix
from byzgrad.protocol import (
    Agreement,
    Conflict,
    MatchTree,
    detect_contradiction,
    form_groups,
    group_response,
    run_protocol,
)


def make_gradients(ctx, p, d, seed):
    rng = random.Random(seed)
    return Matrix(ctx.field, d, p, [rng.randrange(ctx.field.q) for _ in range(d * p)])


def full_sum(g):
    q = g.field.q
    return [sum(g.row_values(t)) % q for t in range(g.rows)]


# match tree -------------------------------------------------------------------


def test_tree_leaves_enumerate_samples_once():
    for p in range(1, 33):
        tree = MatchTree(p)
        assert tree.leaves() == list(range(p))


def test_tree_height_is_ceil_log2():
    import math

    for p in range(1, 33):
        tree = MatchTree(p)
        expected = 0 if p == 1 else math.ceil(math.log2(p))
        assert tree.height == expected
        assert max(tree.leaf_depth(i) for i in range(p)) == expected


def test_tree_children_partition_with_larger_first_half():
    tree = MatchTree(3)
    assert (tree.root.left.lo, tree.root.left.hi) == (0, 2)
    assert (tree.root.right.lo, tree.root.right.hi) == (2, 3)
    node = tree.root.left
    assert node.left.size == 1 and node.right.size == 1


def test_leftmost_leaf_is_deepest():
    for p in (3, 5, 6, 7, 9, 12):
        tree = MatchTree(p)
        assert tree.leaf_depth(0) == tree.height


# grouping ---------------------------------------------------------------------


def test_form_groups_small_example():
    plan = form_groups([0, 1, 2], r=1, s_t=1)
    assert plan.root == (0,)
    assert plan.satellites == (1, 2)
    assert plan.groups == ((0, 1), (0, 2))


def test_form_groups_no_budget_single_group():
    plan = form_groups([0, 1, 2, 3], r=1, s_t=0)
    assert plan.groups == ((0, 1),)


def test_form_groups_shared_root_structure():
    # n=7, s=2, u=1 gives r=4: 3 groups of size 5 sharing 4 workers
    plan = form_groups(range(7), r=4, s_t=2)
    assert len(plan.groups) == 3
    for g in plan.groups:
        assert len(g) == 5
    for i in range(3):
        for j in range(i + 1, 3):
            shared = set(plan.groups[i]) & set(plan.groups[j])
            assert shared == set(plan.root)


def test_form_groups_respects_order():
    plan = form_groups([0, 1, 2, 3], r=1, s_t=1, order=[3, 1, 0, 2])
    assert plan.root == (3,)
    assert plan.groups == ((1, 3), (0, 3))


def test_form_groups_infeasible():
    with pytest.raises(InfeasibleStateError):
        form_groups([0, 1], r=1, s_t=1)


# contradiction detection --------------------------------------------------------


def test_detect_agreement():
    out = detect_contradiction([[1, 2], [1, 2], [1, 2]])
    assert isinstance(out, Agreement)
    assert out.value == (1, 2)


def test_detect_conflict_lowest_pair():
    out = detect_contradiction([[1, 2], [1, 2], [9, 2]])
    assert isinstance(out, Conflict)
    assert (out.first, out.second) == (0, 2)
    assert out.coordinate == 0


def test_detect_conflict_first_coordinate():
    out = detect_contradiction([[1, 2, 3], [1, 5, 9]])
    assert (out.first, out.second, out.coordinate) == (0, 1, 1)


def test_group_response_exact_product():
    f = build_code_context(3, 1, 1, 7)
    z = Matrix.from_rows(f.field, [[1, 2, 3], [4, 5, 6]])
    assert group_response(z, [1, 0, 2]) == [(1 + 6) % 7, (4 + 12) % 7]


def test_corrupt_shared_worker_weighted_differently_per_group():
    # the shared member's error enters each group with a distinct coefficient,
    # so a single corrupt worker can never make two groups agree
    ctx = build_code_context(3, 1, 1, 7)
    a_mat = make_cyclic(3, 3, 2)
    g = Matrix.from_rows(ctx.field, [[2, 3, 4]])
    from byzgrad.coding import build_encoding_matrix, combining_vector, response_matrix

    enc = build_encoding_matrix(ctx, a_mat, [1, 1, 1])
    z = response_matrix(g, enc)
    truth = (2 + 3 + 4) % 7
    for err in range(1, 7):
        data = list(z.data)
        data[2] = (data[2] + err) % 7  # worker 3 sits in both groups below
        zt = Matrix(ctx.field, 1, 3, data)
        r1 = group_response(zt, combining_vector(ctx, (0, 2)))
        r2 = group_response(zt, combining_vector(ctx, (1, 2)))
        assert r1 != r2
        assert r1 != [truth] and r2 != [truth]


def test_oracle_counts_each_local_computation():
    from byzgrad.protocol import GradientOracle, local_compute

    g = Matrix.from_rows(build_code_context(3, 1, 1, 7).field, [[2, 3, 4], [5, 6, 0]])
    oracle = GradientOracle(g)
    assert local_compute(oracle, 1) == [3, 6]
    assert oracle.calls == 1
    local_compute(oracle, 0)
    assert oracle.calls == 2


# worked example ---------------------------------------------------------------


def test_worked_example_run():
    ctx = build_code_context(3, 1, 1, 7)
    a_mat = make_cyclic(3, 3, 2)
    g = Matrix.from_rows(ctx.field, [[2, 3, 4]])
    strat = tournament_liar([2], "consistent", seed=1)
    res = run_protocol(ctx, a_mat, g, strat)
    assert res.gradient == [(2 + 3 + 4) % 7]
    assert res.eliminated == (2,)
    tr = res.transcript
    assert tr.local_computations == 1
    assert tr.comm_overhead <= 6
    assert tr.rounds == 1
    assert tr.downlink_bits <= 2


def test_honest_run_costs_nothing():
    ctx = build_code_context(5, 2, 1, 101)
    a_mat = make_cyclic(5, 6, 3)
    g = make_gradients(ctx, 6, 2, seed=0)
    res = run_protocol(ctx, a_mat, g, honest())
    assert res.outcome == "agreement"
    assert res.gradient == full_sum(g)
    assert res.eliminated == ()
    assert res.transcript.local_computations == 0
    assert res.transcript.comm_overhead == 0
    assert res.transcript.downlink_bits == 0


def test_full_redundancy_skips_interaction():
    # u = s+1 decodes immediately by error correction
    ctx = build_code_context(6, 2, 3, 101)
    a_mat = make_random_regular(6, 4, 5, seed=3)
    g = make_gradients(ctx, 4, 1, seed=3)
    strat = random_corruption([1, 4], seed=3, persistence="always")
    res = run_protocol(ctx, a_mat, g, strat)
    assert res.outcome == "ecc"
    assert res.gradient == full_sum(g)
    tr = res.transcript
    assert (tr.rounds, tr.local_computations, tr.comm_overhead) == (0, 0, 0)


def test_single_sample_match_needs_no_communication():
    ctx = build_code_context(2, 1, 1, 11)
    a_mat = make_cyclic(2, 1, 2)
    g = Matrix.from_rows(ctx.field, [[5]])
    strat = random_corruption([0], seed=3, persistence="always")
    res = run_protocol(ctx, a_mat, g, strat)
    assert res.gradient == [5]
    assert res.eliminated == (0,)
    tr = res.transcript
    assert tr.comm_overhead == 0
    assert tr.local_computations == 1


def test_consistent_liar_forces_full_depth():
    # worker 0 holds sample 0, whose leaf sits at maximum depth
    ctx = build_code_context(4, 1, 1, 101)
    a_mat = make_cyclic(4, 8, 2)
    g = make_gradients(ctx, 8, 1, seed=9)
    strat = tournament_liar([0], "consistent", seed=9)
    res = run_protocol(ctx, a_mat, g, strat)
    assert res.gradient == full_sum(g)
    assert res.eliminated == (0,)
    tr = res.transcript
    levels = [ev for ev in tr.events if ev["event"] == "match_level"]
    assert len(levels) == MatchTree(8).height == 3
    assert tr.comm_overhead == (ctx.r + 2) * 3


def test_soundness_and_progress_many_runs():
    rng = random.Random(123)
    for trial in range(60):
        n = rng.randrange(4, 8)
        s = rng.randrange(1, 3)
        u = rng.randrange(1, min(s + 1, n - s) + 1)
        p = rng.choice([1, 3, 5, 8])
        if (s + u) * p < n or p + (s + u) - 1 < n:
            continue
        ctx = build_code_context(n, s, u, 101)
        a_mat = make_cyclic(n, p, s + u)
        g = make_gradients(ctx, p, rng.choice([1, 2]), seed=trial)
        controlled = rng.sample(range(n), s)
        kind = rng.choice(["always", "initial_only", "per_query_coin"])
        strat = random_corruption(controlled, seed=trial, persistence=kind)
        res = run_protocol(ctx, a_mat, g, strat)
        assert res.gradient == full_sum(g)
        assert set(res.eliminated) <= set(controlled)
        tr = res.transcript
        budget = s + 1 - u
        assert tr.local_computations <= budget
        assert tr.rounds <= budget
        # every conflict round eliminated someone
        conflicts = sum(ev["event"] == "conflict" for ev in tr.events)
        eliminations = sum(ev["event"] == "elimination" for ev in tr.events)
        assert conflicts == eliminations
        assert len(res.eliminated) >= conflicts


def test_shuffled_grouping_still_sound():
    ctx = build_code_context(6, 2, 1, 101)
    a_mat = make_cyclic(6, 6, 3)
    for seed in range(20):
        g = make_gradients(ctx, 6, 1, seed=seed)
        strat = random_corruption([1, 4], seed=seed, persistence="always")
        res = run_protocol(
            ctx, a_mat, g, strat,
            grouping="shuffled", grouping_rng=random.Random(seed),
        )
        assert res.gradient == full_sum(g)
        assert set(res.eliminated) <= {1, 4}


def test_budget_exceeded_detected():
    ctx = build_code_context(3, 1, 1, 101)
    a_mat = make_cyclic(3, 3, 2)
    g = Matrix.from_rows(ctx.field, [[7, 8, 9]])
    strat = random_corruption([1, 2], seed=0, persistence="always")
    with pytest.raises(AdversaryBudgetExceededError):
        run_protocol(ctx, a_mat, g, strat)


def test_transcript_structure():
    ctx = build_code_context(3, 1, 1, 7)
    a_mat = make_cyclic(3, 3, 2)
    g = Matrix.from_rows(ctx.field, [[2, 3, 4]])
    res = run_protocol(ctx, a_mat, g, tournament_liar([2], "consistent", seed=1))
    events = res.transcript.events
    assert events[0]["event"] == "start"
    assert events[-1]["event"] == "final"
    final = events[-1]
    assert final["local_computations"] == res.transcript.local_computations
    assert final["comm_overhead"] == res.transcript.comm_overhead
    assert final["eliminated"] == [3]
    # response sets follow their queries
    for i, ev in enumerate(events):
        if ev["event"] == "response_set":
            assert events[i - 1]["event"] == "query"
    # all indices are 1-based
    for ev in events:
        if ev["event"] == "elimination":
            assert all(w >= 1 for w in ev["workers"])
