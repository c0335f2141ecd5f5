import random
from itertools import combinations

import pytest

from byzgrad.adversary import (
    honest,
    pick_attack_support,
    random_corruption,
    symmetrization,
    symmetrization_attack,
    tournament_liar,
)
from byzgrad.assignment import make_cyclic, make_random_regular
from byzgrad.coding import (
    build_code_context,
    build_decoding_matrix,
    build_encoding_matrix,
    combining_vector,
    response_matrix,
)
from byzgrad.errors import InvalidParamsError
from byzgrad.linalg import Matrix
from byzgrad.protocol import form_groups, group_response, run_protocol


def make_gradients(ctx, p, d, seed):
    rng = random.Random(seed)
    return Matrix(ctx.field, d, p, [rng.randrange(ctx.field.q) for _ in range(d * p)])


def full_sum(g):
    q = g.field.q
    return [sum(g.row_values(t)) % q for t in range(g.rows)]


# baseline strategies ------------------------------------------------------------


def test_honest_strategy_is_transparent():
    ctx = build_code_context(4, 1, 1, 101)
    a_mat = make_cyclic(4, 4, 2)
    g = make_gradients(ctx, 4, 1, seed=0)
    res = run_protocol(ctx, a_mat, g, honest())
    tr = res.transcript
    assert (tr.local_computations, tr.comm_overhead) == (0, 0)
    assert res.eliminated == ()
    assert res.gradient == full_sum(g)


def test_empty_controlled_set_behaves_honestly():
    ctx = build_code_context(4, 1, 1, 101)
    a_mat = make_cyclic(4, 4, 2)
    g = make_gradients(ctx, 4, 1, seed=1)
    res = run_protocol(ctx, a_mat, g, random_corruption([], seed=1))
    assert res.eliminated == ()
    assert res.transcript.comm_overhead == 0


def test_persistent_corruption_identified_within_budget():
    for seed in range(30):
        ctx = build_code_context(6, 2, 1, 101)
        a_mat = make_cyclic(6, 6, 3)
        g = make_gradients(ctx, 6, 1, seed=seed)
        strat = random_corruption([0, 3], seed=seed, persistence="always")
        res = run_protocol(ctx, a_mat, g, strat)
        assert res.gradient == full_sum(g)
        assert res.transcript.rounds <= ctx.s - (ctx.u - 1)
        assert set(res.eliminated) <= {0, 3}


def test_bad_persistence_rejected():
    with pytest.raises(InvalidParamsError):
        random_corruption([0], seed=0, persistence="sometimes")


def test_initial_only_corruption_pinned_by_commitments():
    # honest during the search, yet the committed initial response still
    # localizes to a leaf where the claim fails the local check
    caught = 0
    for seed in range(10):
        ctx = build_code_context(4, 1, 1, 101)
        a_mat = make_cyclic(4, 6, 2)
        g = make_gradients(ctx, 6, 1, seed=seed)
        strat = random_corruption([0], seed=seed, persistence="initial_only")
        res = run_protocol(ctx, a_mat, g, strat)
        assert res.gradient == full_sum(g)
        assert set(res.eliminated) <= {0}
        caught += bool(res.eliminated)
    assert caught >= 1  # worker 0 sits in round-one groups, so it does get caught


def test_strategy_history_grows_causally():
    ctx = build_code_context(3, 1, 1, 7)
    a_mat = make_cyclic(3, 3, 2)
    g = Matrix.from_rows(ctx.field, [[2, 3, 4]])
    strat = tournament_liar([2], "consistent", seed=1)
    run_protocol(ctx, a_mat, g, strat)
    kinds = [q.kind for q in strat.history]
    assert kinds[0] == "initial"
    assert all(k == "match" for k in kinds[1:])
    levels = [q.level for q in strat.history[1:]]
    assert levels == sorted(levels)


# tournament liar ------------------------------------------------------------------


def test_liar_empty_plan_caught_from_initial_commitment():
    ctx = build_code_context(4, 1, 1, 101)
    a_mat = make_cyclic(4, 5, 2)
    g = make_gradients(ctx, 5, 1, seed=2)
    strat = tournament_liar([1], "", seed=2)
    res = run_protocol(ctx, a_mat, g, strat)
    assert res.gradient == full_sum(g)
    assert res.eliminated == (1,)


def test_liar_inconsistent_plan_soundness():
    for seed in range(15):
        ctx = build_code_context(5, 2, 1, 101)
        a_mat = make_cyclic(5, 6, 3)
        g = make_gradients(ctx, 6, 1, seed=seed)
        strat = tournament_liar([0, 2], "inconsistent", seed=seed)
        res = run_protocol(ctx, a_mat, g, strat)
        assert res.gradient == full_sum(g)
        assert set(res.eliminated) <= {0, 2}
        assert len(res.eliminated) >= 1


def test_liar_per_level_script():
    ctx = build_code_context(4, 1, 1, 101)
    a_mat = make_cyclic(4, 8, 2)
    g = make_gradients(ctx, 8, 1, seed=4)
    strat = tournament_liar([2], "lie,honest", seed=4)
    res = run_protocol(ctx, a_mat, g, strat)
    assert res.gradient == full_sum(g)
    assert res.eliminated == (2,)


def test_liar_rejects_malformed_plan():
    with pytest.raises(InvalidParamsError):
        tournament_liar([0], "lie,maybe", seed=0)


# symmetrization --------------------------------------------------------------------


def test_attack_single_group_always_works():
    ctx = build_code_context(5, 2, 1, 101)
    plan = form_groups(range(5), ctx.r, ctx.s)
    dec = build_decoding_matrix(ctx, plan.groups[:1])
    member = plan.groups[0][0]
    err = symmetrization_attack(ctx, dec, [member], lam=1)
    assert err is not None
    assert group_response(err, dec.b.col_values(0)) == [1]


def test_attack_on_fewer_groups_fools_them():
    for n, s, u in ((5, 2, 1), (6, 2, 2), (7, 3, 1)):
        ctx = build_code_context(n, s, u, 101)
        plan = form_groups(range(n), ctx.r, s)
        groups = plan.groups[:s]
        dec = build_decoding_matrix(ctx, groups)
        support = pick_attack_support(dec)
        assert len(support) <= s
        err = symmetrization_attack(ctx, dec, support, lam=1)
        assert err is not None
        p = max(2, n // (s + u) + 1)
        a_mat = make_random_regular(n, p, s + u, seed=0)
        enc = build_encoding_matrix(ctx, a_mat, [1] * p)
        g = make_gradients(ctx, p, 1, seed=0)
        z = response_matrix(g, enc)
        corrupted = z + err
        responses = [group_response(corrupted, combining_vector(ctx, gr)) for gr in groups]
        assert all(resp == responses[0] for resp in responses)
        assert responses[0] != full_sum(g)


def test_attack_infeasible_against_full_grouping_exhaustive():
    for n, s, u in ((5, 2, 1), (6, 2, 2)):
        ctx = build_code_context(n, s, u, 101)
        plan = form_groups(range(n), ctx.r, s)
        dec = build_decoding_matrix(ctx, plan.groups)
        for support in combinations(range(n), s):
            assert symmetrization_attack(ctx, dec, support, lam=1) is None


def test_attack_rejects_zero_offset():
    ctx = build_code_context(5, 2, 1, 101)
    plan = form_groups(range(5), ctx.r, ctx.s)
    dec = build_decoding_matrix(ctx, plan.groups[:1])
    with pytest.raises(InvalidParamsError):
        symmetrization_attack(ctx, dec, [0], lam=0)


def test_symmetrization_strategy_never_corrupts_output():
    for n, s, u, p in ((5, 2, 1, 6), (6, 2, 2, 6), (4, 1, 1, 4), (7, 3, 2, 8)):
        ctx = build_code_context(n, s, u, 101)
        a_mat = make_cyclic(n, p, s + u)
        for seed in range(5):
            g = make_gradients(ctx, p, 1, seed=seed)
            strat = symmetrization(seed=seed)
            res = run_protocol(ctx, a_mat, g, strat)
            assert res.gradient == full_sum(g)
            assert set(res.eliminated) <= set(strat.controlled)


def test_symmetrization_hides_from_targeted_groups_round_one():
    ctx = build_code_context(5, 2, 1, 101)
    a_mat = make_cyclic(5, 6, 3)
    g = make_gradients(ctx, 6, 1, seed=7)
    strat = symmetrization(seed=7)
    res = run_protocol(ctx, a_mat, g, strat)
    decode = next(ev for ev in res.transcript.events if ev["event"] == "decode")
    values = decode["values"]
    # the first s groups decode the same wrong value; the last disagrees
    assert values[0] == values[1]
    assert values[2] != values[0]
    assert res.gradient == full_sum(g)
