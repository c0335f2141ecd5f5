import pytest

from byzgrad.assignment import (
    AssignmentMatrix,
    assignment_from_text,
    assignment_to_text,
    make_cyclic,
    make_fractional,
    make_random_regular,
    validate_regular,
)
from byzgrad.errors import InvalidParamsError


def test_cyclic_three_workers_two_replicas():
    a = make_cyclic(3, 3, 2)
    assert a.samples_of(0) == [0, 1]
    assert a.samples_of(1) == [1, 2]
    assert a.samples_of(2) == [0, 2]
    assert validate_regular(a, 2)


def test_cyclic_replication_one_is_permutation():
    a = make_cyclic(4, 4, 1)
    for j in range(4):
        assert a.samples_of(j) == [j]


def test_cyclic_column_and_row_sums():
    a = make_cyclic(5, 7, 3)
    assert all(a.column_sum(i) == 3 for i in range(7))
    assert all(a.row_sum(j) >= 1 for j in range(5))
    assert validate_regular(a, 3)


def test_cyclic_full_replication_all_ones():
    a = make_cyclic(4, 4, 4)
    assert all(all(row) for row in a.bits)


def test_cyclic_idle_worker_rejected():
    with pytest.raises(InvalidParamsError):
        make_cyclic(5, 1, 2)
    with pytest.raises(InvalidParamsError):
        make_cyclic(3, 3, 4)  # rho > n


def test_validate_regular_cases():
    fig = make_cyclic(3, 3, 2)
    assert validate_regular(fig, 2)
    assert not validate_regular(fig, 3)
    idle = AssignmentMatrix(3, 2, ((1, 1), (1, 1), (0, 0)))
    assert not validate_regular(idle, 2)


def test_fractional_two_groups():
    a = make_fractional(4, 4, 2)
    assert a.samples_of(0) == [0, 1]
    assert a.samples_of(1) == [0, 1]
    assert a.samples_of(2) == [2, 3]
    assert a.samples_of(3) == [2, 3]


def test_fractional_single_group_holds_everything():
    a = make_fractional(2, 6, 2)
    assert a.samples_of(0) == list(range(6))
    assert a.samples_of(1) == list(range(6))


def test_fractional_pad_rule():
    a = make_fractional(6, 9, 3)
    assert validate_regular(a, 3)
    sizes = {len(a.samples_of(j)) for j in range(6)}
    assert sizes == {4, 5}
    assert all(a.column_sum(i) == 3 for i in range(9))


def test_fractional_requires_divisibility():
    with pytest.raises(InvalidParamsError):
        make_fractional(5, 5, 2)
    with pytest.raises(InvalidParamsError):
        make_fractional(6, 1, 3)  # fewer samples than groups


def test_random_regular_is_regular():
    a = make_random_regular(5, 10, 3, seed=1)
    assert validate_regular(a, 3)


def test_random_regular_forced_single_column():
    a = make_random_regular(3, 1, 3, seed=0)
    assert a.bits == ((1,), (1,), (1,))


def test_random_regular_deterministic_under_seed():
    a = make_random_regular(6, 8, 3, seed=42)
    b = make_random_regular(6, 8, 3, seed=42)
    assert a == b
    c = make_random_regular(6, 8, 3, seed=43)
    assert a != c


def test_random_regular_infeasible_rejected():
    with pytest.raises(InvalidParamsError):
        make_random_regular(5, 1, 2, seed=0)


def test_random_regular_repairs_empty_rows_many_seeds():
    for seed in range(50):
        a = make_random_regular(7, 4, 2, seed=seed)
        assert validate_regular(a, 2)


def test_zero_set_size_is_n_minus_rho():
    for maker, args in (
        (make_cyclic, (5, 7, 3)),
        (make_fractional, (6, 9, 3)),
        (make_random_regular, (6, 8, 3, 7)),
    ):
        a = maker(*args)
        rho = 3
        for i in range(a.p):
            assert len(a.zero_set(i)) == a.n - rho


def test_text_round_trip_bit_exact():
    a = make_random_regular(6, 9, 4, seed=5)
    text = assignment_to_text(a, 4)
    first = text.splitlines()[0]
    assert first == "6 9 4"
    b, rho = assignment_from_text(text)
    assert rho == 4
    assert b == a
    assert assignment_to_text(b, rho) == text


def test_text_rejects_malformed():
    with pytest.raises(InvalidParamsError):
        assignment_from_text("")
    with pytest.raises(InvalidParamsError):
        assignment_from_text("2 2 1\n10\n")
    with pytest.raises(InvalidParamsError):
        assignment_from_text("2 2 1\n1x\n01\n")
