import itertools

import pytest
from hypothesis import given, strategies as st

from trustboost.core import (
    ConfigError, TxFactory, binary, check_agreement, check_weak_agreement, max_faults, quorums_for,
)


@pytest.mark.parametrize("m,vote,check", [(1, 1, 1), (2, 2, 1), (3, 3, 2), (4, 3, 2), (7, 5, 3), (10, 7, 4)])
def test_quorum_spot_values(m, vote, check):
    q = quorums_for(m, max_faults(m))
    assert (q.vote_threshold, q.check_threshold) == (vote, check)
    assert q.lite_threshold == vote


def test_quorums_reject_bad_sizes():
    with pytest.raises(ValueError):
        quorums_for(0, 0)
    with pytest.raises(ValueError):
        quorums_for(4, -1)


@given(st.integers(1, 50))
def test_two_vote_quorums_share_an_honest_chain(m):
    f = max_faults(m)
    q = quorums_for(m, f)
    assert 2 * q.vote_threshold - m >= f + 1


@given(st.integers(1, 50))
def test_check_quorum_contains_an_honest_chain(m):
    q = quorums_for(m, max_faults(m))
    assert q.check_threshold >= max_faults(m) + 1
    # honest chains alone can always reach a vote quorum
    assert m - max_faults(m) >= q.vote_threshold


def test_abc_threshold_values():
    assert [quorums_for(m, max_faults(m)).abc_threshold for m in range(1, 11)] == [1, 2, 2, 3, 4, 4, 5, 6, 6, 7]
    assert quorums_for(3, 1).abc_threshold == 2


@given(st.integers(1, 40), st.data())
def test_abc_threshold_blocks_double_quorum(m, data):
    f = data.draw(st.integers(0, max_faults(m)))
    t = quorums_for(m, f).abc_threshold
    # honest objects split h0/h1; faulty ones may back both sides
    for h0 in range(m - f + 1):
        h1 = m - f - h0
        assert not (h0 + f >= t and h1 + f >= t)
    assert t <= m - f


def test_binary():
    assert binary(0) == 0 and binary(1) == 1
    with pytest.raises(ValueError):
        binary(2)


def test_tx_factory_is_deterministic():
    a, b = TxFactory(), TxFactory()
    assert [a.make(("p", i)).id for i in range(3)] == [b.make(("p", i)).id for i in range(3)]
    assert len({a.make("x").id, a.make("x").id}) == 2


ids = st.lists(st.sampled_from("abcde"), max_size=6)


@given(st.lists(ids, min_size=1, max_size=5))
def test_agreement_is_permutation_invariant(views):
    base = check_agreement(views)
    for perm in itertools.islice(itertools.permutations(views), 24):
        assert check_agreement(list(perm)) == base


@given(ids, ids)
def test_agreement_matches_prefix_relation(a, b):
    n = min(len(a), len(b))
    assert check_agreement([a, b]).ok == (a[:n] == b[:n])


def test_agreement_reports_first_divergence():
    v = check_agreement([["a", "b", "c"], ["a", "x"], ["a", "b", "y"]])
    assert not v.ok and v.index == 1 and v.conflict == ("b", "x")


def test_weak_agreement():
    clash = lambda a, b: {a, b} == {"t1", "t2"}
    assert check_weak_agreement({"p": ["t1"], "q": ["t1", "t3"]}, clash).ok
    bad = check_weak_agreement({"p": ["t1"], "q": ["t2"]}, clash)
    assert not bad.ok and bad.conflict == ("t1", "t2")
    assert bad.commit_set_difference == frozenset({"t1", "t2"})


def test_config_error_is_value_error():
    assert issubclass(ConfigError, ValueError)
