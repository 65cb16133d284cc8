import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from trustboost.core import ConfigError, quorums_for
from trustboost.theory import (
    SCENARIOS, World, combiner_counterexample, passive_abc_quorum, passive_consensus_f0, random_passive_world,
    run_world, thm1_abc_worlds, thm2_worlds,
)


def test_passive_f0_exhaustive_small_m():
    for m in range(1, 5):
        for reads in itertools.product((0, 1), repeat=m):
            assert passive_consensus_f0(list(reads)) in (0, 1)
            if len(set(reads)) == 1:
                assert passive_consensus_f0(list(reads)) == reads[0]


def test_passive_abc_needs_threshold():
    q = quorums_for(4, 1)
    assert passive_abc_quorum([1, 1, 1, None], q) == 1
    assert passive_abc_quorum([1, 1, 0, None], q) is None


@given(st.integers(1, 12), st.data())
def test_passive_abc_never_returns_two_values(m, data):
    q = quorums_for(m, (m - 1) // 3)
    reads = data.draw(st.lists(st.sampled_from([0, 1, None]), min_size=m, max_size=m))
    out = passive_abc_quorum(reads, q)
    assert out is None or reads.count(out) >= q.abc_threshold


def test_world_validation():
    with pytest.raises(ConfigError):
        World("w", 2, 1, {0: 1}).validate()
    with pytest.raises(ConfigError):
        World("w", 2, 0, {0: 1, 1: 2}).validate()


def test_thm1_abc_world3_splits():
    v = run_world(thm1_abc_worlds()["world-3"], "passive_abc")
    assert v.committed == {"X": 1, "Y": 0} and not v.agreement_ok


def test_thm2_hybrid_splits():
    v = run_world(thm2_worlds()["world-3"], "active_bft")
    assert (v.committed["X"], v.committed["Y"]) == (1, 0)


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_builtin_scenarios_confirm(name):
    res = SCENARIOS[name]()
    assert res.expected_violation and res.confirmed, res.checks


def test_combiner_controls():
    none = combiner_counterexample(reveal="none")
    assert none.relative.termination_ok and none.lite.termination_ok
    clean = combiner_counterexample(with_conflict=False)
    assert clean.relative.committed == {"X": "tx", "Y": "tx"}


@settings(max_examples=60)
@given(st.integers(0, 10 ** 6))
def test_random_passive_abc_worlds_agree(seed):
    w = random_passive_world(random.Random(seed))
    assert run_world(w, "passive_abc").agreement_ok
