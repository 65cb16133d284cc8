import pytest
from hypothesis import given, settings, strategies as st

from trustboost.chain import Crash
from trustboost.lite import (
    MalformedTransaction, Outpoint, build_lite, conflicts, exhaustive_weak_agreement, genesis,
    honest_termination_delay, lite_check, lite_submit, lite_valid, reveal_policy, utxo_tx, validate,
)

G0 = Outpoint("genesis", 0)


def test_validate_rejects_malformed():
    with pytest.raises(MalformedTransaction):
        validate(utxo_tx("t", [], [("bob", 1)]))
    with pytest.raises(MalformedTransaction):
        validate(utxo_tx("t", [G0, G0], [("bob", 1)]))


def test_conflicts_share_an_input():
    a = utxo_tx("a", [G0], [("bob", 1)])
    b = utxo_tx("b", [G0], [("carol", 1)])
    c = utxo_tx("c", [Outpoint("genesis", 1)], [("dave", 1)])
    assert conflicts(a, b) and not conflicts(a, c) and not conflicts(a, a)


def test_honest_chains_keep_first_seen_spend():
    api = build_lite(4, mint=genesis("alice"))
    a = utxo_tx("a", [G0], [("bob", 1)])
    b = utxo_tx("b", [G0], [("carol", 1)])
    assert lite_submit(api, a, 0) == [True] * 4
    assert lite_submit(api, b, 0) == [False] * 4
    api.run(5, stop_when_idle=False)
    assert lite_check(api, "a", "p") and not lite_check(api, "b", "p")


def test_child_needs_checked_parent():
    api = build_lite(4, mint=genesis("alice"))
    a = utxo_tx("a", [G0], [("bob", 1)])
    b = utxo_tx("b", [a.outpoint(0)], [("carol", 1)])
    lite_submit(api, b, 0)
    api.run(5, stop_when_idle=False)
    assert not lite_check(api, "b", "p")
    bad = utxo_tx("bad", [Outpoint("a", 3)], [("x", 1)])
    api.register(a)
    assert not lite_valid(api, bad, "p")


def test_dangling_input_is_invalid():
    api = build_lite(4, mint=genesis("alice"))
    orphan = utxo_tx("o", [Outpoint("nowhere", 0)], [("x", 1)])
    lite_submit(api, orphan, 0)
    api.run(5, stop_when_idle=False)
    assert not lite_check(api, "o", "p")


def test_termination_within_two_intervals_with_a_crashed_chain():
    for bi in (1, 2, 5):
        delays = honest_termination_delay(4, bi, faulty={3: Crash(0)})
        assert all(d is not None and d <= 2 * bi for d in delays.values()), (bi, delays)


def test_exhaustive_search_clean_and_negative_control_bites():
    assert exhaustive_weak_agreement(4, horizon=6).ok
    weak = exhaustive_weak_agreement(4, horizon=6, threshold=2)
    assert not weak.ok


@settings(max_examples=30)
@given(st.lists(st.tuples(st.sampled_from(["x", "y"]), st.sampled_from(["a", "b"]), st.integers(0, 8)),
                max_size=6),
       st.integers(0, 3))
def test_check_is_monotone_and_weakly_agreeing(reveals, byz):
    a = utxo_tx("a", [G0], [("bob", 1)])
    b = utxo_tx("b", [G0], [("carol", 1)])
    groups = {"x": "X", "y": "Y"}
    shown = {"X": [], "Y": []}
    for p, t, at in reveals:
        shown[groups[p]].append((t, at))
    api = build_lite(4, behaviors={byz: reveal_policy(groups, shown)}, mint=genesis("alice"))
    api.register(b)
    honest = [c for c in range(4) if c != byz]
    lite_submit(api, a, 0, chains=honest[:2])
    lite_submit(api, b, 0, chains=honest[2:])
    seen = {p: set() for p in groups}
    for now in range(12):
        api.sim.step(now)
        for p in groups:
            now_true = {t for t in ("a", "b") if lite_check(api, t, p, now)}
            assert seen[p] <= now_true
            seen[p] = now_true
    assert not (any("a" in s for s in seen.values()) and any("b" in s for s in seen.values()))
