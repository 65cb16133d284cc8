import pytest
from hypothesis import given, settings, strategies as st

from trustboost.ccc import SynchronyConfig
from trustboost.chain import AbortSpam, Crash, EquivocatePropose, EquivocateVote
from trustboost.consensus import (
    EmptyLedger, build, closed_form_messages, count_kinds, honest_decided, tb_check, tb_read, tb_submit,
)
from trustboost.core import TxFactory, check_agreement
from trustboost.theory import adversarial_run


def run(m, behaviors=None, n_tx=1, seed=0, engine="view", sync=None, horizon=600):
    api = build(m, engine=engine, behaviors=behaviors, seed=seed, sync=sync)
    fac = TxFactory()
    txs = [fac.make(("buy", f"n{i}.com", f"c{i}"), f"c{i}") for i in range(n_tx)]
    for i, t in enumerate(txs):
        api.sim.at(1 + i, lambda now, t=t, e=i % m: tb_submit(api, t, e, now))
    api.run(horizon)
    return api, txs


@pytest.mark.parametrize("m", [4, 7, 10])
def test_honest_message_count_matches_closed_form(m):
    api, _ = run(m)
    kinds = count_kinds(api.sim.trace.rows)
    assert sum(kinds.values()) == closed_form_messages(m)
    assert set(kinds) == {"propose", "echo", "key1", "vote"}


def test_honest_run_commits_everywhere():
    api, txs = run(4, n_tx=3)
    dec = honest_decided(api)
    assert all(d == dec[0] for d in dec.values()) and len(dec[0]) == 3
    assert all(tb_check(api, t.id, "client") for t in txs)
    assert tb_read(api, "n0.com", "client") == "c0"
    assert api.sim.violations == []


def test_read_on_empty_ledger():
    api = build(4)
    with pytest.raises(EmptyLedger):
        tb_read(api, "k")


def test_submit_entry_must_exist():
    api = build(4)
    with pytest.raises(ValueError):
        tb_submit(api, TxFactory().make("x"), 9)


@pytest.mark.parametrize("behavior,views", [
    (Crash(0), 1), (EquivocatePropose(), 1), (EquivocateVote(), 0), (AbortSpam(), 0),
])
def test_attack_decision_view(behavior, views):
    target = 0 if isinstance(behavior, (Crash, EquivocatePropose)) else 1
    api, txs = run(4, {target: behavior})
    rows = [r for r in api.sim.trace.rows if r["ev"] == "decide" and r["chain"] != target]
    assert rows and min(r["view"] for r in rows if r["view"] >= 0) == views
    dec = honest_decided(api)
    assert check_agreement(list(dec.values())).ok
    assert all(txs[0].id in d for d in dec.values())


def test_skeleton_engine_commits_with_honest_chains():
    api, txs = run(4, engine="skeleton")
    assert all(tb_check(api, t.id) for t in txs)


def test_unknown_engine():
    with pytest.raises(ValueError):
        build(4, engine="nope")


@settings(max_examples=40)
@given(st.integers(0, 10 ** 6))
def test_view_engine_safe_and_live_under_random_adversaries(seed):
    r = adversarial_run(seed)
    assert r.ok, r


@settings(max_examples=15)
@given(st.integers(0, 10 ** 6), st.sampled_from([7, 10]))
def test_larger_committees_stay_safe(seed, m):
    r = adversarial_run(seed, m=m)
    assert r.ok, r


def test_pre_gst_delays_only_postpone():
    sync = SynchronyConfig(50, 3, lambda _m, _t: 30)
    api, txs = run(4, sync=sync, horizon=800)
    assert all(tb_check(api, t.id) for t in txs)
    assert api.sim.violations == []
