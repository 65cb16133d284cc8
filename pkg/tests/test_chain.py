import pytest

from trustboost.chain import (
    Crash, Face, LedgerObject, Scripted, SplitBrain, local_check, local_read, local_submit, make_chains,
    name_service, step_block,
)
from trustboost.core import Transaction


def tx(i, payload=None, who=0):
    return Transaction(f"t{i}", payload, who)


def test_commit_waits_for_next_block_boundary():
    obj = LedgerObject(0, block_interval=3)
    assert local_submit(obj, tx(1), 1)
    for now in range(6):
        step_block(obj, now)
        assert local_check(obj, "t1", now=now) == (now >= 6)


def test_duplicates_and_crashes_are_ignored():
    obj = LedgerObject(0)
    assert local_submit(obj, tx(1), 0)
    assert not local_submit(obj, tx(1), 0)
    dead = LedgerObject(1, behavior=Crash(0))
    assert dead.crashed and not local_submit(dead, tx(1), 0)


def test_same_tick_order_is_by_submitter_then_order():
    obj = LedgerObject(0)
    local_submit(obj, tx("b", who="zed"), 0)
    local_submit(obj, tx("a2", who="amy"), 0, order=2)
    local_submit(obj, tx("a1", who="amy"), 0, order=1)
    step_block(obj, 1)
    assert obj.committed_ids() == ["ta1", "ta2", "tb"]


def test_name_service_and_read():
    obj = LedgerObject(0)
    local_submit(obj, tx(1, ("buy", "a.com", "alice")), 0)
    local_submit(obj, tx(2, ("transfer", "a.com", "alice", "bob")), 0)
    step_block(obj, 1)
    view = local_read(obj)
    assert view.latest_committed == "t2" and view.state_snapshot == {"a.com": "bob"}


def test_name_service_ignores_junk():
    state = {}
    for p in (None, (), ("buy", "x"), ("unknown", 1, 2)):
        name_service(state, p)
    assert state == {}


def test_split_brain_answers_per_group():
    sb = SplitBrain({"x": "X", "y": "Y"}, {"X": Face((("t1", 2),), {"v": 1}), "Y": Face()})
    obj = LedgerObject(0, behavior=sb)
    assert obj.byzantine
    assert not local_check(obj, "t1", "x", 1)
    assert local_check(obj, "t1", "x", 2)
    assert not local_check(obj, "t1", "y", 5)
    assert local_read(obj, "x", 3).state_snapshot == {"v": 1}


def test_scripted_answers():
    obj = LedgerObject(0, behavior=Scripted({"check": "true", "read": "blank", "submit": "drop"}))
    assert local_check(obj, "anything")
    assert local_read(obj).latest_committed is None
    assert not local_submit(obj, tx(1), 0)


def test_make_chains_with_per_chain_intervals():
    chains = make_chains(3, {1: Crash(0)}, {2: 5})
    assert [c.block_interval for c in chains] == [1, 1, 5]
    assert chains[1].crashed


def test_block_interval_must_be_positive():
    with pytest.raises(ValueError):
        LedgerObject(0, block_interval=0)
