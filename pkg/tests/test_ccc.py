import random

import pytest
from hypothesis import given, strategies as st

from trustboost.ccc import Channel, CccMessage, Kind, MessageQueue, SelfDelivery, SynchronyConfig, ccc_send
from trustboost.core import ConfigError, Transaction

TX = Transaction("t")


def test_self_send_bypasses_channel():
    q = MessageQueue(1, 4)
    out = ccc_send(q, CccMessage(1, 1, Kind.VOTE, 0, TX))
    assert isinstance(out, SelfDelivery) and len(q) == 0


def test_cannot_forge_sender_or_leave_range():
    q = MessageQueue(1, 4)
    with pytest.raises(ConfigError):
        ccc_send(q, CccMessage(2, 0, Kind.VOTE, 0, TX))
    with pytest.raises(ConfigError):
        ccc_send(q, CccMessage(1, 4, Kind.VOTE, 0, TX))


def test_message_shape_checks():
    with pytest.raises(ValueError):
        CccMessage(0, 1, Kind.PROPOSE, 0)
    with pytest.raises(ValueError):
        CccMessage(0, 1, Kind.ABORT)


def test_synchrony_config_validation():
    with pytest.raises(ValueError):
        SynchronyConfig(0, 0)
    with pytest.raises(ValueError):
        SynchronyConfig(-1, 1)


sends = st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(0, 30)), min_size=1, max_size=40)


@given(sends, st.integers(0, 25), st.integers(1, 5), st.integers(0, 2 ** 16), st.integers(0, 50))
def test_fifo_and_delta_bound(plan, gst, delta, seed, lag):
    sync = SynchronyConfig(gst, delta, lambda _m, _t: lag)
    ch = Channel(4, sync, random.Random(seed))
    delivered = []
    horizon = max(t for _, _, t in plan) + gst + delta + 1
    by_tick = {}
    for i, (s, d, t) in enumerate(plan):
        if s != d:
            by_tick.setdefault(t, []).append(CccMessage(s, d, Kind.ECHO, 0, Transaction(f"m{i}")))
    for now in range(horizon + 1):
        for msg in by_tick.get(now, []):
            ch.flush([msg], now)
        ch.advance(now, lambda dst, msgs, t: delivered.extend((t, m) for m in msgs) or [])
    assert ch.violations == []
    assert ch.in_flight() == 0
    for link, sent in ch.sent.items():
        assert ch.delivered[link] == sent
    sent_at = {m.body.id: t for t, ms in by_tick.items() for m in ms}
    for t, m in delivered:
        assert t - sent_at[m.body.id] <= max(gst - sent_at[m.body.id], 0) + delta


def test_batch_is_delivered_together():
    ch = Channel(3, SynchronyConfig(0, 5), random.Random(1))
    batch = [CccMessage(0, 1, Kind.ECHO, 0, Transaction(f"b{i}")) for i in range(4)]
    ch.flush(batch, 0)
    groups = []
    for now in range(7):
        groups.extend(ch.advance(now, lambda d, msgs, t: []))
    assert groups == [batch]
    assert ch.violations == []


def test_trace_rows_for_sends_and_delivers():
    ch = Channel(2, SynchronyConfig(0, 1), 0)
    ch.flush([CccMessage(0, 1, Kind.VOTE, 3, TX, slot=0)], 0)
    ch.advance(1, lambda d, msgs, t: [])
    evs = [(r["ev"], r["kind"], r["view"], r["tx"]) for r in ch.trace.rows]
    assert evs == [("send", "vote", 3, "t"), ("deliver", "vote", 3, "t")]
