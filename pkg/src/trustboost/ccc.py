"""Cross-chain communication: authenticated, reliable per-link channels.

Delivery timing follows partial synchrony: after GST every message between
honest chains lands within ``delta`` ticks; before GST the adversary may add
delay, but anything in flight at GST still lands by ``GST + delta``.
Handlers stage outgoing messages in a :class:`MessageQueue` that is flushed
atomically when the handler returns.
"""

from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Iterable

from .core import ChainId, ConfigError, Tick


class Kind(str, Enum):
    PROPOSE = "propose"
    VOTE = "vote"
    ECHO = "echo"
    KEY1 = "key1"
    ABORT = "abort"
    PING = "ping"
    RAW = "raw"


CARRIES_TX = {Kind.PROPOSE, Kind.VOTE, Kind.ECHO, Kind.KEY1}


@dataclass(frozen=True)
class CccMessage:
    src: ChainId
    dst: ChainId
    kind: Kind
    view: int | None = None
    body: Any = None
    slot: int | None = None

    def __post_init__(self) -> None:
        if self.kind in (Kind.PROPOSE, Kind.VOTE) and self.body is None:
            raise ValueError(f"{self.kind.value} must carry a transaction")
        if self.kind is Kind.ABORT and self.view is None:
            raise ValueError("abort must carry a view")

    @property
    def tx_id(self) -> str | None:
        return getattr(self.body, "id", None)


@dataclass(frozen=True)
class SelfDelivery:
    """Returned instead of staging a message a chain addressed to itself."""

    msg: CccMessage


class MessageQueue:
    """Outgoing messages accumulated during one handler invocation."""

    def __init__(self, owner: ChainId, m: int) -> None:
        self.owner = owner
        self.m = m
        self.staged: list[CccMessage] = []

    def __len__(self) -> int:
        return len(self.staged)

    def drain(self) -> list[CccMessage]:
        out, self.staged = self.staged, []
        return out


def ccc_send(queue: MessageQueue, msg: CccMessage) -> SelfDelivery | None:
    if msg.src != queue.owner:
        raise ConfigError(f"chain {queue.owner} cannot send as chain {msg.src}")
    if not 0 <= msg.dst < queue.m:
        raise ConfigError(f"destination chain {msg.dst} out of range [0, {queue.m})")
    if msg.dst == msg.src:
        return SelfDelivery(msg)
    queue.staged.append(msg)
    return None


@dataclass(frozen=True)
class SynchronyConfig:
    gst: Tick = 0
    delta: int = 3
    adversary_delay: Callable[[CccMessage, Tick], int] | None = None

    def __post_init__(self) -> None:
        if self.delta < 1:
            raise ValueError("delta must be >= 1")
        if self.gst < 0:
            raise ValueError("gst must be >= 0")

    def latest_delivery(self, sent_at: Tick) -> Tick:
        return max(self.gst, sent_at) + self.delta


@dataclass
class InFlight:
    msg: CccMessage
    sent_at: Tick
    deliver_at: Tick
    seq: int
    batch: int


class Trace:
    """Line-oriented event log: one dict per send / deliver / drop / protocol event."""

    def __init__(self) -> None:
        self.rows: list[dict] = []

    def emit(self, ev: str, tick: Tick, **fields: Any) -> None:
        row = {"ev": ev, "tick": tick}
        row.update(fields)
        self.rows.append(row)

    def msg(self, ev: str, tick: Tick, msg: CccMessage, **extra: Any) -> None:
        self.emit(ev, tick, src=msg.src, dst=msg.dst, kind=msg.kind.value,
                  view=msg.view, slot=msg.slot, tx=msg.tx_id, **extra)


class Channel:
    """All ``m*(m-1)`` directed links plus the relayer that delivers on them."""

    def __init__(self, m: int, sync: SynchronyConfig, rng: random.Random | int = 0,
                 trace: Trace | None = None) -> None:
        self.m = m
        self.sync = sync
        self.rng = rng if isinstance(rng, random.Random) else random.Random(rng)
        self.trace = trace if trace is not None else Trace()
        self.links: dict[tuple[int, int], list[InFlight]] = defaultdict(list)
        self._last_deliver: dict[tuple[int, int], Tick] = {}
        self._seq = 0
        self._batch = 0
        self.sent: dict[tuple[int, int], list[CccMessage]] = defaultdict(list)
        self.delivered: dict[tuple[int, int], list[CccMessage]] = defaultdict(list)
        self.violations: list[str] = []
        self._batch_sizes: dict[tuple[int, int], int] = {}

    def in_flight(self) -> int:
        return sum(len(q) for q in self.links.values())

    def in_flight_between(self, chains: Iterable[int]) -> int:
        cs = set(chains)
        return sum(len(q) for (s, d), q in self.links.items() if s in cs and d in cs)

    def flush(self, staged: list[CccMessage], now: Tick) -> None:
        """Assign delivery ticks to one handler's batch and enqueue it.

        Messages of a batch that share a destination share one delivery
        tick, so no receiver can observe part of a batch.
        """
        if not staged:
            return
        self._batch += 1
        batch = self._batch
        by_dst: dict[int, list[CccMessage]] = defaultdict(list)
        for msg in staged:
            if not 0 <= msg.dst < self.m or msg.dst == msg.src:
                raise ConfigError(f"illegal link {msg.src}->{msg.dst}")
            by_dst[msg.dst].append(msg)
        sync = self.sync
        for dst in sorted(by_dst):
            group = by_dst[dst]
            src = group[0].src
            base = self.rng.randint(1, sync.delta)
            extra = 0
            if now < sync.gst and sync.adversary_delay is not None:
                extra = max(max(0, int(sync.adversary_delay(x, now))) for x in group)
            at = min(now + base + extra, sync.latest_delivery(now))
            link = (src, dst)
            at = max(at, self._last_deliver.get(link, 0))
            self._last_deliver[link] = at
            self._batch_sizes[(batch, dst)] = len(group)
            for msg in group:
                self._seq += 1
                self.links[link].append(InFlight(msg, now, at, self._seq, batch))
                self.sent[link].append(msg)
                self.trace.msg("send", now, msg, deliver_at=at)

    def due(self, now: Tick) -> list[list[InFlight]]:
        """Pop everything due at ``now``, grouped per (batch, destination).

        Groups are ordered by (deliver_at, src, dst, link sequence).
        """
        out: list[InFlight] = []
        for link in sorted(self.links):
            q = self.links[link]
            i = 0
            while i < len(q) and q[i].deliver_at <= now:
                i += 1
            if i:
                out.extend(q[:i])
                del q[:i]
        out.sort(key=lambda e: (e.deliver_at, e.msg.src, e.msg.dst, e.seq))
        groups: list[list[InFlight]] = []
        for e in out:
            if groups and groups[-1][0].batch == e.batch and groups[-1][0].msg.dst == e.msg.dst:
                groups[-1].append(e)
            else:
                groups.append([e])
        return groups

    def advance(self, now: Tick, dispatch: Callable[[int, list[CccMessage], Tick], list[CccMessage]],
                is_down: Callable[[int], bool] = lambda _c: False) -> list[list[CccMessage]]:
        """Deliver every due group; each handler runs to completion and its
        staged batch is flushed before the next group is dispatched."""
        dispatched = []
        for group in self.due(now):
            first = group[0]
            dst = first.msg.dst
            self._check_group(group, now)
            if is_down(dst):
                for e in group:
                    self.trace.msg("drop", now, e.msg, reason="crashed")
                continue
            msgs = [e.msg for e in group]
            for e in group:
                self.delivered[(e.msg.src, dst)].append(e.msg)
                self.trace.msg("deliver", now, e.msg, sent_at=e.sent_at)
            staged = dispatch(dst, msgs, now)
            self.flush(staged, now)
            dispatched.append(msgs)
        return dispatched

    def _check_group(self, group: list[InFlight], now: Tick) -> None:
        sync = self.sync
        for e in group:
            bound = max(sync.gst - e.sent_at, 0) + sync.delta
            if e.deliver_at - e.sent_at > bound or e.deliver_at != now:
                self.violations.append(
                    f"synchrony: {e.msg.src}->{e.msg.dst} sent {e.sent_at} delivered {now} bound {bound}")
        expected = self._batch_sizes.pop((group[0].batch, group[0].msg.dst), None)
        if expected != len(group):
            self.violations.append(f"flush atomicity: batch {group[0].batch} split ({len(group)}/{expected})")


def schedule_flush(channel: Channel, staged: list[CccMessage], now: Tick) -> None:
    channel.flush(staged, now)


def advance(channel: Channel, now: Tick, dispatch, is_down=lambda _c: False):
    return channel.advance(now, dispatch, is_down)
