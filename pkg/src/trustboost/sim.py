"""Single-threaded discrete-event loop shared by every protocol engine.

Each tick runs, in order: scheduled client actions, channel deliveries,
keeper pings, block production, then the inline invariant monitors.
Handlers run to completion and their staged messages are flushed before the
next handler starts.
"""

from __future__ import annotations

import heapq
import itertools
import random
from typing import Callable, Iterable, Protocol, Sequence

from .ccc import Channel, CccMessage, MessageQueue, SynchronyConfig, Trace
from .chain import LedgerObject, step_block
from .core import Tick


class Node(Protocol):
    obj: LedgerObject
    view: int

    def start(self, now: Tick, q: MessageQueue) -> None: ...
    def deliver(self, msg: CccMessage, now: Tick, q: MessageQueue) -> None: ...
    def ping(self, now: Tick, q: MessageQueue) -> None: ...
    def idle(self) -> bool: ...


class InvariantViolation(AssertionError):
    pass


class Simulation:
    def __init__(self, chains: Sequence[LedgerObject], sync: SynchronyConfig, seed: int = 0,
                 trace: Trace | None = None, ping_period: int | None = None) -> None:
        self.chains = list(chains)
        self.m = len(self.chains)
        self.sync = sync
        self.seed = seed
        self.trace = trace if trace is not None else Trace()
        self.channel = Channel(self.m, sync, random.Random(seed), self.trace)
        self.nodes: list[Node | None] = [None] * self.m
        self.ping_period = ping_period
        self.now: Tick = 0
        self.violations: list[str] = []
        self.tick_hooks: list[Callable[[Tick], None]] = []
        self._events: list = []
        self._event_seq = itertools.count()
        self._logs_seen = [[] for _ in range(self.m)]
        self._views_seen = [0] * self.m
        self._started = False

    # -- wiring ---------------------------------------------------------------

    @property
    def honest(self) -> list[int]:
        return [c.id for c in self.chains if not c.byzantine]

    def attach(self, nodes: Iterable[Node]) -> None:
        for node in nodes:
            self.nodes[node.obj.id] = node

    def at(self, tick: Tick, action: Callable[[Tick], None]) -> None:
        heapq.heappush(self._events, (tick, next(self._event_seq), action))

    def call(self, chain: int, fn: Callable[[MessageQueue], None], now: Tick | None = None) -> None:
        """Run one handler on ``chain`` and flush whatever it staged."""
        q = MessageQueue(chain, self.m)
        fn(q)
        self.channel.flush(q.drain(), self.now if now is None else now)

    # -- loop -------------------------------------------------------------------

    def _dispatch(self, dst: int, msgs: list[CccMessage], now: Tick) -> list[CccMessage]:
        node = self.nodes[dst]
        q = MessageQueue(dst, self.m)
        if node is not None:
            for msg in msgs:
                node.deliver(msg, now, q)
        return q.drain()

    def _start(self) -> None:
        self._started = True
        for node in self.nodes:
            if node is not None and not node.obj.crashed:
                self.call(node.obj.id, lambda q, n=node: n.start(0, q), 0)

    def step(self, now: Tick) -> None:
        self.now = now
        while self._events and self._events[0][0] <= now:
            _, _, action = heapq.heappop(self._events)
            action(now)
        self.channel.advance(now, self._dispatch, lambda c: self.chains[c].crashed)
        if self.ping_period and now > 0 and now % self.ping_period == 0:
            for node in self.nodes:
                if node is not None and not node.obj.crashed:
                    self.call(node.obj.id, lambda q, n=node: n.ping(now, q), now)
        for obj in self.chains:
            for tx in step_block(obj, now):
                self.trace.emit("commit", now, chain=obj.id, tx=tx.id, pos=len(obj.log) - 1)
        for hook in self.tick_hooks:
            hook(now)
        self._monitor(now)

    def quiescent(self) -> bool:
        honest = self.honest
        if self._events or self.channel.in_flight_between(honest):
            return False
        for c in honest:
            obj = self.chains[c]
            if obj.pending and not obj.crashed:
                return False
            node = self.nodes[c]
            if node is not None and not obj.crashed and not node.idle():
                return False
        return True

    def run(self, horizon: Tick, stop_when_idle: bool = True) -> Tick:
        if not self._started:
            self._start()
        now = self.now
        while now <= horizon:
            self.step(now)
            if stop_when_idle and self.quiescent():
                break
            now += 1
        self.violations.extend(self.channel.violations)
        self.channel.violations.clear()
        return min(now, horizon)

    # -- invariants ---------------------------------------------------------------

    def _monitor(self, now: Tick) -> None:
        for obj in self.chains:
            if obj.byzantine:
                continue
            seen = self._logs_seen[obj.id]
            ids = obj.committed_ids()
            if ids[: len(seen)] != seen:
                self.violations.append(f"chain {obj.id} log rewritten at tick {now}")
            self._logs_seen[obj.id] = ids
            node = self.nodes[obj.id]
            if node is not None:
                if node.view < self._views_seen[obj.id]:
                    self.violations.append(f"chain {obj.id} view decreased at tick {now}")
                self._views_seen[obj.id] = node.view
