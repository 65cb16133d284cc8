"""TrustBoost: consensus among m chains over the cross-chain channel.

Two engines share the client API:

* :class:`SkeletonNode` -- the propose/vote majority-voting sketch. Every
  chain votes for each proposal it sees and commits locally once a
  two-thirds quorum of votes arrives. Not a total-order protocol.
* :class:`ViewNode` -- a leader-based engine with PROPOSE, ECHO, KEY1 and
  VOTE phases per view, ABORT-driven view change and keeper pings for
  timeouts. One transaction is decided per view.

Messages a chain addresses to itself never touch the channel; the handler
applies them in place before returning.
"""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Any, Iterable, Mapping

from .ccc import CARRIES_TX, CccMessage, Kind, MessageQueue, SynchronyConfig, Trace, ccc_send
from .chain import (
    AbortSpam, BehaviorPolicy, Crash, EquivocatePropose, EquivocateVote, LedgerObject, Scripted,
    SplitBrain, local_check, local_read, local_submit, make_chains,
)
from .core import ChainId, ProcessId, Quorums, Tick, Transaction, quorums_for
from .sim import Simulation

log = logging.getLogger(__name__)

DEFAULT_DELTA = 3


def binary_tx(v: int) -> Transaction:
    """Canonical transaction standing for binary value ``v`` in theory worlds."""
    return Transaction(f"value-{v}", ("set", "value", v), "world")


class _Node:
    def __init__(self, obj: LedgerObject, m: int, quorums: Quorums, trace: Trace) -> None:
        self.obj = obj
        self.id = obj.id
        self.m = m
        self.q = quorums
        self.trace = trace
        self.view = 0

    @property
    def behavior(self) -> BehaviorPolicy:
        return self.obj.behavior

    def start(self, now: Tick, q: MessageQueue) -> None:
        pass

    def ping(self, now: Tick, q: MessageQueue) -> None:
        pass

    def idle(self) -> bool:
        return True

    def _forge(self, tx: Transaction, dst: int) -> Transaction:
        return Transaction(f"{tx.id}!{self.id}.{dst}", ("forged", tx.id, dst), self.id)

    def _shape(self, kind: Kind, dst: int, view, slot, tx) -> list[CccMessage]:
        """Outgoing message(s) for ``dst``; Byzantine scripts rewrite here."""
        b = self.behavior
        mk = lambda body: CccMessage(self.id, dst, kind, view, body, slot)  # noqa: E731
        if tx is None or kind not in CARRIES_TX:
            if isinstance(b, Scripted) and b.action(kind.value) == "drop":
                return []
            return [mk(tx)]
        if isinstance(b, EquivocatePropose) and kind is Kind.PROPOSE:
            pair = [tx, self._forge(tx, dst)]
            return [mk(t) for t in (pair if dst % 2 else pair[::-1])]
        if isinstance(b, EquivocateVote) and kind is Kind.VOTE:
            return [mk(self._forge(tx, dst) if dst % 2 else tx)]
        if isinstance(b, SplitBrain):
            face = b.face_for(dst)
            if face is not None and face.value is not None:
                return [mk(binary_tx(face.value))]
        if isinstance(b, Scripted):
            act = b.action(kind.value)
            if act == "drop":
                return []
            if act == "equivocate":
                if kind is Kind.PROPOSE:
                    pair = [tx, self._forge(tx, dst)]
                    return [mk(t) for t in (pair if dst % 2 else pair[::-1])]
                return [mk(self._forge(tx, dst) if dst % 2 else tx)]
        return [mk(tx)]

    def _broadcast(self, q: MessageQueue, now: Tick, kind: Kind, view=None, slot=None, tx=None,
                   self_deliver: bool = True) -> None:
        for dst in range(self.m):
            if dst == self.id:
                continue
            for msg in self._shape(kind, dst, view, slot, tx):
                ccc_send(q, msg)
        if self_deliver:
            note = ccc_send(q, CccMessage(self.id, self.id, kind, view, tx, slot))
            self.deliver(note.msg, now, q)

    def deliver(self, msg: CccMessage, now: Tick, q: MessageQueue) -> None:
        raise NotImplementedError


# -- Algorithm 1 sketch ------------------------------------------------------------


class SkeletonNode(_Node):
    def __init__(self, obj, m, quorums, trace) -> None:
        super().__init__(obj, m, quorums, trace)
        self.tx_votes: dict[str, set[int]] = defaultdict(set)
        self.proposals: dict[str, Transaction] = {}
        self.entered: set[str] = set()
        self.committed: list[str] = []

    def submit(self, tx: Transaction, now: Tick, q: MessageQueue) -> None:
        if tx.id in self.entered or self.obj.crashed:
            return
        self.entered.add(tx.id)
        self._broadcast(q, now, Kind.PROPOSE, view=0, tx=tx)

    def deliver(self, msg: CccMessage, now: Tick, q: MessageQueue) -> None:
        if self.obj.crashed:
            return
        tx = msg.body
        if msg.kind is Kind.PROPOSE:
            if tx.id in self.proposals:
                return
            self.proposals[tx.id] = tx
            self._broadcast(q, now, Kind.VOTE, view=0, tx=tx)
        elif msg.kind is Kind.VOTE:
            self.tx_votes[tx.id].add(msg.src)
        else:
            self.trace.emit("ignored", now, chain=self.id, kind=msg.kind.value)
            return
        self._maybe_commit(tx.id, now)

    def _maybe_commit(self, tx_id: str, now: Tick) -> None:
        # votes for an unseen proposal wait until the proposal arrives
        if tx_id not in self.proposals or tx_id in self.committed:
            return
        if len(self.tx_votes[tx_id]) >= self.q.vote_threshold:
            self.committed.append(tx_id)
            local_submit(self.obj, self.proposals[tx_id], now, submitter="trustboost", order=len(self.committed))
            self.trace.emit("decide", now, chain=self.id, slot=len(self.committed) - 1, view=0, tx=tx_id)


# -- view engine ------------------------------------------------------------------


@dataclass(frozen=True)
class Lock:
    view: int
    tx: Transaction


class ViewNode(_Node):
    """Leader-based engine; leader of view ``v`` is chain ``v mod m``.

    Safety across views rests on locks: a chain that sent VOTE for ``tx`` in
    view ``v`` echoes a different proposal for the same slot only after it
    has itself seen a KEY1 quorum for that proposal in a view above ``v``.
    """

    PHASES = ("idle", "proposed", "echoed", "keyed", "decided")

    def __init__(self, obj, m, quorums, trace, timeout: int, max_backoff: int = 4) -> None:
        super().__init__(obj, m, quorums, trace)
        self.base_timeout = timeout
        self.max_backoff = max_backoff
        self.slot = 0
        self.decided: list[Transaction] = []
        self.decided_ids: set[str] = set()
        self.decide_views: list[int] = []
        self.pending: list[Transaction] = []
        self.pending_since: Tick | None = None
        self.view_changes = 0
        self.view_start: Tick = 0
        self.aborts: dict[int, set[int]] = defaultdict(set)
        self.buffer: list[CccMessage] = []
        self.helped: set[tuple[int, int]] = set()
        self._reset_view()
        self._reset_slot()

    # state resets
    def _reset_view(self) -> None:
        self.phase = "idle"
        self.proposal: Transaction | None = None
        self.proposed = False
        self.echoed = False
        self.keyed = False
        self.voted = False
        self.aborted = False

    def _reset_slot(self) -> None:
        self.echoes: dict[tuple[int, str], set[int]] = defaultdict(set)
        self.key1: dict[tuple[int, str], set[int]] = defaultdict(set)
        self.votes: dict[tuple[int, str], set[int]] = defaultdict(set)
        self.txs: dict[str, Transaction] = {}
        self.notices: dict[str, set[int]] = defaultdict(set)
        self.lock: Lock | None = None

    # derived
    def leader(self, view: int | None = None) -> int:
        return (self.view if view is None else view) % self.m

    @property
    def timeout(self) -> int:
        return self.base_timeout * 2 ** min(self.view_changes, self.max_backoff)

    @property
    def echo_senders(self):
        return {k[1]: v for k, v in self.echoes.items() if k[0] == self.view}

    def idle(self) -> bool:
        return self.obj.crashed or (not self._undecided() and self.lock is None)

    def _undecided(self) -> list[Transaction]:
        return [t for t in self.pending if t.id not in self.decided_ids]

    def _certified(self) -> tuple[int, Transaction] | None:
        best = None
        for (v, tx_id), senders in self.key1.items():
            if len(senders) >= self.q.vote_threshold and (best is None or v > best[0]):
                best = (v, self.txs[tx_id])
        return best

    # entry points
    def start(self, now: Tick, q: MessageQueue) -> None:
        self.trace.emit("view", now, chain=self.id, view=0)
        self._maybe_propose(now, q)

    def client_submit(self, tx: Transaction, now: Tick, q: MessageQueue) -> None:
        if self.obj.crashed or tx.id in self.decided_ids or any(t.id == tx.id for t in self.pending):
            return
        if not self._undecided():
            self.pending_since = now
        self.pending.append(tx)
        self._maybe_propose(now, q)

    def ping(self, now: Tick, q: MessageQueue) -> None:
        if self.obj.crashed:
            return
        b = self.behavior
        if isinstance(b, AbortSpam) or (isinstance(b, Scripted) and b.action("abort") == "spam"):
            self._broadcast(q, now, Kind.ABORT, view=self.view, self_deliver=False)
            return
        if self.aborted or self.idle():
            return
        start = max(self.view_start, self.pending_since if self.pending_since is not None else 0)
        if now - start > self.timeout:
            self.trace.emit("timeout", now, chain=self.id, view=self.view)
            self._abort(now, q)

    def deliver(self, msg: CccMessage, now: Tick, q: MessageQueue) -> None:
        if self.obj.crashed:
            return
        kind = msg.kind
        if kind is Kind.ABORT:
            if msg.slot is not None and msg.slot < self.slot:
                self._help_laggard(msg.src, msg.slot, q)
            self._on_abort(msg.src, msg.view, now, q)
            return
        if kind is Kind.RAW:
            self._on_notice(msg, now, q)
            return
        if kind is Kind.PING:
            self.ping(now, q)
            return
        if kind not in CARRIES_TX or msg.slot is None:
            self.trace.emit("ignored", now, chain=self.id, src=msg.src, kind=kind.value)
            return
        if msg.slot < self.slot:
            self.trace.emit("stale", now, chain=self.id, src=msg.src, kind=kind.value, view=msg.view, slot=msg.slot)
            return
        if msg.slot > self.slot:
            self.buffer.append(msg)
            return
        tx: Transaction = msg.body
        self.txs.setdefault(tx.id, tx)
        key = (msg.view, tx.id)
        if kind is Kind.VOTE:
            self.votes[key].add(msg.src)
            if len(self.votes[key]) >= self.q.vote_threshold:
                self._decide(tx, msg.view, now, q)
            elif msg.view == self.view:
                self._progress(now, q)
            return
        if kind is Kind.KEY1:
            self.key1[key].add(msg.src)
        elif kind is Kind.ECHO:
            if msg.view < self.view:
                return
            self.echoes[key].add(msg.src)
        elif kind is Kind.PROPOSE:
            if msg.view < self.view:
                self.trace.emit("stale", now, chain=self.id, src=msg.src, kind=kind.value, view=msg.view, slot=msg.slot)
                return
            if msg.view > self.view:
                self.buffer.append(msg)
                return
            if msg.src != self.leader():
                self.trace.emit("reject", now, chain=self.id, src=msg.src, kind=kind.value, view=msg.view)
                return
            if self.proposal is None:
                self.proposal = tx
                self.phase = "proposed"
            elif self.proposal.id != tx.id:
                self.trace.emit("equivocation", now, chain=self.id, leader=msg.src, view=msg.view)
                self._abort(now, q)
                return
        self._progress(now, q)

    # phase machine
    def _acceptable(self, tx: Transaction) -> bool:
        if tx.id in self.decided_ids:
            return False
        if self.lock is None or self.lock.tx.id == tx.id:
            return True
        lock_view = self.lock.view
        return any(v > lock_view and tid == tx.id and len(s) >= self.q.vote_threshold
                   for (v, tid), s in self.key1.items())

    def _progress(self, now: Tick, q: MessageQueue) -> None:
        if self.obj.crashed:
            return
        v, need = self.view, self.q.vote_threshold
        if not self.aborted:
            self._progress_echo(now, q)
        if self.voted:
            return
        # a chain that already aborted may still vote while it sits in the view
        for (kv, tx_id), senders in list(self.key1.items()):
            if kv == v and len(senders) >= need:
                self._vote(self.txs[tx_id], now, q)
                return
        # f+1 matching votes include an honest one, which saw a KEY1 quorum
        for (vv, tx_id), senders in list(self.votes.items()):
            if vv == v and len(senders) >= self.q.check_threshold:
                self._vote(self.txs[tx_id], now, q)
                return

    def _vote(self, tx: Transaction, now: Tick, q: MessageQueue) -> None:
        self.voted = True
        self.lock = Lock(self.view, tx)
        self._broadcast(q, now, Kind.VOTE, self.view, self.slot, tx)

    def _progress_echo(self, now: Tick, q: MessageQueue) -> None:
        v, need = self.view, self.q.vote_threshold
        if not self.echoed and self.proposal is not None and self._acceptable(self.proposal):
            self.echoed = True
            self.phase = "echoed"
            self._broadcast(q, now, Kind.ECHO, v, self.slot, self.proposal)
            return
        if not self.keyed:
            for (ev, tx_id), senders in list(self.echoes.items()):
                if ev == v and len(senders) >= need:
                    self.keyed = True
                    self.phase = "keyed"
                    self._broadcast(q, now, Kind.KEY1, v, self.slot, self.txs[tx_id])
                    return

    def _maybe_propose(self, now: Tick, q: MessageQueue) -> None:
        if self.proposed or self.leader() != self.id or self.obj.crashed:
            return
        cert = self._certified()
        choice = None
        if cert is not None and (self.lock is None or cert[0] >= self.lock.view):
            choice = cert[1]
        elif self.lock is not None:
            choice = self.lock.tx
        else:
            undecided = self._undecided()
            choice = undecided[0] if undecided else None
        if choice is None:
            return
        self.proposed = True
        self._broadcast(q, now, Kind.PROPOSE, self.view, self.slot, choice)

    def _abort(self, now: Tick, q: MessageQueue) -> None:
        if self.aborted:
            return
        self.aborted = True
        self._broadcast(q, now, Kind.ABORT, view=self.view, slot=self.slot)

    def _help_laggard(self, dst: int, slot: int, q: MessageQueue) -> None:
        """Tell a chain still aborting in an old slot what this chain decided there."""
        if (dst, slot) in self.helped or slot >= len(self.decided):
            return
        self.helped.add((dst, slot))
        for msg in self._shape(Kind.RAW, dst, None, slot, self.decided[slot]):
            ccc_send(q, msg)

    def _on_notice(self, msg: CccMessage, now: Tick, q: MessageQueue) -> None:
        tx = msg.body
        if msg.slot != self.slot or not isinstance(tx, Transaction):
            return
        self.txs.setdefault(tx.id, tx)
        self.notices[tx.id].add(msg.src)
        # f+1 first-hand claims include one honest decider
        if len(self.notices[tx.id]) >= self.q.check_threshold:
            self.trace.emit("adopt", now, chain=self.id, slot=self.slot, tx=tx.id)
            self._decide(tx, -1, now, q)

    def _on_abort(self, src: int, view: int, now: Tick, q: MessageQueue) -> None:
        if view < self.view:
            return
        self.aborts[view].add(src)
        if len(self.aborts[view]) >= self.q.vote_threshold:
            self._enter_view(view + 1, now, q, view_change=True)

    def _decide(self, tx: Transaction, view: int, now: Tick, q: MessageQueue) -> None:
        if tx.id in self.decided_ids:
            return
        if view == self.view and not self.aborted:
            # a chain outpaced by the quorum still casts each phase once
            for flag, kind in (("echoed", Kind.ECHO), ("keyed", Kind.KEY1), ("voted", Kind.VOTE)):
                if not getattr(self, flag):
                    setattr(self, flag, True)
                    self._broadcast(q, now, kind, view, self.slot, tx, self_deliver=False)
        self.decided.append(tx)
        self.decided_ids.add(tx.id)
        self.decide_views.append(view)
        self.phase = "decided"
        local_submit(self.obj, tx, now, submitter="trustboost", order=self.slot)
        self.trace.emit("decide", now, chain=self.id, slot=self.slot, view=view, tx=tx.id)
        self.pending = [t for t in self.pending if t.id != tx.id]
        self.pending_since = now if self._undecided() else None
        self.slot += 1
        self._reset_slot()
        self.view_changes = 0
        if view >= self.view:
            self._enter_view(view + 1, now, q, view_change=False)
        else:
            # decided from late votes of an older view: stay, but restart the timer
            proposed = self.proposed
            self._reset_view()
            self.proposed = proposed
            self.view_start = now
            self._maybe_propose(now, q)
            self._drain_buffer(now, q)

    def _enter_view(self, view: int, now: Tick, q: MessageQueue, view_change: bool) -> None:
        if view <= self.view:
            return
        self.view = view
        self.view_start = now
        if view_change:
            self.view_changes += 1
        self._reset_view()
        self.trace.emit("view", now, chain=self.id, view=view)
        self.echoes = defaultdict(set, {k: s for k, s in self.echoes.items() if k[0] >= view})
        for v in [v for v in self.aborts if v < view]:
            del self.aborts[v]
        b = self.behavior
        if isinstance(b, Crash) and view >= b.at_view:
            self.obj.crash()
            self.trace.emit("crash", now, chain=self.id, view=view)
            return
        if len(self.aborts.get(view, ())) >= self.q.vote_threshold:
            self._enter_view(view + 1, now, q, view_change=True)
            return
        self._maybe_propose(now, q)
        self._drain_buffer(now, q)
        self._progress(now, q)

    def _drain_buffer(self, now: Tick, q: MessageQueue) -> None:
        ready = [m for m in self.buffer if m.slot <= self.slot and (m.kind is not Kind.PROPOSE or m.view <= self.view)]
        if not ready:
            return
        self.buffer = [m for m in self.buffer if m not in ready]
        for msg in ready:
            self.deliver(msg, now, q)


# -- client API ---------------------------------------------------------------------


class EmptyLedger(LookupError):
    """No transaction is check-true yet."""


class NoMajority(LookupError):
    """Chains at the latest checked transaction disagree beyond tolerance."""


class ClientApi:
    """Client-side handle over m chains: submit / check / read.

    Clients touch chains only through submissions and zero-cost reads.
    """

    def __init__(self, sim: Simulation, nodes: list[_Node], quorums: Quorums, engine: str) -> None:
        self.sim = sim
        self.nodes = nodes
        self.q = quorums
        self.engine = engine
        self.submitted: dict[str, Transaction] = {}
        self.submit_ticks: dict[str, Tick] = {}
        self.check_ticks: dict[str, Tick] = {}
        sim.tick_hooks.append(self._track_checks)

    @property
    def chains(self) -> list[LedgerObject]:
        return self.sim.chains

    @property
    def m(self) -> int:
        return self.sim.m

    def _track_checks(self, now: Tick) -> None:
        for tx_id in self.submitted:
            if tx_id not in self.check_ticks and tb_check(self, tx_id, "observer", now):
                self.check_ticks[tx_id] = now
                self.sim.trace.emit("check", now, tx=tx_id)

    def run(self, horizon: Tick, stop_when_idle: bool = True) -> Tick:
        return self.sim.run(horizon, stop_when_idle)


def tb_submit(api: ClientApi, tx: Transaction, entry_chain: ChainId = 0, now: Tick | None = None) -> None:
    now = api.sim.now if now is None else now
    if not 0 <= entry_chain < api.m:
        raise ValueError(f"entry chain {entry_chain} out of range")
    if tx.id in api.submitted:
        return
    api.submitted[tx.id] = tx
    api.submit_ticks[tx.id] = now
    api.sim.trace.emit("submit", now, tx=tx.id, entry=entry_chain)
    if api.engine == "skeleton":
        node = api.nodes[entry_chain]
        api.sim.call(entry_chain, lambda q: node.submit(tx, now, q), now)
    else:
        for node in api.nodes:
            api.sim.call(node.id, lambda q, n=node: n.client_submit(tx, now, q), now)


def tb_check(api: ClientApi, tx_id: str, asking: ProcessId = None, now: Tick | None = None) -> bool:
    cnt = sum(local_check(obj, tx_id, asking, now) for obj in api.chains)
    return cnt >= api.q.check_threshold


def _visible_log(obj: LedgerObject, asking, now) -> list[str]:
    b = obj.behavior
    if isinstance(b, SplitBrain):
        face = b.face_for(asking)
        if face is not None:
            return face.visible(now)
    return [tx.id for tx in obj.log if now is None or obj.commit_ticks[tx.id] <= now]


def tb_read(api: ClientApi, key: str, asking: ProcessId = None, now: Tick | None = None) -> Any:
    positions: dict[str, list[int]] = defaultdict(list)
    for obj in api.chains:
        for i, tx_id in enumerate(_visible_log(obj, asking, now)):
            positions[tx_id].append(i)
    checked = [t for t in positions if tb_check(api, t, asking, now)]
    if not checked:
        raise EmptyLedger("no transaction is check-true")

    def slot_of(t: str) -> int:
        counts = Counter(positions[t])
        return max(counts.items(), key=lambda kv: (kv[1], -kv[0]))[0]

    latest = max(checked, key=lambda t: (slot_of(t), t))
    views = [local_read(obj, asking, now) for obj in api.chains]
    at_latest = [v for v in views if v.latest_committed == latest]
    values = Counter(repr(v.state_snapshot.get(key)) for v in at_latest)
    if values:
        rep, n = values.most_common(1)[0]
        if 2 * n > len(at_latest):
            for v in at_latest:
                if repr(v.state_snapshot.get(key)) == rep:
                    return v.state_snapshot.get(key)
    raise NoMajority(f"no strict majority among {len(at_latest)} chains at {latest}")


def build(m: int, *, engine: str = "view", behaviors: Mapping[int, BehaviorPolicy] | None = None,
          sync: SynchronyConfig | None = None, seed: int = 0, block_interval=1,
          timeout: int | None = None, ping_period: int | None = None, f: int | None = None,
          trace: Trace | None = None) -> ClientApi:
    """Wire chains, channel, scheduler and one protocol node per chain."""
    sync = sync or SynchronyConfig(0, DEFAULT_DELTA)
    quorums = quorums_for(m, (m - 1) // 3 if f is None else f)
    chains = make_chains(m, behaviors, block_interval)
    if engine == "view":
        sim = Simulation(chains, sync, seed, trace, ping_period or sync.delta)
        t = timeout if timeout is not None else 4 * sync.delta
        nodes = [ViewNode(c, m, quorums, sim.trace, t) for c in chains]
    elif engine == "skeleton":
        sim = Simulation(chains, sync, seed, trace, None)
        nodes = [SkeletonNode(c, m, quorums, sim.trace) for c in chains]
    else:
        raise ValueError(f"unknown engine {engine!r}")
    sim.attach(nodes)
    return ClientApi(sim, nodes, quorums, engine)


def view_engine_step(node: ViewNode, event: CccMessage | None, now: Tick, q: MessageQueue) -> None:
    """Feed one delivery (or a keeper ping when ``event`` is None) to a view node."""
    if event is None:
        node.ping(now, q)
    else:
        node.deliver(event, now, q)


def on_deliver_skeleton(node: SkeletonNode, msg: CccMessage, now: Tick, q: MessageQueue) -> None:
    node.deliver(msg, now, q)


def honest_decided(api: ClientApi) -> dict[int, list[str]]:
    out = {}
    for node in api.nodes:
        if node.obj.byzantine:
            continue
        if isinstance(node, ViewNode):
            out[node.id] = [t.id for t in node.decided]
        else:
            out[node.id] = list(node.committed)
    return out


def closed_form_messages(m: int) -> int:
    """Channel messages per decision with an honest leader: PROPOSE to m-1
    chains plus ECHO, KEY1 and VOTE from each of m chains to m-1 others."""
    return (m - 1) * (3 * m + 1)


def count_kinds(rows: Iterable[dict]) -> Counter:
    return Counter(r["kind"] for r in rows if r["ev"] == "send")
