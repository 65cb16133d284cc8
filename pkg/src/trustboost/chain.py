"""One blockchain modeled as a shared ledger object (submit / check / read).

A chain is a single logical object: a committee with an honest supermajority
collapses to an honest object, anything else is a Byzantine object whose
answers are driven by a :class:`BehaviorPolicy`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Mapping

from .core import ChainId, ProcessId, Tick, Transaction


# -- behaviour policies --------------------------------------------------------


@dataclass(frozen=True)
class Honest:
    kind: str = field(default="honest", init=False)


@dataclass(frozen=True)
class Crash:
    at_view: int = 0
    kind: str = field(default="crash", init=False)


@dataclass(frozen=True)
class EquivocatePropose:
    kind: str = field(default="equivocate-propose", init=False)


@dataclass(frozen=True)
class EquivocateVote:
    kind: str = field(default="equivocate-vote", init=False)


@dataclass(frozen=True)
class AbortSpam:
    kind: str = field(default="abort-spam", init=False)


@dataclass(frozen=True)
class Face:
    """What a split-brain chain shows to one group of processes.

    ``log`` holds ``(tx_id, visible_from)`` pairs; an entry is reported as
    committed once ``now >= visible_from``.
    """

    log: tuple[tuple[str, Tick], ...] = ()
    state: Mapping[str, Any] = field(default_factory=dict)
    value: int | None = None

    def visible(self, now: Tick | None) -> list[str]:
        return [tx for tx, t in self.log if now is None or now >= t]


@dataclass(frozen=True)
class SplitBrain:
    """Answers each asker from the face of the group the asker belongs to."""

    groups: Mapping[Hashable, str]
    faces: Mapping[str, Face]
    default_group: str | None = None
    kind: str = field(default="split-brain", init=False)

    @classmethod
    def binary(cls, x_value: int, y_value: int, x_members, y_members=()) -> "SplitBrain":
        groups = {p: "X" for p in x_members} | {p: "Y" for p in y_members}
        faces = {
            "X": Face(state={"value": x_value}, value=x_value),
            "Y": Face(state={"value": y_value}, value=y_value),
        }
        return cls(groups, faces, default_group=None if y_members else "Y")

    def face_for(self, asking: ProcessId) -> Face | None:
        group = self.groups.get(asking, self.default_group)
        return None if group is None else self.faces.get(group)


@dataclass(frozen=True)
class Scripted:
    """Event -> action table.

    Recognised events: ``propose``, ``echo``, ``key1``, ``vote``, ``abort``
    (outgoing protocol messages; actions ``honest``, ``drop``,
    ``equivocate``, ``spam``), ``check`` and ``read`` (actions ``honest``,
    ``true``, ``false``, ``blank``) and ``submit`` (``honest`` or ``drop``).
    """

    table: Mapping[str, str]
    kind: str = field(default="scripted", init=False)

    def action(self, event: str) -> str:
        return self.table.get(event, "honest")


BehaviorPolicy = Honest | Crash | EquivocatePropose | EquivocateVote | AbortSpam | SplitBrain | Scripted

HONEST = Honest()


def is_byzantine(behavior: BehaviorPolicy) -> bool:
    return not isinstance(behavior, Honest)


# -- contract execution ----------------------------------------------------------


def name_service(state: dict, payload: Any) -> None:
    """Tiny name registry: ``("buy", name, owner)``, ``("transfer", name, frm, to)``,
    ``("set", key, value)``. Unknown payloads leave the state untouched."""
    if not isinstance(payload, (tuple, list)) or not payload:
        return
    op = payload[0]
    if op == "buy" and len(payload) == 3:
        _, name, owner = payload
        state.setdefault(name, owner)
    elif op == "transfer" and len(payload) == 4:
        _, name, frm, to = payload
        if state.get(name) == frm:
            state[name] = to
    elif op == "set" and len(payload) == 3:
        state[payload[1]] = payload[2]


# -- the ledger object ------------------------------------------------------------


@dataclass(frozen=True)
class ReadView:
    chain: ChainId
    latest_committed: str | None
    state_snapshot: Mapping[str, Any]


@dataclass
class _Pending:
    tx: Any
    submitted_at: Tick
    due: Tick
    submitter: Any = None
    order: int = 0

    def order_key(self):
        who = self.tx.submitter if self.submitter is None else self.submitter
        return (self.submitted_at, _process_key(who), self.order, self.tx.id)


def _process_key(p) -> tuple:
    return (0, p, "") if isinstance(p, int) else (1, 0, str(p))


@dataclass
class LedgerObject:
    id: ChainId
    behavior: BehaviorPolicy = HONEST
    block_interval: int = 1
    execute: Callable[[dict, Any], None] = name_service
    log: list = field(default_factory=list)
    state: dict = field(default_factory=dict)
    pending: list[_Pending] = field(default_factory=list)
    crashed: bool = False
    commit_ticks: dict[str, Tick] = field(default_factory=dict)
    # outpoint -> tx id, over pending and committed UTXO transactions
    spent: dict = field(default_factory=dict)
    _known: set = field(default_factory=set)

    def __post_init__(self) -> None:
        if self.block_interval < 1:
            raise ValueError("block_interval must be >= 1")
        if isinstance(self.behavior, Crash) and self.behavior.at_view <= 0:
            self.crashed = True

    @property
    def byzantine(self) -> bool:
        return is_byzantine(self.behavior)

    def crash(self) -> None:
        self.crashed = True
        self.pending.clear()

    def next_boundary(self, t: Tick) -> Tick:
        bi = self.block_interval
        return -(-t // bi) * bi

    def committed_ids(self) -> list[str]:
        return [tx.id for tx in self.log]


def local_submit(obj: LedgerObject, tx, now: Tick, submitter: ProcessId = None, order: int = 0) -> bool:
    """Queue ``tx`` for the next block boundary at least one interval away.

    ``submitter`` overrides ``tx.submitter`` for the tie-break; ``order``
    sequences several same-tick submissions from one submitter.

    Returns False when the submission is ignored: crashed chain, dropped by a
    script, duplicate id, or an input already spent by another transaction.
    """
    if obj.crashed:
        return False
    if isinstance(obj.behavior, Scripted) and obj.behavior.action("submit") == "drop":
        return False
    if tx.id in obj._known:
        return False
    inputs = getattr(tx, "inputs", None)
    if inputs:
        if any(obj.spent.get(op, tx.id) != tx.id for op in inputs):
            return False
        for op in inputs:
            obj.spent[op] = tx.id
    obj._known.add(tx.id)
    obj.pending.append(_Pending(tx, now, obj.next_boundary(now + obj.block_interval), submitter, order))
    return True


def step_block(obj: LedgerObject, now: Tick) -> list:
    if obj.crashed or not obj.pending:
        return []
    due = sorted((p for p in obj.pending if p.due <= now), key=_Pending.order_key)
    if not due:
        return []
    obj.pending = [p for p in obj.pending if p.due > now]
    for p in due:
        obj.log.append(p.tx)
        obj.commit_ticks[p.tx.id] = now
        obj.execute(obj.state, getattr(p.tx, "payload", None))
    return [p.tx for p in due]


def local_check(obj: LedgerObject, tx_id: str, asking: ProcessId = None, now: Tick | None = None) -> bool:
    b = obj.behavior
    if isinstance(b, SplitBrain):
        face = b.face_for(asking)
        if face is not None:
            return tx_id in face.visible(now)
    elif isinstance(b, Scripted):
        act = b.action("check")
        if act in ("true", "false"):
            return act == "true"
    return tx_id in obj.commit_ticks and (now is None or obj.commit_ticks[tx_id] <= now)


def local_read(obj: LedgerObject, asking: ProcessId = None, now: Tick | None = None) -> ReadView:
    b = obj.behavior
    if isinstance(b, SplitBrain):
        face = b.face_for(asking)
        if face is not None:
            seen = face.visible(now)
            return ReadView(obj.id, seen[-1] if seen else None, dict(face.state))
    elif isinstance(b, Scripted) and b.action("read") == "blank":
        return ReadView(obj.id, None, {})
    latest = obj.log[-1].id if obj.log else None
    return ReadView(obj.id, latest, dict(obj.state))


def make_chains(m: int, behaviors: Mapping[ChainId, BehaviorPolicy] | None = None, block_interval=1) -> list[LedgerObject]:
    behaviors = behaviors or {}
    intervals = block_interval if isinstance(block_interval, Mapping) else {}
    default_bi = 1 if isinstance(block_interval, Mapping) else block_interval
    return [
        LedgerObject(i, behaviors.get(i, HONEST), intervals.get(i, default_bi))
        for i in range(m)
    ]


__all__ = [
    "AbortSpam", "BehaviorPolicy", "Crash", "EquivocatePropose", "EquivocateVote",
    "Face", "HONEST", "Honest", "LedgerObject", "ReadView", "Scripted", "SplitBrain",
    "Transaction", "is_byzantine", "local_check", "local_read", "local_submit",
    "make_chains", "name_service", "step_block",
]
