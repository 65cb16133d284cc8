"""TrustBoost-Lite: a consensusless UTXO ledger over m chains.

Clients submit every transaction to all chains themselves and confirm by
counting commitments, recursing into the inputs' parents. No cross-chain
message is ever sent.
"""

from __future__ import annotations

import dataclasses
import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Hashable, Iterable, Mapping, Sequence

from .ccc import SynchronyConfig, Trace
from .chain import BehaviorPolicy, Face, LedgerObject, SplitBrain, local_check, local_submit, make_chains
from .core import ProcessId, Quorums, Tick, quorums_for
from .sim import Simulation


class MalformedTransaction(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Outpoint:
    tx_id: str
    index: int = 0

    def __post_init__(self) -> None:
        if self.index < 0:
            raise MalformedTransaction(f"negative output index {self.index}")


@dataclass(frozen=True)
class UtxoTransaction:
    id: str
    inputs: tuple[Outpoint, ...]
    outputs: tuple[tuple[str, int], ...] = ()
    submitter: ProcessId = 0

    @property
    def payload(self) -> Any:
        # chains execute nothing for UTXO transfers; the log is the state
        return None

    def outpoint(self, index: int) -> Outpoint:
        if not 0 <= index < len(self.outputs):
            raise IndexError(f"{self.id} has no output {index}")
        return Outpoint(self.id, index)


def validate(tx: UtxoTransaction) -> None:
    if not tx.id:
        raise MalformedTransaction("transaction id must be non-empty")
    if not tx.inputs:
        raise MalformedTransaction(f"{tx.id}: a transfer needs at least one input")
    if len(set(tx.inputs)) != len(tx.inputs):
        raise MalformedTransaction(f"{tx.id}: duplicate input outpoint")
    for owner, amount in tx.outputs:
        if amount < 0:
            raise MalformedTransaction(f"{tx.id}: negative amount for {owner}")


def conflicts(a: UtxoTransaction, b: UtxoTransaction) -> bool:
    """Two distinct transactions spending a common outpoint."""
    return a.id != b.id and not set(a.inputs).isdisjoint(b.inputs)


def utxo_tx(tx_id: str, inputs: Iterable[Outpoint | tuple[str, int]], outputs=(), submitter: ProcessId = 0) -> UtxoTransaction:
    ins = tuple(i if isinstance(i, Outpoint) else Outpoint(*i) for i in inputs)
    return UtxoTransaction(tx_id, ins, tuple(tuple(o) for o in outputs), submitter)


def genesis(*owners: str, amount: int = 1) -> dict[Outpoint, tuple[str, int]]:
    """Mint one genesis outpoint per owner: ``("genesis", i)``."""
    return {Outpoint("genesis", i): (o, amount) for i, o in enumerate(owners)}


# -- client handle -------------------------------------------------------------------


class LiteApi:
    def __init__(self, sim: Simulation, quorums: Quorums, mint: Mapping[Outpoint, Any]) -> None:
        self.sim = sim
        self.q = quorums
        self.genesis = dict(mint)
        self.known: dict[str, UtxoTransaction] = {}
        self.submit_ticks: dict[str, Tick] = {}
        self._memo: dict[tuple, bool] = {}
        self._confirmed: dict[Hashable, set[str]] = defaultdict(set)

    @property
    def chains(self) -> list[LedgerObject]:
        return self.sim.chains

    @property
    def m(self) -> int:
        return self.sim.m

    def register(self, tx: UtxoTransaction) -> None:
        """Make a transaction resolvable as a parent without submitting it
        (e.g. one only a Byzantine chain claims to hold)."""
        self.known.setdefault(tx.id, tx)

    def run(self, horizon: Tick, stop_when_idle: bool = True) -> Tick:
        return self.sim.run(horizon, stop_when_idle)

    def _version(self) -> tuple[int, ...]:
        return tuple(len(c.log) for c in self.chains)


def build_lite(m: int, *, behaviors: Mapping[int, BehaviorPolicy] | None = None, block_interval=1,
               mint: Mapping[Outpoint, Any] | None = None, seed: int = 0, f: int | None = None,
               trace: Trace | None = None) -> LiteApi:
    chains = make_chains(m, behaviors, block_interval)
    sim = Simulation(chains, SynchronyConfig(0, 1), seed, trace, None)
    return LiteApi(sim, quorums_for(m, (m - 1) // 3 if f is None else f), mint or {})


def lite_submit(api: LiteApi, tx: UtxoTransaction, now: Tick | None = None,
                chains: Iterable[int] | None = None) -> list[bool]:
    """Submit ``tx`` straight to every chain (or the listed ones); returns
    each chain's acknowledgment. Honest chains refuse a conflicting spend
    of an outpoint they already saw."""
    validate(tx)
    now = api.sim.now if now is None else now
    api.register(tx)
    api.submit_ticks.setdefault(tx.id, now)
    targets = range(api.m) if chains is None else chains
    acks = [local_submit(api.chains[c], tx, now) for c in targets]
    api.sim.trace.emit("submit", now, tx=tx.id, acks=[int(a) for a in acks])
    return acks


def lite_check(api: LiteApi, tx_id: str, asking: ProcessId = None, now: Tick | None = None,
               _stack: frozenset = frozenset()) -> bool:
    """Committed on at least floor(2m/3)+1 chains and every ancestor likewise."""
    now = api.sim.now if now is None else now
    if tx_id in api._confirmed[asking]:
        return True
    key = (tx_id, now, asking, api._version())
    if key in api._memo:
        return api._memo[key]
    cnt = sum(local_check(obj, tx_id, asking, now) for obj in api.chains)
    ok = cnt >= api.q.lite_threshold
    if ok:
        tx = api.known.get(tx_id)
        ok = tx is not None and lite_valid(api, tx, asking, now, _stack | {tx_id})
    api._memo[key] = ok
    if ok:
        # answers for a client never go back from true to false
        api._confirmed[asking].add(tx_id)
    return ok


def lite_valid(api: LiteApi, tx: UtxoTransaction, asking: ProcessId = None, now: Tick | None = None,
               _stack: frozenset = frozenset()) -> bool:
    """Every input is a genesis outpoint or an existing output of a checked parent."""
    stack = _stack | {tx.id}
    for op in tx.inputs:
        if op in api.genesis:
            continue
        parent = api.known.get(op.tx_id)
        if parent is None or op.index >= len(parent.outputs):
            return False
        if op.tx_id in stack:
            return False
        if not lite_check(api, op.tx_id, asking, now, stack):
            return False
    return True


def visible_txs(api: LiteApi, obj: LedgerObject, asking: ProcessId = None, now: Tick | None = None) -> list[str]:
    b = obj.behavior
    if isinstance(b, SplitBrain):
        face = b.face_for(asking)
        if face is not None:
            return face.visible(now)
    return [t.id for t in obj.log if now is None or obj.commit_ticks[t.id] <= now]


def reveal_policy(groups: Mapping[ProcessId, str], reveals: Mapping[str, Sequence[tuple[str, Tick]]]) -> SplitBrain:
    """Byzantine chain showing each group its own commit log.

    ``reveals[group]`` lists ``(tx_id, visible_from)``; askers outside every
    group see the chain's real log.
    """
    faces = {g: Face(log=tuple(entries)) for g, entries in reveals.items()}
    for g in set(groups.values()) - set(faces):
        faces[g] = Face()
    return SplitBrain(dict(groups), faces)


# -- exhaustive weak-agreement search ------------------------------------------------------


@dataclass(frozen=True)
class SearchReport:
    states: int
    checks: int
    violations: tuple = ()
    ticks: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class _Fact:
    # honest: chain -> committed tx name or None; byz: (group, tx name) pairs shown
    byz: int
    honest: tuple
    shown: frozenset = field(default_factory=frozenset)


def _consistent_successors(state: _Fact, names: Sequence[str], groups: Sequence[str]) -> Iterable[_Fact]:
    """All states reachable in one tick: honest chains may commit (first-seen,
    at most one of the pair); the Byzantine chain may reveal anything more."""
    honest_opts = []
    for cur in state.honest:
        honest_opts.append([cur] if cur is not None else [None, *names])
    all_shows = [(g, n) for g in groups for n in names]
    missing = [s for s in all_shows if s not in state.shown]
    for honest in itertools.product(*honest_opts):
        for r in range(len(missing) + 1):
            for extra in itertools.combinations(missing, r):
                yield _Fact(state.byz, tuple(honest), state.shown | frozenset(extra))


def _materialize(state: _Fact, m: int, pair: tuple[UtxoTransaction, UtxoTransaction],
                 mint, groups: Sequence[str], members: Mapping[str, Sequence[str]]) -> LiteApi:
    by_name = {"tx": pair[0], "tx'": pair[1]}
    group_of = {p: g for g in groups for p in members[g]}
    reveals = {g: [(by_name[n].id, 0) for gg, n in sorted(state.shown) if gg == g] for g in groups}
    api = build_lite(m, behaviors={state.byz: reveal_policy(group_of, reveals)}, mint=mint)
    for tx in pair:
        api.register(tx)
    honest_ids = [c for c in range(m) if c != state.byz]
    for c, name in zip(honest_ids, state.honest):
        if name is not None:
            local_submit(api.chains[c], by_name[name], 0)
    api.sim.step(api.chains[0].block_interval)
    return api


def exhaustive_weak_agreement(m: int = 4, horizon: int = 20, threshold: int | None = None) -> SearchReport:
    """Explore every adversary schedule for one conflicting pair.

    The Byzantine chain (any of the m) chooses, per tick, what to reveal to
    each of two client groups; honest chains commit at most one of the pair.
    Layers are ticks; each reachable state is checked for every client.
    ``threshold`` overrides the commit count a check needs (for negative
    controls).
    """
    mint = genesis("alice")
    g0 = Outpoint("genesis", 0)
    pair = (utxo_tx("tx", [g0], [("bob", 1)], "alice"), utxo_tx("tx'", [g0], [("carol", 1)], "alice"))
    names = ("tx", "tx'")
    groups = ("X", "Y")
    members = {"X": ("x1", "x2"), "Y": ("y1", "y2")}
    f = (m - 1) // 3
    if f != 1:
        raise ValueError("the search models exactly one Byzantine chain")
    frontier: set[_Fact] = {_Fact(b, (None,) * (m - 1)) for b in range(m)}
    seen: set[_Fact] = set()
    checks = 0
    violations = []
    ticks = 0
    for tick in range(horizon + 1):
        ticks = tick
        layer = frontier - seen
        for state in sorted(layer, key=repr):
            seen.add(state)
            api = _materialize(state, m, pair, mint, groups, members)
            if threshold is not None:
                api.q = dataclasses.replace(api.q, lite_threshold=threshold)
            true_for = defaultdict(set)
            for g in groups:
                for p in members[g]:
                    for tx in pair:
                        checks += 1
                        if lite_check(api, tx.id, p, api.sim.now):
                            true_for[tx.id].add(p)
            if true_for[pair[0].id] and true_for[pair[1].id]:
                violations.append((tick, state))
        if not layer:
            break
        frontier = {s for st in layer for s in _consistent_successors(st, names, groups)}
    return SearchReport(len(seen), checks, tuple(violations), ticks)


def honest_termination_delay(m: int = 4, block_interval: int = 1, faulty: Mapping[int, BehaviorPolicy] | None = None,
                             submit_at: Tick = 0) -> dict[str, Tick | None]:
    """Ticks from submission to check-true for a conflict-free chain of
    spends a -> b -> c, submitted together to every chain."""
    g = genesis("alice")
    a = utxo_tx("a", [Outpoint("genesis", 0)], [("bob", 1)], "alice")
    b = utxo_tx("b", [a.outpoint(0)], [("carol", 1)], "bob")
    c = utxo_tx("c", [b.outpoint(0)], [("dave", 1)], "carol")
    api = build_lite(m, behaviors=faulty, block_interval=block_interval, mint=g)
    txs = (a, b, c)
    api.sim.at(submit_at, lambda now: [lite_submit(api, tx, now) for tx in txs])
    out: dict[str, Tick | None] = {tx.id: None for tx in txs}
    horizon = submit_at + 4 * block_interval + 2
    for now in range(horizon + 1):
        api.sim.step(now)
        for tx in txs:
            if out[tx.id] is None and lite_check(api, tx.id, "client", now):
                out[tx.id] = now - submit_at
    return out
