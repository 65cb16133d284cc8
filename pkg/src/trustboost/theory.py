"""Executable impossibility worlds and the protocols they refute or confirm.

A :class:`World` fixes initial values, which objects are Byzantine and how,
the two client groups X and Y, and (in active mode) which links the
adversary slows down. :func:`run_world` executes one protocol inside it and
returns a :class:`Verdict` together with each group's observable trace, so
hybrid worlds can be checked against the base worlds they splice.
"""

from __future__ import annotations

import itertools
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Sequence

from .ccc import CccMessage, Kind, MessageQueue, SynchronyConfig, Trace, ccc_send
from .chain import (
    HONEST, AbortSpam, BehaviorPolicy, Crash, EquivocatePropose, EquivocateVote, Face, LedgerObject,
    Scripted, SplitBrain, local_read, local_submit, step_block,
)
from .consensus import _Node, _visible_log, binary_tx, build, honest_decided, tb_submit
from .core import BinaryValue, ConfigError, ProcessId, Quorums, Tick, TxFactory, check_agreement, quorums_for
from .lite import (
    LiteApi, Outpoint, build_lite, conflicts, genesis, lite_check, lite_submit, reveal_policy, utxo_tx,
    visible_txs,
)
from .sim import Simulation

PROTOCOLS = ("passive_f0", "passive_abc", "active_bft", "trustboost")


# -- decision rules -------------------------------------------------------------------


def passive_consensus_f0(reads: Sequence[BinaryValue]) -> BinaryValue:
    """Unanimous value, else 0."""
    vals = set(reads)
    return vals.pop() if len(vals) == 1 else 0


def passive_abc_quorum(reads: Sequence[BinaryValue | None], q: Quorums) -> BinaryValue | None:
    """Value reported by at least ``q.abc_threshold`` objects, if any."""
    counts = Counter(r for r in reads if r is not None)
    hits = [v for v, n in counts.items() if n >= q.abc_threshold]
    return min(hits) if len(hits) == 1 else None


# -- worlds ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DelayRule:
    """Messages from any of ``src`` to any of ``dst`` wait ``ticks`` more (pre-GST only)."""

    src: frozenset
    dst: frozenset
    ticks: int


@dataclass(frozen=True)
class World:
    label: str
    m: int
    f: int
    initial_values: Mapping[int, BinaryValue]
    byzantine: Mapping[int, BehaviorPolicy] = field(default_factory=dict)
    process_groups: Mapping[str, tuple] = field(default_factory=lambda: {"X": ("x",), "Y": ("y",)})
    delay_plan: tuple[DelayRule, ...] = ()
    crashed_groups: frozenset = frozenset()
    # objects whose view belongs with a group (active mode)
    sides: Mapping[str, tuple[int, ...]] = field(default_factory=dict)
    # hybrid worlds: group -> label of the base world it must not tell apart
    splices: Mapping[str, str] = field(default_factory=dict)
    gst: Tick = 20
    delta: int = 1
    claimed_possible: bool = True

    @property
    def horizon(self) -> Tick:
        return self.gst + 10 * self.delta

    @property
    def processes(self) -> list:
        return [p for g in sorted(self.process_groups) for p in self.process_groups[g]]

    def group_of(self, p) -> str:
        for g, members in self.process_groups.items():
            if p in members:
                return g
        raise KeyError(p)

    def honest_values(self) -> set[int]:
        return {v for c, v in self.initial_values.items() if c not in self.byzantine}

    def validate(self) -> None:
        if self.m < 1:
            raise ConfigError(f"{self.label}: need m >= 1")
        if set(self.initial_values) != set(range(self.m)):
            raise ConfigError(f"{self.label}: initial values must cover chains 0..{self.m - 1}")
        if any(v not in (0, 1) for v in self.initial_values.values()):
            raise ConfigError(f"{self.label}: initial values must be binary")
        if not set(self.byzantine) <= set(range(self.m)):
            raise ConfigError(f"{self.label}: Byzantine chain out of range")
        if self.claimed_possible and len(self.byzantine) > self.f:
            raise ConfigError(f"{self.label}: {len(self.byzantine)} Byzantine objects exceed f={self.f}")
        members = [p for g in self.process_groups.values() for p in g]
        if not members or len(set(members)) != len(members):
            raise ConfigError(f"{self.label}: process groups must be non-empty and disjoint")
        if not self.crashed_groups <= set(self.process_groups):
            raise ConfigError(f"{self.label}: unknown crashed group")
        for side in self.sides.values():
            if not set(side) <= set(range(self.m)):
                raise ConfigError(f"{self.label}: side references unknown chain")


@dataclass(frozen=True)
class Verdict:
    label: str
    protocol: str
    committed: Mapping[str, Any]
    by_process: Mapping[Any, Any]
    agreement_ok: bool
    validity_ok: bool
    termination_ok: bool
    decided_at: Mapping[Any, Tick | None] = field(default_factory=dict)
    traces: Mapping[str, tuple] = field(default_factory=dict, compare=False, repr=False)
    violations: tuple = ()

    @property
    def ok(self) -> bool:
        return self.agreement_ok and self.validity_ok and self.termination_ok


def _group_value(w: World, g: str, by_process: Mapping) -> Any:
    vals = {by_process.get(p) for p in w.process_groups[g]}
    return vals.pop() if len(vals) == 1 else None


def _verdict(w: World, protocol: str, by_process: dict, decided_at: dict, traces: dict,
             honest_only: bool, check_validity: bool = True, violations: Iterable[str] = ()) -> Verdict:
    live = [p for p in w.processes if w.group_of(p) not in w.crashed_groups]
    values = {by_process[p] for p in live if by_process.get(p) is not None}
    agreement = len(values) <= 1
    honest = w.honest_values()
    validity = True
    if check_validity and len(honest) == 1:
        validity = values <= honest
    if honest_only and len(honest) != 1:
        termination = True
    else:
        termination = all(by_process.get(p) is not None for p in live)
    committed = {g: _group_value(w, g, by_process) for g in sorted(w.process_groups)}
    return Verdict(w.label, protocol, committed, dict(by_process), agreement, validity, termination,
                   dict(decided_at), traces, tuple(violations))


# -- passive mode ------------------------------------------------------------------------


def _passive_chains(w: World) -> list[LedgerObject]:
    chains = [LedgerObject(c, w.byzantine.get(c, HONEST)) for c in range(w.m)]
    for obj in chains:
        local_submit(obj, binary_tx(w.initial_values[obj.id]), 0)
    return chains


def _read_value(obj: LedgerObject, p, now: Tick) -> BinaryValue | None:
    if obj.crashed:
        return None
    return local_read(obj, p, now).state_snapshot.get("value")


def _run_passive(w: World, protocol: str) -> Verdict:
    q = quorums_for(w.m, w.f)
    chains = _passive_chains(w)
    by_process: dict = {}
    decided_at: dict = {}
    traces: dict[str, list] = {g: [] for g in w.process_groups}
    # objects hold their starting value from the first block on
    for now in range(1, w.horizon + 1):
        for obj in chains:
            step_block(obj, now)
        for p in w.processes:
            g = w.group_of(p)
            if g in w.crashed_groups or p in by_process:
                continue
            reads = [_read_value(obj, p, now) for obj in chains]
            traces[g].append((now, p, tuple(reads)))
            if protocol == "passive_f0":
                v = passive_consensus_f0(reads) if None not in reads else None
            else:
                v = passive_abc_quorum(reads, q)
            if v is not None:
                by_process[p] = v
                decided_at[p] = now
    return _verdict(w, protocol, by_process, decided_at, {g: tuple(t) for g, t in traces.items()},
                    honest_only=(protocol == "passive_abc"))


# -- active mode -------------------------------------------------------------------------


class _ActiveObject(_Node):
    """Naive active protocol: exchange starting values, decide once ``need``
    values are in (majority, ties to own value), report to every client."""

    def __init__(self, obj, m, quorums, trace, value: int, clients: Sequence[int], need: int) -> None:
        super().__init__(obj, m, quorums, trace)
        self.value = value
        self.clients = list(clients)
        self.need = need
        self.seen: dict[int, int] = {}
        self.decision: int | None = None

    def _send(self, q: MessageQueue, kind: Kind, dsts: Iterable[int], value: int) -> None:
        for dst in dsts:
            for msg in self._shape(kind, dst, 0, 0, binary_tx(value)):
                ccc_send(q, msg)

    def start(self, now: Tick, q: MessageQueue) -> None:
        self.seen[self.id] = self.value
        self._send(q, Kind.ECHO, [c for c in range(self.m) if c != self.id], self.value)
        self._maybe_decide(now, q)

    def deliver(self, msg: CccMessage, now: Tick, q: MessageQueue) -> None:
        if msg.kind is not Kind.ECHO or msg.src >= self.m:
            return
        self.seen.setdefault(msg.src, msg.body.payload[2])
        self._maybe_decide(now, q)

    def _maybe_decide(self, now: Tick, q: MessageQueue) -> None:
        if self.decision is not None or len(self.seen) < self.need:
            return
        counts = Counter(self.seen.values())
        top = max(counts.values())
        best = [v for v, n in counts.items() if n == top]
        self.decision = self.value if self.value in best else min(best)
        self.trace.emit("decide", now, chain=self.id, value=self.decision)
        self._send(q, Kind.VOTE, self.clients, self.decision)


class _ActiveClient:
    def __init__(self, obj: LedgerObject, pid, m: int, need: int, trace: Trace) -> None:
        self.obj = obj
        self.pid = pid
        self.m = m
        self.need = need
        self.trace = trace
        self.view = 0
        self.reports: dict[int, int] = {}
        self.decision: int | None = None
        self.decided_at: Tick | None = None

    def start(self, now, q) -> None:
        pass

    def ping(self, now, q) -> None:
        pass

    def idle(self) -> bool:
        return True

    def deliver(self, msg: CccMessage, now: Tick, q: MessageQueue) -> None:
        if msg.kind is not Kind.VOTE or msg.src >= self.m or self.decision is not None:
            return
        self.reports.setdefault(msg.src, msg.body.payload[2])
        counts = Counter(self.reports.values())
        hits = [v for v, n in counts.items() if n >= self.need]
        if hits:
            self.decision = min(hits)
            self.decided_at = now
            self.trace.emit("commit", now, process=self.pid, value=self.decision)


def _index_groups(policy: SplitBrain, index: Mapping[Any, int]) -> SplitBrain:
    """Re-key a split-brain policy from process names to channel endpoints."""
    groups = {index.get(p, p): g for p, g in policy.groups.items()}
    return SplitBrain(groups, policy.faces, policy.default_group)


def _delay_fn(w: World, index: Mapping[Any, int]) -> Callable[[CccMessage, Tick], int]:
    def endpoints(names) -> set[int]:
        return {index.get(n, n) for n in names}

    rules = [(endpoints(r.src), endpoints(r.dst), r.ticks) for r in w.delay_plan]

    def delay(msg: CccMessage, now: Tick) -> int:
        return max([t for s, d, t in rules if msg.src in s and msg.dst in d], default=0)

    return delay


def _run_active(w: World, need_object: int, need_client: int, protocol: str) -> Verdict:
    procs = w.processes
    index = {p: w.m + i for i, p in enumerate(procs)}
    sync = SynchronyConfig(w.gst, w.delta, _delay_fn(w, index))
    chains = []
    for c in range(w.m):
        b = w.byzantine.get(c, HONEST)
        chains.append(LedgerObject(c, _index_groups(b, index) if isinstance(b, SplitBrain) else b))
    for p in procs:
        crashed = w.group_of(p) in w.crashed_groups
        chains.append(LedgerObject(index[p], Crash(0) if crashed else HONEST))
    # clients are extra channel endpoints after the m objects
    sim = Simulation(chains, sync, seed=0)
    q = quorums_for(w.m, w.f)
    clients = [index[p] for p in procs]
    nodes: list = [_ActiveObject(chains[c], w.m, q, sim.trace, w.initial_values[c], clients, need_object)
                   for c in range(w.m)]
    cl = {p: _ActiveClient(chains[index[p]], p, w.m, need_client, sim.trace) for p in procs}
    sim.attach(nodes + list(cl.values()))
    sim.run(w.horizon, stop_when_idle=False)
    by_process = {p: c.decision for p, c in cl.items() if c.decision is not None}
    decided_at = {p: c.decided_at for p, c in cl.items()}
    traces = {}
    for g, members in w.process_groups.items():
        ends = [decided_at.get(p) for p in members]
        cut = max((t for t in ends if t is not None), default=w.horizon)
        watch = {index[p] for p in members} | set(w.sides.get(g, ()))
        traces[g] = tuple(
            (r["tick"], r["src"], r["dst"], r["kind"], r["tx"])
            for r in sim.trace.rows
            if r["ev"] == "deliver" and r["dst"] in watch and r["tick"] <= cut
        )
    return _verdict(w, protocol, by_process, decided_at, traces, honest_only=False,
                    violations=sim.violations)


# -- TrustBoost inside a world -------------------------------------------------------------


def _run_trustboost(w: World, seed: int = 0, sync: SynchronyConfig | None = None) -> Verdict:
    api = build(w.m, behaviors=w.byzantine, seed=seed, f=w.f,
                sync=sync or SynchronyConfig(0, 3))
    for node in api.nodes:
        if node.obj.crashed:
            continue
        tx = binary_tx(w.initial_values[node.id])
        api.sim.call(node.id, lambda qq, n=node, t=tx: n.client_submit(t, 0, qq), 0)
    end = api.run(2000)
    q = api.q
    by_process: dict = {}
    decided_at: dict = {}
    traces: dict[str, list] = {g: [] for g in w.process_groups}
    for p in w.processes:
        firsts = []
        for obj in api.chains:
            seen = _visible_log(obj, p, None)
            firsts.append(seen[0] if seen else None)
        traces[w.group_of(p)].append((p, tuple(firsts)))
        counts = Counter(t for t in firsts if t is not None)
        hits = [t for t, n in counts.items() if n >= q.abc_threshold]
        if len(hits) == 1:
            by_process[p] = _binary_of(hits[0])
            decided_at[p] = end
    dec = honest_decided(api)
    violations = list(api.sim.violations)
    if not check_agreement(list(dec.values())).ok:
        violations.append("honest chains decided divergent sequences")
    # external validity is not part of the view engine, so only agreement and termination count
    return _verdict(w, "trustboost", by_process, decided_at, {g: tuple(t) for g, t in traces.items()},
                    honest_only=False, check_validity=False, violations=violations)


def _binary_of(tx_id: str) -> Any:
    head, _, tail = tx_id.rpartition("-")
    return int(tail) if head == "value" and tail in ("0", "1") else tx_id


def run_world(w: World, protocol: str, seed: int = 0) -> Verdict:
    w.validate()
    if protocol in ("passive_f0", "passive_abc"):
        return _run_passive(w, protocol)
    if protocol == "active_bft":
        # claims m <= 3f tolerance: wait for m-f values, commit on m-f reports
        need = w.m - w.f
        return _run_active(w, need, need, protocol)
    if protocol == "trustboost":
        return _run_trustboost(w, seed)
    raise ConfigError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")


def indistinguishable(a: Verdict, b: Verdict, group: str) -> bool:
    return a.traces.get(group) == b.traces.get(group)


# -- passive-object worlds ---------------------------------------------------------------


def split_brain_value(x_value: int, y_value: int, x_members: Iterable, y_members: Iterable) -> SplitBrain:
    """Shows ``x_value`` to X members and ``y_value`` to Y members."""
    return SplitBrain.binary(x_value, y_value, tuple(x_members), tuple(y_members))


def thm1_consensus_worlds(m: int = 2, f: int = 1) -> dict[str, Any]:
    """Worlds 1.0 .. 1.m, the flip index j and hybrid world 2 for the f=0 protocol."""
    groups = {"X": ("x",), "Y": ("y",)}
    base = {}
    for i in range(m + 1):
        init = {c: 0 if c < i else 1 for c in range(m)}
        base[i] = World(f"world-1.{i}", m, f, init, process_groups=groups)
    outcomes = {i: run_world(w, "passive_f0") for i, w in base.items()}
    j = next(i for i in range(m) if outcomes[i].committed["X"] == 1 and outcomes[i + 1].committed["X"] == 0)
    init = {c: 0 if c < j else 1 for c in range(m)}
    init[j] = 0
    hybrid = World("world-2", m, f, init,
                   byzantine={j: split_brain_value(0, 1, groups["X"], groups["Y"])},
                   process_groups=groups, splices={"X": f"world-1.{j + 1}", "Y": f"world-1.{j}"})
    return {"base": base, "outcomes": outcomes, "j": j, "hybrid": hybrid,
            "splice_worlds": {"X": base[j + 1], "Y": base[j]}}


def thm1_abc_worlds(m: int = 3, f: int = 1) -> dict[str, World]:
    """A, B, C = chains {0}, {1}, {2}; hybrid world 3 splits B."""
    if m != 3:
        raise ConfigError("the three-way split world is built for m=3")
    groups = {"X": ("x",), "Y": ("y",)}
    w1 = World("world-1", m, f, {0: 1, 1: 1, 2: 0},
               byzantine={2: split_brain_value(0, 0, groups["X"], groups["Y"])}, process_groups=groups)
    w2 = World("world-2", m, f, {0: 1, 1: 0, 2: 0},
               byzantine={0: split_brain_value(1, 1, groups["X"], groups["Y"])}, process_groups=groups)
    w3 = World("world-3", m, f, {0: 1, 1: 1, 2: 0},
               byzantine={1: split_brain_value(1, 0, groups["X"], groups["Y"])}, process_groups=groups,
               splices={"X": "world-1", "Y": "world-2"})
    return {"world-1": w1, "world-2": w2, "world-3": w3}


def enumerate_passive_abc(m: int = 4, f: int = 1, answers=(0, 1, None)) -> Iterable[World]:
    """Every Byzantine position, honest starting vector and per-process
    answer (0, 1 or silence) of the Byzantine object."""
    procs = ("x1", "x2", "y1", "y2")
    groups = {"X": procs[:2], "Y": procs[2:]}
    for byz in range(m):
        honest = [c for c in range(m) if c != byz]
        for vals in itertools.product((0, 1), repeat=len(honest)):
            init = dict(zip(honest, vals)) | {byz: 0}
            for shown in itertools.product(answers, repeat=len(procs)):
                faces = {p: Face(state={} if a is None else {"value": a}, value=a) for p, a in zip(procs, shown)}
                policy = SplitBrain({p: p for p in procs}, faces)
                yield World(f"abc-{byz}-{vals}-{shown}", m, f, init, {byz: policy}, groups)


# -- active-object worlds ----------------------------------------------------------------


def thm2_worlds(m: int = 3, f: int = 1, lag: int = 1000) -> dict[str, World]:
    """A, B, C = chains 0, 1, 2; X, Y one client each."""
    if m != 3:
        raise ConfigError("the three-way split world is built for m=3")
    groups = {"X": ("x",), "Y": ("y",)}
    sides = {"X": (0,), "Y": (2,)}
    w1 = World("world-1", m, f, {0: 1, 1: 1, 2: 0}, byzantine={2: Crash(0)}, process_groups=groups,
               crashed_groups=frozenset({"Y"}), sides=sides)
    w2 = World("world-2", m, f, {0: 1, 1: 0, 2: 0}, byzantine={0: Crash(0)}, process_groups=groups,
               crashed_groups=frozenset({"X"}), sides=sides)
    b = SplitBrain.binary(1, 0, (0, "x"), (2, "y"))
    delays = (
        DelayRule(frozenset({0}), frozenset({2}), lag),
        DelayRule(frozenset({2}), frozenset({0}), lag),
        DelayRule(frozenset({0}), frozenset({"y"}), lag),
        DelayRule(frozenset({2}), frozenset({"x"}), lag),
    )
    w3 = World("world-3", m, f, {0: 1, 1: 1, 2: 0}, byzantine={1: b}, process_groups=groups,
               delay_plan=delays, sides=sides, splices={"X": "world-1", "Y": "world-2"})
    return {"world-1": w1, "world-2": w2, "world-3": w3}


# -- TrustBoost worlds at m > 3f -----------------------------------------------------------------


def _tb_split(x_value: int, y_value: int, x_chains, y_chains) -> SplitBrain:
    faces = {
        "X": Face(log=((binary_tx(x_value).id, 0),), state={"value": x_value}, value=x_value),
        "Y": Face(log=((binary_tx(y_value).id, 0),), state={"value": y_value}, value=y_value),
    }
    groups = {c: "X" for c in x_chains} | {c: "Y" for c in y_chains} | {"X": "X", "Y": "Y"}
    return SplitBrain(groups, faces)


def tb_adversaries(m: int, byz: int) -> list[BehaviorPolicy]:
    others = [c for c in range(m) if c != byz]
    half = len(others) // 2
    out: list[BehaviorPolicy] = [Crash(0), Crash(1), EquivocatePropose(), EquivocateVote(), AbortSpam()]
    for xv, yv in itertools.product((0, 1), repeat=2):
        out.append(_tb_split(xv, yv, others[:half], others[half:]))
    for acts in itertools.product(("honest", "drop", "equivocate"), repeat=2):
        out.append(Scripted({"propose": acts[0], "vote": acts[1], "echo": acts[1], "key1": acts[0]}))
    return out


def enumerate_trustboost_worlds(m: int = 4, f: int = 1) -> Iterable[World]:
    groups = {"X": ("X",), "Y": ("Y",)}
    for byz in range(m):
        honest = [c for c in range(m) if c != byz]
        for vals in itertools.product((0, 1), repeat=len(honest)):
            init = dict(zip(honest, vals)) | {byz: 1 - vals[0]}
            for i, policy in enumerate(tb_adversaries(m, byz)):
                yield World(f"tb-{byz}-{vals}-{i}", m, f, init, {byz: policy}, groups)


def random_world(rng: random.Random, m_max: int = 10) -> World:
    m = rng.randint(1, m_max)
    f = (m - 1) // 3
    byz = rng.sample(range(m), rng.randint(0, f))
    init = {c: rng.randint(0, 1) for c in range(m)}
    groups = {"X": ("X",), "Y": ("Y",)}
    policies = {}
    for c in byz:
        others = [x for x in range(m) if x != c]
        rng.shuffle(others)
        pool = [Crash(rng.randint(0, 2)), EquivocatePropose(), EquivocateVote(), AbortSpam(),
                _tb_split(rng.randint(0, 1), rng.randint(0, 1), others[: len(others) // 2], others[len(others) // 2:]),
                Scripted({k: rng.choice(("honest", "drop", "equivocate")) for k in ("propose", "echo", "key1", "vote")})]
        policies[c] = rng.choice(pool)
    return World(f"random-{m}-{sorted(policies)}", m, f, init, policies, groups)


def random_passive_world(rng: random.Random, m_max: int = 10) -> World:
    m = rng.randint(1, m_max)
    f = (m - 1) // 3
    byz = rng.sample(range(m), rng.randint(0, f))
    procs = ("x1", "x2", "y1", "y2")
    init = {c: rng.randint(0, 1) for c in range(m)}
    policies = {}
    for c in byz:
        faces = {}
        for p in procs:
            a = rng.choice((0, 1, None))
            faces[p] = Face(state={} if a is None else {"value": a}, value=a)
        policies[c] = SplitBrain({p: p for p in procs}, faces)
    return World(f"rp-{m}-{byz}", m, f, init, policies, {"X": procs[:2], "Y": procs[2:]})


# -- ledger combiner with relative settlement ----------------------------------------------


def relative_settled(api: LiteApi, tx_id: str, asking: ProcessId = None, now: Tick | None = None) -> bool:
    """Majority of chains hold ``tx`` and no chain shows a conflicting one."""
    tx = api.known.get(tx_id)
    if tx is None:
        return False
    cnt = sum(tx_id in visible_txs(api, obj, asking, now) for obj in api.chains)
    if cnt < api.m // 2 + 1:
        return False
    for obj in api.chains:
        for other in visible_txs(api, obj, asking, now):
            o = api.known.get(other)
            if o is not None and conflicts(tx, o):
                return False
    return True


@dataclass(frozen=True)
class CombinerOutcome:
    relative: Verdict
    lite: Verdict


def combiner_counterexample(reveal: str = "X", with_conflict: bool = True) -> CombinerOutcome:
    """m=4, f=1: chains 0-2 commit tx; chain 3 commits a conflicting tx'
    and shows it to ``reveal`` ("X", "all" or "none")."""
    m = 4
    mint = genesis("alice")
    g0 = Outpoint("genesis", 0)
    tx = utxo_tx("tx", [g0], [("bob", 1)], "alice")
    tx2 = utxo_tx("tx'", [g0], [("carol", 1)], "alice")
    groups = {"X": ("x1", "x2"), "Y": ("y1", "y2")}
    group_of = {p: g for g, ps in groups.items() for p in ps}
    shown = {"X": ["X"], "all": ["X", "Y"], "none": []}[reveal] if with_conflict else []
    reveals = {g: ([(tx2.id, 0)] if g in shown else []) for g in groups}
    api = build_lite(m, behaviors={3: reveal_policy(group_of, reveals)}, mint=mint)
    api.register(tx2)
    lite_submit(api, tx, 0, chains=[0, 1, 2])
    horizon = 5
    for now in range(horizon + 1):
        api.sim.step(now)
    w = World("relative-settlement", m, 1, {0: 1, 1: 1, 2: 1, 3: 1}, process_groups=groups)

    def verdict(rule: Callable[[str, Any], bool], name: str) -> Verdict:
        by_process = {}
        for p in w.processes:
            got = [t.id for t in (tx, tx2) if rule(t.id, p)]
            if got:
                by_process[p] = got[0] if len(got) == 1 else tuple(got)
        agreement = not any(isinstance(v, tuple) for v in by_process.values()) and \
            len({v for v in by_process.values()}) <= 1
        # every honest chain got tx and nothing conflicting
        termination = all(by_process.get(p) == tx.id for p in w.processes)
        committed = {g: _group_value(w, g, by_process) for g in sorted(groups)}
        return Verdict(w.label, name, committed, by_process, agreement, True, termination)

    rel = verdict(lambda t, p: relative_settled(api, t, p, horizon), "relative_settlement")
    lite = verdict(lambda t, p: lite_check(api, t, p, horizon), "lite")
    return CombinerOutcome(rel, lite)


# -- named scenarios ------------------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioResult:
    name: str
    expected_violation: bool
    confirmed: bool
    verdicts: tuple[Verdict, ...]
    checks: Mapping[str, bool]

    @property
    def violated(self) -> bool:
        return any(not v.agreement_ok or not v.termination_ok for v in self.verdicts)


def scenario_thm1_consensus() -> ScenarioResult:
    worlds = thm1_consensus_worlds()
    hyb = run_world(worlds["hybrid"], "passive_f0")
    sx = run_world(worlds["splice_worlds"]["X"], "passive_f0")
    sy = run_world(worlds["splice_worlds"]["Y"], "passive_f0")
    checks = {
        "x-commits-0": hyb.committed["X"] == 0,
        "y-commits-1": hyb.committed["Y"] == 1,
        "agreement-violated": not hyb.agreement_ok,
        "x-indistinguishable": indistinguishable(hyb, sx, "X"),
        "y-indistinguishable": indistinguishable(hyb, sy, "Y"),
    }
    return ScenarioResult("thm1-consensus", True, all(checks.values()), (hyb,), checks)


def scenario_thm1_abc(exhaustive: bool = True) -> ScenarioResult:
    ws = thm1_abc_worlds()
    v1, v2, v3 = (run_world(ws[k], "passive_abc") for k in ("world-1", "world-2", "world-3"))
    checks = {
        "x-commits-1": v3.committed["X"] == 1,
        "y-commits-0": v3.committed["Y"] == 0,
        "agreement-violated": not v3.agreement_ok,
        "x-indistinguishable": indistinguishable(v3, v1, "X"),
        "y-indistinguishable": indistinguishable(v3, v2, "Y"),
    }
    if exhaustive:
        bad = [w.label for w in enumerate_passive_abc() if not run_world(w, "passive_abc").ok]
        checks["m4-exhaustive-clean"] = not bad
    return ScenarioResult("thm1-abc", True, all(checks.values()), (v3,), checks)


def _scenario_thm2(name: str, tb_runs: int = 0) -> ScenarioResult:
    ws = thm2_worlds()
    v1, v2, v3 = (run_world(ws[k], "active_bft") for k in ("world-1", "world-2", "world-3"))
    checks = {
        "world-1-x-commits-1": v1.committed["X"] == 1,
        "world-2-y-commits-0": v2.committed["Y"] == 0,
        "x-commits-1": v3.committed["X"] == 1,
        "y-commits-0": v3.committed["Y"] == 0,
        "agreement-violated": not v3.agreement_ok,
        "x-indistinguishable": indistinguishable(v3, v1, "X"),
        "y-indistinguishable": indistinguishable(v3, v2, "Y"),
    }
    if tb_runs:
        bad = [w.label for w in itertools.islice(enumerate_trustboost_worlds(), tb_runs)
               if not run_world(w, "trustboost").ok]
        checks["m4-trustboost-clean"] = not bad
    return ScenarioResult(name, True, all(checks.values()), (v3,), checks)


def scenario_thm2_consensus(tb_runs: int = 0) -> ScenarioResult:
    return _scenario_thm2("thm2-consensus", tb_runs)


def scenario_thm2_abc(tb_runs: int = 0) -> ScenarioResult:
    return _scenario_thm2("thm2-abc", tb_runs)


def scenario_relative_settlement() -> ScenarioResult:
    out = combiner_counterexample()
    checks = {
        "relative-x-withholds": out.relative.committed["X"] is None,
        "relative-y-commits": out.relative.committed["Y"] == "tx",
        "relative-termination-violated": not out.relative.termination_ok,
        "lite-x-commits": out.lite.committed["X"] == "tx",
        "lite-y-commits": out.lite.committed["Y"] == "tx",
        "lite-ok": out.lite.agreement_ok and out.lite.termination_ok,
    }
    return ScenarioResult("appendixA", True, all(checks.values()), (out.relative, out.lite), checks)


SCENARIOS: dict[str, Callable[[], ScenarioResult]] = {
    "thm1-consensus": scenario_thm1_consensus,
    "thm1-abc": scenario_thm1_abc,
    "thm2-consensus": scenario_thm2_consensus,
    "thm2-abc": scenario_thm2_abc,
    "appendixA": scenario_relative_settlement,
}


# -- seeded adversarial runs of the view engine ----------------------------------------------------


@dataclass(frozen=True)
class AdversarialRun:
    seed: int
    m: int
    behaviors: Mapping[int, BehaviorPolicy]
    gst: Tick
    agreement_ok: bool
    termination_ok: bool
    violations: tuple
    end: Tick

    @property
    def ok(self) -> bool:
        return self.agreement_ok and self.termination_ok and not self.violations


def random_behavior(rng: random.Random) -> BehaviorPolicy | None:
    kind = rng.choice(("crash", "eqp", "eqv", "spam", "script", "split", "none"))
    if kind == "crash":
        return Crash(rng.randint(0, 3))
    if kind == "eqp":
        return EquivocatePropose()
    if kind == "eqv":
        return EquivocateVote()
    if kind == "spam":
        return AbortSpam()
    if kind == "script":
        table = {k: rng.choice(("honest", "drop", "equivocate")) for k in ("propose", "echo", "key1", "vote")}
        table["abort"] = rng.choice(("honest", "spam", "drop"))
        return Scripted(table)
    if kind == "split":
        return Scripted({k: "equivocate" for k in ("propose", "echo", "key1", "vote")})
    return None


def adversarial_run(seed: int, m: int = 4, horizon: Tick = 3000) -> AdversarialRun:
    """One seeded run: up to f Byzantine chains with random scripts, random
    GST and pre-GST delays, one to three client transactions."""
    rng = random.Random(seed)
    f = (m - 1) // 3
    behaviors = {}
    for c in rng.sample(range(m), rng.randint(0, f) if m > 4 else f):
        b = random_behavior(rng)
        if b is not None:
            behaviors[c] = b
    gst = rng.choice((0, 10, 30, 60))
    delay_rng = random.Random(seed + 99)
    sync = SynchronyConfig(gst, 3, lambda _msg, _now: delay_rng.randint(0, 40))
    api = build(m, seed=seed, behaviors=behaviors, sync=sync)
    fac = TxFactory()
    txs = [fac.make(("buy", f"n{i}", "c"), f"c{i}") for i in range(rng.randint(1, 3))]
    for tx in txs:
        at, entry = rng.randint(0, 40), rng.randrange(m)
        api.sim.at(at, lambda now, tx=tx, e=entry: tb_submit(api, tx, e, now))
    end = api.run(horizon)
    dec = honest_decided(api)
    logs = [api.chains[c].committed_ids() for c in dec]
    agreement = check_agreement(list(dec.values())).ok and check_agreement(logs).ok
    wanted = {tx.id for tx in txs}
    termination = all(wanted <= set(d) for d in dec.values())
    return AdversarialRun(seed, m, behaviors, gst, agreement, termination, tuple(api.sim.violations), end)
