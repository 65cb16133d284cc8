"""Declarative scenarios: TOML config in, JSON-lines trace and JSON metrics out.

Metrics are always derived from the trace rows by :func:`metrics_from_trace`,
so replaying a trace file reproduces them exactly.
"""

from __future__ import annotations

import hashlib
import json
import re
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

from . import __version__
from .ccc import SynchronyConfig, Trace
from .chain import (
    AbortSpam, BehaviorPolicy, Crash, EquivocatePropose, EquivocateVote, Scripted,
)
from .core import ConfigError, TxFactory, check_agreement, check_weak_agreement
from .consensus import build, tb_submit
from .lite import Outpoint, build_lite, genesis, lite_check, lite_submit, reveal_policy, utxo_tx

CONFIG_SCHEMA = "trustboost.scenario/1"
TRACE_SCHEMA = "trustboost.trace/1"
METRICS_SCHEMA = "trustboost.metrics/1"

PROTOCOLS = ("trustboost-skeleton", "trustboost-view", "lite")
ATTACKS = ("crash-primary", "equivocate-primary", "equivocate-nonprimary", "abort-spam", "split-brain")
SCRIPT_EVENTS = {"propose", "echo", "key1", "vote", "abort", "check", "read", "submit"}
SCRIPT_ACTIONS = {"honest", "drop", "equivocate", "spam", "true", "false", "blank"}


@dataclass
class WorkItem:
    tick: int
    id: str | None = None
    payload: list | None = None
    submitter: str = "client"
    entry: int = 0
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    chains: list | None = None


@dataclass
class Reveal:
    chain: int
    group: str
    tx: str
    tick: int = 0


@dataclass
class ScenarioConfig:
    protocol: str
    m: int
    f: int
    seed: int = 0
    horizon: int = 400
    gst: int = 0
    delta: int = 3
    block_interval: int = 1
    timeout: int | None = None
    attack: str | None = None
    attack_target: int | None = None
    script: dict | None = None
    workload: list[WorkItem] = field(default_factory=list)
    genesis_owners: list[str] = field(default_factory=list)
    groups: dict[str, list[str]] = field(default_factory=lambda: {"X": ["x"], "Y": ["y"]})
    reveals: list[Reveal] = field(default_factory=list)
    name: str = "scenario"

    def to_dict(self) -> dict:
        return asdict(self)


# -- parsing ------------------------------------------------------------------------------


def _line_of(text: str, key: str) -> int | None:
    pat = re.compile(rf"^\s*{re.escape(key)}\s*=", re.M)
    hit = pat.search(text)
    return text.count("\n", 0, hit.start()) + 1 if hit else None


class _Fields:
    """Typed accessors that report the offending line and field."""

    def __init__(self, text: str, source: str) -> None:
        self.text = text
        self.source = source

    def fail(self, key: str, msg: str):
        line = _line_of(self.text, key.split(".")[-1])
        where = f"{self.source}:{line}" if line else self.source
        raise ConfigError(f"{where}: field '{key}': {msg}")

    def get(self, table: Mapping, key: str, kind, default=..., path: str = ""):
        full = f"{path}{key}"
        if key not in table:
            if default is ...:
                self.fail(full, "required")
            return default
        val = table[key]
        if kind is int and (isinstance(val, bool) or not isinstance(val, int)):
            self.fail(full, f"expected integer, got {val!r}")
        if kind is str and not isinstance(val, str):
            self.fail(full, f"expected string, got {val!r}")
        if kind is list and not isinstance(val, list):
            self.fail(full, f"expected array, got {val!r}")
        return val


def parse_config(text: str, source: str = "<config>", base_dir: Path | None = None) -> ScenarioConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    fx = _Fields(text, source)
    schema = doc.get("schema", CONFIG_SCHEMA)
    if schema != CONFIG_SCHEMA:
        fx.fail("schema", f"unsupported schema {schema!r}, expected {CONFIG_SCHEMA!r}")
    sc = doc.get("scenario")
    if not isinstance(sc, dict):
        raise ConfigError(f"{source}: missing [scenario] table")
    protocol = fx.get(sc, "protocol", str, path="scenario.")
    if protocol not in PROTOCOLS and not protocol.startswith("theory:"):
        fx.fail("scenario.protocol", f"unknown protocol {protocol!r}; expected one of {PROTOCOLS} or theory:<name>")
    m = fx.get(sc, "m", int, 4, path="scenario.")
    if m < 1:
        fx.fail("scenario.m", "must be >= 1")
    f = fx.get(sc, "f", int, (m - 1) // 3, path="scenario.")
    if f < 0:
        fx.fail("scenario.f", "must be >= 0")
    net = doc.get("network", {})
    chains = doc.get("chains", {})
    cfg = ScenarioConfig(
        protocol=protocol, m=m, f=f,
        seed=fx.get(sc, "seed", int, 0, path="scenario."),
        horizon=fx.get(sc, "horizon", int, 400, path="scenario."),
        name=fx.get(sc, "name", str, "scenario", path="scenario."),
        gst=fx.get(net, "gst", int, 0, path="network."),
        delta=fx.get(net, "delta", int, 3, path="network."),
        block_interval=fx.get(chains, "block_interval", int, 1, path="chains."),
        timeout=fx.get(chains, "timeout", int, None, path="chains."),
    )
    if cfg.delta < 1:
        fx.fail("network.delta", "must be >= 1")
    if cfg.gst < 0:
        fx.fail("network.gst", "must be >= 0")
    if cfg.block_interval < 1:
        fx.fail("chains.block_interval", "must be >= 1")
    if cfg.horizon <= cfg.gst + 10 * cfg.delta:
        fx.fail("scenario.horizon", f"must exceed gst + 10*delta = {cfg.gst + 10 * cfg.delta}")
    attack = doc.get("attack")
    if attack is not None:
        kind = fx.get(attack, "kind", str, path="attack.")
        target = fx.get(attack, "target", int, None, path="attack.")
        if kind.startswith("scripted:"):
            cfg.script = _load_script(kind.split(":", 1)[1], base_dir, fx)
        elif kind not in ATTACKS:
            fx.fail("attack.kind", f"unknown attack {kind!r}; expected one of {ATTACKS} or scripted:<file>")
        if target is not None and not 0 <= target < m:
            fx.fail("attack.target", f"chain {target} does not exist (m={m})")
        cfg.attack, cfg.attack_target = kind, target
    for i, item in enumerate(doc.get("workload", [])):
        p = f"workload[{i}]."
        w = WorkItem(tick=fx.get(item, "tick", int, path=p))
        w.id = fx.get(item, "id", str, None, path=p)
        w.payload = fx.get(item, "payload", list, None, path=p)
        w.submitter = fx.get(item, "submitter", str, "client", path=p)
        w.entry = fx.get(item, "entry", int, 0, path=p)
        w.inputs = fx.get(item, "inputs", list, [], path=p)
        w.outputs = fx.get(item, "outputs", list, [], path=p)
        w.chains = fx.get(item, "chains", list, None, path=p)
        if not 0 <= w.entry < m:
            fx.fail(p + "entry", f"chain {w.entry} does not exist (m={m})")
        if protocol == "lite" and (w.id is None or not w.inputs):
            fx.fail(p + "inputs", "lite transactions need an id and at least one input")
        cfg.workload.append(w)
    gen = doc.get("genesis", {})
    cfg.genesis_owners = fx.get(gen, "owners", list, [], path="genesis.")
    groups = doc.get("groups")
    if groups is not None:
        cfg.groups = {g: list(ps) for g, ps in groups.items()}
    for i, r in enumerate(doc.get("reveal", [])):
        p = f"reveal[{i}]."
        rv = Reveal(fx.get(r, "chain", int, path=p), fx.get(r, "group", str, path=p),
                    fx.get(r, "tx", str, path=p), fx.get(r, "tick", int, 0, path=p))
        if not 0 <= rv.chain < m:
            fx.fail(p + "chain", f"chain {rv.chain} does not exist (m={m})")
        if rv.group not in cfg.groups:
            fx.fail(p + "group", f"unknown group {rv.group!r}")
        cfg.reveals.append(rv)
    return cfg


def _load_script(path: str, base_dir: Path | None, fx: _Fields) -> dict:
    p = Path(path)
    if not p.is_absolute() and base_dir is not None:
        p = base_dir / p
    try:
        table = tomllib.loads(p.read_text())
    except OSError as exc:
        fx.fail("attack.kind", f"cannot read script {p}: {exc}")
    except tomllib.TOMLDecodeError as exc:
        fx.fail("attack.kind", f"script {p}: {exc}")
    table = table.get("script", table)
    for ev, act in table.items():
        if ev not in SCRIPT_EVENTS or act not in SCRIPT_ACTIONS:
            fx.fail("attack.kind", f"script {p}: bad entry {ev} = {act!r}")
    return dict(table)


def load_config(path: str | Path) -> ScenarioConfig:
    p = Path(path)
    return parse_config(p.read_text(), str(p), p.parent)


# -- execution ------------------------------------------------------------------------------


def attack_behaviors(cfg: ScenarioConfig) -> dict[int, BehaviorPolicy]:
    if cfg.attack is None:
        return {}
    m = cfg.m
    if cfg.attack == "crash-primary":
        return {cfg.attack_target or 0: Crash(0)}
    if cfg.attack == "equivocate-primary":
        return {cfg.attack_target or 0: EquivocatePropose()}
    if cfg.attack == "equivocate-nonprimary":
        return {_nonprimary(cfg): EquivocateVote()}
    if cfg.attack == "abort-spam":
        return {_nonprimary(cfg): AbortSpam()}
    if cfg.attack == "split-brain":
        from .theory import _tb_split

        target = cfg.attack_target if cfg.attack_target is not None else m - 1
        others = [c for c in range(m) if c != target]
        half = len(others) // 2
        return {target: _tb_split(1, 0, others[:half], others[half:])}
    if cfg.attack.startswith("scripted:"):
        return {cfg.attack_target if cfg.attack_target is not None else 0: Scripted(cfg.script or {})}
    raise ConfigError(f"unknown attack {cfg.attack!r}")


def _nonprimary(cfg: ScenarioConfig) -> int:
    target = cfg.attack_target if cfg.attack_target is not None else 1 % cfg.m
    return target


@dataclass
class RunResult:
    header: dict
    rows: list[dict]
    metrics: dict
    exit_code: int


def _header(cfg: ScenarioConfig, honest: list[int]) -> dict:
    return {"ev": "header", "schema": TRACE_SCHEMA, "version": __version__,
            "config": cfg.to_dict(), "honest": honest}


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    if cfg.protocol.startswith("theory:"):
        rows, honest = _run_theory(cfg)
    elif cfg.protocol == "lite":
        rows, honest = _run_lite(cfg)
    else:
        rows, honest = _run_trustboost(cfg)
    header = _header(cfg, honest)
    metrics = metrics_from_trace(header, rows)
    return RunResult(header, rows, metrics, exit_code_for(metrics))


def _run_trustboost(cfg: ScenarioConfig) -> tuple[list[dict], list[int]]:
    engine = "skeleton" if cfg.protocol == "trustboost-skeleton" else "view"
    sync = SynchronyConfig(cfg.gst, cfg.delta)
    api = build(cfg.m, engine=engine, behaviors=attack_behaviors(cfg), sync=sync, seed=cfg.seed,
                block_interval=cfg.block_interval, timeout=cfg.timeout, f=cfg.f)
    fac = TxFactory()
    for w in cfg.workload:
        payload = tuple(w.payload) if w.payload is not None else ("set", w.id or "k", w.tick)
        tx = fac.make(payload, w.submitter)
        api.sim.at(w.tick, lambda now, tx=tx, e=w.entry: tb_submit(api, tx, e, now))
    api.run(cfg.horizon)
    rows = api.sim.trace.rows
    for v in api.sim.violations:
        rows.append({"ev": "violation", "tick": api.sim.now, "what": v})
    return rows, api.sim.honest


def _run_lite(cfg: ScenarioConfig) -> tuple[list[dict], list[int]]:
    mint = genesis(*cfg.genesis_owners) if cfg.genesis_owners else {}
    txs = {}
    for w in cfg.workload:
        ins = [Outpoint(str(a), int(b)) for a, b in w.inputs]
        txs[w.id] = (w, utxo_tx(w.id, ins, [(str(o), int(n)) for o, n in w.outputs], w.submitter))
    behaviors = attack_behaviors(cfg) if cfg.attack and cfg.attack != "split-brain" else {}
    by_chain: dict[int, dict[str, list]] = {}
    for r in cfg.reveals:
        if r.tx not in txs:
            raise ConfigError(f"reveal references unknown transaction {r.tx!r}")
        by_chain.setdefault(r.chain, {g: [] for g in cfg.groups})[r.group].append((r.tx, r.tick))
    members = {p: g for g, ps in cfg.groups.items() for p in ps}
    for c, reveals in by_chain.items():
        behaviors[c] = reveal_policy(members, reveals)
    trace = Trace()
    api = build_lite(cfg.m, behaviors=behaviors, block_interval=cfg.block_interval, mint=mint,
                     seed=cfg.seed, f=cfg.f, trace=trace)
    for tx_id, (w, tx) in txs.items():
        api.register(tx)
        trace.emit("tx", 0, tx=tx_id, inputs=[[op.tx_id, op.index] for op in tx.inputs])
        if w.chains == []:
            continue
        api.sim.at(w.tick, lambda now, tx=tx, cs=w.chains: lite_submit(api, tx, now, cs))
    for c, reveals in by_chain.items():
        for g, entries in reveals.items():
            for tx_id, tick in entries:
                trace.emit("reveal", 0, chain=c, group=g, tx=tx_id, at=tick)
    processes = [p for g in sorted(cfg.groups) for p in cfg.groups[g]]
    seen: set[tuple[str, str]] = set()

    def observe(now: int) -> None:
        for p in processes:
            for tx_id in txs:
                if (p, tx_id) not in seen and lite_check(api, tx_id, p, now):
                    seen.add((p, tx_id))
                    trace.emit("check", now, process=p, tx=tx_id)

    api.sim.tick_hooks.append(observe)
    api.run(cfg.horizon, stop_when_idle=False)
    rows = trace.rows
    for v in api.sim.violations:
        rows.append({"ev": "violation", "tick": api.sim.now, "what": v})
    return rows, api.sim.honest


def _run_theory(cfg: ScenarioConfig) -> tuple[list[dict], list[int]]:
    from .theory import SCENARIOS

    name = cfg.protocol.split(":", 1)[1]
    if name not in SCENARIOS:
        raise ConfigError(f"unknown theory scenario {name!r}; expected one of {sorted(SCENARIOS)}")
    res = SCENARIOS[name]()
    rows: list[dict] = []
    for v in res.verdicts:
        rows.append({"ev": "verdict", "tick": 0, "world": v.label, "protocol": v.protocol,
                     "committed": {str(k): _jsonable(x) for k, x in v.committed.items()},
                     "agreement": v.agreement_ok, "validity": v.validity_ok, "termination": v.termination_ok})
    rows.append({"ev": "scenario", "tick": 0, "name": res.name, "expected_violation": res.expected_violation,
                 "checks": dict(res.checks)})
    return rows, []


def _jsonable(x: Any) -> Any:
    if isinstance(x, tuple):
        return list(x)
    return x


# -- metrics ------------------------------------------------------------------------------------


def metrics_from_trace(header: Mapping, rows: list[dict]) -> dict:
    cfg = header["config"]
    protocol = cfg["protocol"]
    sends = [r for r in rows if r["ev"] == "send"]
    counts: dict[str, int] = {}
    for r in sends:
        counts[r["kind"]] = counts.get(r["kind"], 0) + 1
    violations = [r["what"] for r in rows if r["ev"] == "violation"]
    out: dict[str, Any] = {
        "schema": METRICS_SCHEMA,
        "version": header["version"],
        "protocol": protocol,
        "m": cfg["m"],
        "f": cfg["f"],
        "seed": cfg["seed"],
        "message_counts": dict(sorted(counts.items())),
        "messages_total": len(sends),
        "violations": violations,
        "trace_path": "trace.jsonl",
    }
    if protocol.startswith("theory:"):
        out.update(_theory_metrics(rows))
    elif protocol == "lite":
        out.update(_lite_metrics(header, rows))
    else:
        out.update(_tb_metrics(header, rows))
    out["verdicts"]["invariants"] = not violations
    return out


def _tb_metrics(header: Mapping, rows: list[dict]) -> dict:
    honest = header["honest"]
    submits = {r["tx"]: r["tick"] for r in rows if r["ev"] == "submit"}
    checks = {r["tx"]: r["tick"] for r in rows if r["ev"] == "check"}
    decided: dict[int, dict[int, str]] = {c: {} for c in honest}
    slot_views: dict[int, list[int]] = {}
    for r in rows:
        if r["ev"] != "decide" or r["chain"] not in decided:
            continue
        decided[r["chain"]][r["slot"]] = r["tx"]
        if r["view"] >= 0:
            slot_views.setdefault(r["slot"], []).append(r["view"])
    seqs = {c: [d[s] for s in sorted(d)] for c, d in decided.items()}
    views_used = []
    start = 0
    for slot in sorted(slot_views):
        v = min(slot_views[slot])
        views_used.append(v - start + 1)
        start = v + 1
    n_dec = max((len(s) for s in seqs.values()), default=0)
    agreement = check_agreement(list(seqs.values())).ok
    wanted = set(submits)
    term = all(wanted <= set(s) for s in seqs.values())
    validity = all(set(s) <= wanted for s in seqs.values())
    total = sum(1 for r in rows if r["ev"] == "send")
    return {
        "decided": {str(c): wanted <= set(s) for c, s in seqs.items()},
        "decided_txs": {str(c): s for c, s in seqs.items()},
        "views_used": views_used,
        "ticks_to_commit": {tx: (checks[tx] - t if tx in checks else None) for tx, t in sorted(submits.items())},
        "messages_per_decision": (total / n_dec) if n_dec else None,
        "verdicts": {"agreement": agreement, "validity": validity, "termination": term},
        "expected_violation": False,
    }


def _lite_metrics(header: Mapping, rows: list[dict]) -> dict:
    groups = header["config"]["groups"]
    processes = [p for g in sorted(groups) for p in groups[g]]
    inputs = {r["tx"]: {tuple(i) for i in r["inputs"]} for r in rows if r["ev"] == "tx"}
    submits = {r["tx"]: r["tick"] for r in rows if r["ev"] == "submit"}
    committed: dict[str, list[str]] = {p: [] for p in processes}
    first: dict[str, int] = {}
    last: dict[str, dict[str, int]] = {}
    for r in rows:
        if r["ev"] == "check":
            committed[r["process"]].append(r["tx"])
            last.setdefault(r["tx"], {})[r["process"]] = r["tick"]
            first.setdefault(r["tx"], r["tick"])

    def conflict(a: str, b: str) -> bool:
        return a != b and bool(inputs.get(a, set()) & inputs.get(b, set()))

    weak = check_weak_agreement({p: s for p, s in committed.items()}, conflict)
    clean = [t for t in submits if not any(conflict(t, o) for o in inputs)]
    term = all(t in committed[p] for t in clean for p in processes)
    ticks = {}
    for t, s in sorted(submits.items()):
        seen = last.get(t, {})
        ticks[t] = max(seen.values()) - s if len(seen) == len(processes) else None
    return {
        "decided": {p: all(t in committed[p] for t in clean) for p in processes},
        "decided_txs": committed,
        "views_used": [],
        "ticks_to_commit": ticks,
        "messages_per_decision": None,
        "verdicts": {"agreement": weak.ok, "validity": all(t in inputs for s in committed.values() for t in s),
                     "termination": term},
        "expected_violation": False,
    }


def _theory_metrics(rows: list[dict]) -> dict:
    verdicts = [r for r in rows if r["ev"] == "verdict"]
    sc = next(r for r in rows if r["ev"] == "scenario")
    return {
        "decided": {f"{v['world']}/{v['protocol']}": v["committed"] for v in verdicts},
        "views_used": [],
        "ticks_to_commit": {},
        "messages_per_decision": None,
        "verdicts": {
            "agreement": all(v["agreement"] for v in verdicts),
            "validity": all(v["validity"] for v in verdicts),
            "termination": all(v["termination"] for v in verdicts),
        },
        "checks": sc["checks"],
        "expected_violation": sc["expected_violation"],
        "confirmed": all(sc["checks"].values()),
    }


def exit_code_for(metrics: Mapping) -> int:
    """0: every verdict OK; 2: an expected violation was confirmed; 1: otherwise."""
    if metrics.get("expected_violation"):
        return 2 if metrics.get("confirmed") else 1
    return 0 if all(metrics["verdicts"].values()) else 1


# -- trace files --------------------------------------------------------------------------------


class TraceError(ValueError):
    pass


def _dump(row: Mapping) -> str:
    return json.dumps(row, sort_keys=True, separators=(",", ":"))


def trace_bytes(header: Mapping, rows: list[dict]) -> bytes:
    lines = [_dump(header)] + [_dump(r) for r in rows]
    body = "".join(line + "\n" for line in lines).encode()
    end = {"ev": "end", "rows": len(rows), "sha256": hashlib.sha256(body).hexdigest()}
    return body + (_dump(end) + "\n").encode()


def write_outputs(result: RunResult, out_dir: str | Path) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tpath = out / "trace.jsonl"
    mpath = out / "metrics.json"
    tpath.write_bytes(trace_bytes(result.header, result.rows))
    mpath.write_text(json.dumps(result.metrics, sort_keys=True, indent=2) + "\n")
    return tpath, mpath


def read_trace(path: str | Path) -> tuple[dict, list[dict]]:
    data = Path(path).read_bytes()
    lines = data.splitlines(keepends=True)
    if not lines:
        raise TraceError(f"{path}: empty trace")
    try:
        end = json.loads(lines[-1])
    except json.JSONDecodeError:
        raise TraceError(f"{path}: truncated trace (no end record)") from None
    if end.get("ev") != "end":
        raise TraceError(f"{path}: truncated trace (no end record)")
    body = b"".join(lines[:-1])
    if hashlib.sha256(body).hexdigest() != end.get("sha256"):
        raise TraceError(f"{path}: checksum mismatch; trace was modified")
    records = [json.loads(line) for line in lines[:-1]]
    header, rows = records[0], records[1:]
    if header.get("schema") != TRACE_SCHEMA:
        raise TraceError(f"{path}: unsupported trace schema {header.get('schema')!r}")
    if header.get("version") != __version__:
        raise TraceError(f"{path}: written by version {header.get('version')}, this is {__version__}")
    if len(rows) != end.get("rows"):
        raise TraceError(f"{path}: row count mismatch")
    return header, rows


def replay(path: str | Path) -> dict:
    header, rows = read_trace(path)
    return metrics_from_trace(header, rows)


# -- sweep ------------------------------------------------------------------------------------------

REFERENCE_COUNTS = {4: 102, 10: 738}


def sweep(ms: list[int], reps: int = 1, seed_base: int = 0, band: float = 0.15) -> dict:
    """Honest single-transaction runs per m; message count against m**2."""
    per_m = {}
    for m in ms:
        if m < 2:
            raise ConfigError(f"sweep needs m >= 2, got {m}")
        counts, ticks = [], []
        for r in range(reps):
            cfg = ScenarioConfig("trustboost-view", m, (m - 1) // 3, seed=seed_base + r, horizon=400,
                                 workload=[WorkItem(1, payload=["buy", "a.com", "alice"], submitter="alice")])
            res = run_scenario(cfg)
            counts.append(res.metrics["messages_total"])
            ticks.extend(t for t in res.metrics["ticks_to_commit"].values() if t is not None)
        mean = sum(counts) / len(counts)
        per_m[m] = {"mean_messages": mean, "mean_ticks_to_commit": sum(ticks) / len(ticks) if ticks else None,
                    "ratio": mean / (m * m)}
    report: dict[str, Any] = {"schema": "trustboost.sweep/1", "ms": ms, "reps": reps,
                              "per_m": {str(m): v for m, v in per_m.items()}}
    if len(ms) >= 2:
        ratios = [v["ratio"] for v in per_m.values()]
        mean_r = sum(ratios) / len(ratios)
        dev = max(abs(r - mean_r) / mean_r for r in ratios)
        report["fit"] = {"mean_ratio": mean_r, "max_deviation": dev, "quadratic": dev <= band, "band": band}
        lo, hi = min(ms), max(ms)
        if lo in REFERENCE_COUNTS and hi in REFERENCE_COUNTS:
            ours = per_m[hi]["mean_messages"] / per_m[lo]["mean_messages"]
            ref = REFERENCE_COUNTS[hi] / REFERENCE_COUNTS[lo]
            ideal = (hi / lo) ** 2
            report["reference_check"] = {
                "ours": ours, "reference": ref, "ideal": ideal,
                "within_20pct": abs(ours - ref) / ref <= 0.2,
                "both_near_ideal": all(abs(x - ideal) / ideal <= 0.2 for x in (ours, ref)),
            }
    return report
