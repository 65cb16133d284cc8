"""Acceptance suite: one printed PASS/FAIL line per criterion.

Tolerances are pinned here and nowhere else.
"""

from __future__ import annotations

import json
import random
import time

import pytest

from trustboost.cli import main as cli_main
from trustboost.consensus import closed_form_messages
from trustboost.core import quorums_for
from trustboost.lite import exhaustive_weak_agreement, honest_termination_delay
from trustboost.scenario import (
    ScenarioConfig, WorkItem, metrics_from_trace, read_trace, run_scenario, trace_bytes, write_outputs,
)
from trustboost.theory import (
    adversarial_run, combiner_counterexample, enumerate_passive_abc, run_world, scenario_thm1_abc,
    scenario_thm1_consensus, scenario_thm2_consensus,
)

QUORUM_RUNTIME_S = 1.0
ATTACK_RUNTIME_S = 60.0
ATTACK_SEEDS = 100
SCALING_TREND_TOL = 0.20
REFERENCE_COUNTS = {4: 102, 10: 738}
ENUM_LIMIT = 2 ** 12
ENUM_RUNTIME_S = 60.0
ADVERSARIAL_SEEDS = 1000
LITE_RUNTIME_S = 120.0
LITE_HORIZON = 20
DETERMINISM_CONFIGS = 20
DETERMINISM_RUNTIME_S = 60.0

# attack label -> (config attack kind, views a decision must take)
ATTACKS = {
    "I": ("crash-primary", 2),
    "II": ("equivocate-primary", 2),
    "III": ("equivocate-nonprimary", 1),
    "IV": ("abort-spam", 1),
}

# invariant violations seen by the scenario runs of criteria 2-7
_RUN_VIOLATIONS: list[str] = []
_RUNS_MONITORED = [0]


def _monitored(violations) -> None:
    _RUNS_MONITORED[0] += 1
    _RUN_VIOLATIONS.extend(violations)


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, detail
    return emit


def _one_tx(m: int, attack: str | None = None, seed: int = 0) -> ScenarioConfig:
    return ScenarioConfig("trustboost-view", m, (m - 1) // 3, seed=seed, horizon=400, attack=attack,
                          workload=[WorkItem(1, payload=["buy", "a.com", "alice"], submitter="alice")])


def test_criterion_1_quorum_arithmetic(report):
    t0 = time.perf_counter()
    bad = []
    for m in range(1, 51):
        q = quorums_for(m, (m - 1) // 3)
        if (q.vote_threshold, q.check_threshold) != ((2 * m) // 3 + 1, m // 3 + 1):
            bad.append(m)
    spots = (quorums_for(4, 1).vote_threshold, quorums_for(4, 1).check_threshold,
             quorums_for(10, 3).vote_threshold, quorums_for(10, 3).check_threshold)
    took = time.perf_counter() - t0
    ok = not bad and spots == (3, 2, 7, 4) and took < QUORUM_RUNTIME_S
    report(1, ok, f"m=1..50 mismatches={bad}, spots(4,10)={spots}, {took * 1000:.1f} ms")


def test_criterion_2_attacks(report):
    t0 = time.perf_counter()
    failures = []
    for label, (kind, views) in ATTACKS.items():
        for seed in range(ATTACK_SEEDS):
            res = run_scenario(_one_tx(4, kind, seed))
            met = res.metrics
            _monitored(met["violations"])
            if not met["verdicts"]["agreement"] or met["views_used"] != [views]:
                failures.append((label, seed, met["verdicts"], met["views_used"]))
    took = time.perf_counter() - t0
    ok = not failures and took < ATTACK_RUNTIME_S
    report(2, ok, f"{len(ATTACKS) * ATTACK_SEEDS} runs, failures={failures[:3]}, {took:.1f} s")


def test_criterion_3_quadratic_scaling(report):
    counts = {}
    for m in (4, 7, 10):
        met = run_scenario(_one_tx(m)).metrics
        _monitored(met["violations"])
        counts[m] = met["messages_total"]
    expected = {m: closed_form_messages(m) for m in counts}
    ours = counts[10] / counts[4]
    ref = REFERENCE_COUNTS[10] / REFERENCE_COUNTS[4]
    trend_ok = abs(ours - ref) / ref <= SCALING_TREND_TOL
    ok = counts == expected == {4: 39, 7: 132, 10: 279} and trend_ok
    report(3, ok, f"counts={counts}, ratio {ours:.2f} vs {ref:.2f}")


def test_criterion_4_passive_split_brain(report, tmp_path):
    code = cli_main(["--scenario", "thm1-consensus", "--out", str(tmp_path)])
    t1 = scenario_thm1_consensus()
    hyb = t1.verdicts[0]
    part1 = code == 2 and hyb.committed == {"X": 0, "Y": 1} and not hyb.agreement_ok
    t0 = time.perf_counter()
    abc = scenario_thm1_abc(exhaustive=False)
    worlds = list(enumerate_passive_abc())
    bad = [w.label for w in worlds if not run_world(w, "passive_abc").ok]
    took = time.perf_counter() - t0
    part2 = abc.confirmed and not abc.verdicts[0].agreement_ok and not bad
    ok = part1 and part2 and len(worlds) <= ENUM_LIMIT and took < ENUM_RUNTIME_S
    report(4, ok, f"f=0: {dict(hyb.committed)} exit={code}; m=3 violated={not abc.verdicts[0].agreement_ok}; "
                  f"m=4 {len(worlds)} combos, {len(bad)} bad, {took:.1f} s")


def test_criterion_5_active_hybrid_world(report):
    t2 = scenario_thm2_consensus()
    hyb = t2.verdicts[0]
    _monitored(hyb.violations)
    part1 = t2.confirmed and hyb.committed["X"] == 1 and hyb.committed["Y"] == 0 and not hyb.agreement_ok
    t0 = time.perf_counter()
    bad = []
    for seed in range(ADVERSARIAL_SEEDS):
        run = adversarial_run(seed)
        _monitored(run.violations)
        if not (run.agreement_ok and run.termination_ok):
            bad.append(seed)
    took = time.perf_counter() - t0
    ok = part1 and not bad
    report(5, ok, f"m=3 X={hyb.committed['X']} Y={hyb.committed['Y']}; "
                  f"m=4 {ADVERSARIAL_SEEDS} runs, bad seeds={bad[:5]}, {took:.1f} s")


def test_criterion_6_lite(report):
    t0 = time.perf_counter()
    search = exhaustive_weak_agreement(m=4, horizon=LITE_HORIZON)
    delays = honest_termination_delay(m=4, block_interval=3)
    took = time.perf_counter() - t0
    term_ok = all(d is not None and d <= 2 * 3 for d in delays.values())
    ok = search.ok and search.states > 0 and term_ok and took < LITE_RUNTIME_S
    report(6, ok, f"{search.states} states, {search.checks} checks, {len(search.violations)} violations; "
                  f"delays={delays} (<= 2 intervals of 3); {took:.1f} s")


def test_criterion_7_relative_settlement(report):
    out = combiner_counterexample()
    rel, lite = out.relative, out.lite
    ok = (rel.committed["X"] is None and rel.committed["Y"] == "tx" and not rel.termination_ok
          and lite.committed == {"X": "tx", "Y": "tx"} and lite.termination_ok and lite.agreement_ok)
    report(7, ok, f"relative={dict(rel.committed)}, lite={dict(lite.committed)}")


def _random_config(rng: random.Random) -> ScenarioConfig:
    m = rng.choice((4, 5, 7))
    attack = rng.choice((None, "crash-primary", "equivocate-primary", "equivocate-nonprimary", "abort-spam"))
    delta = rng.randint(1, 4)
    gst = rng.choice((0, 5, 20))
    work = [WorkItem(rng.randint(0, 20), payload=["set", f"k{i}", i], submitter=f"c{i}", entry=rng.randrange(m))
            for i in range(rng.randint(1, 3))]
    return ScenarioConfig(rng.choice(("trustboost-view", "trustboost-skeleton")), m, (m - 1) // 3,
                          seed=rng.randrange(10 ** 6), horizon=gst + 10 * delta + 300, gst=gst, delta=delta,
                          block_interval=rng.randint(1, 3), attack=attack, workload=work)


def test_criterion_8_determinism_and_replay(report, tmp_path):
    rng = random.Random(2024)
    t0 = time.perf_counter()
    bad = []
    for i in range(DETERMINISM_CONFIGS):
        cfg = _random_config(rng)
        a, b = run_scenario(cfg), run_scenario(cfg)
        if trace_bytes(a.header, a.rows) != trace_bytes(b.header, b.rows):
            bad.append((i, "trace bytes differ"))
            continue
        tpath, mpath = write_outputs(a, tmp_path / str(i))
        header, rows = read_trace(tpath)
        if metrics_from_trace(header, rows) != json.loads(mpath.read_text()):
            bad.append((i, "replay metrics differ"))
    took = time.perf_counter() - t0
    ok = not bad and took < DETERMINISM_RUNTIME_S
    report(8, ok, f"{DETERMINISM_CONFIGS} configs, mismatches={bad}, {took:.1f} s")


def test_criterion_9_invariants(report):
    if not _RUNS_MONITORED[0]:
        # run standalone: exercise a representative slice of criteria 2 and 5
        for kind, _ in ATTACKS.values():
            _monitored(run_scenario(_one_tx(4, kind, 0)).metrics["violations"])
        for seed in range(50):
            _monitored(adversarial_run(seed).violations)
    ok = not _RUN_VIOLATIONS
    report(9, ok, f"{_RUNS_MONITORED[0]} monitored runs, violations={_RUN_VIOLATIONS[:3]}")
