"""Command-line entry point: ``trustboost --config run.toml --out out/``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .core import ConfigError
from .scenario import (
    ScenarioConfig, TraceError, exit_code_for, load_config, replay, run_scenario, sweep, write_outputs,
)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trustboost", description=__doc__)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", metavar="PATH", help="scenario config (TOML)")
    src.add_argument("--scenario", metavar="NAME", help="built-in theory world, e.g. thm1-consensus")
    src.add_argument("--sweep", metavar="MS", help='comma-separated m values, e.g. "4,7,10"')
    src.add_argument("--replay", metavar="PATH", help="re-derive metrics from a trace file")
    p.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--reps", type=int, default=1, help="repetitions per m for --sweep")
    return p


def _summary(metrics: dict) -> str:
    v = metrics["verdicts"]
    flags = " ".join(f"{k}={'OK' if ok else 'FAIL'}" for k, ok in v.items())
    return f"{metrics['protocol']} m={metrics['m']} f={metrics['f']} seed={metrics['seed']}: {flags}"


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.replay:
            metrics = replay(args.replay)
            print(json.dumps(metrics, sort_keys=True, indent=2))
            return exit_code_for(metrics)
        if args.sweep:
            ms = [int(x) for x in args.sweep.split(",") if x.strip()]
            report = sweep(ms, args.reps, args.seed or 0)
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "sweep.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
            for m, row in report["per_m"].items():
                print(f"m={m} messages={row['mean_messages']:.1f} ratio={row['ratio']:.3f}")
            fit = report.get("fit")
            if fit:
                print(f"quadratic fit: max deviation {fit['max_deviation']:.1%} (band {fit['band']:.0%})")
                return 0 if fit["quadratic"] else 1
            return 0
        if args.scenario:
            name = args.scenario.removeprefix("theory:")
            cfg = ScenarioConfig(f"theory:{name}", 0, 0, horizon=10**9)
        else:
            cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        result = run_scenario(cfg)
        tpath, mpath = write_outputs(result, args.out)
        print(_summary(result.metrics))
        for what in result.metrics["violations"]:
            print(f"invariant violation: {what}", file=sys.stderr)
        print(f"wrote {tpath} and {mpath}")
        return result.exit_code
    except (ConfigError, TraceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
