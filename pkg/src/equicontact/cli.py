"""Command-line entry points: property suites, benchmarks, the pick-and-place
pipeline, result export, and the teleoperation daemon."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import harness
from .harness import (
    BenchmarkConfig,
    TrialReport,
    export_results,
    replay_export,
    run_benchmark,
    run_equivariance_suite,
    run_pipeline_trial,
    run_rollout_equivariance,
    success_counts,
    trial_seed_for,
)
from .policy import PolicyConfig
from .sim import ScenarioSpec
from .teleopd import serve


def _add_suite(sub):
    p = sub.add_parser("suite", help="run the equivariance property suites")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rollout", action="store_true", default=True)
    p.add_argument("--no-rollout", dest="rollout", action="store_false")
    p.add_argument("--rollout-cases", type=int, default=20)
    p.add_argument("--rollout-steps", type=int, default=2000)
    p.add_argument("--rollout-tol", type=float, default=1e-6)
    p.add_argument("--out", type=Path, default=None)


def cmd_suite(args) -> int:
    t0 = time.time()
    report = run_equivariance_suite(args.samples, args.tol, args.seed)
    checks = list(report.checks)
    if args.rollout:
        checks.append(run_rollout_equivariance(args.rollout_cases,
                                               args.rollout_steps,
                                               args.rollout_tol, args.seed))
    report = harness.SuiteReport(tuple(checks))
    for line in report.summary_lines():
        print(line)
    print(f"elapsed: {time.time() - t0:.1f}s")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        with open(args.out / "suite_report.json", "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)
        print(f"wrote {args.out / 'suite_report.json'}")
    return 0 if report.passed else 1


def _add_bench(sub):
    p = sub.add_parser("bench", help="run seeded benchmark trials")
    p.add_argument("--policy", default="gcev-local",
                   choices=["gcev-local", "world-frame-replay"])
    p.add_argument("--compliance", default="on", choices=["on", "off"])
    p.add_argument("--scenarios", default="flat-ood",
                   help=f"comma list from {', '.join(harness.SCENARIO_IDS)}")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ref-noise", default="bench",
                   help="none | bench | rmse-table | lateral-<N>mm")
    p.add_argument("--visual", default="augmented",
                   choices=["augmented", "brittle", "off"])
    p.add_argument("--gain-schedule", default="adaptive",
                   choices=["adaptive", "fixed-high"])
    p.add_argument("--timeout", type=float, default=15.0)
    p.add_argument("--policy-config", type=Path, default=None)
    p.add_argument("--traces", action="store_true",
                   help="export per-trial force profiles")
    p.add_argument("--replay", type=Path, default=None,
                   help="re-run every trial recorded in an exported trials.json")
    p.add_argument("--out", type=Path, default=Path("bench_out"))


def cmd_bench(args) -> int:
    pcfg = PolicyConfig.load(args.policy_config) if args.policy_config else None
    if args.replay:
        reports = replay_export(args.replay, pcfg)
        print(f"replayed {len(reports)} trials from {args.replay}")
        _print_counts(reports)
        export_results(reports, args.out)
        return 0
    cfg = BenchmarkConfig(
        policy=args.policy,
        compliance=args.compliance == "on",
        scenarios=tuple(s.strip() for s in args.scenarios.split(",") if s.strip()),
        trials=args.trials,
        seed=args.seed,
        ref_noise=args.ref_noise,
        visual=args.visual,
        gain_schedule=args.gain_schedule,
        timeout_s=args.timeout,
    )
    t0 = time.time()
    reports, traces = run_benchmark(cfg, pcfg, collect_traces=args.traces)
    print(f"ran {len(reports)} trials in {time.time() - t0:.1f}s")
    _print_counts(reports)
    created = export_results(reports, args.out, cfg=cfg,
                             traces=traces if args.traces else None)
    for path in created:
        print(f"wrote {path}")
    return 0


def _print_counts(reports) -> None:
    for (scenario, policy), row in sorted(success_counts(reports).items()):
        print(f"  {scenario:18s} {policy:20s} "
              f"{row['success']}/{row['trials']} success, "
              f"{row['fail']} fail, {row['blowup']} blowup")


def _add_pipeline(sub):
    p = sub.add_parser("pipeline", help="full pick-then-place trials")
    p.add_argument("--scenario", default="flat-ood")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ref-noise", default="rmse-table")
    p.add_argument("--out", type=Path, default=Path("pipeline_out"))


def cmd_pipeline(args) -> int:
    t0 = time.time()
    reports = []
    for i in range(args.trials):
        res = run_pipeline_trial(trial_seed_for(args.seed, i), args.scenario,
                                 ref_noise=args.ref_noise)
        reports.append(res.report)
    print(f"ran {len(reports)} pipeline trials in {time.time() - t0:.1f}s")
    _print_counts(reports)
    created = export_results(reports, args.out)
    for path in created:
        print(f"wrote {path}")
    return 0


def _add_export(sub):
    p = sub.add_parser("export", help="re-export saved trial reports")
    p.add_argument("--reports", type=Path, required=True,
                   help="trials.json produced by bench")
    p.add_argument("--format", default="csv,json")
    p.add_argument("--out", type=Path, required=True)


def cmd_export(args) -> int:
    with open(args.reports) as fh:
        payload = json.load(fh)
    reports = [TrialReport.from_dict(d) for d in payload["reports"]]
    cfg = (BenchmarkConfig.from_dict(payload["config"])
           if payload.get("config") else None)
    formats = tuple(f.strip() for f in args.format.split(","))
    created = export_results(reports, args.out, cfg=cfg, formats=formats)
    for path in created:
        print(f"wrote {path}")
    return 0


def _add_teleopd(sub):
    p = sub.add_parser("teleopd", help="run the teleoperation daemon")
    p.add_argument("--bind", default="127.0.0.1:7643")
    p.add_argument("--ws-bind", default="127.0.0.1:7644")
    p.add_argument("--scene", type=Path, default=None,
                   help="scenario spec JSON (tilt_deg, trans_bound, seed, ...)")
    p.add_argument("--record-dir", type=Path, default=Path("demos_recorded"))
    p.add_argument("--seed", type=int, default=0)


def cmd_teleopd(args) -> int:
    scenario = None
    if args.scene:
        with open(args.scene) as fh:
            scenario = ScenarioSpec.from_dict(json.load(fh))
    serve(bind=args.bind, ws_bind=args.ws_bind, scenario=scenario,
          record_dir=args.record_dir, seed=args.seed)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="equicontact",
        description="geometric compliant-control toolkit: property suites, "
                    "peg-in-hole benchmarks, and teleoperation")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_suite(sub)
    _add_bench(sub)
    _add_pipeline(sub)
    _add_export(sub)
    _add_teleopd(sub)
    args = parser.parse_args(argv)
    handlers = {
        "suite": cmd_suite,
        "bench": cmd_bench,
        "pipeline": cmd_pipeline,
        "export": cmd_export,
        "teleopd": cmd_teleopd,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
