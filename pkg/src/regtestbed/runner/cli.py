"""``testbed`` command line.

Exit codes: 0 on full success, 2 when some points are incomplete, 1 on a
fatal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from ..config import ExperimentPlan, load_plan, preset, validate_plan
from ..errors import TestbedError

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2

log = logging.getLogger("testbed")


def _override(plan: ExperimentPlan, args) -> ExperimentPlan:
    changes = {}
    if args.backend is not None:
        changes["backend"] = args.backend
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.duration is not None:
        changes["duration"] = float(args.duration)
    if args.repetitions is not None:
        changes["repetitions"] = args.repetitions
    if not changes:
        return plan
    return validate_plan(replace(plan, points=tuple(replace(p, **changes) for p in plan.points)))


def cmd_run(args) -> int:
    from .experiment import run_experiment

    if args.experiment is not None:
        plan = preset(args.experiment)
    else:
        plan = load_plan(args.config)
    plan = _override(plan, args)
    orchestrator = None
    if plan.points and plan.points[0].backend == "container":
        from ..orchestrator import Orchestrator

        orchestrator = Orchestrator(image=args.image) if args.image else Orchestrator()
    report = run_experiment(plan, out=args.out, run_id=args.run_id, drain=args.drain,
                            orchestrator=orchestrator, keep_last=args.keep)
    run_dir = Path(args.out) / report.run_id
    print((run_dir / "summary.txt").read_text(encoding="utf-8"), end="")
    print(f"artifacts in {run_dir}")
    return EXIT_PARTIAL if report.partial else EXIT_OK


def cmd_report(args) -> int:
    from .experiment import load_report
    from .report import emit_report

    report = load_report(args.run_dir)
    emit_report(report, args.run_dir, plots=not args.no_plots)
    print((Path(args.run_dir) / "summary.txt").read_text(encoding="utf-8"), end="")
    return EXIT_PARTIAL if report.partial else EXIT_OK


def cmd_teardown(args) -> int:
    from ..orchestrator import Orchestrator

    report = Orchestrator().teardown(args.run_id)
    print(f"removed {len(report.removed_containers)} container(s), "
          f"{len(report.removed_networks)} network(s)")
    for err in report.errors:
        print(f"error: {err}", file=sys.stderr)
    return EXIT_FATAL if report.errors else EXIT_OK


def cmd_verify_topology(args) -> int:
    from ..orchestrator import Orchestrator
    from ..topology import read_edge_list, verify_topology

    run_dir = Path(args.out) / args.run_id
    topo_files = sorted(run_dir.glob("topology_s*.txt"), key=lambda p: int(p.stem.split("_s")[1]))
    if not topo_files:
        print(f"no topology recorded under {run_dir}", file=sys.stderr)
        return EXIT_FATAL
    cred_file = run_dir / "credentials.json"
    if cred_file.exists():
        orch = Orchestrator()
        creds = tuple(json.loads(cred_file.read_text(encoding="utf-8")))
        deployment = orch.attach(args.run_id, creds)
        if deployment.containers:
            result = verify_topology(orch.handles(deployment), read_edge_list(topo_files[-1]))
            print(json.dumps(result.to_dict(), indent=1))
            return EXIT_OK if result.passed else EXIT_FATAL
    # no live network: report what was verified during the run
    records = json.loads((run_dir / "simulations.json").read_text(encoding="utf-8"))
    bad = [r["sim"] for r in records if r.get("topology_passed") is False]
    print(f"no live deployment for {args.run_id}; recorded verification: "
          f"{len(records) - len(bad)}/{len(records)} simulations passed")
    return EXIT_FATAL if bad else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="testbed", description="Private Bitcoin regtest testbed")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset experiment or a run file")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--experiment", type=int, choices=[1, 2, 3, 4])
    src.add_argument("--config", type=Path)
    run.add_argument("--backend", choices=["mock", "container"])
    run.add_argument("--seed", type=int)
    run.add_argument("--duration", type=float)
    run.add_argument("--repetitions", type=int)
    run.add_argument("--out", default="runs")
    run.add_argument("--run-id")
    run.add_argument("--drain", type=float, default=5.0)
    run.add_argument("--image", help="bitcoind image for the container backend")
    run.add_argument("--keep", action="store_true", help="leave the last deployment running")
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="rebuild tables and plots from a run directory")
    rep.add_argument("run_dir", type=Path)
    rep.add_argument("--no-plots", action="store_true")
    rep.set_defaults(func=cmd_report)

    td = sub.add_parser("teardown", help="remove every runtime object of a run")
    td.add_argument("--run-id", required=True)
    td.set_defaults(func=cmd_teardown)

    vt = sub.add_parser("verify-topology", help="check live peer lists against the planned graph")
    vt.add_argument("--run-id", required=True)
    vt.add_argument("--out", default="runs")
    vt.set_defaults(func=cmd_verify_topology)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (TestbedError, OSError) as exc:
        print(f"testbed: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
