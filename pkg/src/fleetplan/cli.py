"""Command line entry point: run one scenario, run benchmark suites, inspect
handover geometry, or serve the console protocol."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import bench as bench_mod
from .executor import ExecConfig, exec_config_from, run_scenario
from .geometry import ReachSphere, inscribed_sphere, sample_and_score
from .scenario import Scenario
from .search import Unsatisfiable


def _cmd_run(args) -> int:
    scn = Scenario.load(args.scenario)
    if args.seed is not None:
        scn.seed = args.seed
    if args.tick_hz:
        scn.tick = 1.0 / args.tick_hz
    try:
        result = run_scenario(scn, seed=args.seed)
    except Unsatisfiable as exc:
        print(f"unsatisfiable: {exc}", file=sys.stderr)
        return 2
    out = {
        "scenario": scn.name,
        "success": result.success,
        "time_cost": result.time_cost,
        "replans": result.replans,
        "takeovers": result.takeovers,
        "metrics": result.metrics,
        "reason": result.reason,
    }
    if args.out:
        Path(args.out).write_text(json.dumps(out, indent=2))
        events_path = Path(args.out).with_suffix(".events.jsonl")
        events_path.write_text("\n".join(json.dumps(e) for e in result.events) + "\n")
    print(json.dumps(out, indent=2))
    return 0 if result.success else 1


def _cmd_bench(args) -> int:
    outdir = Path(args.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    if args.suite == "table2":
        reports = bench_mod.run_table_suite(trials=args.trials, seed=args.seed,
                                            with_baseline=args.baseline)
        bench_mod.write_csv(reports, outdir / "table2.csv")
        bench_mod.write_json(reports, outdir / "table2.json")
        for rep in reports:
            print(f"{rep.label:12s} success={rep.success_rate:6.1f}% "
                  f"makespan={rep.mean_makespan:6.2f} replans={rep.mean_replans:4.2f}"
                  + (f" baseline={rep.baseline_success_rate}%" if rep.baseline_success_rate is not None else ""))
    elif args.suite == "ablation":
        table = bench_mod.run_ablation(trials=args.trials, seed=args.seed)
        flat = {f"{variant}:{trace}": rep
                for variant, traces in table.items() for trace, rep in traces.items()}
        bench_mod.write_json(flat, outdir / "ablation.json")
        for key, rep in flat.items():
            flu = rep.fluency
            print(f"{key:24s} H-IDLE={flu['h_idle'][0]:5.1f} R-IDLE={flu['r_idle'][0]:5.1f} "
                  f"C-ACT={flu['c_act'][0]:5.1f} F-DEL={flu['f_del'][0]:6.1f}")
    elif args.suite in ("t1", "t2", "t3", "t4", "t5", "t6"):
        reports = {}
        results = []
        for trial in range(args.trials):
            scn = bench_mod.t_scenarios(seed=args.seed + trial)[args.suite]
            results.append(run_scenario(scn))
        rep = bench_mod._summarize(args.suite, results)
        bench_mod.write_json([rep], outdir / f"{args.suite}.json")
        print(f"{rep.label}: success={rep.success_rate}% makespan={rep.mean_makespan} "
              f"replans={rep.mean_replans}")
    elif args.suite == "traces":
        reports = bench_mod.run_trace_suite(trials=args.trials, seed=args.seed)
        bench_mod.write_json(reports, outdir / "traces.json")
        for name, rep in reports.items():
            print(f"{name}: success={rep.success_rate}% makespan={rep.mean_makespan} "
                  f"replans={rep.mean_replans}")
    else:
        print(f"unknown suite {args.suite!r}", file=sys.stderr)
        return 2
    return 0


def _cmd_geom(args) -> int:
    request = json.loads(Path(args.input).read_text()) if args.input else json.load(sys.stdin)
    a = ReachSphere(tuple(request["a"]["center"]), request["a"]["radius"])
    b = ReachSphere(tuple(request["b"]["center"]), request["b"]["radius"])
    center, radius = inscribed_sphere(a, b)
    out = {"inscribed": {"center": list(center), "radius": radius}}
    if request.get("samples"):
        cands = sample_and_score(a, b, request.get("ee_a", a.center),
                                 request.get("ee_b", b.center),
                                 n=int(request["samples"]),
                                 seed=int(request.get("seed", 0)),
                                 alpha=float(request.get("alpha", 0.5)))
        out["candidates"] = [
            {"position": list(c.position), "feasibility": c.feasibility,
             "time_proxy": c.time_proxy, "score": c.score}
            for c in cands[: int(request.get("top", 8))]]
    print(json.dumps(out, indent=2))
    return 0


def _cmd_serve(args) -> int:
    from .server import serve
    scn = Scenario.load(args.scenario)
    port = args.port or int(os.environ.get("FLEETPLAN_PORT", "7180"))
    print(f"serving {scn.name} on {args.host}:{port}", file=sys.stderr)
    try:
        serve(scn, port=port, host=args.host, snapshot_hz=args.snapshot_hz,
              speed=args.speed)
    except OSError as exc:
        print(f"cannot bind {args.host}:{port}: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fleetplan",
        description="Multi-robot task allocation and planning with a "
                    "receding-horizon executor and world simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one scenario file")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--ticks-hz", dest="tick_hz", type=float, default=None,
                       help="simulation tick rate (default from scenario)")
    p_run.add_argument("--out", default=None, help="metrics JSON path; events go to .events.jsonl")
    p_run.set_defaults(func=_cmd_run)

    p_bench = sub.add_parser("bench", help="run a benchmark suite")
    p_bench.add_argument("--suite", default="table2",
                         help="table2 | traces | t1..t6 | ablation")
    p_bench.add_argument("--trials", type=int, default=100)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--baseline", action="store_true",
                         help="also run the greedy nearest-robot baseline")
    p_bench.add_argument("--out", default=None, help="report directory")
    p_bench.set_defaults(func=_cmd_bench)

    p_geom = sub.add_parser("geom", help="handover geometry queries (JSON in/out)")
    p_geom.add_argument("--input", default=None, help="request file; stdin otherwise")
    p_geom.set_defaults(func=_cmd_geom)

    p_serve = sub.add_parser("serve", help="serve the console wire protocol")
    p_serve.add_argument("--scenario", required=True)
    p_serve.add_argument("--port", type=int, default=None,
                         help="default 7180 or FLEETPLAN_PORT")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--snapshot-hz", type=float, default=10.0)
    p_serve.add_argument("--speed", type=float, default=1.0,
                         help="sim seconds per wall second")
    p_serve.set_defaults(func=_cmd_serve)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
