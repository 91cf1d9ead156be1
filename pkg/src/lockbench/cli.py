"""The `bench` command line: load, run, matrix.

    bench load --props workload.properties [--seed N] [--dump store.bin]
    bench run --workload A --clients 5 --mode locking --report out.json
    bench matrix --out reports/

Properties files are `key=value` lines (recordcount, operationcount,
readproportion, updateproportion, readmodifywriteproportion,
requestdistribution, fieldcount, fieldlength) layered on top of the
selected built-in workload.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace

from .harness import Mode, RunConfig, load_phase, run_matrix, run_phase
from .store import DocumentStore
from .workload import WorkloadSpec, apply_properties, builtin_workload, load_properties


def _spec_from_args(args: argparse.Namespace, workload: str) -> WorkloadSpec:
    spec = builtin_workload(workload)
    if getattr(args, "props", None):
        spec = apply_properties(spec, load_properties(args.props))
    if getattr(args, "seed", None) is not None:
        spec = replace(spec, seed=args.seed)
    return spec


def _cmd_load(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args, "A")
    config = RunConfig(workload=spec, workload_name="load")
    store = DocumentStore()
    t0 = time.monotonic()
    load_phase(store, config)
    elapsed = time.monotonic() - t0
    print(f"loaded {len(store)} records in {elapsed:.2f}s")
    if args.dump:
        store.dump_file(args.dump)
        print(f"dumped store to {args.dump}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args, args.workload)
    config = RunConfig(
        workload=spec,
        clients=args.clients,
        mode=Mode(args.mode),
        lock_timeout_ms=args.lock_timeout_ms,
        workload_name=args.workload.upper(),
        report_path=args.report,
        ops_per_client=args.ops_per_client,
        audit=args.audit,
        audit_log_path=args.audit_log,
    )
    store = DocumentStore()
    load_phase(store, config)
    report = run_phase(store, config)
    print(
        f"workload {config.workload_name} x {config.clients} clients ({config.mode.value}): "
        f"{report.throughput_ops_s:.1f} ops/s, wall {report.wall_time_s:.2f}s, "
        f"{report.committed} committed, {report.aborted} aborted, "
        f"audit {report.audit_verdict.value}"
    )
    for name, stats in report.latency.items():
        if stats.count:
            print(
                f"  {name}: n={stats.count} mean={stats.mean_us:.0f}us "
                f"p95={stats.p95_us}us p99={stats.p99_us}us max={stats.max_us}us"
            )
    if args.report:
        print(f"report written to {args.report}")
    return 0


def _cmd_matrix(args: argparse.Namespace) -> int:
    workloads = [w.strip().upper() for w in args.workloads.split(",") if w.strip()]
    clients = [int(c) for c in args.clients.split(",") if c.strip()]
    modes = [Mode(m.strip().lower()) for m in args.modes.split(",") if m.strip()]
    reports = run_matrix(
        out_dir=args.out,
        workloads=workloads,
        clients_list=clients,
        modes=modes,
        seed=args.seed,
        lock_timeout_ms=args.lock_timeout_ms,
        record_count=args.records,
        operation_count=args.ops,
        progress=print,
    )
    print(f"{len(reports)} runs complete; reports in {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_load = sub.add_parser("load", help="run the load phase, optionally dump the store")
    p_load.add_argument("--props", help="properties file (key=value lines)")
    p_load.add_argument("--seed", type=int, default=None)
    p_load.add_argument("--dump", help="write the loaded store to this file")
    p_load.set_defaults(func=_cmd_load)

    p_run = sub.add_parser("run", help="load then run one benchmark configuration")
    p_run.add_argument("--props", help="properties file (key=value lines)")
    p_run.add_argument("--workload", required=True, choices=["A", "B", "F", "a", "b", "f"])
    p_run.add_argument("--clients", type=int, required=True)
    p_run.add_argument("--mode", required=True, choices=["baseline", "locking"])
    p_run.add_argument("--lock-timeout-ms", type=float, default=100.0)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--ops-per-client", action="store_true", help="give every client the full operation count instead of splitting it")
    p_run.add_argument("--audit", action="store_true", help="check version chains after the run")
    p_run.add_argument("--audit-log", help="write the merged operation log as CSV")
    p_run.add_argument("--report", required=True, help="JSON report path")
    p_run.set_defaults(func=_cmd_run)

    p_matrix = sub.add_parser("matrix", help="full workload x clients x mode cross product")
    p_matrix.add_argument("--workloads", default="A,B,F")
    p_matrix.add_argument("--clients", default="1,5,10,15")
    p_matrix.add_argument("--modes", default="baseline,locking")
    p_matrix.add_argument("--seed", type=int, default=42)
    p_matrix.add_argument("--lock-timeout-ms", type=float, default=100.0)
    p_matrix.add_argument("--records", type=int, default=None, help="override record count per cell")
    p_matrix.add_argument("--ops", type=int, default=None, help="override operation count per cell")
    p_matrix.add_argument("--out", required=True, help="report directory")
    p_matrix.set_defaults(func=_cmd_matrix)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
