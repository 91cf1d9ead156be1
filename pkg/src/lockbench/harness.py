"""Two-phase benchmark driver: load the store, then run the mix.

The run phase spawns one thread per client. Workers rendezvous at a
barrier so nobody's ramp-up dilutes the throughput window, then each
worker drives its share of the operation count through its own seeded
sampler (operation_count split across workers, remainder to the first;
or the full count per worker with ops_per_client). Every operation is
wrapped in a single-operation transaction and dispatched through the
four-stage lifecycle in locking mode, or straight to the store in
baseline mode.

Latency is measured per operation from issue to terminal state on the
monotonic clock and recorded per class for committed ops. Reports carry
throughput (committed ops / wall time), per-class latency aggregates,
commit/abort counters and the audit verdict, as JSON per run plus a CSV
summary row per run for plotting.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

from .audit import AuditVerdict, Consistency, OpLogEntry, OpOutcome, audit_run, write_log_csv
from .histogram import LatencyHistogram, LatencyStats
from .locks import LockManager
from .store import DocumentStore
from .txn import CommitOutcome, OpKind, TransactionManager
from .workload import OperationSampler, WorkloadSpec, build_record, derive_seed


class StoreNotEmpty(Exception):
    """Load phase requires an empty store."""


class NotLoaded(Exception):
    """Run phase requires a completed load phase."""


class ReportWriteError(Exception):
    """Report file could not be written."""


class Mode(Enum):
    BASELINE = "baseline"
    LOCKING = "locking"


_CLASS_NAMES = {OpKind.READ: "read", OpKind.UPDATE: "update", OpKind.READ_MODIFY_WRITE: "rmw"}


@dataclass(frozen=True)
class RunConfig:
    workload: WorkloadSpec
    clients: int = 1
    mode: Mode = Mode.LOCKING
    lock_timeout_ms: float = 100.0
    seed: int | None = None  # defaults to workload.seed
    workload_name: str = "custom"
    report_path: str | None = None
    ops_per_client: bool = False
    audit: bool = True
    audit_log_path: str | None = None
    retry_aborts: bool = False

    def __post_init__(self) -> None:
        if self.clients < 1:
            raise ValueError("clients must be >= 1")
        if self.lock_timeout_ms <= 0:
            raise ValueError("lock_timeout must be > 0")

    @property
    def effective_seed(self) -> int:
        return self.workload.seed if self.seed is None else self.seed

    def to_dict(self) -> dict:
        return {
            "workload": self.workload_name,
            "read_proportion": self.workload.read_proportion,
            "update_proportion": self.workload.update_proportion,
            "rmw_proportion": self.workload.rmw_proportion,
            "record_count": self.workload.record_count,
            "operation_count": self.workload.operation_count,
            "distribution": self.workload.distribution.value,
            "field_count": self.workload.field_count,
            "field_length": self.workload.field_length,
            "clients": self.clients,
            "mode": self.mode.value,
            "lock_timeout_ms": self.lock_timeout_ms,
            "seed": self.effective_seed,
            "ops_per_client": self.ops_per_client,
        }


@dataclass(frozen=True)
class RunReport:
    config: dict
    wall_time_s: float
    throughput_ops_s: float
    latency: dict[str, LatencyStats]
    committed: int
    aborted: int
    audit_verdict: Consistency
    violations: tuple = ()

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "wall_time_s": self.wall_time_s,
            "throughput_ops_s": self.throughput_ops_s,
            "latency": {name: stats.to_dict() for name, stats in self.latency.items()},
            "committed": self.committed,
            "aborted": self.aborted,
            "audit_verdict": self.audit_verdict.value,
        }


def make_run_report(
    config: RunConfig,
    wall_time_s: float,
    histograms: dict[str, LatencyHistogram],
    committed: int,
    aborted: int,
    audit_verdict: AuditVerdict | None,
) -> RunReport:
    """Pure report assembly: throughput is committed / wall_time, nothing
    else. Separated so the arithmetic is testable with scripted clocks."""
    throughput = committed / wall_time_s if wall_time_s > 0 else 0.0
    latency = {name: LatencyStats.from_histogram(h) for name, h in histograms.items()}
    if audit_verdict is None:
        verdict, violations = Consistency.NOT_AUDITED, ()
    else:
        verdict, violations = audit_verdict.verdict, audit_verdict.violations
    return RunReport(
        config=config.to_dict(),
        wall_time_s=wall_time_s,
        throughput_ops_s=throughput,
        latency=latency,
        committed=committed,
        aborted=aborted,
        audit_verdict=verdict,
        violations=violations,
    )


def load_phase(store: DocumentStore, config: RunConfig) -> None:
    """Populate the store with record_count synthesized documents."""
    if len(store) != 0:
        raise StoreNotEmpty(f"store holds {len(store)} documents")
    spec = replace(config.workload, seed=config.effective_seed)
    for index in range(spec.record_count):
        key, fields = build_record(index, spec)
        store.insert(key, fields)


def _partition_ops(total: int, clients: int, ops_per_client: bool) -> list[int]:
    if ops_per_client:
        return [total] * clients
    base, remainder = divmod(total, clients)
    counts = [base] * clients
    counts[0] += remainder
    return counts


@dataclass
class _WorkerStats:
    histograms: dict[str, LatencyHistogram] = field(
        default_factory=lambda: {name: LatencyHistogram() for name in _CLASS_NAMES.values()}
    )
    committed: int = 0
    aborted: int = 0
    log: list[OpLogEntry] = field(default_factory=list)


def run_phase(
    store: DocumentStore,
    config: RunConfig,
    clock: Callable[[], float] = time.monotonic,
) -> RunReport:
    """Execute the operation mix and return the measured report."""
    spec = config.workload
    if len(store) != spec.record_count:
        raise NotLoaded(f"store holds {len(store)} documents, expected {spec.record_count}")

    timeout_s = config.lock_timeout_ms / 1000.0
    locks = LockManager(timeout_s, clock)
    manager = TransactionManager(store, locks, timeout_s, clock)
    counts = _partition_ops(spec.operation_count, config.clients, config.ops_per_client)
    stats = [_WorkerStats() for _ in range(config.clients)]
    epoch = [0.0]  # stamped by the barrier action before anyone is released
    barrier = threading.Barrier(config.clients + 1, action=lambda: epoch.__setitem__(0, clock()))

    def worker(worker_id: int, op_count: int) -> None:
        sampler = OperationSampler(spec, derive_seed(config.effective_seed, "worker", worker_id))
        mine = stats[worker_id]
        barrier.wait()
        run_epoch = epoch[0]
        for _ in range(op_count):
            op = sampler.next_op()
            while True:
                issue = clock()
                if config.mode is Mode.LOCKING:
                    result = manager.run([op])
                else:
                    result = manager.run_baseline([op])
                finish = clock()
                issue_us = int((issue - run_epoch) * 1_000_000)
                finish_us = int((finish - run_epoch) * 1_000_000)
                if result.outcome is CommitOutcome.COMMITTED:
                    mine.committed += 1
                    mine.histograms[_CLASS_NAMES[op.kind]].record(max(0, finish_us - issue_us))
                    for op_result in result.op_results:
                        mine.log.append(
                            OpLogEntry(
                                txn_id=result.txn_id,
                                worker_id=worker_id,
                                kind=op_result.kind,
                                key=op_result.key,
                                observed_version=op_result.observed_version,
                                written_version=op_result.written_version,
                                outcome=OpOutcome.COMMITTED,
                                issue_us=issue_us,
                                finish_us=finish_us,
                            )
                        )
                    break
                mine.aborted += 1
                mine.log.append(
                    OpLogEntry(
                        txn_id=result.txn_id,
                        worker_id=worker_id,
                        kind=op.kind,
                        key=op.key,
                        observed_version=None,
                        written_version=None,
                        outcome=OpOutcome.ABORTED,
                        issue_us=issue_us,
                        finish_us=finish_us,
                    )
                )
                if not config.retry_aborts:
                    break

    threads = [
        threading.Thread(target=worker, args=(i, counts[i]), name=f"client-{i}")
        for i in range(config.clients)
    ]
    for t in threads:
        t.start()
    barrier.wait()
    start = epoch[0]
    for t in threads:
        t.join()
    end = clock()

    merged = {name: LatencyHistogram() for name in _CLASS_NAMES.values()}
    committed = 0
    aborted = 0
    log: list[OpLogEntry] = []
    for s in stats:
        for name, h in s.histograms.items():
            merged[name].merge(h)
        committed += s.committed
        aborted += s.aborted
        log.extend(s.log)

    verdict = audit_run(log, store.versions()) if config.audit else None
    report = make_run_report(config, end - start, merged, committed, aborted, verdict)

    if config.audit_log_path:
        write_log_csv(config.audit_log_path, log)
    if config.report_path:
        write_report(report, config.report_path)
    return report


def write_report(report: RunReport, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(report.to_dict(), f, indent=2)
            f.write("\n")
    except OSError as exc:
        raise ReportWriteError(str(exc)) from exc


CSV_HEADER = "workload,clients,mode,throughput_ops_s,read_mean_us,update_mean_us,rmw_mean_us"


def csv_row(report: RunReport) -> str:
    cfg = report.config
    lat = report.latency
    return ",".join(
        [
            str(cfg["workload"]),
            str(cfg["clients"]),
            str(cfg["mode"]),
            f"{report.throughput_ops_s:.3f}",
            f"{lat['read'].mean_us:.3f}",
            f"{lat['update'].mean_us:.3f}",
            f"{lat['rmw'].mean_us:.3f}",
        ]
    )


DEFAULT_WORKLOADS = ("A", "B", "F")
DEFAULT_CLIENTS = (1, 5, 10, 15)
DEFAULT_MODES = (Mode.BASELINE, Mode.LOCKING)


def run_matrix(
    out_dir: str,
    workloads: Sequence[str] = DEFAULT_WORKLOADS,
    clients_list: Sequence[int] = DEFAULT_CLIENTS,
    modes: Sequence[Mode] = DEFAULT_MODES,
    seed: int = 42,
    lock_timeout_ms: float = 100.0,
    record_count: int | None = None,
    operation_count: int | None = None,
    progress: Callable[[str], None] | None = None,
) -> list[RunReport]:
    """Full cross product of workloads x clients x modes, one fresh load
    per cell. Emits a JSON report per run, a combined report pairing
    baseline against locking per cell, and the CSV summary."""
    from .workload import builtin_workload

    os.makedirs(out_dir, exist_ok=True)
    store = DocumentStore()
    reports: list[RunReport] = []
    failures: list[dict] = []
    csv_lines = [CSV_HEADER]
    cells: dict[tuple[str, int], dict[str, dict]] = {}

    for name in workloads:
        spec = builtin_workload(name)
        spec = replace(spec, seed=seed)
        if record_count is not None:
            spec = replace(spec, record_count=record_count)
        if operation_count is not None:
            spec = replace(spec, operation_count=operation_count)
        for clients in clients_list:
            for mode in modes:
                run_name = f"run_{name}_{clients}c_{mode.value}"
                config = RunConfig(
                    workload=spec,
                    clients=clients,
                    mode=mode,
                    lock_timeout_ms=lock_timeout_ms,
                    workload_name=name,
                    report_path=os.path.join(out_dir, run_name + ".json"),
                )
                store.reset()
                try:
                    load_phase(store, config)
                    report = run_phase(store, config)
                except Exception as exc:  # keep going, mark the cell failed
                    failures.append({"run": run_name, "error": f"{type(exc).__name__}: {exc}"})
                    if progress:
                        progress(f"{run_name}: FAILED ({exc})")
                    continue
                reports.append(report)
                csv_lines.append(csv_row(report))
                cells.setdefault((name, clients), {})[mode.value] = {
                    "throughput_ops_s": report.throughput_ops_s,
                    "read_mean_us": report.latency["read"].mean_us,
                    "update_mean_us": report.latency["update"].mean_us,
                    "rmw_mean_us": report.latency["rmw"].mean_us,
                    "committed": report.committed,
                    "aborted": report.aborted,
                    "audit_verdict": report.audit_verdict.value,
                }
                if progress:
                    progress(
                        f"{run_name}: {report.throughput_ops_s:.0f} ops/s, "
                        f"{report.committed} committed, {report.aborted} aborted, "
                        f"{report.audit_verdict.value}"
                    )

    comparison = [
        {"workload": name, "clients": clients, **modes_seen}
        for (name, clients), modes_seen in sorted(cells.items())
    ]
    combined = {
        "runs": [r.to_dict() for r in reports],
        "comparison": comparison,
        "failures": failures,
    }
    try:
        with open(os.path.join(out_dir, "matrix.json"), "w", encoding="utf-8") as f:
            json.dump(combined, f, indent=2)
            f.write("\n")
        with open(os.path.join(out_dir, "summary.csv"), "w", encoding="utf-8") as f:
            f.write("\n".join(csv_lines) + "\n")
    except OSError as exc:
        raise ReportWriteError(str(exc)) from exc
    return reports
