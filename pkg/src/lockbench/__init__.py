"""Concurrent document store with a four-stage locking transaction model
and a YCSB-style benchmark harness that measures it."""

from .audit import (
    AuditVerdict,
    Consistency,
    IncompleteLog,
    OpLogEntry,
    OpOutcome,
    audit_run,
    check_rmw_atomicity,
    check_version_chain,
)
from .harness import (
    Mode,
    NotLoaded,
    ReportWriteError,
    RunConfig,
    RunReport,
    StoreNotEmpty,
    load_phase,
    run_matrix,
    run_phase,
)
from .histogram import LatencyHistogram, LatencyStats
from .locks import DocumentLock, LockManager, LockOutcome, NotHolder, ReentrantAcquire
from .store import Document, DocumentStore, DuplicateKey, NotFound, Snapshot
from .txn import (
    CommitOutcome,
    CommitResult,
    EmptyTransaction,
    OperationSpec,
    OpKind,
    ReadinessOutcome,
    Transaction,
    TransactionManager,
    TxnKind,
    TxnState,
    WrongState,
    insert_op,
    read_op,
    rmw_op,
    update_op,
)
from .workload import (
    Distribution,
    IndexOutOfRange,
    OperationSampler,
    UniformSampler,
    UnknownProperty,
    UnknownWorkload,
    WorkloadSpec,
    ZipfianSampler,
    apply_properties,
    build_record,
    builtin_workload,
    key_for,
    parse_properties,
)

__version__ = "0.1.0"
