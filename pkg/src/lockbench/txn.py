"""Four-stage server-side transaction lifecycle over the document store.

Stage 1, management: a transaction is born Pending with a unique id and
an ordered operation list.

Stage 2, bifurcation: the transaction is classified ReadOnly or Write.
Only writes pay for locking; a read-only transaction sails through the
remaining stages without ever touching the lock table.

Stage 3, readiness: a write transaction acquires exclusive locks on its
full write-key set in ascending key order (which makes deadlock
impossible) before any mutation happens. If any lock cannot be granted
by the wait deadline, every lock already taken is dropped and the
transaction aborts having changed nothing.

Stage 4, execution: pre-images of every write-set document are captured,
operations apply in order, and the transaction commits, releasing its
locks. If the execution deadline (begin time + lock timeout) passes
mid-flight, all pre-images are restored byte-exactly, locks released,
and the transaction ends Aborted.

`run_baseline` executes the same operations with none of the above: no
locks, no readiness, no rollback. Its read-modify-write deliberately
writes back the whole document as read (version = observed + 1), the way
a client round-trips a record, which is exactly how concurrent writers
silently clobber each other.
"""

from __future__ import annotations

import itertools
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping, Sequence

from .locks import LockManager, LockOutcome
from .store import DocumentStore, Snapshot


class EmptyTransaction(Exception):
    """Transactions must carry at least one operation."""


class WrongState(Exception):
    """Lifecycle stage invoked on a transaction in the wrong state."""


class OpKind(Enum):
    READ = "read"
    UPDATE = "update"
    INSERT = "insert"
    READ_MODIFY_WRITE = "rmw"


# Given the full field map as read, returns the fields to write back.
Transform = Callable[[Mapping[str, bytes]], Mapping[str, bytes]]


@dataclass(frozen=True)
class OperationSpec:
    kind: OpKind
    key: str
    changes: Mapping[str, bytes] | None = None
    transform: Transform | None = None

    def __post_init__(self) -> None:
        if self.kind in (OpKind.UPDATE, OpKind.INSERT):
            if not self.changes:
                raise ValueError(f"{self.kind.value} op needs non-empty changes")
        elif self.kind is OpKind.READ:
            if self.changes:
                raise ValueError("read op carries no changes")
        elif self.kind is OpKind.READ_MODIFY_WRITE:
            if self.transform is None:
                raise ValueError("read-modify-write op needs a transform")

    @property
    def mutates(self) -> bool:
        return self.kind is not OpKind.READ


def read_op(key: str) -> OperationSpec:
    return OperationSpec(OpKind.READ, key)


def update_op(key: str, changes: Mapping[str, bytes]) -> OperationSpec:
    return OperationSpec(OpKind.UPDATE, key, changes=changes)


def insert_op(key: str, fields: Mapping[str, bytes]) -> OperationSpec:
    return OperationSpec(OpKind.INSERT, key, changes=fields)


def rmw_op(key: str, transform: Transform) -> OperationSpec:
    return OperationSpec(OpKind.READ_MODIFY_WRITE, key, transform=transform)


class TxnKind(Enum):
    READ_ONLY = "read_only"
    WRITE = "write"


class TxnState(Enum):
    PENDING = "pending"
    READY = "ready"
    RUNNING = "running"
    COMMITTED = "committed"
    ABORTED = "aborted"


class ReadinessOutcome(Enum):
    READY = "ready"
    ABORTED_TIMEOUT = "aborted_timeout"


class CommitOutcome(Enum):
    COMMITTED = "committed"
    ABORTED_TIMEOUT = "aborted_timeout"


@dataclass
class Transaction:
    id: int
    ops: list[OperationSpec]
    state: TxnState = TxnState.PENDING
    kind: TxnKind | None = None
    begin_at: float = 0.0
    pre_images: list[Snapshot] = field(default_factory=list)
    locked_keys: list[str] = field(default_factory=list)
    # write-set keys absent when execution started; rollback removes them
    _created_keys: list[str] = field(default_factory=list)

    def write_keys(self) -> list[str]:
        """Distinct keys of mutating ops, ascending (lock acquisition order)."""
        return sorted({op.key for op in self.ops if op.mutates})


@dataclass(frozen=True)
class OpResult:
    """Per-operation version observations, the audit log's raw material."""

    kind: OpKind
    key: str
    observed_version: int | None = None
    written_version: int | None = None


@dataclass(frozen=True)
class CommitResult:
    txn_id: int
    outcome: CommitOutcome
    latency_us: int
    op_results: tuple[OpResult, ...] = ()


class TransactionManager:
    """Drives transactions through the four stages against one store.

    Safe for any number of workers running disjoint transactions
    concurrently; a single transaction is driven by one worker at a time.
    The clock is injectable so deadline behavior is testable without
    real waiting.
    """

    def __init__(
        self,
        store: DocumentStore,
        locks: LockManager | None = None,
        lock_timeout: float = 0.1,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.store = store
        self.locks = locks if locks is not None else LockManager(lock_timeout, clock)
        self.lock_timeout = lock_timeout
        self._clock = clock
        self._ids = itertools.count(1)
        self._id_mu = threading.Lock()

    # -- stage 1: management ----------------------------------------------

    def begin(self, ops: Sequence[OperationSpec]) -> Transaction:
        if not ops:
            raise EmptyTransaction("transaction carries no operations")
        with self._id_mu:
            txn_id = next(self._ids)
        return Transaction(id=txn_id, ops=list(ops), begin_at=self._clock())

    # -- stage 2: bifurcation ----------------------------------------------

    def classify(self, txn: Transaction) -> TxnKind:
        if txn.state is not TxnState.PENDING:
            raise WrongState(f"classify on {txn.state.value} transaction")
        kind = TxnKind.READ_ONLY if all(op.kind is OpKind.READ for op in txn.ops) else TxnKind.WRITE
        txn.kind = kind
        return kind

    # -- stage 3: readiness -------------------------------------------------

    def assess_readiness(self, txn: Transaction, wait_deadline: float) -> ReadinessOutcome:
        if txn.state is not TxnState.PENDING or txn.kind is None:
            raise WrongState("readiness needs a pending, classified transaction")
        if txn.kind is TxnKind.READ_ONLY:
            txn.state = TxnState.READY
            return ReadinessOutcome.READY
        acquired: list[str] = []
        for key in txn.write_keys():
            outcome = self.locks.acquire(txn.id, key, wait_deadline)
            if outcome is LockOutcome.TIMED_OUT:
                for held in acquired:
                    self.locks.release(txn.id, held)
                txn.state = TxnState.ABORTED
                return ReadinessOutcome.ABORTED_TIMEOUT
            acquired.append(key)
        txn.locked_keys = acquired
        txn.state = TxnState.READY
        return ReadinessOutcome.READY

    # -- stage 4: execution --------------------------------------------------

    def execute(self, txn: Transaction) -> CommitResult:
        if txn.state is not TxnState.READY:
            raise WrongState(f"execute on {txn.state.value} transaction")
        txn.state = TxnState.RUNNING
        if txn.kind is TxnKind.READ_ONLY:
            return self._execute_read_only(txn)
        return self._execute_write(txn)

    def _execute_read_only(self, txn: Transaction) -> CommitResult:
        results: list[OpResult] = []
        try:
            for op in txn.ops:
                doc = self.store.read(op.key)
                results.append(OpResult(op.kind, op.key, observed_version=doc.version))
        except Exception:
            txn.state = TxnState.ABORTED
            raise
        txn.state = TxnState.COMMITTED
        return CommitResult(txn.id, CommitOutcome.COMMITTED, self._latency_us(txn), tuple(results))

    def _execute_write(self, txn: Transaction) -> CommitResult:
        deadline = txn.begin_at + self.lock_timeout
        self._capture_pre_images(txn)
        results: list[OpResult] = []
        for op in txn.ops:
            if self._clock() > deadline:
                self._abort(txn)
                return CommitResult(
                    txn.id,
                    CommitOutcome.ABORTED_TIMEOUT,
                    self._latency_us(txn),
                    tuple(OpResult(o.kind, o.key) for o in txn.ops),
                )
            try:
                results.append(self._apply(op))
            except Exception:
                self._abort(txn)
                raise
        # commit: pre-images discarded, locks released
        txn.pre_images.clear()
        txn._created_keys.clear()
        self._release_locks(txn)
        txn.state = TxnState.COMMITTED
        return CommitResult(txn.id, CommitOutcome.COMMITTED, self._latency_us(txn), tuple(results))

    def _capture_pre_images(self, txn: Transaction) -> None:
        from .store import NotFound

        for key in txn.write_keys():
            try:
                txn.pre_images.append(self.store.snapshot(key))
            except NotFound:
                txn._created_keys.append(key)

    def _apply(self, op: OperationSpec) -> OpResult:
        if op.kind is OpKind.READ:
            doc = self.store.read(op.key)
            return OpResult(op.kind, op.key, observed_version=doc.version)
        if op.kind is OpKind.UPDATE:
            new_version = self.store.update(op.key, op.changes)
            return OpResult(op.kind, op.key, written_version=new_version)
        if op.kind is OpKind.INSERT:
            self.store.insert(op.key, op.changes)
            return OpResult(op.kind, op.key, written_version=0)
        # read-modify-write under the exclusive lock: nobody can slip in
        # between the read and the write-back, so written = observed + 1
        doc = self.store.read(op.key)
        assert op.transform is not None
        changes = op.transform(doc.fields)
        new_version = self.store.update(op.key, changes)
        return OpResult(op.kind, op.key, observed_version=doc.version, written_version=new_version)

    def _abort(self, txn: Transaction) -> None:
        for snap in txn.pre_images:
            self.store.restore(snap)
        for key in txn._created_keys:
            self.store._discard(key)
        txn.pre_images.clear()
        txn._created_keys.clear()
        self._release_locks(txn)
        txn.state = TxnState.ABORTED

    def _release_locks(self, txn: Transaction) -> None:
        for key in txn.locked_keys:
            self.locks.release(txn.id, key)
        txn.locked_keys = []

    def _latency_us(self, txn: Transaction) -> int:
        return max(0, int((self._clock() - txn.begin_at) * 1_000_000))

    # -- convenience ---------------------------------------------------------

    def run(self, ops: Sequence[OperationSpec]) -> CommitResult:
        """Full lifecycle: begin, classify, assess, execute."""
        txn = self.begin(ops)
        self.classify(txn)
        outcome = self.assess_readiness(txn, txn.begin_at + self.lock_timeout)
        if outcome is ReadinessOutcome.ABORTED_TIMEOUT:
            return CommitResult(
                txn.id,
                CommitOutcome.ABORTED_TIMEOUT,
                self._latency_us(txn),
                tuple(OpResult(o.kind, o.key) for o in txn.ops),
            )
        return self.execute(txn)

    # -- unguarded baseline ----------------------------------------------------

    def run_baseline(self, ops: Sequence[OperationSpec]) -> CommitResult:
        """Execute with no locks, no readiness stage, no rollback.

        Reads and updates go straight to the store (each individual store
        call is still atomic). Read-modify-write is an unguarded
        read-then-write-back of the whole document. Never times out.
        """
        if not ops:
            raise EmptyTransaction("transaction carries no operations")
        with self._id_mu:
            txn_id = next(self._ids)
        start = self._clock()
        results: list[OpResult] = []
        for op in ops:
            if op.kind is OpKind.READ:
                doc = self.store.read(op.key)
                results.append(OpResult(op.kind, op.key, observed_version=doc.version))
            elif op.kind is OpKind.UPDATE:
                new_version = self.store.update(op.key, op.changes)
                results.append(OpResult(op.kind, op.key, written_version=new_version))
            elif op.kind is OpKind.INSERT:
                self.store.insert(op.key, op.changes)
                results.append(OpResult(op.kind, op.key, written_version=0))
            else:
                doc = self.store.read(op.key)
                assert op.transform is not None
                merged = dict(doc.fields)
                merged.update(op.transform(doc.fields))
                # write back the document as read: a concurrent writer's
                # committed change between our read and this write is lost
                written = doc.version + 1
                self.store.restore(Snapshot(op.key, merged, written))
                results.append(
                    OpResult(op.kind, op.key, observed_version=doc.version, written_version=written)
                )
        latency = max(0, int((self._clock() - start) * 1_000_000))
        return CommitResult(txn_id, CommitOutcome.COMMITTED, latency, tuple(results))
