"""Exclusive per-document lock table with FIFO waiting and bounded acquire.

One exclusive lock per document key. A blocked acquirer waits in FIFO
arrival order until the holder releases or the caller's wait deadline
passes, whichever comes first. Release hands the lock directly to the
first waiter (no barging), so grant order always equals enqueue order.

Timed-out waiters leave the table exactly as if they had never queued.
Once every transaction has released its locks the table is empty; there
is no per-key residue to leak.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable


class ReentrantAcquire(Exception):
    """A transaction tried to acquire a key it already holds."""


class NotHolder(Exception):
    """A transaction tried to release a key it does not hold."""


class LockOutcome(Enum):
    GRANTED = "granted"
    TIMED_OUT = "timed_out"


@dataclass(frozen=True)
class DocumentLock:
    """Introspection view of one held lock."""

    key: str
    holder: int
    acquired_at: float
    deadline: float


class _Waiter:
    __slots__ = ("txn", "cond", "granted")

    def __init__(self, txn: int, cond: threading.Condition):
        self.txn = txn
        self.cond = cond
        self.granted = False


class _Entry:
    __slots__ = ("holder", "acquired_at", "deadline", "waiters")

    def __init__(self, holder: int, acquired_at: float, deadline: float):
        self.holder = holder
        self.acquired_at = acquired_at
        self.deadline = deadline
        self.waiters: deque[_Waiter] = deque()


class LockManager:
    """Lock table keyed by document key, exclusive-only.

    `lock_timeout` only feeds the informational deadline recorded on a
    held lock (deadline = acquired_at + lock_timeout); how long acquire
    blocks is governed by the caller's `wait_deadline` argument.
    """

    def __init__(self, lock_timeout: float = 0.1, clock: Callable[[], float] = time.monotonic):
        self._mu = threading.Lock()
        self._entries: dict[str, _Entry] = {}
        self.lock_timeout = lock_timeout
        self._clock = clock

    def acquire(self, txn: int, key: str, wait_deadline: float) -> LockOutcome:
        """Block until the lock on `key` is granted or `wait_deadline`
        (monotonic timestamp) passes. FIFO among concurrent waiters."""
        with self._mu:
            entry = self._entries.get(key)
            if entry is None:
                now = self._clock()
                self._entries[key] = _Entry(txn, now, now + self.lock_timeout)
                return LockOutcome.GRANTED
            if entry.holder == txn:
                raise ReentrantAcquire(f"txn {txn} already holds {key!r}")
            waiter = _Waiter(txn, threading.Condition(self._mu))
            entry.waiters.append(waiter)
            while not waiter.granted:
                remaining = wait_deadline - self._clock()
                if remaining <= 0:
                    break
                waiter.cond.wait(remaining)
            if waiter.granted:
                return LockOutcome.GRANTED
            entry.waiters.remove(waiter)
            return LockOutcome.TIMED_OUT

    def release(self, txn: int, key: str) -> None:
        """Unlock `key`, handing it to the first FIFO waiter if any."""
        with self._mu:
            entry = self._entries.get(key)
            if entry is None or entry.holder != txn:
                raise NotHolder(f"txn {txn} does not hold {key!r}")
            if entry.waiters:
                waiter = entry.waiters.popleft()
                waiter.granted = True
                entry.holder = waiter.txn
                now = self._clock()
                entry.acquired_at = now
                entry.deadline = now + self.lock_timeout
                waiter.cond.notify()
            else:
                del self._entries[key]

    def is_locked(self, key: str) -> bool:
        """Advisory probe: true iff a holder exists right now. May be
        stale by the time the caller acts on it."""
        with self._mu:
            return key in self._entries

    def holder(self, key: str) -> int | None:
        with self._mu:
            entry = self._entries.get(key)
            return entry.holder if entry is not None else None

    def waiting_txns(self, key: str) -> list[int]:
        """Advisory: transaction ids queued on `key`, in arrival order."""
        with self._mu:
            entry = self._entries.get(key)
            return [w.txn for w in entry.waiters] if entry is not None else []

    def lock_info(self, key: str) -> DocumentLock | None:
        with self._mu:
            entry = self._entries.get(key)
            if entry is None:
                return None
            return DocumentLock(key, entry.holder, entry.acquired_at, entry.deadline)

    def table_size(self) -> int:
        """Number of keys with a holder (leak check: 0 when all done)."""
        with self._mu:
            return len(self._entries)
