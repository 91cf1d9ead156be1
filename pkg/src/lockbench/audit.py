"""Consistency oracle over operation logs.

Turns "did the run stay consistent" into a binary verdict by checking
two exact, schedule-independent properties per key:

* version chains: the committed mutating ops on a key must have written
  the contiguous version multiset {1..n}, and the store must end at
  version n. A duplicate means two writers clobbered each other (a lost
  update); a gap means a write vanished.

* read-modify-write atomicity: every committed RMW must have written
  observed + 1. Anything else means another committed write slipped in
  between its read and its write-back.

Aborted transactions are excluded: their writes were rolled back and
never became part of any chain. Insert entries are excluded too; they
establish version 0, chains cover the updates on top.
"""

from __future__ import annotations

import csv
from collections import Counter, defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .txn import OpKind


class IncompleteLog(Exception):
    """A committed mutating entry is missing its written version."""


class OpOutcome(Enum):
    COMMITTED = "committed"
    ABORTED = "aborted"


class Consistency(Enum):
    CONSISTENT = "Consistent"
    LOST_UPDATES_DETECTED = "LostUpdatesDetected"
    NOT_AUDITED = "NotAudited"


@dataclass(frozen=True)
class OpLogEntry:
    txn_id: int
    worker_id: int
    kind: OpKind
    key: str
    observed_version: int | None
    written_version: int | None
    outcome: OpOutcome
    issue_us: int
    finish_us: int


@dataclass(frozen=True)
class Violation:
    key: str
    detail: str
    txn_ids: tuple[int, ...] = ()


@dataclass(frozen=True)
class AuditVerdict:
    verdict: Consistency
    violations: tuple[Violation, ...] = ()

    @property
    def consistent(self) -> bool:
        return self.verdict is Consistency.CONSISTENT


_MUTATORS = (OpKind.UPDATE, OpKind.READ_MODIFY_WRITE)


def check_version_chain(
    log: Sequence[OpLogEntry], final_store_versions: Mapping[str, int]
) -> AuditVerdict:
    """Per key, committed written versions must be exactly {1..n} with the
    store ending at n. Exact, not statistical."""
    written: dict[str, list[OpLogEntry]] = defaultdict(list)
    for entry in log:
        if entry.kind in _MUTATORS and entry.outcome is OpOutcome.COMMITTED:
            if entry.written_version is None:
                raise IncompleteLog(f"committed {entry.kind.value} on {entry.key!r} lacks written version")
            written[entry.key].append(entry)

    violations: list[Violation] = []
    for key, entries in sorted(written.items()):
        n = len(entries)
        counts = Counter(e.written_version for e in entries)
        for version, times in sorted(counts.items()):
            if times > 1:
                culprits = tuple(e.txn_id for e in entries if e.written_version == version)
                violations.append(Violation(key, f"duplicate written version {version}", culprits))
        for version in range(1, n + 1):
            if version not in counts:
                violations.append(Violation(key, f"missing written version {version}"))
        for version in counts:
            if not 1 <= version <= n:  # type: ignore[operator]
                culprits = tuple(e.txn_id for e in entries if e.written_version == version)
                violations.append(Violation(key, f"written version {version} outside 1..{n}", culprits))
        final = final_store_versions.get(key)
        if final is None:
            violations.append(Violation(key, "key missing from final store"))
        elif final != n:
            violations.append(Violation(key, f"final store version {final}, expected {n}"))

    verdict = Consistency.CONSISTENT if not violations else Consistency.LOST_UPDATES_DETECTED
    return AuditVerdict(verdict, tuple(violations))


def check_rmw_atomicity(log: Sequence[OpLogEntry]) -> AuditVerdict:
    """Every committed read-modify-write must have written observed + 1."""
    violations: list[Violation] = []
    for entry in log:
        if entry.kind is not OpKind.READ_MODIFY_WRITE or entry.outcome is not OpOutcome.COMMITTED:
            continue
        if entry.observed_version is None or entry.written_version is None:
            raise IncompleteLog(f"committed rmw on {entry.key!r} lacks version observations")
        if entry.written_version != entry.observed_version + 1:
            violations.append(
                Violation(
                    entry.key,
                    f"rmw observed {entry.observed_version} but wrote {entry.written_version}",
                    (entry.txn_id,),
                )
            )
    verdict = Consistency.CONSISTENT if not violations else Consistency.LOST_UPDATES_DETECTED
    return AuditVerdict(verdict, tuple(violations))


def audit_run(
    log: Sequence[OpLogEntry], final_store_versions: Mapping[str, int]
) -> AuditVerdict:
    """Combined verdict: consistent iff both checks pass."""
    chain = check_version_chain(log, final_store_versions)
    rmw = check_rmw_atomicity(log)
    violations = chain.violations + rmw.violations
    verdict = Consistency.CONSISTENT if not violations else Consistency.LOST_UPDATES_DETECTED
    return AuditVerdict(verdict, violations)


_CSV_HEADER = [
    "txn_id",
    "worker_id",
    "kind",
    "key",
    "observed_version",
    "written_version",
    "outcome",
    "issue_us",
    "finish_us",
]


def write_log_csv(path: str, log: Iterable[OpLogEntry]) -> None:
    """Emit the merged operation log for external analysis."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(_CSV_HEADER)
        for e in log:
            writer.writerow(
                [
                    e.txn_id,
                    e.worker_id,
                    e.kind.value,
                    e.key,
                    "" if e.observed_version is None else e.observed_version,
                    "" if e.written_version is None else e.written_version,
                    e.outcome.value,
                    e.issue_us,
                    e.finish_us,
                ]
            )
