"""In-memory keyed document collection with byte-exact snapshots.

A document is a flat ordered map of field name to byte string plus a
version counter. The counter starts at 0 on insert and goes up by
exactly 1 per update, which is what makes lost updates detectable
after the fact: a committed history over one key must produce the
contiguous version chain 1..n.

Individual operations are atomic: a concurrent reader never observes a
half-applied field map. Atomicity *across* operations (all-or-nothing
transactions) is the transaction layer's job, not this module's.

Serialization format (dump/load): a stream of records in ascending key
order, each record being

    u32 key length | key bytes (utf-8) | u64 version (little-endian) |
    u32 field count | per field: u32 name length, name bytes,
    u32 value length, value bytes

All integers little-endian. Round trips are bit-exact, so two stores
with equal dumps hold byte-identical state.
"""

from __future__ import annotations

import struct
import threading
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Mapping


class DuplicateKey(Exception):
    """Insert attempted on a key that already exists."""


class NotFound(Exception):
    """Operation referenced a key that is not in the store."""


@dataclass(frozen=True)
class Document:
    """A committed document as seen by a reader. Detached copy: mutating
    the store after a read never changes a Document already returned."""

    key: str
    fields: dict[str, bytes]
    version: int


@dataclass(frozen=True)
class Snapshot:
    """Byte-exact pre-image of a document, captured for rollback.

    Restoring a snapshot puts fields *and* version back exactly as they
    were, so an aborted transaction leaves no trace, version included.
    """

    key: str
    fields: dict[str, bytes]
    version: int


class _Record:
    __slots__ = ("fields", "version")

    def __init__(self, fields: dict[str, bytes], version: int):
        self.fields = fields
        self.version = version


class DocumentStore:
    """Thread-safe keyed collection of documents.

    Safe for concurrent calls from many workers; every public operation
    runs under one internal mutex and is therefore atomic with respect
    to every other operation.
    """

    def __init__(self) -> None:
        self._mu = threading.Lock()
        self._docs: dict[str, _Record] = {}

    def __len__(self) -> int:
        with self._mu:
            return len(self._docs)

    def keys(self) -> list[str]:
        with self._mu:
            return list(self._docs)

    def insert(self, key: str, fields: Mapping[str, bytes]) -> None:
        """Add a new document at version 0. Raises DuplicateKey if present."""
        with self._mu:
            if key in self._docs:
                raise DuplicateKey(key)
            self._docs[key] = _Record(dict(fields), 0)

    def read(self, key: str) -> Document:
        """Return the latest committed document (detached copy)."""
        with self._mu:
            rec = self._docs.get(key)
            if rec is None:
                raise NotFound(key)
            # bytes values are immutable; copying the dict is a deep copy
            return Document(key, dict(rec.fields), rec.version)

    def update(self, key: str, changes: Mapping[str, bytes]) -> int:
        """Replace the named fields, leave the rest untouched, bump the
        version by exactly 1. Returns the new version."""
        with self._mu:
            rec = self._docs.get(key)
            if rec is None:
                raise NotFound(key)
            rec.fields.update(changes)
            rec.version += 1
            return rec.version

    def snapshot(self, key: str) -> Snapshot:
        """Capture a byte-exact pre-image of the document."""
        with self._mu:
            rec = self._docs.get(key)
            if rec is None:
                raise NotFound(key)
            return Snapshot(key, dict(rec.fields), rec.version)

    def restore(self, snap: Snapshot) -> None:
        """Overwrite the document with the snapshot's fields and version."""
        with self._mu:
            if snap.key not in self._docs:
                raise NotFound(snap.key)
            self._docs[snap.key] = _Record(dict(snap.fields), snap.version)

    def _discard(self, key: str) -> None:
        # Rollback support only: undoes an insert made by a transaction
        # that later aborted. Deletes are not part of the workload-facing
        # surface, so this stays internal to the package.
        with self._mu:
            self._docs.pop(key, None)

    def versions(self) -> dict[str, int]:
        """Current version of every document (audit input)."""
        with self._mu:
            return {k: rec.version for k, rec in self._docs.items()}

    def reset(self) -> None:
        """Drop every document (between benchmark matrix cells)."""
        with self._mu:
            self._docs.clear()

    # -- serialization ----------------------------------------------------

    def dump(self, out: BinaryIO) -> None:
        with self._mu:
            items = sorted(self._docs.items())
        for key, rec in items:
            out.write(_encode_record(key, rec.fields, rec.version))

    def dumps(self) -> bytes:
        with self._mu:
            items = sorted(self._docs.items())
        return b"".join(_encode_record(k, r.fields, r.version) for k, r in items)

    def load(self, src: BinaryIO) -> None:
        data = src.read()
        self.load_bytes(data)

    def load_bytes(self, data: bytes) -> None:
        for key, fields, version in _decode_records(data):
            with self._mu:
                if key in self._docs:
                    raise DuplicateKey(key)
                self._docs[key] = _Record(fields, version)

    def dump_file(self, path: str) -> None:
        with open(path, "wb") as f:
            self.dump(f)

    def load_file(self, path: str) -> None:
        with open(path, "rb") as f:
            self.load(f)


_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


def _encode_record(key: str, fields: Mapping[str, bytes], version: int) -> bytes:
    kb = key.encode("utf-8")
    parts = [_U32.pack(len(kb)), kb, _U64.pack(version), _U32.pack(len(fields))]
    for name, value in fields.items():
        nb = name.encode("utf-8")
        parts.append(_U32.pack(len(nb)))
        parts.append(nb)
        parts.append(_U32.pack(len(value)))
        parts.append(value)
    return b"".join(parts)


def _decode_records(data: bytes) -> Iterable[tuple[str, dict[str, bytes], int]]:
    pos = 0
    end = len(data)
    while pos < end:
        klen = _U32.unpack_from(data, pos)[0]
        pos += 4
        key = data[pos : pos + klen].decode("utf-8")
        pos += klen
        version = _U64.unpack_from(data, pos)[0]
        pos += 8
        nfields = _U32.unpack_from(data, pos)[0]
        pos += 4
        fields: dict[str, bytes] = {}
        for _ in range(nfields):
            nlen = _U32.unpack_from(data, pos)[0]
            pos += 4
            name = data[pos : pos + nlen].decode("utf-8")
            pos += nlen
            vlen = _U32.unpack_from(data, pos)[0]
            pos += 4
            fields[name] = data[pos : pos + vlen]
            pos += vlen
        yield key, fields, version
