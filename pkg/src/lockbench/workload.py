"""YCSB-style workload engine: key distributions, mixes, record synthesis.

Built-in mixes: A is 50/50 read/update, B is 95/5 read/update, F is
50/50 read/read-modify-write. Keys come from either a zipfian chooser
(the standard rejection-free construction with skew theta = 0.99) or a
uniform one. Everything is a pure function of the seed: same seed, same
operation stream, byte for byte.

Record schema defaults to 10 fields of 100 printable pseudo-random
bytes each, keys "user" + zero-padded index.
"""

from __future__ import annotations

import hashlib
import random
import time
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Mapping

from .txn import OperationSpec, read_op, rmw_op, update_op


class UnknownWorkload(Exception):
    """Built-in workload name is not one of A, B, F."""


class UnknownProperty(Exception):
    """Properties file contains a key this engine does not define."""


class IndexOutOfRange(Exception):
    """Record index outside [0, record_count)."""


class Distribution(Enum):
    ZIPFIAN = "zipfian"
    UNIFORM = "uniform"


ZIPFIAN_THETA = 0.99
KEY_PREFIX = "user"
KEY_DIGITS = 10

# maps any byte onto printable ASCII 33..126
_PRINTABLE = bytes(33 + (i % 94) for i in range(256))


@dataclass(frozen=True)
class WorkloadSpec:
    read_proportion: float
    update_proportion: float
    rmw_proportion: float
    record_count: int = 10_000
    operation_count: int = 10_000
    distribution: Distribution = Distribution.ZIPFIAN
    field_count: int = 10
    field_length: int = 100
    seed: int = 42

    def __post_init__(self) -> None:
        total = self.read_proportion + self.update_proportion + self.rmw_proportion
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"proportions sum to {total}, expected 1.0")
        for name in ("read_proportion", "update_proportion", "rmw_proportion"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} is negative")
        if self.record_count < 1 or self.operation_count < 1:
            raise ValueError("record_count and operation_count must be >= 1")
        if self.field_count < 1 or self.field_length < 1:
            raise ValueError("field_count and field_length must be >= 1")


_BUILTINS = {
    "A": (0.50, 0.50, 0.0),
    "B": (0.95, 0.05, 0.0),
    "F": (0.50, 0.0, 0.50),
}


def builtin_workload(name: str) -> WorkloadSpec:
    """The update-heavy (A), read-mostly (B) and read-modify-write (F)
    mixes, at 10,000 records / 10,000 operations, zipfian keys."""
    try:
        read_p, update_p, rmw_p = _BUILTINS[name.upper()]
    except KeyError:
        raise UnknownWorkload(name) from None
    return WorkloadSpec(read_p, update_p, rmw_p)


def derive_seed(*parts: object) -> int:
    """Stable sub-seed derivation, independent of hash randomization."""
    text = ":".join(repr(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


# -- key choosers -------------------------------------------------------------


class ZipfianSampler:
    """Rejection-free zipfian chooser over [0, n), P(i) proportional to
    1/(i+1)^theta.

    The constants follow the classic quick-sampling construction used by
    cloud benchmark generators: exact for the two most popular items, a
    continuous approximation for the tail. Good to well under 1% on the
    hottest keys; mid-rank items can deviate by a few percent, which is
    acceptable for shaping contention.
    """

    def __init__(self, n: int, theta: float = ZIPFIAN_THETA, seed: int = 0):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.n = n
        self.theta = theta
        self.zetan = zeta(n, theta)
        self.zeta2 = zeta(2, theta)
        self.alpha = 1.0 / (1.0 - theta)
        if n == 1:
            self.eta = 0.0
        else:
            self.eta = (1.0 - (2.0 / n) ** (1.0 - theta)) / (1.0 - self.zeta2 / self.zetan)
        self.rng = random.Random(seed)

    def next(self) -> int:
        if self.n == 1:
            return 0
        u = self.rng.random()
        uz = u * self.zetan
        if uz < 1.0:
            return 0
        if uz < 1.0 + 0.5**self.theta:
            return 1
        index = int(self.n * (self.eta * u - self.eta + 1.0) ** self.alpha)
        return min(index, self.n - 1)


class UniformSampler:
    """Equiprobable chooser over [0, n)."""

    def __init__(self, n: int, seed: int = 0):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.n = n
        self.rng = random.Random(seed)

    def next(self) -> int:
        return self.rng.randrange(self.n)


def zeta(n: int, theta: float) -> float:
    """Generalized harmonic sum over 1..n, the zipfian normalizer."""
    return sum(1.0 / (i**theta) for i in range(1, n + 1))


def make_key_sampler(spec: WorkloadSpec, seed: int):
    if spec.distribution is Distribution.ZIPFIAN:
        return ZipfianSampler(spec.record_count, ZIPFIAN_THETA, seed)
    return UniformSampler(spec.record_count, seed)


# -- record synthesis ----------------------------------------------------------


def key_for(index: int) -> str:
    return f"{KEY_PREFIX}{index:0{KEY_DIGITS}d}"


def field_names(count: int) -> list[str]:
    return [f"field{i}" for i in range(count)]


def _printable_bytes(rng: random.Random, length: int) -> bytes:
    return rng.randbytes(length).translate(_PRINTABLE)


def build_record(index: int, spec: WorkloadSpec) -> tuple[str, dict[str, bytes]]:
    """Deterministic record for the load phase: same (index, seed) in,
    same bytes out."""
    if not 0 <= index < spec.record_count:
        raise IndexOutOfRange(index)
    rng = random.Random(derive_seed(spec.seed, "record", index))
    fields = {name: _printable_bytes(rng, spec.field_length) for name in field_names(spec.field_count)}
    return key_for(index), fields


def _replace_field(name: str, value: bytes):
    # read-modify-write payload: read everything, replace one field.
    # The yield stands in for the client-side gap between reading a
    # record and writing it back; without a scheduling point here a
    # worker can burn through its whole share inside one interpreter
    # quantum and concurrent RMWs never actually interleave.
    def transform(fields: Mapping[str, bytes]) -> Mapping[str, bytes]:
        time.sleep(0)
        return {name: value}

    return transform


class OperationSampler:
    """Per-worker operation stream: op class by mix proportions, key by
    the configured distribution, payload one fresh seeded field value.
    Workers get independent sampler states; nothing is shared."""

    def __init__(self, spec: WorkloadSpec, seed: int | None = None):
        self.spec = spec
        base = spec.seed if seed is None else seed
        self.keys = make_key_sampler(spec, derive_seed(base, "keys"))
        self.rng = random.Random(derive_seed(base, "ops"))
        self._fields = field_names(spec.field_count)

    def next_op(self) -> OperationSpec:
        key = key_for(self.keys.next())
        r = self.rng.random()
        if r < self.spec.read_proportion:
            return read_op(key)
        field = self._fields[self.rng.randrange(len(self._fields))]
        value = _printable_bytes(self.rng, self.spec.field_length)
        if r < self.spec.read_proportion + self.spec.update_proportion:
            return update_op(key, {field: value})
        return rmw_op(key, _replace_field(field, value))

    def ops(self, count: int) -> Iterable[OperationSpec]:
        for _ in range(count):
            yield self.next_op()


# -- properties files -----------------------------------------------------------

_PROPERTY_KEYS = {
    "recordcount",
    "operationcount",
    "readproportion",
    "updateproportion",
    "readmodifywriteproportion",
    "requestdistribution",
    "fieldcount",
    "fieldlength",
}


def parse_properties(text: str) -> dict[str, str]:
    """Parse `key=value` lines. Blank lines and #-comments are skipped;
    unknown keys are rejected."""
    props: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _PROPERTY_KEYS:
            raise UnknownProperty(key)
        props[key] = value.strip()
    return props


def load_properties(path: str) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as f:
        return parse_properties(f.read())


def apply_properties(spec: WorkloadSpec, props: Mapping[str, str]) -> WorkloadSpec:
    """Overlay properties onto a spec; re-validates the result."""
    updates: dict[str, object] = {}
    for key, value in props.items():
        if key == "recordcount":
            updates["record_count"] = int(value)
        elif key == "operationcount":
            updates["operation_count"] = int(value)
        elif key == "readproportion":
            updates["read_proportion"] = float(value)
        elif key == "updateproportion":
            updates["update_proportion"] = float(value)
        elif key == "readmodifywriteproportion":
            updates["rmw_proportion"] = float(value)
        elif key == "fieldcount":
            updates["field_count"] = int(value)
        elif key == "fieldlength":
            updates["field_length"] = int(value)
        elif key == "requestdistribution":
            try:
                updates["distribution"] = Distribution(value.lower())
            except ValueError:
                raise ValueError(f"requestdistribution must be zipfian or uniform, got {value!r}") from None
    return replace(spec, **updates)
