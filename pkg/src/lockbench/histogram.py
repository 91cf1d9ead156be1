"""Fixed-bucket latency histogram.

Resolution is 1 us below 1 ms, then bucket widths double up to the
65.536 s bucket, with one overflow bucket past that. Percentiles are
reported as the lower edge of the containing bucket, so they are exact
to within one bucket width; min, max and mean are tracked exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

_LINEAR = 1000  # one bucket per us below this
_LOG_BUCKETS = 16  # [1000,2000) .. [32768000,65536000)
_OVERFLOW_EDGE = _LINEAR * (1 << _LOG_BUCKETS)  # 65,536,000 us
_NBUCKETS = _LINEAR + _LOG_BUCKETS + 1


def _bucket_index(us: int) -> int:
    if us < _LINEAR:
        return us
    k = (us // _LINEAR).bit_length() - 1
    if k >= _LOG_BUCKETS:
        return _LINEAR + _LOG_BUCKETS
    return _LINEAR + k


def _bucket_floor(index: int) -> int:
    if index < _LINEAR:
        return index
    return _LINEAR << (index - _LINEAR)


class LatencyHistogram:
    def __init__(self) -> None:
        self._buckets = [0] * _NBUCKETS
        self.count = 0
        self.total = 0
        self.min = 0
        self.max = 0

    def record(self, us: int) -> None:
        if us < 0:
            raise ValueError("latency must be >= 0")
        self._buckets[_bucket_index(us)] += 1
        if self.count == 0 or us < self.min:
            self.min = us
        if us > self.max:
            self.max = us
        self.count += 1
        self.total += us

    def merge(self, other: "LatencyHistogram") -> None:
        if other.count == 0:
            return
        for i, n in enumerate(other._buckets):
            self._buckets[i] += n
        if self.count == 0 or other.min < self.min:
            self.min = other.min
        if other.max > self.max:
            self.max = other.max
        self.count += other.count
        self.total += other.total

    @property
    def mean(self) -> float:
        return self.total / self.count if self.count else 0.0

    def percentile(self, p: float) -> int:
        """Lower edge of the bucket holding the p-th percentile value."""
        if not 0 < p <= 100:
            raise ValueError("percentile must be in (0, 100]")
        if self.count == 0:
            return 0
        rank = max(1, -(-self.count * p // 100))  # ceil
        seen = 0
        for i, n in enumerate(self._buckets):
            seen += n
            if seen >= rank:
                return _bucket_floor(i)
        return _bucket_floor(_NBUCKETS - 1)


@dataclass(frozen=True)
class LatencyStats:
    """Aggregate for one operation class; count covers committed ops only."""

    count: int
    mean_us: float
    min_us: int
    max_us: int
    p95_us: int
    p99_us: int

    @classmethod
    def from_histogram(cls, hist: LatencyHistogram) -> "LatencyStats":
        return cls(
            count=hist.count,
            mean_us=hist.mean,
            min_us=hist.min,
            max_us=hist.max,
            p95_us=hist.percentile(95),
            p99_us=hist.percentile(99),
        )

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "mean_us": self.mean_us,
            "min_us": self.min_us,
            "max_us": self.max_us,
            "p95_us": self.p95_us,
            "p99_us": self.p99_us,
        }
