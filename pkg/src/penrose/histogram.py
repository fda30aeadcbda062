"""Counter binning and partial histograms.

Counter values are binned linearly over ``[0, peak]`` with clipping.  A
partial histogram holds unsigned 64-bit integer bins; each folded sample adds
either 1 (count mode) or a 4-bit execution-time weight (time mode).

Pair histograms quantize two counters to 32 levels each and store the
resulting 32x32 grid row-major in 1024 bins.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

import numpy as np

DEFAULT_BINS = 128
PAIR_LEVELS = 32
PAIR_BINS = PAIR_LEVELS * PAIR_LEVELS
MAX_TIME_WEIGHT = 15
# Largest kernel latency in the reference traces (521 us).
DEFAULT_TIME_SCALE_NS = 521_000
U64_MAX = (1 << 64) - 1
# Pair histograms travel under the first counter's id with the high bit set.
PAIR_FLAG = 0x8000

COUNT = "count"
TIME = "time"


class HistogramError(ValueError):
    """Invalid counter value, configuration or histogram shape."""


class BinOverflowError(OverflowError):
    """A bin would exceed the unsigned 64-bit range."""


@dataclass(frozen=True)
class CounterSpec:
    counter_id: int
    name: str
    peak_value: float
    bin_count: int = DEFAULT_BINS
    mode: str = COUNT
    pair_with: int | None = None

    def __post_init__(self):
        if not 0 <= self.counter_id < PAIR_FLAG:
            raise HistogramError(f"counter_id {self.counter_id} outside [0, 0x7fff]")
        if not (math.isfinite(self.peak_value) and self.peak_value > 0):
            raise HistogramError(f"peak_value must be positive, got {self.peak_value}")
        if self.bin_count != DEFAULT_BINS:
            # 1024-bin layouts exist only as PairCounterSpec
            raise HistogramError(f"unsupported bin_count {self.bin_count}")
        if self.mode not in (COUNT, TIME):
            raise HistogramError(f"mode must be 'count' or 'time', got {self.mode!r}")


@dataclass(frozen=True)
class PairCounterSpec:
    counter_a: CounterSpec
    counter_b: CounterSpec

    @property
    def counter_id(self) -> int:
        return pair_counter_id(self.counter_a.counter_id)

    @property
    def bin_count(self) -> int:
        return PAIR_BINS

    @property
    def mode(self) -> str:
        return self.counter_a.mode

    @property
    def name(self) -> str:
        return f"{self.counter_a.name}x{self.counter_b.name}"


RotationUnit = Union[CounterSpec, PairCounterSpec]


def pair_counter_id(counter_a_id: int) -> int:
    return PAIR_FLAG | counter_a_id


def is_pair_id(counter_id: int) -> bool:
    return bool(counter_id & PAIR_FLAG)


@dataclass
class PartialHistogram:
    """Per-(snippet, counter) bin vector accumulated on a client."""

    snippet_hash: bytes
    counter_id: int
    bins: np.ndarray
    sample_count: int = 0

    @classmethod
    def empty(cls, snippet_hash: bytes, counter_id: int, bin_count: int) -> "PartialHistogram":
        return cls(snippet_hash, counter_id, np.zeros(bin_count, dtype=np.uint64), 0)

    @property
    def bin_count(self) -> int:
        return len(self.bins)

    def total(self) -> int:
        return int(sum(int(b) for b in self.bins))

    def copy(self) -> "PartialHistogram":
        return PartialHistogram(self.snippet_hash, self.counter_id, self.bins.copy(), self.sample_count)

    def as_ints(self) -> list[int]:
        return [int(b) for b in self.bins]


def _check_value(value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise HistogramError(f"non-finite counter value {value!r}")
    return value


def quantize(value: float, peak: float, levels: int) -> int:
    value = _check_value(value)
    if value <= 0.0:
        return 0
    if value >= peak:
        return levels - 1
    return min(int(math.floor(value * levels / peak)), levels - 1)


def bin_index(spec: CounterSpec, value: float) -> int:
    return quantize(value, spec.peak_value, spec.bin_count)


def bin_indices(spec: CounterSpec, values: np.ndarray) -> np.ndarray:
    """Vectorized :func:`bin_index`; used by the simulator's bulk folds."""
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise HistogramError("non-finite counter value in batch")
    clipped = np.clip(values, 0.0, spec.peak_value)
    idx = np.floor(clipped * spec.bin_count / spec.peak_value).astype(np.int64)
    return np.minimum(idx, spec.bin_count - 1)


def time_weight(duration_ns: float, scale_max_ns: float = DEFAULT_TIME_SCALE_NS) -> int:
    """Scale, clip and discretize a kernel duration to a weight in [0, 15]."""
    if not scale_max_ns > 0:
        raise HistogramError(f"scale_max must be positive, got {scale_max_ns}")
    d = min(max(float(duration_ns), 0.0), float(scale_max_ns))
    return min(int(math.floor(d * 16 / scale_max_ns)), MAX_TIME_WEIGHT)


def time_weights(durations_ns: np.ndarray, scale_max_ns: float = DEFAULT_TIME_SCALE_NS) -> np.ndarray:
    if not scale_max_ns > 0:
        raise HistogramError(f"scale_max must be positive, got {scale_max_ns}")
    d = np.clip(np.asarray(durations_ns, dtype=np.float64), 0.0, float(scale_max_ns))
    return np.minimum(np.floor(d * 16 / scale_max_ns).astype(np.int64), MAX_TIME_WEIGHT)


def _add(h: PartialHistogram, index: int, weight: int) -> PartialHistogram:
    if weight < 0:
        raise HistogramError(f"negative weight {weight}")
    current = int(h.bins[index])
    if current + weight > U64_MAX:
        raise BinOverflowError(f"bin {index} would overflow 64 bits")
    h.bins[index] = np.uint64(current + weight)
    h.sample_count += 1
    return h


def fold_sample(h: PartialHistogram, spec: CounterSpec, value: float, weight: int = 1) -> PartialHistogram:
    """Add one kernel sample to ``h`` in place and return it."""
    if h.counter_id != spec.counter_id:
        raise HistogramError(f"histogram counter {h.counter_id} != spec {spec.counter_id}")
    if h.bin_count != spec.bin_count:
        raise HistogramError(f"histogram has {h.bin_count} bins, spec expects {spec.bin_count}")
    return _add(h, bin_index(spec, value), weight)


def pair_bin_index(pair: PairCounterSpec, value_a: float, value_b: float) -> int:
    row = quantize(value_a, pair.counter_a.peak_value, PAIR_LEVELS)
    col = quantize(value_b, pair.counter_b.peak_value, PAIR_LEVELS)
    return row * PAIR_LEVELS + col


def fold_pair_sample(h: PartialHistogram, pair: PairCounterSpec, value_a: float, value_b: float,
                     weight: int = 1) -> PartialHistogram:
    if h.bin_count != PAIR_BINS:
        raise HistogramError(f"pair histogram needs {PAIR_BINS} bins, has {h.bin_count}")
    if h.counter_id != pair.counter_id:
        raise HistogramError(f"histogram counter {h.counter_id:#x} != pair {pair.counter_id:#x}")
    return _add(h, pair_bin_index(pair, value_a, value_b), weight)


def empty_for(unit: RotationUnit, snippet_hash: bytes) -> PartialHistogram:
    return PartialHistogram.empty(snippet_hash, unit.counter_id, unit.bin_count)


def max_partial_bin(aggregation_threshold: int, max_weight: int = MAX_TIME_WEIGHT) -> int:
    """Largest value a single partial-histogram bin can reach before it is flushed."""
    return aggregation_threshold * max_weight


# -- counter registry -------------------------------------------------------

@dataclass
class CounterRegistry:
    """Counters known to agents, server and designer console.

    Loaded from an INI file with one ``[counter:<name>]`` section per counter
    carrying ``counter_id``, ``peak``, ``mode`` and an optional ``pair_with``
    (the partner's counter_id).
    """

    counters: dict[int, CounterSpec] = field(default_factory=dict)

    def add(self, spec: CounterSpec) -> None:
        if spec.counter_id in self.counters:
            raise HistogramError(f"duplicate counter_id {spec.counter_id}")
        self.counters[spec.counter_id] = spec

    def __getitem__(self, counter_id: int) -> CounterSpec:
        return self.counters[counter_id]

    def __len__(self) -> int:
        return len(self.counters)

    def pairs(self) -> list[PairCounterSpec]:
        out = []
        for cid in sorted(self.counters):
            spec = self.counters[cid]
            if spec.pair_with is not None:
                if spec.pair_with not in self.counters:
                    raise HistogramError(f"counter {cid} pairs with unknown counter {spec.pair_with}")
                out.append(PairCounterSpec(spec, self.counters[spec.pair_with]))
        return out

    def rotation(self) -> list[RotationUnit]:
        """Single counters in id order, then declared pairs."""
        units: list[RotationUnit] = [self.counters[c] for c in sorted(self.counters)]
        units.extend(self.pairs())
        return units

    def unit(self, counter_id: int) -> RotationUnit:
        if is_pair_id(counter_id):
            a = self.counters[counter_id & ~PAIR_FLAG]
            if a.pair_with is None:
                raise KeyError(counter_id)
            return PairCounterSpec(a, self.counters[a.pair_with])
        return self.counters[counter_id]

    @classmethod
    def from_specs(cls, specs: Iterable[CounterSpec]) -> "CounterRegistry":
        reg = cls()
        for s in specs:
            reg.add(s)
        reg.pairs()
        return reg

    @classmethod
    def parse(cls, text: str) -> "CounterRegistry":
        cp = configparser.ConfigParser()
        cp.read_string(text)
        reg = cls()
        for section in cp.sections():
            if not section.startswith("counter:"):
                continue
            sec = cp[section]
            pair = sec.get("pair_with")
            reg.add(CounterSpec(
                counter_id=sec.getint("counter_id"),
                name=sec.get("name", section.split(":", 1)[1]),
                peak_value=sec.getfloat("peak"),
                mode=sec.get("mode", COUNT),
                pair_with=int(pair) if pair not in (None, "") else None,
            ))
        reg.pairs()
        return reg

    @classmethod
    def load(cls, path: str | Path) -> "CounterRegistry":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def dumps(self) -> str:
        lines = []
        for cid in sorted(self.counters):
            s = self.counters[cid]
            lines.append(f"[counter:{s.name}]")
            lines.append(f"counter_id = {s.counter_id}")
            lines.append(f"peak = {s.peak_value!r}")
            lines.append(f"mode = {s.mode}")
            if s.pair_with is not None:
                lines.append(f"pair_with = {s.pair_with}")
            lines.append("")
        return "\n".join(lines)


def default_registry() -> CounterRegistry:
    """DRAM and tensor-core utilization in percent of peak, paired for 2D study."""
    return CounterRegistry.from_specs([
        CounterSpec(1, "dram_util", 100.0, mode=TIME, pair_with=2),
        CounterSpec(2, "tensor_util", 100.0, mode=TIME),
    ])
