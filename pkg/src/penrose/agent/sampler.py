"""Kernel sampling and partial-histogram accumulation.

Within each reset window of ``O`` seconds the agent samples every ``S``-th
kernel after a random offset ``R`` and folds only the counter (or counter
pair) currently under rotation.  Each reset redraws ``R`` and advances the
rotation.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from ..histogram import (TIME, PairCounterSpec, PartialHistogram, RotationUnit, empty_for,
                         fold_pair_sample, fold_sample, time_weight)


@dataclass(frozen=True)
class SamplerState:
    S: int
    R: int
    O_ns: int
    unit_index: int
    kernel_index: int = 0
    load_factor: float = 1.0
    epoch: int = 0
    window_start_ns: int = 0
    active: bool = True

    @property
    def active_ns(self) -> int:
        """Length of the sampling part of each reset window."""
        return int(round(self.O_ns * self.load_factor))

    @property
    def window_end_ns(self) -> int:
        return self.window_start_ns + self.O_ns

    @property
    def active_end_ns(self) -> int:
        return self.window_start_ns + self.active_ns


def should_sample(state: SamplerState, i: int) -> bool:
    return state.active and i % state.S == state.R


def sampled_mask(state: SamplerState, n: int) -> np.ndarray:
    """Vectorized :func:`should_sample` over kernel indices ``0..n-1``."""
    if not state.active:
        return np.zeros(n, dtype=bool)
    return np.arange(n) % state.S == state.R


def initial_state(S: int, O_ns: int, n_units: int, rng: np.random.Generator, load_factor: float = 1.0,
                  rotation: str = "independent", start_ns: int = 0) -> SamplerState:
    if S < 1 or O_ns <= 0 or n_units < 1:
        raise ValueError("S, O and the rotation list must be positive")
    if rotation == "fleet":
        unit = (start_ns // O_ns) % n_units
    else:
        unit = int(rng.integers(n_units))
    return SamplerState(S=S, R=int(rng.integers(S)), O_ns=O_ns, unit_index=unit,
                        load_factor=load_factor, window_start_ns=start_ns)


def reset_epoch(state: SamplerState, rng: np.random.Generator, n_units: int,
                rotation: str = "independent") -> SamplerState:
    """Start the next reset window: fresh offset, next counter, index back to 0."""
    start = state.window_start_ns + state.O_ns
    if rotation == "fleet":
        # every agent derives the unit from the shared window number
        unit = (start // state.O_ns) % n_units
    else:
        unit = (state.unit_index + 1) % n_units
    return replace(state, R=int(rng.integers(state.S)), unit_index=unit, kernel_index=0,
                   epoch=state.epoch + 1, window_start_ns=start, active=True)


@dataclass
class _Entry:
    hist: PartialHistogram
    first_ns: int


@dataclass
class AccumulatorSet:
    """Open partial histograms keyed by (snippet hash, counter id)."""

    A: int
    T_ns: int
    time_scale_ns: int = 521_000
    entries: dict = field(default_factory=dict)

    def fold(self, snippet_hash: bytes, unit: RotationUnit, counters: Mapping[int, float],
             duration_ns: int, now_ns: int) -> PartialHistogram | None:
        """Fold one sample; returns the histogram if it just reached ``A``."""
        key = (snippet_hash, unit.counter_id)
        entry = self.entries.get(key)
        if entry is None:
            entry = self.entries[key] = _Entry(empty_for(unit, snippet_hash), now_ns)
        w = time_weight(duration_ns, self.time_scale_ns) if unit.mode == TIME else 1
        if isinstance(unit, PairCounterSpec):
            fold_pair_sample(entry.hist, unit, counters[unit.counter_a.counter_id],
                             counters[unit.counter_b.counter_id], w)
        else:
            fold_sample(entry.hist, unit, counters[unit.counter_id], w)
        if entry.hist.sample_count >= self.A:
            del self.entries[key]
            return entry.hist
        return None

    def expire(self, now_ns: int) -> list[PartialHistogram]:
        """Remove and return histograms whose first sample is at least ``T`` old."""
        due = [k for k, e in self.entries.items() if now_ns - e.first_ns >= self.T_ns]
        return [self.entries.pop(k).hist for k in sorted(due)]

    def next_deadline(self) -> int | None:
        if not self.entries:
            return None
        return min(e.first_ns for e in self.entries.values()) + self.T_ns

    def drain(self) -> list[PartialHistogram]:
        out = [self.entries[k].hist for k in sorted(self.entries)]
        self.entries.clear()
        return out

    def __len__(self) -> int:
        return len(self.entries)


def needed_counters(unit: RotationUnit) -> Sequence[int]:
    if isinstance(unit, PairCounterSpec):
        return (unit.counter_a.counter_id, unit.counter_b.counter_id)
    return (unit.counter_id,)


FlushHook = Callable[[PartialHistogram], None]
