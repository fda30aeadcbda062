"""The per-GPU agent loop.

The agent replays a kernel stream, cuts it into snippets, announces each
completed snippet's fingerprint, samples kernels into partial histograms and
pushes each full (or timed-out) partial encrypted, over a fresh connection.

Samples taken before the first snippet completes are buffered and attributed
to that snippet once it exists; afterwards samples go to the most recently
completed snippet.
"""
from __future__ import annotations

import logging
import random
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np

from ..config import AgentConfig, seconds_to_ns
from ..crypto.public import PublicKey, encrypt_histogram
from ..histogram import CounterRegistry, PartialHistogram, RotationUnit
from ..snippets import MinHashSignature, SnippetAssembler, family
from ..transport import DeliveryStats, Transport, send_with_retry
from ..wire import UpdateMessage, encode_update
from .sampler import AccumulatorSet, initial_state, needed_counters, reset_epoch, should_sample
from .trace import KernelRecord

log = logging.getLogger(__name__)


class VirtualClock:
    """Time advances only by kernel durations and idle jumps."""

    def __init__(self, start_ns: int = 0):
        self.t = start_ns

    def now(self) -> int:
        return self.t

    def advance(self, dt_ns: int) -> None:
        self.t += dt_ns

    def wait_until(self, t_ns: int) -> None:
        self.t = max(self.t, t_ns)


class WallClock:
    """Paces replay against the monotonic clock, optionally sped up by ``scale``."""

    def __init__(self, scale: float = 1.0, sleep: Callable[[float], None] = time.sleep):
        self.scale = scale
        self._sleep = sleep
        self._t0 = time.monotonic_ns()
        self._debt_ns = 0

    def now(self) -> int:
        return int((time.monotonic_ns() - self._t0) * self.scale)

    def advance(self, dt_ns: int) -> None:
        self._debt_ns += dt_ns
        if self._debt_ns >= 1_000_000:
            self._sleep(self._debt_ns / self.scale / 1e9)
            self._debt_ns = 0

    def wait_until(self, t_ns: int) -> None:
        gap = t_ns - self.now()
        if gap > 0:
            self._sleep(gap / self.scale / 1e9)


@dataclass
class AgentStats:
    kernels: int = 0
    sampled: int = 0
    folded: int = 0
    missing_counter: int = 0
    announces: int = 0
    updates: int = 0
    delivery: DeliveryStats = field(default_factory=DeliveryStats)
    update_times_ns: list = field(default_factory=list)


class Agent:
    def __init__(self, config: AgentConfig, registry: CounterRegistry, public_key: PublicKey,
                 transport: Transport, seed: int | None = None, clock=None,
                 on_flush: Callable[[PartialHistogram], None] | None = None,
                 on_sample: Callable[[int, RotationUnit, KernelRecord], None] | None = None,
                 encrypt: bool = True):
        self.config = config.validate()
        self.units = registry.rotation()
        if not self.units:
            raise ValueError("counter registry is empty")
        self.pk = public_key
        self.transport = transport
        self.clock = clock or VirtualClock()
        self.on_flush = on_flush
        self.on_sample = on_sample
        self.encrypt = encrypt
        self.rng = np.random.default_rng(seed)
        self._retry_rng = random.Random(None if seed is None else seed ^ 0x5EED)
        self.family = family(config.root_seed_id)
        self.state = initial_state(config.S, seconds_to_ns(config.O), len(self.units), self.rng,
                                   config.load_factor, config.rotation, self.clock.now())
        self.acc = AccumulatorSet(config.A, seconds_to_ns(config.T), config.time_scale_ns)
        self.assembler = SnippetAssembler(config.L, config.salt_bytes)
        self.stats = AgentStats()
        self.current_hash: bytes | None = None
        self._signatures: dict[bytes, MinHashSignature] = {}
        self._pending: list[tuple[RotationUnit, KernelRecord, int]] = []
        self._i = 0
        self._deadline: int | None = None

    # -- epochs ----------------------------------------------------------------

    def _reset(self) -> None:
        self.state = reset_epoch(replace(self.state, kernel_index=self._i), self.rng, len(self.units),
                                 self.config.rotation)
        self._i = 0

    def _sync_window(self) -> None:
        """Catch up on resets and skip the idle part of the window."""
        while True:
            now = self.clock.now()
            while now >= self.state.window_end_ns:
                self._reset()
            if now < self.state.active_end_ns:
                return
            self.clock.wait_until(self.state.window_end_ns)

    # -- main loop -------------------------------------------------------------

    def process(self, rec: KernelRecord) -> None:
        self._sync_window()
        now = self.clock.now()
        if self._deadline is not None and now >= self._deadline:
            for h in self.acc.expire(now):
                self._emit(h)
            self._deadline = self.acc.next_deadline()
        snip = self.assembler.push(rec.name)
        if snip is not None:
            self._adopt(*snip.fingerprint(self.family))
        if should_sample(self.state, self._i):
            self.stats.sampled += 1
            unit = self.units[self.state.unit_index]
            if self.on_sample is not None:
                self.on_sample(self.stats.kernels, unit, rec)
            if self.current_hash is None:
                self._pending.append((unit, rec, now))
            else:
                self._fold(unit, rec, now)
        self._i += 1
        self.stats.kernels += 1
        self.clock.advance(rec.duration_ns)

    def run(self, records: Iterable[KernelRecord]) -> AgentStats:
        for rec in records:
            self.process(rec)
        self.finish()
        return self.stats

    def finish(self) -> None:
        """Application ended: announce the trailing window and flush everything."""
        snip = self.assembler.finish()
        if snip is not None:
            sh, sig = snip.fingerprint(self.family)
            if self.current_hash is None:
                self._adopt(sh, sig)
            else:
                self._announce(sh, sig)
        for h in self.acc.drain():
            self._emit(h)
        self._deadline = None

    # -- internals -------------------------------------------------------------

    def _adopt(self, sh: bytes, sig: MinHashSignature) -> None:
        self._announce(sh, sig)
        self.current_hash = sh
        pending, self._pending = self._pending, []
        for unit, rec, ts in pending:
            self._fold(unit, rec, ts)

    def _fold(self, unit: RotationUnit, rec: KernelRecord, ts: int) -> None:
        if any(c not in rec.counters for c in needed_counters(unit)):
            self.stats.missing_counter += 1
            return
        full = self.acc.fold(self.current_hash, unit, rec.counters, rec.duration_ns, ts)
        self.stats.folded += 1
        if full is not None:
            self._emit(full)
        self._deadline = self.acc.next_deadline()

    def _announce(self, sh: bytes, sig: MinHashSignature) -> None:
        self._signatures[sh] = sig
        msg = UpdateMessage(0, sh, sig, self.pk.fingerprint, 0, 0, [])
        self.stats.announces += 1
        self._send(encode_update(msg))

    def _emit(self, h: PartialHistogram) -> None:
        snapshot = h.copy()
        if self.on_flush is not None:
            self.on_flush(snapshot.copy())
        self.stats.updates += 1
        self.stats.update_times_ns.append(self.clock.now())
        if not self.encrypt:
            return
        eh = encrypt_histogram(self.pk, snapshot.snippet_hash, snapshot.counter_id, snapshot.as_ints())
        msg = UpdateMessage(snapshot.counter_id, snapshot.snippet_hash, self._signatures[snapshot.snippet_hash],
                            eh.key_fingerprint, self.pk.ciphertext_bytes, snapshot.sample_count, eh.bins)
        self._send(encode_update(msg))

    def _send(self, frame: bytes) -> None:
        send_with_retry(self.transport, frame, self.stats.delivery, self.config.max_retries,
                        rng=self._retry_rng)


def run_agent(config: AgentConfig, registry: CounterRegistry, public_key: PublicKey,
              records: Iterable[KernelRecord], transport: Transport, **kw) -> AgentStats:
    return Agent(config, registry, public_key, transport, **kw).run(records)
