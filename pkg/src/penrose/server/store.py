"""Aggregated snippet histograms held by the untrusted server.

The server sees snippet hashes, min-hash signatures, counter ids and sample
counts in the clear and histogram bins only as Paillier ciphertexts.  It
holds the public key (to check fingerprints and re-randomize) and nothing
that can decrypt.
"""
from __future__ import annotations

import threading
import time
from collections import Counter
from dataclasses import dataclass, field

from ..crypto.public import PublicKey
from ..snippets import IntegrityError, SnippetTables
from ..wire import (PERIOD_CURRENT, PERIOD_LATEST_SEALED, ProtocolError, ReportEntry, ReportMessage,
                    decode_update)

WINDOWED = "windowed"
CUMULATIVE = "cumulative"


@dataclass
class AshEntry:
    bins: list | None = None
    contribution_count: int = 0
    last_update: float = 0.0
    retired: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


@dataclass(frozen=True)
class Outcome:
    accepted: bool
    reason: str

    def __bool__(self) -> bool:
        return self.accepted


class AshStore:
    def __init__(self, public_key: PublicKey, tables: SnippetTables | None = None, tau: float = 0.85,
                 mode: str = WINDOWED, clock=time.time):
        if mode not in (WINDOWED, CUMULATIVE):
            raise ValueError(f"unknown report mode {mode!r}")
        self.pk = public_key
        self.tables = tables if tables is not None else SnippetTables()
        self.tau = tau
        self.mode = mode
        self.clock = clock
        self.period_id = 0
        self.sealed: dict[int, ReportMessage] = {}
        self._entries: dict[tuple[bytes, int], AshEntry] = {}
        self._map_lock = threading.Lock()
        self._tables_lock = threading.Lock()
        self._stats_lock = threading.Lock()
        self.accepted = 0
        self.folds = 0
        self.announces = 0
        self.dropped: Counter = Counter()
        self.dispositions: Counter = Counter()

    # -- ingest ----------------------------------------------------------------

    def record_drop(self, reason: str) -> Outcome:
        with self._stats_lock:
            self.dropped[reason] += 1
        return Outcome(False, reason)

    def handle_update(self, frame: bytes) -> Outcome:
        """Decode, classify and fold one update.  Never raises on hostile input."""
        try:
            msg = decode_update(frame)
        except ProtocolError as exc:
            return self.record_drop(exc.code.value)
        if msg.root_seed_id != self.tables.family_id:
            return self.record_drop("family_mismatch")
        if not msg.is_announce:
            if msg.key_fingerprint != self.pk.fingerprint:
                return self.record_drop("key_mismatch")
            if msg.ct_width != self.pk.ciphertext_bytes:
                return self.record_drop("bad_ct_width")
            n2 = self.pk.n_squared
            if any(not 0 < c < n2 for c in msg.bins):
                return self.record_drop("bad_ciphertext")
        try:
            with self._tables_lock:
                cls = self.tables.classify(msg.snippet_hash, msg.minhash, self.tau)
        except IntegrityError:
            return self.record_drop("integrity")
        with self._stats_lock:
            self.dispositions[cls.disposition.value] += 1
        if msg.is_announce:
            with self._stats_lock:
                self.accepted += 1
                self.announces += 1
            return Outcome(True, "announce")
        return self._fold((cls.canonical, msg.counter_id), msg.bins)

    def _fold(self, key: tuple[bytes, int], bins: list) -> Outcome:
        n2 = self.pk.n_squared
        while True:
            with self._map_lock:
                entry = self._entries.get(key)
                if entry is None:
                    entry = self._entries[key] = AshEntry()
            with entry.lock:
                if entry.retired:
                    continue  # sealed under us; fold into the next period
                if entry.bins is None:
                    entry.bins = list(bins)
                elif len(entry.bins) != len(bins):
                    return self.record_drop("dimension_mismatch")
                else:
                    entry.bins = [x * y % n2 for x, y in zip(entry.bins, bins)]
                entry.contribution_count += 1
                entry.last_update = self.clock()
                break
        with self._stats_lock:
            self.accepted += 1
            self.folds += 1
        return Outcome(True, "folded")

    # -- reports ---------------------------------------------------------------

    def _build(self, period_id: int, entries: dict) -> ReportMessage:
        out = []
        for (sh, cid), entry in sorted(entries.items()):
            if not entry.contribution_count:
                continue
            bins = entry.bins
            if entry.contribution_count == 1:
                # a lone contribution would otherwise equal the client's frame bit for bit
                bins = [self.pk.rerandomize(c) for c in bins]
            out.append(ReportEntry(sh, cid, entry.contribution_count, [int(c) for c in bins]))
        return ReportMessage(period_id, self.pk.fingerprint, self.pk.ciphertext_bytes, out)

    def _snapshot(self, retire: bool) -> dict:
        with self._map_lock:
            current = self._entries
            if retire:
                self._entries = {}
            else:
                current = dict(current)
        snap = {}
        for key, entry in current.items():
            with entry.lock:
                if retire:
                    entry.retired = True
                snap[key] = AshEntry(list(entry.bins) if entry.bins else None, entry.contribution_count,
                                     entry.last_update)
        return snap

    def emit_report(self) -> ReportMessage:
        """Seal the current period.  Windowed mode starts the next period empty."""
        report = self._build(self.period_id, self._snapshot(retire=self.mode == WINDOWED))
        self.sealed[self.period_id] = report
        self.period_id += 1
        return report

    def current_report(self) -> ReportMessage:
        return self._build(self.period_id, self._snapshot(retire=False))

    def report_for(self, period_id: int) -> ReportMessage:
        if period_id == PERIOD_CURRENT:
            return self.current_report()
        if period_id == PERIOD_LATEST_SEALED:
            if not self.sealed:
                return ReportMessage(period_id, self.pk.fingerprint, self.pk.ciphertext_bytes, [])
            return self.sealed[max(self.sealed)]
        if period_id in self.sealed:
            return self.sealed[period_id]
        return ReportMessage(period_id, self.pk.fingerprint, self.pk.ciphertext_bytes, [])

    def __len__(self) -> int:
        return sum(1 for e in self._entries.values() if e.contribution_count)

    def contribution_counts(self) -> dict:
        with self._map_lock:
            return {k: e.contribution_count for k, e in self._entries.items() if e.contribution_count}

    def metrics(self) -> dict:
        with self._stats_lock:
            out = {"accepted": self.accepted, "folds": self.folds, "announces": self.announces,
                   "period_id": self.period_id, "canonicals": len(self.tables),
                   "ash_entries": len(self)}
            out.update({f"dropped.{k}": v for k, v in sorted(self.dropped.items())})
            out["dropped.total"] = sum(self.dropped.values())
            out.update({f"disposition.{k}": v for k, v in sorted(self.dispositions.items())})
        return out
