"""Application fingerprinting from kernel-name streams.

A snippet is a window of up to ``L`` consecutive kernel names.  Its
fingerprint is a 100-value MinHash over the set of overlapping 8-grams, and
its exact-match key (the snippet hash) is SHA-256 over the signature's values
serialized as little-endian 64-bit words.

Hash family
-----------
Each family is identified by a 32-bit ``root_seed_id`` that travels in every
wire frame.  The id expands to a 64-bit root seed and 100 per-function seeds
via splitmix64.  An 8-gram is serialized as the UTF-8 kernel names joined by
``0x1F`` and hashed once with XXH64 under the root seed; hash function ``j``
is then ``fmix64(base ^ seed_j)`` (the MurmurHash3 finalizer, a bijection on
64-bit words).  Computing ``base`` once per window keeps the 100 functions
vectorizable.

Server-side tables
------------------
The aggregation server keeps the snippet sequence table (SST: canonical hash
-> signature) and the equivalent snippet table (EST: any hash -> canonical
hash).  Both persist as append-only record files.
"""
from __future__ import annotations

import enum
import hashlib
import hmac
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import xxhash

NUM_HASHES = 100
NGRAM = 8
DEFAULT_SNIPPET_LENGTH = 10_000
DEFAULT_TAU = 0.85
DEFAULT_FAMILY_ID = 1
SEPARATOR = b"\x1f"
SIGNATURE_BYTES = NUM_HASHES * 8
HASH_BYTES = 32

_M64 = (1 << 64) - 1


class SnippetError(ValueError):
    pass


class SnippetTooShortError(SnippetError):
    pass


class FamilyMismatchError(SnippetError):
    """Signatures from different hash families cannot be compared."""


class IntegrityError(SnippetError):
    """Snippet hash does not match its signature."""


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _M64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def _fmix64(k: np.ndarray) -> np.ndarray:
    k = k ^ (k >> np.uint64(33))
    k = k * np.uint64(0xFF51AFD7ED558CCD)
    k = k ^ (k >> np.uint64(33))
    k = k * np.uint64(0xC4CEB9FE1A85EC53)
    return k ^ (k >> np.uint64(33))


@dataclass(frozen=True)
class HashFamily:
    root_seed_id: int = DEFAULT_FAMILY_ID
    size: int = NUM_HASHES

    def __post_init__(self):
        if not 0 <= self.root_seed_id <= 0xFFFFFFFF:
            raise SnippetError("root_seed_id must fit in 32 bits")

    @property
    def root_seed(self) -> int:
        return splitmix64(0x50454E524F534500 ^ self.root_seed_id)

    @property
    def seeds(self) -> np.ndarray:
        root = self.root_seed
        return np.array([splitmix64((root + j) & _M64) for j in range(self.size)], dtype=np.uint64)

    def base_hashes(self, windows: Iterable[bytes]) -> np.ndarray:
        root = self.root_seed
        return np.fromiter((xxhash.xxh64_intdigest(w, root) for w in windows), dtype=np.uint64)

    def hash_window(self, window: bytes) -> np.ndarray:
        """All ``size`` hash values of one serialized 8-gram."""
        base = np.array([xxhash.xxh64_intdigest(window, self.root_seed)], dtype=np.uint64)
        return _fmix64(base ^ self.seeds)


_FAMILIES: dict[int, HashFamily] = {}


def family(root_seed_id: int = DEFAULT_FAMILY_ID) -> HashFamily:
    fam = _FAMILIES.get(root_seed_id)
    if fam is None:
        fam = _FAMILIES[root_seed_id] = HashFamily(root_seed_id)
    return fam


@dataclass(frozen=True, eq=False)
class MinHashSignature:
    values: np.ndarray
    family_id: int = DEFAULT_FAMILY_ID

    def __post_init__(self):
        if self.values.shape != (NUM_HASHES,) or self.values.dtype != np.uint64:
            raise SnippetError(f"signature must be {NUM_HASHES} uint64 values")

    def __eq__(self, other):
        if not isinstance(other, MinHashSignature):
            return NotImplemented
        return self.family_id == other.family_id and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.family_id, self.to_bytes()))

    def to_bytes(self) -> bytes:
        return self.values.astype("<u8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, family_id: int = DEFAULT_FAMILY_ID) -> "MinHashSignature":
        if len(data) != SIGNATURE_BYTES:
            raise SnippetError(f"signature needs {SIGNATURE_BYTES} bytes, got {len(data)}")
        return cls(np.frombuffer(data, dtype="<u8").astype(np.uint64), family_id)


# -- client side ------------------------------------------------------------

def salt_kernel_name(name: str, app_salt: bytes = b"") -> str:
    """Keyed digest of the name under the application salt; identity when unsalted."""
    if not app_salt:
        return name
    return hmac.new(app_salt, name.encode("utf-8"), hashlib.sha256).hexdigest()


def pad_snippet(kernels: Sequence[str], length: int = NGRAM) -> list[str]:
    """Repeat the terminal kernel until the snippet holds one full 8-gram."""
    kernels = list(kernels)
    if not kernels:
        raise SnippetTooShortError("empty snippet")
    if len(kernels) < length:
        kernels.extend([kernels[-1]] * (length - len(kernels)))
    return kernels


def ngrams8(kernels: Sequence[str]) -> set[tuple[str, ...]]:
    n = len(kernels)
    if n < NGRAM:
        raise SnippetTooShortError(f"snippet has {n} kernels, need at least {NGRAM}")
    return {tuple(kernels[i:i + NGRAM]) for i in range(n - NGRAM + 1)}


def window_bytes(kernels: Sequence[str]) -> set[bytes]:
    """Serialized distinct 8-grams of a snippet."""
    n = len(kernels)
    if n < NGRAM:
        raise SnippetTooShortError(f"snippet has {n} kernels, need at least {NGRAM}")
    enc = [k.encode("utf-8") for k in kernels]
    return {SEPARATOR.join(enc[i:i + NGRAM]) for i in range(n - NGRAM + 1)}


def minhash_windows(windows: Iterable[bytes], fam: HashFamily | None = None,
                    chunk: int = 8192) -> MinHashSignature:
    fam = fam or family()
    bases = fam.base_hashes(windows)
    if bases.size == 0:
        raise SnippetTooShortError("no 8-grams")
    seeds = fam.seeds
    out = np.full(fam.size, np.iinfo(np.uint64).max, dtype=np.uint64)
    for start in range(0, bases.size, chunk):
        block = _fmix64(bases[start:start + chunk, None] ^ seeds[None, :])
        np.minimum(out, block.min(axis=0), out=out)
    return MinHashSignature(out, fam.root_seed_id)


def minhash(kernels: Sequence[str], fam: HashFamily | None = None) -> MinHashSignature:
    return minhash_windows(window_bytes(kernels), fam)


def snippet_hash(sig: MinHashSignature) -> bytes:
    return hashlib.sha256(sig.to_bytes()).digest()


def estimate_jaccard(m1: MinHashSignature, m2: MinHashSignature) -> float:
    if m1.family_id != m2.family_id:
        raise FamilyMismatchError(f"family {m1.family_id} vs {m2.family_id}")
    return int(np.count_nonzero(m1.values == m2.values)) / NUM_HASHES


@dataclass(frozen=True)
class Snippet:
    kernels: tuple[str, ...]
    complete: bool

    def fingerprint(self, fam: HashFamily | None = None) -> tuple[bytes, MinHashSignature]:
        sig = minhash(pad_snippet(self.kernels), fam)
        return snippet_hash(sig), sig


class SnippetAssembler:
    """Cuts a (salted) kernel-name stream into snippets of length ``L``."""

    def __init__(self, length: int = DEFAULT_SNIPPET_LENGTH, app_salt: bytes = b""):
        if length < 1:
            raise SnippetError("snippet length must be positive")
        self.length = length
        self.app_salt = app_salt
        self._buf: list[str] = []

    def push(self, name: str) -> Snippet | None:
        self._buf.append(salt_kernel_name(name, self.app_salt))
        if len(self._buf) >= self.length:
            return self._cut(True)
        return None

    def finish(self) -> Snippet | None:
        """Application ended: emit the partial window, if any."""
        return self._cut(False) if self._buf else None

    def _cut(self, complete: bool) -> Snippet:
        snip = Snippet(tuple(self._buf), complete)
        self._buf = []
        return snip


# -- server side ------------------------------------------------------------

class Disposition(str, enum.Enum):
    EXACT = "exact"
    MATCHED = "matched"
    NEW = "new"


@dataclass(frozen=True)
class Classification:
    canonical: bytes
    disposition: Disposition
    estimate: float


_SST_MAGIC = b"SST1"
_EST_MAGIC = b"EST1"
_HEADER = struct.Struct("<4sI")


class SnippetTables:
    """SST/EST pair.  Single-owner; callers serialize mutations."""

    def __init__(self, state_dir: str | Path | None = None, family_id: int = DEFAULT_FAMILY_ID):
        self.family_id = family_id
        self.sst: dict[bytes, MinHashSignature] = {}
        self.est: dict[bytes, bytes] = {}
        self._order: list[bytes] = []
        self._matrix = np.zeros((16, NUM_HASHES), dtype=np.uint64)
        self._sst_file = self._est_file = None
        if state_dir is not None:
            self._open(Path(state_dir))

    # persistence
    def _open(self, state_dir: Path) -> None:
        state_dir.mkdir(parents=True, exist_ok=True)
        sst_path, est_path = state_dir / "sst.log", state_dir / "est.log"
        self._replay(sst_path, _SST_MAGIC, HASH_BYTES + SIGNATURE_BYTES, self._load_sst)
        self._replay(est_path, _EST_MAGIC, 2 * HASH_BYTES, self._load_est)
        self._sst_file = self._append_handle(sst_path, _SST_MAGIC)
        self._est_file = self._append_handle(est_path, _EST_MAGIC)
        self.check_integrity()

    def _replay(self, path: Path, magic: bytes, rec: int, load) -> None:
        if not path.exists():
            return
        data = path.read_bytes()
        if len(data) < _HEADER.size:
            return
        got, fam = _HEADER.unpack_from(data)
        if got != magic:
            raise SnippetError(f"{path}: bad magic")
        if fam != self.family_id:
            raise FamilyMismatchError(f"{path}: family {fam}, tables use {self.family_id}")
        body = data[_HEADER.size:]
        usable = len(body) - len(body) % rec  # torn trailing record from a crash
        for off in range(0, usable, rec):
            load(body[off:off + rec])
        if usable != len(body):
            with open(path, "r+b") as f:
                f.truncate(_HEADER.size + usable)

    def _load_sst(self, rec: bytes) -> None:
        self._insert_canonical(rec[:HASH_BYTES],
                               MinHashSignature.from_bytes(rec[HASH_BYTES:], self.family_id))

    def _load_est(self, rec: bytes) -> None:
        self.est[rec[:HASH_BYTES]] = rec[HASH_BYTES:]

    def _append_handle(self, path: Path, magic: bytes):
        fresh = not path.exists() or path.stat().st_size == 0
        f = open(path, "ab")
        if fresh:
            f.write(_HEADER.pack(magic, self.family_id))
            f.flush()
        return f

    def close(self) -> None:
        for f in (self._sst_file, self._est_file):
            if f is not None:
                f.close()
        self._sst_file = self._est_file = None

    def _persist(self, f, payload: bytes) -> None:
        if f is not None:
            f.write(payload)
            f.flush()
            os.fsync(f.fileno())

    # mutation
    def _insert_canonical(self, sh: bytes, sig: MinHashSignature) -> None:
        n = len(self._order)
        if n == len(self._matrix):
            grown = np.zeros((2 * n, NUM_HASHES), dtype=np.uint64)
            grown[:n] = self._matrix
            self._matrix = grown
        self._matrix[n] = sig.values
        self._order.append(sh)
        self.sst[sh] = sig

    def _add_canonical(self, sh: bytes, sig: MinHashSignature) -> None:
        self._insert_canonical(sh, sig)
        self._persist(self._sst_file, sh + sig.to_bytes())
        self._add_equivalent(sh, sh)

    def _add_equivalent(self, sh: bytes, canonical: bytes) -> None:
        self.est[sh] = canonical
        self._persist(self._est_file, sh + canonical)

    def best_match(self, sig: MinHashSignature) -> tuple[bytes | None, float]:
        """Highest-estimate canonical; ties go to the smallest hash."""
        n = len(self._order)
        if n == 0:
            return None, 0.0
        matches = np.count_nonzero(self._matrix[:n] == sig.values[None, :], axis=1)
        top = int(matches.max())
        best = min(self._order[i] for i in np.flatnonzero(matches == top))
        return best, top / NUM_HASHES

    def classify(self, sh: bytes, sig: MinHashSignature, tau: float = DEFAULT_TAU) -> Classification:
        if not 0.0 < tau <= 1.0:
            raise SnippetError(f"tau must be in (0, 1], got {tau}")
        if sig.family_id != self.family_id:
            raise FamilyMismatchError(f"signature family {sig.family_id}, tables use {self.family_id}")
        if snippet_hash(sig) != sh:
            raise IntegrityError("snippet hash does not match min-hash signature")
        canonical = self.est.get(sh)
        if canonical is not None:
            return Classification(canonical, Disposition.EXACT, 1.0)
        best, score = self.best_match(sig)
        if best is not None and score >= tau:
            self._add_equivalent(sh, best)
            return Classification(best, Disposition.MATCHED, score)
        self._add_canonical(sh, sig)
        return Classification(sh, Disposition.NEW, 1.0)

    def check_integrity(self) -> None:
        for sh in self.sst:
            if self.est.get(sh) != sh:
                raise IntegrityError(f"canonical {sh.hex()[:16]} does not map to itself")
        for sh, canon in self.est.items():
            if canon not in self.sst:
                raise IntegrityError(f"EST entry {sh.hex()[:16]} points at unknown canonical")

    def snapshot(self) -> tuple[dict[bytes, bytes], dict[bytes, bytes]]:
        """Comparable copy of both tables (signatures as bytes)."""
        return ({k: v.to_bytes() for k, v in self.sst.items()}, dict(self.est))

    def __len__(self) -> int:
        return len(self.sst)
