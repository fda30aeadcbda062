"""Synthetic application corpus.

Kernel counts per application iteration follow a piecewise log-uniform law:
half the apps log-uniform on [14, 870], half on [870, 128838], giving a
median of 870 within the observed range.  Kernel latencies follow a
truncated power law on [3, 521] us whose exponent is solved so the mean is
30 us.  Names come from a pool of 10^4 kernel names with Zipf popularity,
so common kernels recur across applications.
"""
from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..designer.analytics import AppRegistry
from ..snippets import DEFAULT_SNIPPET_LENGTH, family, minhash, pad_snippet, snippet_hash

DRAM_ID = 1
TENSOR_ID = 2


@dataclass(frozen=True)
class CorpusSpec:
    n_apps: int = 200
    seed: int = 0
    pool_size: int = 10_000
    min_kernels: int = 14
    median_kernels: int = 870
    max_kernels: int = 128_838
    lat_min_us: float = 3.0
    lat_max_us: float = 521.0
    lat_mean_us: float = 30.0


# -- latency law ---------------------------------------------------------------

def _powerlaw_mean(alpha: float, lo: float, hi: float) -> float:
    if abs(alpha - 1) < 1e-12:
        return (hi - lo) / np.log(hi / lo)
    if abs(alpha - 2) < 1e-12:
        return np.log(hi / lo) / (1 / lo - 1 / hi)
    num = (hi ** (2 - alpha) - lo ** (2 - alpha)) / (2 - alpha)
    den = (hi ** (1 - alpha) - lo ** (1 - alpha)) / (1 - alpha)
    return num / den


def calibrate_alpha(mean: float, lo: float, hi: float, tol: float = 1e-10) -> float:
    """Exponent of p(x) ~ x^-alpha on [lo, hi] with the requested mean (bisection)."""
    a, b = 0.0, 10.0  # mean decreases monotonically in alpha
    if not _powerlaw_mean(b, lo, hi) < mean < _powerlaw_mean(a, lo, hi):
        raise ValueError("mean outside the attainable range")
    while b - a > tol:
        mid = (a + b) / 2
        if _powerlaw_mean(mid, lo, hi) > mean:
            a = mid
        else:
            b = mid
    return (a + b) / 2


def sample_powerlaw(rng: np.random.Generator, n: int, alpha: float, lo: float, hi: float) -> np.ndarray:
    u = rng.random(n)
    if abs(alpha - 1) < 1e-12:
        return lo * (hi / lo) ** u
    e = 1 - alpha
    return (lo ** e + u * (hi ** e - lo ** e)) ** (1 / e)


def sample_kernel_counts(rng: np.random.Generator, n: int, spec: CorpusSpec) -> np.ndarray:
    upper = rng.permutation(n) < n // 2  # exact half above the median
    lo = np.where(upper, spec.median_kernels, spec.min_kernels)
    hi = np.where(upper, spec.max_kernels, spec.median_kernels)
    k = np.exp(np.log(lo) + rng.random(n) * (np.log(hi) - np.log(lo)))
    return np.clip(np.rint(k), spec.min_kernels, spec.max_kernels).astype(np.int64)


def kernel_name_pool(size: int, seed: int) -> list[str]:
    stems = ("gemm", "conv2d", "elementwise", "reduce", "softmax", "layernorm", "attention",
             "transpose", "embedding", "dropout", "batchnorm", "pool", "scatter", "gather", "copy")
    rng = np.random.default_rng([seed, 0xC0FFEE])
    picks = rng.integers(len(stems), size=size)
    return [f"{stems[s]}_kernel_{i:05d}" for i, s in enumerate(picks)]


@dataclass
class App:
    name: str
    kernel_ids: np.ndarray    # indices into the name pool, one per static kernel
    durations_ns: np.ndarray  # int64 per static kernel
    dram: np.ndarray          # percent of peak per static kernel
    tensor: np.ndarray

    @property
    def kernel_count(self) -> int:
        return len(self.kernel_ids)

    @cached_property
    def mean_latency_ns(self) -> float:
        return float(self.durations_ns.mean())

    @cached_property
    def period_ns(self) -> int:
        return int(self.durations_ns.sum())


@dataclass
class Corpus:
    spec: CorpusSpec
    apps: list
    pool: list = field(repr=False)
    alpha: float = 0.0

    def names(self, app: App, start: int, length: int) -> list[str]:
        """Kernel names of ``length`` consecutive invocations from stream position ``start``."""
        idx = app.kernel_ids[(start + np.arange(length)) % app.kernel_count]
        return [self.pool[i] for i in idx]

    def fingerprint(self, app: App, length: int = DEFAULT_SNIPPET_LENGTH, root_seed_id: int = 1):
        """Hash and signature of the app's first snippet (its first ``length`` invocations)."""
        sig = minhash(pad_snippet(self.names(app, 0, length)), family(root_seed_id))
        return snippet_hash(sig), sig

    def canonical_hash(self, app: App, length: int = DEFAULT_SNIPPET_LENGTH) -> bytes:
        return self.fingerprint(app, length)[0]

    def registry(self, length: int = DEFAULT_SNIPPET_LENGTH) -> AppRegistry:
        reg = AppRegistry()
        for app in self.apps:
            reg.add(app.name, app.kernel_count, {self.canonical_hash(app, length)})
        return reg

    @property
    def mean_latency_us(self) -> float:
        total = sum(int(a.durations_ns.sum()) for a in self.apps)
        count = sum(a.kernel_count for a in self.apps)
        return total / count / 1000

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        for app in self.apps:
            buf.write(app.name.encode() + b"\0")
            for arr in (app.kernel_ids, app.durations_ns, app.dram, app.tensor):
                buf.write(np.ascontiguousarray(arr).tobytes())
        return buf.getvalue()

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def subset(self, n: int) -> "Corpus":
        """The first ``n`` apps; nested subsets keep app-count comparisons paired."""
        if not 1 <= n <= len(self.apps):
            raise ValueError(f"subset size {n} outside [1, {len(self.apps)}]")
        return Corpus(self.spec, self.apps[:n], self.pool, self.alpha)


def generate_corpus(spec: CorpusSpec | None = None, **kw) -> Corpus:
    spec = spec or CorpusSpec(**kw)
    rng = np.random.default_rng([spec.seed, 0xA11])
    alpha = calibrate_alpha(spec.lat_mean_us, spec.lat_min_us, spec.lat_max_us)
    pool = kernel_name_pool(spec.pool_size, spec.seed)
    # Zipf-like popularity over the pool
    pop = 1.0 / np.arange(1, spec.pool_size + 1) ** 0.8
    pop /= pop.sum()
    counts = sample_kernel_counts(rng, spec.n_apps, spec)
    apps = []
    for i, k in enumerate(counts):
        ids = rng.choice(spec.pool_size, size=int(k), p=pop)
        lat_us = sample_powerlaw(rng, int(k), alpha, spec.lat_min_us, spec.lat_max_us)
        durations = np.maximum(np.rint(lat_us * 1000), 1).astype(np.int64)
        # utilization profile: per-app beta shapes, fixed per static kernel
        a_d, b_d, a_t, b_t = rng.uniform(0.5, 4.0, size=4)
        dram = np.round(rng.beta(a_d, b_d, int(k)) * 100, 3)
        tensor = np.round(rng.beta(a_t, b_t, int(k)) * 100, 3)
        apps.append(App(f"app{i:04d}", ids.astype(np.int32), durations, dram, tensor))
    return Corpus(spec, apps, pool, alpha)
