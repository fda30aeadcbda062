"""Sampled-vs-full histogram error study.

Every simulated user runs an app through one report period: a sequence of
reset windows, each active for ``load_factor`` of ``O``, with the app
resuming where it paused and a fresh sampling offset per window.  Within a
window every ``S``-th kernel after the offset is sampled.  The sampled histogram is compared against the full fold of
the same kernel streams, which is computed exactly from per-position
execution counts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..designer.analytics import ErrorReport, ErrorSummary, error_report, summarize_errors
from ..histogram import DEFAULT_TIME_SCALE_NS, bin_indices, default_registry, time_weights
from .corpus import DRAM_ID, CorpusSpec, generate_corpus


@dataclass(frozen=True)
class ErrorStudySpec:
    n_apps: int = 20
    S: int = 100
    users: int = 100
    O_s: float = 600.0
    load_factor: float = 0.10
    windows_per_user: int = 144  # one day of reset windows
    seed: int = 0
    major_mass_threshold: float = 0.01
    error_threshold: float = 0.05


@dataclass
class ErrorStudy:
    reports: list
    summary: ErrorSummary
    samples: int
    kernels: int


def _app_histograms(app, spec: ErrorStudySpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    unit = default_registry()[DRAM_ID]
    k = app.kernel_count
    bins = bin_indices(unit, app.dram)
    w = time_weights(app.durations_ns, DEFAULT_TIME_SCALE_NS).astype(np.float64)
    n_run = max(1, int(round(spec.O_s * spec.load_factor * 1e9 / app.mean_latency_ns)))
    executed = np.zeros(k, dtype=np.int64)
    sampled = np.zeros(k, dtype=np.int64)
    full_w, rem = divmod(n_run, k)
    for _ in range(spec.users):
        q = int(rng.integers(k))
        offsets = rng.integers(spec.S, size=spec.windows_per_user)
        executed += full_w * spec.windows_per_user
        for R in offsets:
            # full fold: positions q .. q + n_run - 1 modulo k
            executed[(q + np.arange(rem)) % k] += 1
            sampled += np.bincount((q + np.arange(R, n_run, spec.S)) % k, minlength=k)
            q = (q + n_run) % k
    truth = np.bincount(bins, weights=w * executed, minlength=unit.bin_count)
    samp = np.bincount(bins, weights=w * sampled, minlength=unit.bin_count)
    return samp, truth


def run_error_study(spec: ErrorStudySpec | None = None) -> ErrorStudy:
    spec = spec or ErrorStudySpec()
    corpus = generate_corpus(CorpusSpec(n_apps=spec.n_apps, seed=spec.seed))
    rng = np.random.default_rng([spec.seed, 0xE77])
    reports: list[ErrorReport] = []
    samples = kernels = 0
    for app in corpus.apps:
        samp, truth = _app_histograms(app, spec, rng)
        if truth.sum() == 0:
            continue  # every kernel below the smallest time weight
        reports.append(error_report(samp.astype(np.int64), truth.astype(np.int64),
                                    spec.major_mass_threshold, spec.error_threshold))
        n_run = int(round(spec.O_s * spec.load_factor * 1e9 / app.mean_latency_ns))
        kernels += n_run * spec.users * spec.windows_per_user
        samples += n_run // spec.S * spec.users * spec.windows_per_user
    return ErrorStudy(reports, summarize_errors(reports), samples, kernels)
