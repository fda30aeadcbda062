"""Closed-form sampling coverage.

A kernel position sampled with probability 1/N per independent run is hit
at least once in u runs with probability 1 - (1 - 1/N)^u.
"""
from __future__ import annotations

import math

import numpy as np


def analytic_coverage(N: float, u: float) -> float:
    if N < 1 or u < 0:
        raise ValueError("need N >= 1 and u >= 0")
    if N == 1:
        return 1.0 if u > 0 else 0.0
    # expm1/log1p keep precision when the miss probability is tiny
    return -math.expm1(u * math.log1p(-1.0 / N))


def messages_for_coverage(kernel_count: int, samples_per_message: int, target: float = 0.99) -> int:
    """Fewest messages after which each kernel position is hit with probability >= ``target``.

    One message spreads ``samples_per_message`` samples over the app's
    positions, i.e. one independent run at interval N = k / A.
    """
    N = kernel_count / samples_per_message
    if N <= 1:
        return 1
    u = max(1, math.ceil(math.log1p(-target) / math.log1p(-1.0 / N)))
    while analytic_coverage(N, u) < target:  # guard the ceil against rounding
        u += 1
    return u


def predicted_time_to_quantile(kernel_counts, popularity, message_period_s: float, gpus: int,
                               target: float = 0.99, quantile: float = 0.975,
                               samples_per_message: int = 10_000, startup_s: float | None = None) -> float:
    """Seconds until ``quantile`` of apps are expected to reach ``target`` coverage.

    Each GPU emits one message per ``message_period_s`` after a cold start
    of ``startup_s`` (one period by default); app ``a`` receives a share
    ``popularity[a]`` of the messages.
    """
    k = np.asarray(kernel_counts)
    p = np.asarray(popularity, dtype=float)
    m = np.array([messages_for_coverage(int(x), samples_per_message, target) for x in k])
    start = message_period_s if startup_s is None else startup_s
    with np.errstate(divide="ignore"):
        t = np.where(p > 0, start + (m - 1) * message_period_s / (gpus * p), np.inf)
    return float(np.quantile(t, quantile, method="inverted_cdf"))


def message_period_s(mean_latency_ns: float, A: int, S: int, load_factor: float) -> float:
    """Virtual seconds one GPU needs to fill a partial to ``A`` samples."""
    return A * S * mean_latency_ns / 1e9 / load_factor
