"""Worst-case plaintext bound for an aggregated histogram bin.

Within one report period ``delta`` a single client can push at most
``ceil(delta / min_period)`` updates, and each update's bin holds at most
``A * w_max``.  Summed over ``G`` clients::

    bound = G * ceil(delta / min_period) * A * w_max

Configurations whose bound reaches 2^63 (or the key modulus) are refused.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from ..histogram import MAX_TIME_WEIGHT

LIMIT = 1 << 63


class OverflowConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BoundInputs:
    gpus: int
    aggregation_threshold: int
    report_interval_s: float
    min_message_period_s: float
    max_weight: int = MAX_TIME_WEIGHT
    cumulative_periods: int = 1

    def __post_init__(self):
        for name in ("gpus", "aggregation_threshold", "max_weight", "cumulative_periods"):
            if getattr(self, name) < 1:
                raise OverflowConfigError(f"{name} must be >= 1")
        if not (self.report_interval_s > 0 and self.min_message_period_s > 0):
            raise OverflowConfigError("intervals must be positive")


def messages_per_period(report_interval_s: float, min_message_period_s: float) -> int:
    """Most updates one client can emit within a period of the given length."""
    return math.ceil(report_interval_s / min_message_period_s)


def overflow_bound(b: BoundInputs) -> int:
    per_client = messages_per_period(b.report_interval_s * b.cumulative_periods, b.min_message_period_s)
    return b.gpus * per_client * b.aggregation_threshold * b.max_weight


def check_overflow(b: BoundInputs, modulus: int | None = None) -> int:
    bound = overflow_bound(b)
    if bound >= LIMIT:
        raise OverflowConfigError(f"worst-case bin {bound} reaches 2^63")
    if modulus is not None and bound >= modulus:
        raise OverflowConfigError(f"worst-case bin {bound} reaches the key modulus")
    return bound
