"""Transport latency model for message-arrival events.

Latency is drawn by inverting a piecewise-linear CDF through fixed
quantile knots: 70% of messages under 2 s, 90% under 8 s, 95% under 11 s
and a tail capped at 30 s.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_KNOTS = ((0.0, 0.2), (0.70, 2.0), (0.90, 8.0), (0.95, 11.0), (1.0, 30.0))


@dataclass(frozen=True)
class TransportLatencyModel:
    enabled: bool = True
    knots: tuple = DEFAULT_KNOTS
    drop_probability: float = 0.0

    def __post_init__(self):
        q = [k[0] for k in self.knots]
        v = [k[1] for k in self.knots]
        if q[0] != 0.0 or q[-1] != 1.0 or any(b <= a for a, b in zip(q, q[1:])):
            raise ValueError("quantile knots must rise strictly from 0 to 1")
        if v[0] < 0 or any(b < a for a, b in zip(v, v[1:])):
            raise ValueError("latency knots must be non-negative and non-decreasing")
        if not 0.0 <= self.drop_probability < 1.0:
            raise ValueError("drop probability must be in [0, 1)")

    @classmethod
    def disabled(cls) -> "TransportLatencyModel":
        return cls(enabled=False)

    def quantile(self, u):
        if not self.enabled:
            return np.zeros_like(np.asarray(u, dtype=float))
        q, v = zip(*self.knots)
        return np.interp(u, q, v)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Latency in seconds; a scalar when ``size`` is None."""
        if not self.enabled:
            return 0.0 if size is None else np.zeros(size)
        u = rng.random(size)
        out = self.quantile(u)
        return float(out) if size is None else out

    def sample_ns(self, rng: np.random.Generator) -> int:
        return int(round(self.sample(rng) * 1e9))

    def dropped(self, rng: np.random.Generator) -> bool:
        return self.drop_probability > 0 and rng.random() < self.drop_probability
