"""Analyses over decrypted aggregate histograms.

* utilization-state breakdown of a 32x32 counter-pair histogram
* per-application coverage (simulation only: needs the omniscient registry)
* sampled-vs-ground-truth error of normalized histograms
* CSV/JSON export with fixed column schemas
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..histogram import PAIR_BINS, PAIR_LEVELS

DEFAULT_LOW_THRESHOLD = Fraction(1, 3)


class AnalyticsError(ValueError):
    pass


class EmptyHistogramError(AnalyticsError):
    """Zero total mass: fractions are undefined."""


@dataclass(frozen=True)
class DecryptedASH:
    canonical: bytes
    counter_id: int
    bins: tuple
    contribution_count: int
    period_id: int

    @property
    def mass(self) -> int:
        return sum(self.bins)

    def to_dict(self) -> dict:
        return {"canonical": self.canonical.hex(), "counter_id": self.counter_id, "bins": list(self.bins),
                "contribution_count": self.contribution_count, "period_id": self.period_id}

    @classmethod
    def from_dict(cls, d: Mapping) -> "DecryptedASH":
        return cls(bytes.fromhex(d["canonical"]), int(d["counter_id"]), tuple(int(b) for b in d["bins"]),
                   int(d["contribution_count"]), int(d["period_id"]))


# -- utilization breakdown ------------------------------------------------------

@dataclass(frozen=True)
class UtilizationBreakdown:
    both_low: Fraction
    a_low_only: Fraction
    b_low_only: Fraction
    neither_low: Fraction
    threshold: Fraction
    low_levels: int
    total_mass: int

    def as_floats(self) -> dict:
        return {k: float(getattr(self, k)) for k in ("both_low", "a_low_only", "b_low_only", "neither_low")}


def low_level_cutoff(threshold: float | Fraction, levels: int = PAIR_LEVELS) -> int:
    """Highest grid level counted as low: floor(levels * threshold)."""
    t = Fraction(threshold).limit_denominator(1000)
    if not 0 <= t <= 1:
        raise AnalyticsError(f"threshold must be in [0, 1], got {threshold}")
    return min(math.floor(levels * t), levels - 1)


def utilization_breakdown(ash: DecryptedASH | Sequence[int],
                          threshold: float | Fraction = DEFAULT_LOW_THRESHOLD) -> UtilizationBreakdown:
    bins = ash.bins if isinstance(ash, DecryptedASH) else ash
    if len(bins) != PAIR_BINS:
        raise AnalyticsError(f"breakdown needs a {PAIR_BINS}-bin pair histogram, got {len(bins)}")
    cut = low_level_cutoff(threshold)
    mass = [[0, 0], [0, 0]]  # [a_low][b_low] with index 0 = low
    for idx, v in enumerate(bins):
        row, col = divmod(idx, PAIR_LEVELS)
        mass[row > cut][col > cut] += int(v)
    total = sum(map(sum, mass))
    if total == 0:
        raise EmptyHistogramError("histogram has no mass")
    return UtilizationBreakdown(Fraction(mass[0][0], total), Fraction(mass[0][1], total),
                                Fraction(mass[1][0], total), Fraction(mass[1][1], total),
                                Fraction(threshold).limit_denominator(1000), cut + 1, total)


# -- coverage -------------------------------------------------------------------

@dataclass
class AppTruth:
    name: str
    kernel_count: int
    snippets: set = field(default_factory=set)


@dataclass
class AppRegistry:
    """Ground truth the simulation harness knows: apps, their snippets, their size."""

    apps: dict = field(default_factory=dict)

    def add(self, name: str, kernel_count: int, snippets: Iterable[bytes]) -> None:
        self.apps[name] = AppTruth(name, kernel_count, set(snippets))

    def app_of(self) -> dict:
        return {sh: app.name for app in self.apps.values() for sh in app.snippets}

    def dumps(self) -> str:
        return json.dumps({"apps": {a.name: {"kernel_count": a.kernel_count,
                                             "snippets": sorted(s.hex() for s in a.snippets)}
                                    for a in sorted(self.apps.values(), key=lambda a: a.name)}},
                          indent=1, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "AppRegistry":
        reg = cls()
        for name, d in json.loads(text)["apps"].items():
            reg.add(name, int(d["kernel_count"]), (bytes.fromhex(h) for h in d["snippets"]))
        return reg


@dataclass
class CoverageReport:
    coverage: dict
    unknown_canonicals: list


def coverage_report(ashes: Iterable[DecryptedASH], registry: AppRegistry,
                    observed_positions: Mapping[bytes, Iterable[int]]) -> CoverageReport:
    """Fraction of each app's static kernel positions with at least one reported sample.

    ``observed_positions`` maps a canonical hash to the kernel positions
    sampled by the updates folded into it; only the simulation harness can
    supply this.
    """
    owner = registry.app_of()
    covered: dict[str, set] = {name: set() for name in registry.apps}
    unknown = set()
    for ash in ashes:
        if ash.contribution_count == 0:
            continue
        app = owner.get(ash.canonical)
        if app is None:
            unknown.add(ash.canonical)
            continue
        covered[app].update(observed_positions.get(ash.canonical, ()))
    cov = {name: (len(covered[name]) / a.kernel_count if a.kernel_count else 0.0)
           for name, a in registry.apps.items()}
    return CoverageReport(cov, sorted(unknown))


# -- error study ----------------------------------------------------------------

@dataclass
class ErrorReport:
    truth_fraction: np.ndarray
    sampled_fraction: np.ndarray
    relative_error: np.ndarray  # NaN where truth is zero
    zero_truth_bins: int
    major_mass_threshold: float
    error_threshold: float

    @property
    def major(self) -> np.ndarray:
        return self.truth_fraction > self.major_mass_threshold

    @property
    def weighted_mean_major(self) -> float:
        m = self.major
        w = self.truth_fraction[m]
        return float(np.sum(w * self.relative_error[m]) / np.sum(w)) if w.sum() > 0 else 0.0

    @property
    def mass_over_error_threshold(self) -> float:
        nz = self.truth_fraction > 0
        bad = nz & (self.relative_error > self.error_threshold)
        return float(self.truth_fraction[bad].sum())

    @property
    def mean_error(self) -> float:
        nz = self.truth_fraction > 0
        return float(np.mean(self.relative_error[nz])) if nz.any() else 0.0


def _normalize(v: Sequence[int]) -> np.ndarray:
    arr = np.asarray([float(x) for x in v])
    total = arr.sum()
    if total <= 0:
        raise EmptyHistogramError("histogram has no mass")
    return arr / total


def error_report(sampled: Sequence[int], truth: Sequence[int], major_mass_threshold: float = 0.01,
                 error_threshold: float = 0.05) -> ErrorReport:
    if len(sampled) != len(truth):
        raise AnalyticsError("sampled and truth histograms differ in length")
    t, s = _normalize(truth), _normalize(sampled)
    rel = np.full(len(t), np.nan)
    nz = t > 0
    rel[nz] = np.abs(s[nz] - t[nz]) / t[nz]
    return ErrorReport(t, s, rel, int((~nz).sum()), major_mass_threshold, error_threshold)


@dataclass
class ErrorSummary:
    weighted_mean_major: float
    mass_over_error_threshold: float
    mean_error: float
    points: int
    zero_truth_bins: int


def summarize_errors(reports: Sequence[ErrorReport]) -> ErrorSummary:
    """Pool per-histogram reports, each histogram weighted equally."""
    if not reports:
        raise AnalyticsError("no error reports")
    k = len(reports)
    w = np.concatenate([r.truth_fraction / k for r in reports])
    e = np.concatenate([r.relative_error for r in reports])
    major = np.concatenate([r.major for r in reports])
    nz = w > 0
    thr = reports[0].error_threshold
    return ErrorSummary(
        weighted_mean_major=float(np.sum(w[major] * e[major]) / np.sum(w[major])) if major.any() else 0.0,
        mass_over_error_threshold=float(w[nz & (e > thr)].sum()),
        mean_error=float(np.mean(e[nz])) if nz.any() else 0.0,
        points=int(nz.sum()),
        zero_truth_bins=sum(r.zero_truth_bins for r in reports),
    )


# -- export ---------------------------------------------------------------------

SCHEMAS: dict[str, tuple[str, ...]] = {
    "ash": ("period_id", "canonical", "counter_id", "contribution_count", "mass", "bins"),
    "breakdown": ("period_id", "canonical", "counter_id", "total_mass", "both_low", "a_low_only",
                  "b_low_only", "neither_low"),
    "coverage": ("app", "kernel_count", "coverage"),
    "error": ("histogram", "bin", "truth_fraction", "sampled_fraction", "relative_error"),
    "trajectory": ("time_h", "app", "coverage"),
    "sweep": ("label", "gpus", "apps", "distribution", "seed", "hours_to_975", "messages", "ingress_per_s"),
    "latency": ("quantile", "latency_s"),
    "accuracy": ("L", "snippet_accuracy", "app_accuracy", "mismatches", "snippets"),
}


def _cell(v):
    if isinstance(v, bytes):
        return v.hex()
    if isinstance(v, Fraction):
        return repr(float(v))
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    if isinstance(v, (list, tuple)):
        return " ".join(str(x) for x in v)
    return v


def export_analytics(path: str | Path, schema: str, rows: Iterable[Mapping]) -> int:
    """Write rows under a named schema; ``.json`` suffix selects JSON, else CSV."""
    if schema not in SCHEMAS:
        raise AnalyticsError(f"unknown schema {schema!r}")
    cols = SCHEMAS[schema]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    clean = [{c: _cell(r.get(c, "")) for c in cols} for r in rows]
    if path.suffix == ".json":
        path.write_text(json.dumps({"schema": schema, "columns": list(cols), "rows": clean}, indent=1) + "\n")
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
            w.writeheader()
            w.writerows(clean)
    return len(clean)


def read_export(path: str | Path) -> list[dict]:
    path = Path(path)
    if path.suffix == ".json":
        return json.loads(path.read_text())["rows"]
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def breakdown_rows(ashes: Iterable[DecryptedASH], threshold=DEFAULT_LOW_THRESHOLD) -> list[dict]:
    rows = []
    for ash in ashes:
        if len(ash.bins) != PAIR_BINS or ash.mass == 0:
            continue
        b = utilization_breakdown(ash, threshold)
        rows.append({"period_id": ash.period_id, "canonical": ash.canonical, "counter_id": ash.counter_id,
                     "total_mass": b.total_mass, **b.as_floats()})
    return rows


def ash_rows(ashes: Iterable[DecryptedASH]) -> list[dict]:
    return [{"period_id": a.period_id, "canonical": a.canonical, "counter_id": a.counter_id,
             "contribution_count": a.contribution_count, "mass": a.mass, "bins": a.bins} for a in ashes]

