"""Figures written next to the CSV exports.

Uses the object-oriented matplotlib API with the Agg canvas, so nothing
touches pyplot's global state and no display is needed.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

STYLE = {"dpi": 120}


def _figure(width: float = 6.0, height: float = 3.6) -> tuple[Figure, object]:
    fig = Figure(figsize=(width, height))
    FigureCanvasAgg(fig)
    return fig, fig.add_subplot(1, 1, 1)


def _save(fig: Figure, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=STYLE["dpi"])
    return path


def coverage_trajectory(report, path: str | Path) -> Path:
    """Mean app coverage over time, with the quantile-time marker."""
    fig, ax = _figure()
    t_h = np.asarray(report.trajectory_t_s) / 3600.0
    if len(t_h):
        ax.plot(t_h, report.mean_coverage, color="tab:blue", label="mean coverage")
        lo = report.trajectory.min(axis=1)
        ax.fill_between(t_h, lo, report.mean_coverage, color="tab:blue", alpha=0.15, label="min to mean")
    if math.isfinite(report.quantile_time_h):
        ax.axvline(report.quantile_time_h, color="tab:green", ls="--",
                   label=f"{report.config.app_quantile:.1%} of apps at target")
    ax.set_xlabel("time (h)")
    ax.set_ylabel("fraction of kernels reported")
    ax.set_ylim(0, 1.02)
    ax.legend(loc="lower right", fontsize=8)
    return _save(fig, path)


def time_to_target(report, path: str | Path) -> Path:
    """Per-app time to reach the coverage target against kernel count."""
    fig, ax = _figure()
    t = np.asarray(report.time_to_target_s) / 3600.0
    k = np.asarray(report.kernel_counts)
    ok = np.isfinite(t)
    ax.scatter(k[ok], t[ok], s=10, color="tab:blue", label="reached")
    if (~ok).any():
        top = report.end_time_s / 3600.0
        ax.scatter(k[~ok], np.full((~ok).sum(), top), s=14, marker="^", color="tab:red", label="not reached")
    if math.isfinite(report.quantile_time_h):
        ax.axhline(report.quantile_time_h, color="tab:green", ls="--")
    ax.set_xscale("log")
    ax.set_xlabel("kernels per iteration")
    ax.set_ylabel("hours to target coverage")
    ax.legend(fontsize=8)
    return _save(fig, path)


def sweep_bars(rows: Sequence[Mapping], path: str | Path) -> Path:
    fig, ax = _figure(7.0, 3.6)
    labels = [str(r["label"]) for r in rows]
    hours = [float(r["hours_to_975"]) for r in rows]
    finite = [h if math.isfinite(h) else 0.0 for h in hours]
    bars = ax.bar(range(len(rows)), finite, color="tab:blue")
    for b, h in zip(bars, hours):
        if not math.isfinite(h):
            b.set_color("tab:red")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=6)
    ax.set_ylabel("hours to quantile coverage")
    return _save(fig, path)


def breakdown_bars(rows: Sequence[Mapping], path: str | Path) -> Path:
    """Stacked utilization states per histogram."""
    fig, ax = _figure()
    states = ("both_low", "a_low_only", "b_low_only", "neither_low")
    bottom = np.zeros(len(rows))
    for s in states:
        vals = np.array([float(r[s]) for r in rows])
        ax.bar(range(len(rows)), vals, bottom=bottom, label=s)
        bottom += vals
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels([str(r["canonical"])[:8] for r in rows], rotation=60, ha="right", fontsize=6)
    ax.set_ylabel("fraction of execution time")
    ax.set_ylim(0, 1)
    ax.legend(fontsize=7, loc="upper right")
    return _save(fig, path)


def error_scatter(reports, path: str | Path) -> Path:
    """Relative error of each nonzero bin against its share of execution time."""
    fig, ax = _figure()
    for r in reports:
        nz = r.truth_fraction > 0
        ax.scatter(r.truth_fraction[nz] * 100, r.relative_error[nz] * 100, s=4, alpha=0.5, color="tab:blue")
    if reports:
        ax.axhline(reports[0].error_threshold * 100, color="tab:red", ls="--", lw=0.8)
    ax.set_xscale("log")
    ax.set_xlabel("bin share of execution time (%)")
    ax.set_ylabel("relative error (%)")
    return _save(fig, path)


def coverage_bars(rows: Sequence[Mapping], path: str | Path) -> Path:
    fig, ax = _figure()
    ax.bar(range(len(rows)), [float(r["coverage"]) for r in rows], color="tab:blue")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels([str(r["app"]) for r in rows], rotation=60, ha="right", fontsize=6)
    ax.set_ylabel("coverage")
    ax.set_ylim(0, 1.02)
    return _save(fig, path)


def latency_cdf(samples: np.ndarray, path: str | Path) -> Path:
    fig, ax = _figure()
    x = np.sort(np.asarray(samples))
    ax.plot(x, np.arange(1, len(x) + 1) / max(len(x), 1), color="tab:blue")
    ax.set_xlabel("latency (s)")
    ax.set_ylabel("CDF")
    return _save(fig, path)


def accuracy_lines(rows: Sequence[Mapping], path: str | Path) -> Path:
    fig, ax = _figure()
    L = [int(r["L"]) for r in rows]
    ax.plot(L, [float(r["snippet_accuracy"]) for r in rows], marker="o", label="snippet")
    ax.plot(L, [float(r["app_accuracy"]) for r in rows], marker="s", label="application")
    ax.set_xscale("log")
    ax.set_xlabel("snippet length L")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.02)
    ax.legend(fontsize=8)
    return _save(fig, path)
