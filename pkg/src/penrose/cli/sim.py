"""penrose-sim: fleet simulations, sweeps and the offline studies."""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .. import plots
from ..config import ConfigError
from ..crypto.bounds import OverflowConfigError
from ..designer.analytics import export_analytics
from ..sim.accuracy import AccuracySpec, snippet_accuracy
from ..sim.engine import SimConfig, SimConfigError, run_sim
from ..sim.errors import ErrorStudySpec, run_error_study
from ..sim.latency import TransportLatencyModel
from ..sim.sweep import load_grid, sweep, sweep_rows
from ._common import fail, setup_logging


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="penrose-sim", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="one simulation")
    r.add_argument("--config", help="key = value file mirroring SimConfig")
    r.add_argument("--seed", type=int, help="overrides the config seed")
    r.add_argument("--out", required=True, help="output directory")

    s = sub.add_parser("sweep", help="a grid of simulations")
    s.add_argument("--grid", required=True, help="grid file with [base] and [grid] sections")
    s.add_argument("--out", required=True, help="CSV path; a PNG is written beside it")
    s.add_argument("--workers", type=int, default=1)

    a = sub.add_parser("accuracy", help="snippet classification accuracy across L")
    a.add_argument("--lengths", default="500,1000,5000,10000")
    a.add_argument("--apps", type=int, default=50)
    a.add_argument("--snippets", type=int, default=50)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", required=True)

    e = sub.add_parser("errors", help="sampled-vs-full histogram error study")
    e.add_argument("--apps", type=int, default=20)
    e.add_argument("--users", type=int, default=100)
    e.add_argument("--S", type=int, default=100)
    e.add_argument("--windows", type=int, default=144, help="reset windows per user")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)

    lat = sub.add_parser("latency", help="quantiles of the transport latency model")
    lat.add_argument("--draws", type=int, default=100_000)
    lat.add_argument("--seed", type=int, default=0)
    lat.add_argument("--out", required=True)
    return p


def _finite(x: float):
    return x if math.isfinite(x) else None


def cmd_run(args) -> int:
    cfg = SimConfig.load(args.config) if args.config else SimConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    rep = run_sim(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    export_analytics(out / "trajectory.csv", "trajectory", rep.trajectory_rows())
    export_analytics(out / "coverage.csv", "coverage", rep.coverage_rows())
    plots.coverage_trajectory(rep, out / "coverage.png")
    plots.time_to_target(rep, out / "time_to_target.png")
    summary = {"quantile_time_h": _finite(rep.quantile_time_h), "end_time_h": rep.end_time_s / 3600,
               "messages_emitted": rep.messages_emitted, "messages_arrived": rep.messages_arrived,
               "messages_dropped": rep.messages_dropped, "messages_in_flight": rep.messages_in_flight,
               "timeouts": rep.timeouts, "apps_reached": int(np.isfinite(rep.time_to_target_s).sum()),
               "corpus_digest": rep.corpus_digest, "report_digest": rep.digest()}
    (out / "summary.json").write_text(json.dumps(summary, indent=1) + "\n")
    (out / "config.ini").write_text(cfg.dumps())
    print(json.dumps(summary))
    return 0


def cmd_sweep(args) -> int:
    rows = sweep_rows(sweep(load_grid(args.grid), args.workers))
    out = Path(args.out)
    export_analytics(out, "sweep", rows)
    plots.sweep_bars(rows, out.with_suffix(".png"))
    for r in rows:
        print(f"{r['label']:<50} {r['hours_to_975']:>9.2f} h  {r['messages']} msgs")
    return 0


def cmd_accuracy(args) -> int:
    spec = AccuracySpec(n_apps=args.apps, snippets_per_app=args.snippets, seed=args.seed)
    rows = []
    for L in (int(x) for x in args.lengths.split(",")):
        r = snippet_accuracy(spec, L)
        rows.append({"L": L, "snippet_accuracy": r.snippet_accuracy, "app_accuracy": r.app_accuracy,
                     "mismatches": r.mismatches, "snippets": r.snippets})
        print(f"L={L:<6} snippet {r.snippet_accuracy:.4f}  app {r.app_accuracy:.4f}")
    out = Path(args.out)
    export_analytics(out, "accuracy", rows)
    plots.accuracy_lines(rows, out.with_suffix(".png"))
    return 0


def cmd_errors(args) -> int:
    study = run_error_study(ErrorStudySpec(n_apps=args.apps, users=args.users, S=args.S,
                                           windows_per_user=args.windows, seed=args.seed))
    rows = [{"histogram": h, "bin": i, "truth_fraction": float(t), "sampled_fraction": float(s),
             "relative_error": float(e)}
            for h, r in enumerate(study.reports)
            for i, (t, s, e) in enumerate(zip(r.truth_fraction, r.sampled_fraction, r.relative_error))]
    out = Path(args.out)
    export_analytics(out, "error", rows)
    plots.error_scatter(study.reports, out.with_suffix(".png"))
    s = study.summary
    print(json.dumps({"weighted_mean_major": s.weighted_mean_major,
                      "mass_over_error_threshold": s.mass_over_error_threshold,
                      "mean_error": s.mean_error, "points": s.points}))
    return 0


def cmd_latency(args) -> int:
    model = TransportLatencyModel()
    draws = model.sample(np.random.default_rng(args.seed), args.draws)
    qs = (0.5, 0.7, 0.9, 0.95, 0.99)
    rows = [{"quantile": q, "latency_s": float(np.quantile(draws, q))} for q in qs]
    out = Path(args.out)
    export_analytics(out, "latency", rows)
    plots.latency_cdf(draws, out.with_suffix(".png"))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    handlers = {"run": cmd_run, "sweep": cmd_sweep, "accuracy": cmd_accuracy, "errors": cmd_errors,
                "latency": cmd_latency}
    try:
        return handlers[args.cmd](args)
    except OverflowConfigError as exc:
        return fail(f"configuration overflows the bin bound: {exc}")
    except (ConfigError, SimConfigError, OSError, ValueError) as exc:
        return fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
