"""Grids of simulator runs and their time-to-coverage table."""
from __future__ import annotations

import configparser
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from ..config import ConfigError
from .corpus import Corpus, CorpusSpec, generate_corpus
from .engine import SimConfig, SimReport, run_sim


@dataclass
class SweepCell:
    label: str
    config: SimConfig


def parse_grid(text: str) -> list[SweepCell]:
    """``[base]`` holds shared SimConfig keys; ``[grid]`` lists comma-separated values to cross."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read_string(text)
    base = dict(cp["base"]) if cp.has_section("base") else {}
    grid = {k: [v.strip() for v in raw.split(",") if v.strip()]
            for k, raw in (cp["grid"].items() if cp.has_section("grid") else [])}
    if any(not vals for vals in grid.values()):
        raise ConfigError("empty value list in [grid]")
    cells = []
    keys = sorted(grid)
    for combo in itertools.product(*(grid[k] for k in keys)):
        over = dict(zip(keys, combo))
        label = ",".join(f"{k}={v}" for k, v in over.items()) or "base"
        cells.append(SweepCell(label, SimConfig.from_mapping({**base, **over})))
    return cells


def load_grid(path: str | Path) -> list[SweepCell]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"grid file {path} not found")
    return parse_grid(path.read_text())


def _corpus_for(cfg: SimConfig, masters: dict) -> Corpus:
    key = cfg.corpus_seed
    if key not in masters:
        raise KeyError(key)
    return masters[key].subset(cfg.n_apps)


def _run_cell(args) -> SimReport:
    cfg, corpus = args
    return run_sim(cfg, corpus)


def sweep(cells: list[SweepCell], workers: int = 1) -> list[tuple[SweepCell, SimReport]]:
    """Run every cell.  Cells sharing a corpus seed use nested subsets of one master corpus."""
    sizes: dict[int, int] = {}
    for c in cells:
        sizes[c.config.corpus_seed] = max(sizes.get(c.config.corpus_seed, 0), c.config.n_apps)
    masters = {seed: generate_corpus(CorpusSpec(n_apps=n, seed=seed)) for seed, n in sizes.items()}
    jobs = [(c.config, _corpus_for(c.config, masters)) for c in cells]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_cell, jobs))
    else:
        reports = [_run_cell(j) for j in jobs]
    return list(zip(cells, reports))


def sweep_rows(results) -> list[dict]:
    rows = []
    for cell, rep in results:
        cfg = cell.config
        rows.append({"label": cell.label, "gpus": cfg.gpus, "apps": cfg.n_apps, "distribution": cfg.distribution,
                     "seed": cfg.seed,
                     "hours_to_975": rep.quantile_time_h if math.isfinite(rep.quantile_time_h) else float("inf"),
                     "messages": rep.messages_emitted,
                     "ingress_per_s": rep.messages_arrived / rep.end_time_s if rep.end_time_s > 0 else 0.0})
    return rows
