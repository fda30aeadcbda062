"""Snippet classification accuracy on a synthetic corpus.

Each app's kernel stream repeats a motif (one layer block) whose length is
log-uniform on [8, 1500].  A small fraction of motif positions alternate
between two kernels from one iteration to the next.  Snippets of ``L``
kernels start at random points of a long run; the first one is the app's
canonical snippet.  A snippet is correct when its estimated similarity to
its own canonical reaches ``tau`` and beats every other app's canonical.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..snippets import DEFAULT_FAMILY_ID, DEFAULT_TAU, NUM_HASHES, family, minhash, pad_snippet
from .corpus import kernel_name_pool


@dataclass(frozen=True)
class AccuracySpec:
    n_apps: int = 50
    snippets_per_app: int = 50
    min_period: int = 8
    max_period: int = 1500
    variant_density: float = 0.02
    variant_probability: float = 0.5
    run_iterations: int = 1000
    pool_size: int = 10_000
    seed: int = 0


@dataclass
class AppStream:
    motif: np.ndarray     # pool index per motif position
    variants: np.ndarray  # alternative pool index, -1 where the position never varies

    @property
    def period(self) -> int:
        return len(self.motif)


@dataclass
class AccuracyResult:
    L: int
    snippet_accuracy: float
    app_accuracy: float
    mismatches: int
    snippets: int
    per_app_mismatches: list = field(default_factory=list)


def build_streams(spec: AccuracySpec) -> tuple[list[AppStream], list[str]]:
    rng = np.random.default_rng([spec.seed, 0x5A1])
    pool = kernel_name_pool(spec.pool_size, spec.seed)
    pop = 1.0 / np.arange(1, spec.pool_size + 1) ** 0.8
    pop /= pop.sum()
    lo, hi = np.log(spec.min_period), np.log(spec.max_period)
    apps = []
    for _ in range(spec.n_apps):
        p = int(round(np.exp(lo + rng.random() * (hi - lo))))
        motif = rng.choice(spec.pool_size, size=p, p=pop)
        alt = rng.choice(spec.pool_size, size=p, p=pop)
        apps.append(AppStream(motif, np.where(rng.random(p) < spec.variant_density, alt, -1)))
    return apps, pool


def snippet_names(app: AppStream, pool: list[str], start: int, L: int, rng: np.random.Generator) -> list[str]:
    pos = (start + np.arange(L)) % app.period
    idx = app.motif[pos].copy()
    var = app.variants[pos]
    flip = (var >= 0) & (rng.random(L) < 0.5)
    idx[flip] = var[flip]
    return [pool[i] for i in idx]


def snippet_signatures(spec: AccuracySpec, L: int, family_id: int = DEFAULT_FAMILY_ID) -> np.ndarray:
    """(apps, snippets, hashes) signature array; snippet 0 of each app is canonical."""
    apps, pool = build_streams(spec)
    fam = family(family_id)
    rng = np.random.default_rng([spec.seed, L, 0x5E1])
    out = np.zeros((spec.n_apps, spec.snippets_per_app, NUM_HASHES), dtype=np.uint64)
    for a, app in enumerate(apps):
        run_length = app.period * spec.run_iterations
        for s in range(spec.snippets_per_app):
            start = int(rng.integers(run_length))
            names = snippet_names(app, pool, start, L, rng)
            out[a, s] = minhash(pad_snippet(names), fam).values
    return out


def classify_signatures(sigs: np.ndarray, tau: float = DEFAULT_TAU) -> AccuracyResult:
    n_apps, n_snip, _ = sigs.shape
    canon = sigs[:, 0, :]
    per_app = []
    for a in range(n_apps):
        # estimated similarity of every snippet of app a to every canonical
        sim = (sigs[a][:, None, :] == canon[None, :, :]).mean(axis=2)
        own = sim[:, a]
        other = np.delete(sim, a, axis=1).max(axis=1) if n_apps > 1 else np.zeros(n_snip)
        per_app.append(int(np.sum((own < tau) | (other >= own))))
    mism = sum(per_app)
    total = n_apps * n_snip
    return AccuracyResult(L=0, snippet_accuracy=1 - mism / total,
                          app_accuracy=sum(m == 0 for m in per_app) / n_apps,
                          mismatches=mism, snippets=total, per_app_mismatches=per_app)


def snippet_accuracy(spec: AccuracySpec, L: int, tau: float = DEFAULT_TAU) -> AccuracyResult:
    res = classify_signatures(snippet_signatures(spec, L), tau)
    res.L = L
    return res
