"""Acceptance criteria 1-10.

Each criterion runs at its stated size and tolerance and reports one line,
``criterion N: PASS|FAIL  <measurements>``.  Under pytest the lines are
collected into a summary section at the end of the run; run this file as a
script to print them directly::

    python tests/test_acceptance.py [N ...]

Criteria that do not hold on this implementation are left failing rather
than relaxed.
"""
from __future__ import annotations

import math
import random
import sys
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pytest

TESTS = Path(__file__).parent
sys.path.insert(0, str(TESTS))
sys.path.insert(0, str(TESTS / "fixtures"))

import conftest  # noqa: E402
import golden  # noqa: E402
from conftest import brute_force_worst_bin, serving  # noqa: E402

from penrose.agent.client import Agent  # noqa: E402
from penrose.agent.sampler import initial_state, reset_epoch  # noqa: E402
from penrose.agent.trace import KernelRecord  # noqa: E402
from penrose.config import AgentConfig  # noqa: E402
from penrose.crypto.bounds import LIMIT, BoundInputs, OverflowConfigError, check_overflow, overflow_bound  # noqa: E402
from penrose.crypto.private import keygen  # noqa: E402
from penrose.designer.console import fetch_and_decrypt  # noqa: E402
from penrose.histogram import TIME, CounterRegistry, CounterSpec  # noqa: E402
from penrose.server.store import AshStore  # noqa: E402
from penrose.sim.accuracy import AccuracySpec, snippet_accuracy  # noqa: E402
from penrose.sim.analytic import analytic_coverage  # noqa: E402
from penrose.sim.corpus import CorpusSpec, generate_corpus  # noqa: E402
from penrose.sim.engine import SimConfig, Simulator, run_sim  # noqa: E402
from penrose.sim.errors import ErrorStudySpec, run_error_study  # noqa: E402
from penrose.snippets import estimate_jaccard, minhash_windows  # noqa: E402
from penrose.transport import ACK_OK, TcpTransport  # noqa: E402
from penrose.wire import (ProtocolError, UpdateMessage, decode_report, decode_request, decode_update,  # noqa: E402
                          encode_update, update_size)

FIXTURES = TESTS / "fixtures"


class Result:
    def __init__(self, number: int, ok: bool, detail: str, seconds: float):
        self.number, self.ok, self.detail, self.seconds = number, ok, detail, seconds

    @property
    def line(self) -> str:
        return f"criterion {self.number:>2}: {'PASS' if self.ok else 'FAIL'}  {self.detail} [{self.seconds:.1f} s]"


def _timed(number: int, limit_s: float | None = None):
    """Decorator: time the check, fold a runtime limit into the verdict."""
    def wrap(fn):
        def run() -> Result:
            t0 = time.perf_counter()
            ok, detail = fn()
            el = time.perf_counter() - t0
            if limit_s is not None and el >= limit_s:
                ok = False
                detail += f"; runtime {el:.0f} s over the {limit_s:.0f} s limit"
            return Result(number, ok, detail, el)
        run.__name__ = fn.__name__
        return run
    return wrap


# -- 1: homomorphic identity ----------------------------------------------------

@_timed(1, limit_s=120)
def criterion_1():
    rng = random.Random(1)
    parts, failures = [], 0
    for bits, trials in ((1024, 10_000), (2048, 1_000)):
        pk, sk = keygen(bits)
        bad = 0
        for _ in range(trials):
            a, b = rng.getrandbits(63), rng.getrandbits(63)
            bad += sk.decrypt(pk.add(pk.encrypt(a), pk.encrypt(b))) != a + b
        failures += bad
        parts.append(f"{trials} trials at {bits}-bit, {bad} failures")
    return failures == 0, "; ".join(parts)


# -- 2: agent -> server -> designer ---------------------------------------------

@_timed(2, limit_s=300)
def criterion_2():
    clients, partials, A, n_apps = 100, 10, 20, 4
    L = 100
    pk, sk = keygen(1024)
    registry = CounterRegistry.from_specs([CounterSpec(1, "dram_util", 100.0, mode=TIME)])
    cfg = AgentConfig(S=1, A=A, L=L, O=1e6, T=1e6)
    rng = np.random.default_rng(2)
    oracle: dict[bytes, list[int]] = defaultdict(lambda: [0] * 128)
    counts: dict[bytes, int] = defaultdict(int)
    problems = []
    store = AshStore(pk)
    with serving(store, queue_bound=4096, workers=2) as ((host, port), _):
        transport = TcpTransport(host, port)
        for c in range(clients):
            app = c % n_apps
            n = A * partials
            values = rng.uniform(0, 100, n)
            durations = rng.integers(3_000, 521_000, n)
            trace = [KernelRecord(f"app{app}_kernel{i % (11 + 7 * app)}", int(d), {1: float(v)})
                     for i, (v, d) in enumerate(zip(values, durations))]
            flushed = []
            stats = Agent(cfg, registry, pk, transport, seed=c, on_flush=flushed.append).run(trace)
            if stats.updates != partials or stats.delivery.failed:
                problems.append(f"client {c}: {stats.updates} partials, {stats.delivery.failed} failed sends")
            for h in flushed:
                acc = oracle[h.snippet_hash]
                for i, v in enumerate(h.as_ints()):
                    acc[i] += v
                counts[h.snippet_hash] += 1
        ashes = fetch_and_decrypt(transport, sk)
    got = {a.canonical: a for a in ashes}
    if set(got) != set(oracle):
        problems.append(f"{len(got)} aggregated histograms for {len(oracle)} snippets")
    exact = sum(1 for h, bins in oracle.items()
                if h in got and list(got[h].bins) == bins and got[h].contribution_count == counts[h])
    detail = (f"{clients} clients x {partials} partials over TCP, {len(oracle)} histograms, "
              f"{exact}/{len(oracle)} bin-exact, {store.folds} folds")
    if problems:
        detail += "; " + "; ".join(problems[:3])
    return not problems and exact == len(oracle) and store.folds == clients * partials, detail


# -- 3: per-kernel hit probability ----------------------------------------------

@_timed(3, limit_s=60)
def criterion_3():
    N, u, apps = 100, 1000, 10_000  # apps x N = 10^6 kernel positions
    seed = 3
    # Each message contributes one sample whose position is the window offset
    # drawn by the sampler at reset; check the real sampler draws the same
    # sequence the vectorized Monte-Carlo uses.
    rng = np.random.default_rng(seed)
    st = initial_state(N, 10**9, 1, rng)
    real = [st.R]
    for _ in range(50 * u - 1):
        st = reset_epoch(st, rng, 1)
        real.append(st.R)
    draws = np.random.default_rng(seed).integers(N, size=(apps, u))
    same = np.array_equal(np.asarray(real), draws[:50].ravel())
    hit = np.zeros((apps, N), dtype=bool)
    hit[np.arange(apps)[:, None], draws] = True
    positions = apps * N
    p = analytic_coverage(N, u)
    observed = int(hit.sum())
    sigma = math.sqrt(positions * p * (1 - p))
    dev = abs(observed - positions * p)
    detail = (f"hit {observed}/{positions} positions, expected {positions * p:.1f} "
              f"(P_hit = {p:.7f}), |dev| = {dev:.1f} vs 3 sigma = {3 * sigma:.1f}; "
              f"sampler draws {'match' if same else 'DIFFER'}")
    return same and dev <= 3 * sigma, detail


# -- 4: MinHash estimator -------------------------------------------------------

@_timed(4, limit_s=60)
def criterion_4():
    pairs, union = 1000, 400
    rng = np.random.default_rng(4)
    errors, expected = [], []
    ks = np.arange(101)
    for i in range(pairs):
        J = 0.1 + 0.85 * i / (pairs - 1)
        shared = int(round(J * union))
        a_only = int(rng.integers(0, union - shared + 1))
        ids = [f"p{i}:{j}".encode() for j in range(union)]
        a = set(ids[:shared + a_only])
        b = set(ids[:shared]) | set(ids[shared + a_only:])
        exact = len(a & b) / len(a | b)
        errors.append(abs(estimate_jaccard(minhash_windows(a), minhash_windows(b)) - exact))
        # mean |k/100 - J| for k ~ Binomial(100, J): what 100 independent hashes can achieve
        pmf = np.array([math.comb(100, int(k)) for k in ks]) * exact ** ks * (1 - exact) ** (100 - ks)
        expected.append(float(pmf @ np.abs(ks / 100 - exact)))
    err = np.array(errors)
    detail = (f"{pairs} pairs, J in [0.10, 0.95]: mean |err| = {err.mean():.4f} (<= 0.02), "
              f"max = {err.max():.3f} (<= 0.2); binomial expectation for 100 hashes {np.mean(expected):.4f}")
    return err.mean() <= 0.02 and err.max() <= 0.2, detail


# -- 5: snippet classification trend --------------------------------------------

@_timed(5, limit_s=600)
def criterion_5():
    spec = AccuracySpec(n_apps=50, snippets_per_app=50)
    short, long_ = snippet_accuracy(spec, 500), snippet_accuracy(spec, 5000)
    detail = (f"application accuracy L=500 {short.app_accuracy:.4f}, L=5000 {long_.app_accuracy:.4f} "
              f"(snippet accuracy {short.snippet_accuracy:.4f} / {long_.snippet_accuracy:.4f})")
    return long_.app_accuracy > short.app_accuracy and long_.app_accuracy >= 0.90, detail


# -- 6: coverage convergence orderings ------------------------------------------

@_timed(6, limit_s=900)
def criterion_6():
    master = generate_corpus(CorpusSpec(n_apps=200, seed=0))
    dists = ("uniform", "normal_large", "normal_small")
    app_counts = (200, 100, 50)
    hours = {}
    for G in (2000, 200):
        for dist in dists:
            for n in app_counts:
                cfg = SimConfig(gpus=G, n_apps=n, distribution=dist, horizon_s=120 * 86_400)
                hours[G, dist, n] = run_sim(cfg, master.subset(n)).quantile_time_h
    a = all(hours[2000, d, 50] <= hours[2000, d, 100] <= hours[2000, d, 200] for d in dists)
    b = all(hours[2000, "uniform", n] <= hours[2000, "normal_large", n] <= hours[2000, "normal_small", n]
            for n in app_counts)
    ratios = {(d, n): hours[200, d, n] / hours[2000, d, n] for d in dists for n in app_counts}
    c = all(r <= 10 for r in ratios.values())
    table = ", ".join(f"{d[:8]}/{n}: {hours[2000, d, n]:.1f}" for d in dists for n in app_counts)
    detail = (f"(a) {'ok' if a else 'violated'}, (b) {'ok' if b else 'violated'}, "
              f"(c) {'ok' if c else 'violated'} max slowdown {max(ratios.values()):.2f}x; "
              f"hours to 97.5% at G=2000: {table}")
    return a and b and c, detail


# -- 7: server fold throughput --------------------------------------------------

@_timed(7, limit_s=120)
def criterion_7():
    frames_n, pool_n, concurrency = 600, 16, 16
    pk, sk = keygen(2048)
    rng = random.Random(7)
    base_m = [rng.getrandbits(40) for _ in range(128)]
    pool_m = [rng.getrandbits(40) for _ in range(pool_n)]
    base = [pk.encrypt(m) for m in base_m]
    pool = [pk.encrypt(m) for m in pool_m]
    sig_hash, sig = conftest.fingerprint(conftest.names("bench", 200))
    frames = [encode_update(UpdateMessage(1, sig_hash, sig, pk.fingerprint, pk.ciphertext_bytes, 10,
                                          [pk.add(c, pool[(i + j) % pool_n]) for i, c in enumerate(base)]))
              for j in range(frames_n)]
    expected = [frames_n * base_m[i] + sum(pool_m[(i + j) % pool_n] for j in range(frames_n)) for i in range(128)]

    direct = AshStore(pk)
    t0 = time.perf_counter()
    for f in frames[:200]:
        direct.handle_update(f)
    store_rate = 200 / (time.perf_counter() - t0)

    store = AshStore(pk)
    with serving(store, queue_bound=4096, workers=2) as ((host, port), _):
        transport = TcpTransport(host, port)
        t0 = time.perf_counter()
        with ThreadPoolExecutor(concurrency) as ex:
            acks = list(ex.map(transport.send, frames))
        rate = frames_n / (time.perf_counter() - t0)
        (ash,) = fetch_and_decrypt(transport, sk)
    exact = list(ash.bins) == expected and acks.count(ACK_OK) == frames_n
    detail = (f"{rate:.0f} folds/s over TCP with {concurrency} concurrent senders (store alone {store_rate:.0f}/s), "
              f"floor 100/s at 2048-bit; aggregate {'exact' if exact else 'WRONG'}")
    return rate >= 100 and exact, detail


# -- 8: histogram error study ---------------------------------------------------

@_timed(8, limit_s=600)
def criterion_8():
    study = run_error_study(ErrorStudySpec())
    s = study.summary
    detail = (f"weighted mean error of >1%-mass bins {s.weighted_mean_major:.4f} (<= 0.05), "
              f"mass in bins with error > 5%: {s.mass_over_error_threshold:.4%} (<= 1%)")
    return s.weighted_mean_major <= 0.05 and s.mass_over_error_threshold <= 0.01, detail


# -- 9: overflow guard ----------------------------------------------------------

TINY_PERIODS = (1, 7, 60, 599, 600, 601, 1800, 3599, 3600, 3601, 7200)


@_timed(9)
def criterion_9():
    problems = []
    # counting oracle on the tiny configuration, across message periods
    for min_period in TINY_PERIODS:
        b = BoundInputs(gpus=10, aggregation_threshold=100, report_interval_s=3600, min_message_period_s=min_period)
        if overflow_bound(b) != brute_force_worst_bin(10, 100, 3600, min_period, 15):
            problems.append(f"bound differs from oracle at period {min_period}")
    sim = Simulator(SimConfig(gpus=10, n_apps=3, A=100, S=100, delta_s=3600))
    fastest = min(int(t.durations.min()) for t in sim.tables)
    sim_period = min(sim.cfg.T_s, 100 * 100 * fastest / 1e9)
    if sim.check_bounds() != brute_force_worst_bin(10, 100, 3600, sim_period, 15):
        problems.append("simulator bound differs from oracle")
    # rejection exactly at the limit and on random configurations
    rng = random.Random(9)
    checked = 0
    for _ in range(2000):
        A = rng.randint(1, 10**7)
        period = rng.choice([1e-3, 0.5, 1, 60, 3600])
        delta = rng.choice([3600, 86_400, 30 * 86_400])
        per_gpu = math.ceil(delta / period) * A * 15
        for gpus in {max(1, (LIMIT - 1) // per_gpu), (LIMIT - 1) // per_gpu + 1, rng.randint(1, 10**9)}:
            b = BoundInputs(gpus, A, delta, period)
            over = gpus * per_gpu >= LIMIT
            try:
                check_overflow(b)
                rejected = False
            except OverflowConfigError:
                rejected = True
            checked += 1
            if rejected != over:
                problems.append(f"gpus={gpus} A={A} period={period}: rejected={rejected}, overflows={over}")
    try:
        Simulator(SimConfig(gpus=10**9, n_apps=2, A=10**6, delta_s=10 * 86_400, T_s=1))
        problems.append("simulator accepted an overflowing configuration")
    except OverflowConfigError:
        pass
    detail = (f"oracle agrees on {len(TINY_PERIODS) + 1} tiny configurations (G=10, A=100, 1 h), "
              f"{checked} random and limit-adjacent configurations classified")
    if problems:
        detail += "; " + "; ".join(problems[:3])
    return not problems, detail


# -- 10: wire stability ---------------------------------------------------------

DOCUMENTED_FRAME_BYTES = 66_400
FIELD_BYTES = [4, 4, 1, 1, 4, 2, 32, 800, 8, 2, 4, 8, 128 * 512, 4]


@_timed(10)
def criterion_10():
    decoders = {"update.bin": decode_update, "announce.bin": decode_update,
                "report.bin": decode_report, "request.bin": decode_request}
    stable = all(golden.FRAMES[name]() == (FIXTURES / name).read_bytes() for name in decoders)
    decoded = (decode_update((FIXTURES / "update.bin").read_bytes()) == golden.update_message()
               and decode_update((FIXTURES / "announce.bin").read_bytes()) == golden.announce_message()
               and decode_report((FIXTURES / "report.bin").read_bytes()).entries
               == golden.report_message().sorted_entries()
               and decode_request((FIXTURES / "request.bin").read_bytes()) == golden.request_message())
    corruptions = missed = 0
    for name, decode in decoders.items():
        frame = (FIXTURES / name).read_bytes()
        for i in range(len(frame)):
            for v in range(256):
                if v == frame[i]:
                    continue
                bad = bytearray(frame)
                bad[i] = v
                corruptions += 1
                try:
                    decode(bytes(bad))
                    missed += 1
                except ProtocolError:
                    pass
    size = update_size(128, 512)
    field_sum = sum(FIELD_BYTES)
    # encode a real frame of that shape rather than trusting the size formula
    msg = UpdateMessage(1, bytes(32), golden.update_message().minhash, bytes(8), 512, 1, [1] * 128)
    encoded = len(encode_update(msg))
    detail = (f"goldens {'stable' if stable else 'CHANGED'} and {'decode' if decoded else 'DO NOT decode'}; "
              f"{corruptions - missed}/{corruptions} single-byte corruptions detected; "
              f"frame at 128 bins / 2048-bit = {encoded} B (layout field sum {field_sum} B, "
              f"documented figure {DOCUMENTED_FRAME_BYTES} B)")
    return (stable and decoded and missed == 0 and encoded == size == field_sum
            and encoded == DOCUMENTED_FRAME_BYTES), detail


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10}
SLOW = {1, 2, 5, 6, 7, 8}


@pytest.mark.acceptance
@pytest.mark.parametrize("number", [pytest.param(n, marks=pytest.mark.slow) if n in SLOW else n
                                    for n in CRITERIA])
def test_criterion(number):
    result = CRITERIA[number]()
    conftest.ACCEPTANCE_LINES.append(result.line)
    print(result.line)
    assert result.ok, result.line


def main(argv: list[str]) -> int:
    chosen = [int(a) for a in argv] or list(CRITERIA)
    failed = 0
    for n in chosen:
        result = CRITERIA[n]()
        print(result.line, flush=True)
        failed += not result.ok
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
