import io
import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from penrose.agent.client import Agent, VirtualClock, WallClock, run_agent
from penrose.agent.sampler import (AccumulatorSet, SamplerState, initial_state, reset_epoch, sampled_mask,
                                   should_sample)
from penrose.agent.trace import (Diagnostic, KernelRecord, TraceError, convert_nsys_csv, ingest_trace,
                                 iter_records, parse_line, read_trace, write_trace)
from penrose.config import AgentConfig, ConfigError
from penrose.histogram import COUNT, CounterRegistry, CounterSpec, default_registry
from penrose.server.store import AshStore
from penrose.transport import ACK_OK, LoopbackTransport
from penrose.wire import decode_update

FIXTURES = Path(__file__).parent / "fixtures"
ONE_COUNTER = CounterRegistry.from_specs([CounterSpec(1, "dram_util", 100.0, mode=COUNT)])


def sink():
    return LoopbackTransport(handler=lambda frame: ACK_OK, record=True)


# -- trace ---------------------------------------------------------------------

def test_empty_trace(tmp_path):
    p = tmp_path / "empty.txt"
    p.write_text("")
    assert list(ingest_trace(p)) == []


def test_golden_trace_values():
    recs, diags = read_trace(FIXTURES / "trace_golden.txt")
    assert diags == []
    assert recs == [
        KernelRecord("void gemm<float, 128>(float*, int)", 41250, {1: 73.5, 2: 12.0}),
        KernelRecord("elementwise_add", 3000, {1: 5.25}),
        KernelRecord("softmax_fwd", 125000, {1: 0.0, 2: 99.0}),
    ]


def test_bad_line_reported_with_line_number():
    recs, diags = read_trace(FIXTURES / "trace_bad.txt")
    assert [r.name for r in recs] == ["k1", "k3"]
    assert len(diags) == 1 and diags[0].line_no == 2
    with pytest.raises(TraceError, match="line 2"):
        list(iter_records(open(FIXTURES / "trace_bad.txt")))


@pytest.mark.parametrize("line", ["k,0,1:1", "k,10,1:-1", "k,10,1:nan", "k,10", "k,10,1:1,1:2", ",10,1:1"])
def test_invalid_records(line):
    with pytest.raises(TraceError):
        parse_line(line)


def test_write_then_read_roundtrip():
    recs = [KernelRecord("a,b", 5, {2: 1.5, 1: 0.25}), KernelRecord("c", 7, {1: 3.0})]
    buf = io.StringIO()
    assert write_trace(recs, buf, header="test") == 2
    buf.seek(0)
    assert list(iter_records(buf)) == recs


def test_nsys_converter():
    csv = "Name,Duration (ns),dram\nk1,\"1,000\",12.5\nk2,20,\n"
    out = list(convert_nsys_csv(io.StringIO(csv.replace('"1,000"', "1000")), {"dram": 1}))
    assert out == [KernelRecord("k1", 1000, {1: 12.5})]


# -- sampling ------------------------------------------------------------------

def test_should_sample_definition():
    st = SamplerState(S=100, R=3, O_ns=10**9, unit_index=0)
    assert [i for i in (3, 103, 203, 4) if should_sample(st, i)] == [3, 103, 203]
    assert sampled_mask(st, 100).sum() == 1
    assert not should_sample(replace(st, active=False), 3)


def test_per_kernel_hit_rate_monte_carlo():
    rng = np.random.default_rng(7)
    N, u, sims = 100, 1000, 1000
    hits = 0
    for _ in range(sims):
        offsets = rng.integers(N, size=u)
        hits += np.unique(offsets).size
    rate = hits / (N * sims)
    assert rate >= 0.9999
    assert abs(rate - (1 - (1 - 1 / N) ** u)) < 5 * math.sqrt(4.3e-5 / (N * sims))


def test_reset_reproducible_and_rotates():
    def offsets(seed):
        rng = np.random.default_rng(seed)
        st = initial_state(100, 10**9, 3, rng)
        seq = [(st.R, st.unit_index)]
        for _ in range(6):
            st = reset_epoch(st, rng, 3)
            seq.append((st.R, st.unit_index))
        return seq
    a = offsets(1)
    assert a == offsets(1)
    units = [u for _, u in a]
    assert all(units[i + 1] == (units[i] + 1) % 3 for i in range(6))
    assert sorted(units[:3]) == [0, 1, 2]


def test_fleet_rotation_follows_window_number():
    rng = np.random.default_rng(0)
    st = initial_state(10, 100, 3, rng, rotation="fleet", start_ns=500)
    assert st.unit_index == 5 % 3
    assert reset_epoch(st, rng, 3, "fleet").unit_index == 6 % 3


def test_offsets_uniform_chi_square():
    rng = np.random.default_rng(11)
    S, n = 100, 10_000
    st = initial_state(S, 10**9, 1, rng)
    counts = np.zeros(S)
    for _ in range(n):
        st = reset_epoch(st, rng, 1)
        counts[st.R] += 1
    chi2 = float(((counts - n / S) ** 2 / (n / S)).sum())
    df, z = S - 1, 2.3263  # Wilson-Hilferty critical value at alpha = 0.01
    crit = df * (1 - 2 / (9 * df) + z * math.sqrt(2 / (9 * df))) ** 3
    assert chi2 < crit


def test_accumulator_flushes_at_threshold_and_timeout():
    unit = ONE_COUNTER[1]
    acc = AccumulatorSet(A=3, T_ns=100)
    assert acc.fold(b"s" * 32, unit, {1: 5.0}, 10, now_ns=0) is None
    assert acc.fold(b"s" * 32, unit, {1: 5.0}, 10, now_ns=1) is None
    full = acc.fold(b"s" * 32, unit, {1: 5.0}, 10, now_ns=2)
    assert full is not None and full.sample_count == 3 and len(acc) == 0
    acc.fold(b"t" * 32, unit, {1: 5.0}, 10, now_ns=50)
    assert acc.next_deadline() == 150
    assert acc.expire(149) == []
    assert [h.sample_count for h in acc.expire(150)] == [1]


# -- agent loop ----------------------------------------------------------------

def constant_trace(n, duration_ns=30_000, prefix="k", period=50):
    return [KernelRecord(f"{prefix}{i % period}", duration_ns, {1: float(i % 100), 2: 50.0}) for i in range(n)]


def test_exactly_one_update_for_a_times_s_kernels(pk):
    S, A = 10, 50
    cfg = AgentConfig(S=S, A=A, L=S * A, O=1e6, T=1e6)
    store = AshStore(pk)
    transport = LoopbackTransport(handler=lambda f: ACK_OK if store.handle_update(f) else b"\x01", record=True)
    stats = run_agent(cfg, ONE_COUNTER, pk, constant_trace(S * A), transport, seed=3)
    assert stats.updates == 1 and stats.announces == 1
    updates = [decode_update(f) for f in transport.sent if not decode_update(f).is_announce]
    assert len(updates) == 1 and updates[0].sample_count == A
    assert store.folds == 1 and store.announces == 1


def test_short_app_announces_partial_snippet(pk):
    cfg = AgentConfig(S=7, A=1000, L=1000, O=1e6, T=1e6)
    t = sink()
    agent = Agent(cfg, ONE_COUNTER, pk, t, seed=1)
    stats = agent.run(constant_trace(300))
    assert stats.announces == 1 and stats.updates == 1
    announce = decode_update(t.sent[0])
    assert announce.is_announce and announce.snippet_hash == agent.current_hash


def test_unsampled_kernels_never_fold(pk):
    cfg = AgentConfig(S=13, A=10**6, L=200, O=1e6, T=1e6)
    flushed = []
    stats = Agent(cfg, ONE_COUNTER, pk, sink(), seed=5, on_flush=flushed.append, encrypt=False).run(
        constant_trace(5000))
    assert stats.folded == stats.sampled
    assert sum(h.sample_count for h in flushed) == stats.sampled
    assert stats.sampled in (5000 // 13, 5000 // 13 + 1)


def test_missing_counter_skipped(pk):
    cfg = AgentConfig(S=1, A=100, L=50, O=1e6, T=1e6)
    recs = [KernelRecord("k", 10, {2: 1.0})] * 20
    stats = Agent(cfg, ONE_COUNTER, pk, sink(), seed=0, encrypt=False).run(recs)
    assert stats.missing_counter == 20 and stats.folded == 0


def test_message_cadence(pk):
    S, A, lat = 100, 100, 30_000
    cfg = AgentConfig(S=S, A=A, L=10_000, O=1e6, T=1e6)
    stats = Agent(cfg, ONE_COUNTER, pk, sink(), seed=2, encrypt=False).run(constant_trace(5 * S * A, lat))
    period_ns = A * S * lat
    times = np.array(stats.update_times_ns)
    assert stats.updates == 5
    assert np.all(np.abs(np.diff(times) - period_ns) <= S * lat)


def test_load_factor_limits_active_time(pk):
    O = 1.0
    cfg = AgentConfig(S=10, A=10**6, L=100, O=O, T=1e6, load_factor=0.1)
    clock = VirtualClock()
    seen = []
    agent = Agent(cfg, ONE_COUNTER, pk, sink(), seed=4, clock=clock, encrypt=False,
                  on_sample=lambda i, unit, rec: seen.append(clock.now()))
    agent.run(constant_trace(1000, duration_ns=1_000_000))  # 1 ms kernels
    t = np.array(seen)
    phase = t % 10**9
    assert np.all(phase < 0.1 * 10**9)
    windows, per = np.unique(t // 10**9, return_counts=True)
    assert len(windows) == 10 and np.all(per == 10)


def test_no_kernel_names_on_the_wire(pk):
    cfg = AgentConfig(S=5, A=20, L=64, O=1e6, T=1e6, app_salt="")
    t = sink()
    recs = [KernelRecord(f"CANARY_kernel_{i % 9}", 1000, {1: 40.0, 2: 60.0}) for i in range(1000)]
    Agent(cfg, default_registry(), pk, t, seed=9).run(recs)
    assert t.sent
    for frame in t.sent:
        assert b"CANARY" not in frame and b"kernel_" not in frame


def test_rotation_covers_all_units(pk):
    cfg = AgentConfig(S=1, A=10**6, L=50, O=0.001, T=1e6)
    flushed = []
    Agent(cfg, default_registry(), pk, sink(), seed=0, encrypt=False, on_flush=flushed.append).run(
        constant_trace(600, duration_ns=100_000))
    assert {h.counter_id for h in flushed} == {1, 2, 0x8001}


def test_config_file(tmp_path):
    p = tmp_path / "agent.ini"
    p.write_text("[agent]\nS = 100\nO = 10m\nT = 20m\nA = 5\nregistry = counters.ini\n")
    cfg = AgentConfig.load(p)
    assert (cfg.S, cfg.O, cfg.T, cfg.A) == (100, 600.0, 1200.0, 5)
    assert cfg.registry == str(tmp_path / "counters.ini")
    p.write_text("[agent]\nload_factor = 2\n")
    with pytest.raises(ConfigError):
        AgentConfig.load(p)


def test_wall_clock_paces_with_scale():
    slept = []
    clock = WallClock(scale=1000.0, sleep=slept.append)
    clock.advance(5_000_000)
    assert slept and slept[0] == pytest.approx(5e-6)


@pytest.mark.slow
def test_corpus_replay_matches_sample_count_oracle(pk):
    from penrose.sim.corpus import generate_corpus
    corpus = generate_corpus(n_apps=154, seed=1)
    S = 100
    cfg = AgentConfig(S=S, A=10**6, O=1e6, T=1e6)
    lo = hi = sampled = 0
    for a, app in enumerate(corpus.apps):
        names = corpus.names(app, 0, app.kernel_count)
        recs = [KernelRecord(n, int(d), {1: float(v), 2: float(w)})
                for n, d, v, w in zip(names, app.durations_ns, app.dram, app.tensor)]
        stats = run_agent(cfg, default_registry(), pk, recs, sink(), seed=a, encrypt=False)
        assert stats.folded == stats.sampled
        sampled += stats.sampled
        lo += app.kernel_count // S
        hi += -(-app.kernel_count // S)
    assert lo <= sampled <= hi
