"""Deterministic discrete-event fleet simulator.

Each GPU runs one application at a time.  A session starts when the GPU
picks an app (by popularity) and ends when its partial histogram flushes,
either on reaching ``A`` samples or on the ``T`` timeout.  The flush is a
message; it reaches the aggregation server after a transport latency, and
coverage is credited on arrival.

Sessions are computed window by window with prefix sums over the app's
kernel durations, so a message costs a few numpy calls per reset window
rather than one Python step per kernel.  ``fidelity="kernel"`` steps every
kernel through the agent's sampler and accumulator instead; both paths
share offsets, app draws and timing and must produce identical messages.
"""
from __future__ import annotations

import configparser
import hashlib
import heapq
import math
import struct
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ..agent.sampler import AccumulatorSet, SamplerState, reset_epoch, should_sample
from ..config import ConfigError, parse_duration
from ..crypto.bounds import BoundInputs, check_overflow
from ..histogram import DEFAULT_TIME_SCALE_NS, bin_indices, default_registry, time_weights
from ..snippets import splitmix64
from .corpus import DRAM_ID, Corpus, CorpusSpec, generate_corpus
from .latency import TransportLatencyModel

NS = 1_000_000_000
DISTRIBUTIONS = ("uniform", "normal_small", "normal_large")
TIMING_MODES = ("exact", "mean")
FIDELITIES = ("message", "kernel")

FLUSH, ARRIVAL, REPORT, TRAJECTORY = 0, 1, 2, 3
_OFFSET_SALT = 0x4F464653  # "OFFS"
_PHASE_SALT = 0x50484153   # "PHAS"


class SimConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    gpus: int = 1000
    n_apps: int = 20
    distribution: str = "uniform"
    S: int = 10_000
    O_s: float = 600.0
    A: int = 10_000
    T_s: float = 86_400.0
    L: int = 10_000
    delta_s: float = 86_400.0
    load_factor: float = 0.10
    seed: int = 0
    corpus_seed: int = 0
    horizon_s: float = 10 * 86_400.0
    timing: str = "exact"
    fidelity: str = "message"
    latency: bool = True
    drop_probability: float = 0.0
    coverage_target: float = 0.99
    app_quantile: float = 0.975
    trajectory_step_s: float = 3600.0
    stop_at_quantile: bool = True
    track_coverage: bool = True
    shadow: bool = False
    crypto: bool = False
    key_bits: int = 1024

    def validate(self) -> "SimConfig":
        for name in ("gpus", "n_apps", "S", "A", "L"):
            if getattr(self, name) < 1:
                raise SimConfigError(f"{name} must be >= 1")
        for name in ("O_s", "T_s", "delta_s", "horizon_s", "trajectory_step_s"):
            if not getattr(self, name) > 0:
                raise SimConfigError(f"{name} must be positive")
        if not 0 < self.load_factor <= 1:
            raise SimConfigError("load_factor must be in (0, 1]")
        if self.distribution not in DISTRIBUTIONS:
            raise SimConfigError(f"distribution must be one of {DISTRIBUTIONS}")
        if self.timing not in TIMING_MODES:
            raise SimConfigError(f"timing must be one of {TIMING_MODES}")
        if self.fidelity not in FIDELITIES:
            raise SimConfigError(f"fidelity must be one of {FIDELITIES}")
        if not (0 < self.coverage_target <= 1 and 0 < self.app_quantile <= 1):
            raise SimConfigError("coverage target and app quantile must be in (0, 1]")
        if self.crypto and not self.shadow:
            raise SimConfigError("crypto mode needs shadow histograms to check against")
        return self

    def replace(self, **kw) -> "SimConfig":
        return SimConfig(**{**asdict(self), **kw}).validate()

    # key = value files, with duration strings allowed for the *_s fields
    @classmethod
    def from_mapping(cls, items) -> "SimConfig":
        types = {f.name: type(f.default) for f in fields(cls)}
        kw = {}
        for key, raw in items.items():
            key = key.strip()
            if key not in types:
                raise ConfigError(f"unknown sim option {key!r}")
            t, raw = types[key], str(raw).strip()
            try:
                if t is bool:
                    if raw.lower() not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                        raise ValueError(raw)
                    kw[key] = raw.lower() in ("1", "true", "yes", "on")
                elif key.endswith("_s"):
                    kw[key] = parse_duration(raw)
                else:
                    kw[key] = t(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
        return cls(**kw).validate()

    @classmethod
    def loads(cls, text: str) -> "SimConfig":
        cp = configparser.ConfigParser()
        cp.optionxform = str  # option names are case-sensitive (S, A, O_s, ...)
        body = text if text.lstrip().startswith("[") else "[sim]\n" + text
        cp.read_string(body)
        section = cp["sim"] if cp.has_section("sim") else {}
        return cls.from_mapping(dict(section))

    @classmethod
    def load(cls, path: str | Path) -> "SimConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} not found")
        return cls.loads(path.read_text())

    def dumps(self) -> str:
        return "[sim]\n" + "".join(f"{k} = {v}\n" for k, v in asdict(self).items())


# -- popularity -----------------------------------------------------------------

def popularity(kernel_counts, distribution: str) -> np.ndarray:
    """Probability that a session runs each app.

    The normal variants weight apps by a half-normal over their rank by
    kernel count, starting from the favoured end (largest apps first for
    ``normal_large``, smallest first for ``normal_small``), with sigma equal
    to two thirds of the app count.
    """
    k = np.asarray(kernel_counts)
    n = len(k)
    if distribution == "uniform":
        return np.full(n, 1.0 / n)
    if distribution not in DISTRIBUTIONS:
        raise SimConfigError(f"unknown distribution {distribution!r}")
    order = np.argsort(-k if distribution == "normal_large" else k, kind="stable")
    rank = np.empty(n)
    rank[order] = np.arange(n) + 0.5
    sigma = 2.0 * n / 3.0
    w = np.exp(-0.5 * (rank / sigma) ** 2)
    return w / w.sum()


# -- per-app timing tables ------------------------------------------------------

@dataclass
class _AppTable:
    k: int
    durations: np.ndarray  # int64, per static kernel, after the timing mode
    cum: np.ndarray        # length k + 1, cum[0] = 0
    period: int
    dram: np.ndarray
    bins: np.ndarray       # dram histogram bin per static kernel
    weights: np.ndarray    # time weight per static kernel

    def cum_at(self, q):
        """Virtual time from stream position 0 to ``q`` (vectorized)."""
        return (q // self.k) * self.period + self.cum[q % self.k]

    def count_before(self, x: int) -> int:
        """Number of stream positions whose start offset is below ``x``."""
        if x <= 0:
            return 0
        whole, rem = divmod(x, self.period)
        return whole * self.k + int(np.searchsorted(self.cum[:self.k], rem, side="left"))


def _tables(corpus: Corpus, timing: str) -> list[_AppTable]:
    spec = default_registry()[DRAM_ID]
    out = []
    for app in corpus.apps:
        d = app.durations_ns.astype(np.int64)
        if timing == "mean":
            d = np.full_like(d, max(1, int(round(d.mean()))))
        cum = np.zeros(len(d) + 1, dtype=np.int64)
        np.cumsum(d, out=cum[1:])
        out.append(_AppTable(len(d), d, cum, int(cum[-1]), app.dram, bin_indices(spec, app.dram),
                             time_weights(d, DEFAULT_TIME_SCALE_NS)))
    return out


# -- GPUs -------------------------------------------------------------------------

class _Gpu:
    __slots__ = ("index", "key", "w", "ws", "R", "i")

    def __init__(self, index: int, seed: int, S: int, O_ns: int):
        self.index = index
        self.key = splitmix64((seed * 0x100000001B3 + index) & ((1 << 64) - 1))
        phase = splitmix64(self.key ^ _PHASE_SALT) % O_ns
        self.w = 0
        self.ws = -phase
        self.R = self.offset(0, S)
        self.i = 0

    def offset(self, w: int, S: int) -> int:
        """Sampling offset of reset window ``w``; counter-based, so windows may be skipped."""
        return splitmix64(self.key ^ _OFFSET_SALT ^ (w * 0x9E3779B97F4A7C15 & ((1 << 64) - 1))) % S


class _OffsetDraws:
    """Adapter giving :func:`reset_epoch` the GPU's offset stream."""

    def __init__(self, gpu: _Gpu):
        self.gpu = gpu

    def integers(self, high: int) -> int:
        self.gpu.w += 1
        return self.gpu.offset(self.gpu.w, high)


@dataclass
class Message:
    gpu: int
    app: int
    emitted_ns: int
    positions: np.ndarray
    timed_out: bool
    hist: np.ndarray | None = None


# -- report -----------------------------------------------------------------------

@dataclass
class SimReport:
    config: SimConfig
    corpus_digest: str
    app_names: list
    kernel_counts: np.ndarray
    popularity: np.ndarray
    time_to_target_s: np.ndarray      # inf where not reached
    quantile_time_s: float            # inf if not reached within the horizon
    end_time_s: float
    trajectory_t_s: np.ndarray
    trajectory: np.ndarray            # (steps, apps) coverage fractions
    ingress_per_s: np.ndarray         # arrivals per second over each trajectory step
    messages_emitted: int
    messages_arrived: int
    messages_dropped: int
    messages_in_flight: int
    timeouts: int
    period_messages: list
    final_coverage: np.ndarray
    shadow: dict = field(default_factory=dict)
    crypto_checked: int = 0
    crypto_mismatches: int = 0
    messages: list = field(default_factory=list, repr=False)

    @property
    def quantile_time_h(self) -> float:
        return self.quantile_time_s / 3600.0

    @property
    def mean_coverage(self) -> np.ndarray:
        return self.trajectory.mean(axis=1) if self.trajectory.size else np.zeros(0)

    def to_bytes(self) -> bytes:
        """Canonical serialization; identical runs give identical bytes."""
        h = hashlib.sha256()
        h.update(self.config.dumps().encode())
        h.update(self.corpus_digest.encode())
        for arr in (self.kernel_counts, self.popularity, self.time_to_target_s, self.trajectory_t_s,
                    self.trajectory, self.ingress_per_s, self.final_coverage):
            a = np.ascontiguousarray(arr)
            h.update(str(a.dtype).encode() + str(a.shape).encode())
            h.update(a.astype(a.dtype.newbyteorder("<")).tobytes())
        h.update(struct.pack("<dd6q", self.quantile_time_s, self.end_time_s, self.messages_emitted,
                             self.messages_arrived, self.messages_dropped, self.messages_in_flight,
                             self.timeouts, self.crypto_mismatches))
        for p in self.period_messages:
            h.update(struct.pack("<3q", *p))
        for key in sorted(self.shadow):
            h.update(struct.pack("<q", key) + np.asarray(self.shadow[key], dtype="<u8").tobytes())
        return h.digest()

    def digest(self) -> str:
        return self.to_bytes().hex()

    def trajectory_rows(self) -> list[dict]:
        return [{"time_h": float(t) / 3600.0, "app": name, "coverage": float(c)}
                for t, row in zip(self.trajectory_t_s, self.trajectory)
                for name, c in zip(self.app_names, row)]

    def coverage_rows(self) -> list[dict]:
        return [{"app": n, "kernel_count": int(k), "coverage": float(c)}
                for n, k, c in zip(self.app_names, self.kernel_counts, self.final_coverage)]


# -- simulator --------------------------------------------------------------------

class Simulator:
    def __init__(self, config: SimConfig, corpus: Corpus | None = None, keep_messages: bool = False):
        self.cfg = cfg = config.validate()
        self.corpus = corpus or generate_corpus(CorpusSpec(n_apps=cfg.n_apps, seed=cfg.corpus_seed))
        self.n_apps = len(self.corpus.apps)
        self.O_ns = int(round(cfg.O_s * NS))
        self.T_ns = int(round(cfg.T_s * NS))
        self.delta_ns = int(round(cfg.delta_s * NS))
        self.horizon_ns = int(round(cfg.horizon_s * NS))
        self.step_ns = int(round(cfg.trajectory_step_s * NS))
        self.active_ns = SamplerState(cfg.S, 0, self.O_ns, 0, load_factor=cfg.load_factor).active_ns
        if self.active_ns < 1:
            raise SimConfigError("load window shorter than 1 ns")
        self.tables = _tables(self.corpus, cfg.timing)
        self.check_bounds()
        self.kernel_counts = np.array([t.k for t in self.tables], dtype=np.int64)
        self.popularity = popularity(self.kernel_counts, cfg.distribution)
        self._cdf = np.cumsum(self.popularity)
        self._cdf[-1] = 1.0
        self.app_rng = np.random.default_rng([cfg.seed, 0xA99])
        self.net_rng = np.random.default_rng([cfg.seed, 0x7E7])
        self.latency = (TransportLatencyModel(drop_probability=cfg.drop_probability) if cfg.latency
                        else TransportLatencyModel(enabled=False, drop_probability=cfg.drop_probability))
        self.keep_messages = keep_messages
        self._unit = default_registry()[DRAM_ID]
        self._hashes = [struct.pack("<Q", a) + bytes(24) for a in range(self.n_apps)]

    def check_bounds(self) -> int:
        """Refuse configurations whose aggregated bins could overflow."""
        cfg = self.cfg
        fastest = min(int(t.durations.min()) for t in self.tables)
        fill_s = cfg.A * cfg.S * fastest / NS  # quickest a partial can reach A
        min_period = min(cfg.T_s, max(fill_s, 1e-9))
        return check_overflow(BoundInputs(cfg.gpus, cfg.A, cfg.delta_s, min_period))

    # -- sessions --------------------------------------------------------------

    def _draw_app(self) -> int:
        return int(np.searchsorted(self._cdf, self.app_rng.random(), side="right"))

    def _jump(self, g: _Gpu, t: int) -> None:
        if t >= g.ws + self.O_ns:
            n = (t - g.ws) // self.O_ns
            g.w += n
            g.ws += n * self.O_ns
            g.R = g.offset(g.w, self.cfg.S)
            g.i = 0

    def _session_message(self, g: _Gpu, t: int, a: int):
        """Vectorized session: (flush time, session end, positions, timed out) or None."""
        tab, S, A = self.tables[a], self.cfg.S, self.cfg.A
        q, count, deadline = 0, 0, None
        chunks = []
        while True:
            if t > self.horizon_ns:
                return None
            self._jump(g, t)
            ae = g.ws + self.active_ns
            if t >= ae:
                t = g.ws + self.O_ns
                continue
            if deadline is not None and t >= deadline:
                return t, t, chunks, True
            base = int(tab.cum_at(q))
            n_act = tab.count_before(base + (ae - t)) - q
            offs = np.arange((g.R - g.i) % S, n_act, S, dtype=np.int64)
            if deadline is None and len(offs):
                deadline = t + int(tab.cum_at(q + int(offs[0]))) - base + self.T_ns
            n = n_act
            if deadline is not None:
                n_dl = tab.count_before(base + (deadline - t)) - q
                if n_dl < n:
                    n = n_dl
                    offs = offs[offs < n]
            need = A - count
            if len(offs) >= need:
                o = int(offs[need - 1])
                chunks.append(offs[:need] + q)
                ts = t + int(tab.cum_at(q + o)) - base
                g.i += o + 1
                return ts, ts + int(tab.durations[(q + o) % tab.k]), chunks, False
            chunks.append(offs + q)
            count += len(offs)
            t_next = t + int(tab.cum_at(q + n)) - base
            g.i += n
            if n < n_act:
                return t_next, t_next, chunks, True
            t, q = t_next, q + n

    def _session_kernel(self, g: _Gpu, t: int, a: int):
        """Reference path: every kernel goes through the agent's sampler and accumulator."""
        tab, cfg = self.tables[a], self.cfg
        draws = _OffsetDraws(g)
        state = SamplerState(cfg.S, g.R, self.O_ns, 0, g.i, cfg.load_factor, g.w, g.ws)
        acc = AccumulatorSet(cfg.A, self.T_ns, DEFAULT_TIME_SCALE_NS)
        sh = self._hashes[a]
        q, positions = 0, []
        result = None
        while result is None:
            if t > self.horizon_ns:
                break
            if t >= state.window_end_ns:
                if t >= state.window_end_ns + self.O_ns:
                    # idle across whole windows: skip them as the vectorized path does
                    g.ws, g.i = state.window_start_ns, state.kernel_index
                    self._jump(g, t)
                    state = SamplerState(cfg.S, g.R, self.O_ns, 0, 0, cfg.load_factor, g.w, g.ws)
                else:
                    state = reset_epoch(state, draws, 1)
                continue
            if t >= state.active_end_ns:
                t = state.window_end_ns
                continue
            if acc.expire(t):
                result = (t, t, [np.array(positions, dtype=np.int64)], True)
                break
            i, pos = state.kernel_index, q % tab.k
            d = int(tab.durations[pos])
            if should_sample(state, i):
                positions.append(q)
                full = acc.fold(sh, self._unit, {DRAM_ID: float(tab.dram[pos])}, d, t)
                if full is not None:
                    result = (t, t + d, [np.array(positions, dtype=np.int64)], False)
            state = SamplerState(state.S, state.R, state.O_ns, 0, i + 1, state.load_factor, state.epoch,
                                 state.window_start_ns)
            t += d
            q += 1
        g.w, g.ws, g.R, g.i = state.epoch, state.window_start_ns, state.R, state.kernel_index
        return result

    def next_message(self, g: _Gpu, t: int) -> tuple[Message, int] | None:
        a = self._draw_app()
        step = self._session_kernel if self.cfg.fidelity == "kernel" else self._session_message
        out = step(g, t, a)
        if out is None:
            return None
        ts, end, chunks, timed_out = out
        tab = self.tables[a]
        pos = (np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)) % tab.k
        hist = None
        if self.cfg.shadow:
            hist = np.bincount(tab.bins[pos], weights=tab.weights[pos], minlength=128).astype(np.uint64)
        if not (self.cfg.track_coverage or self.cfg.crypto or self.keep_messages):
            pos = pos[:0]  # nobody reads them; a queued message per GPU adds up at fleet scale
        return Message(g.index, a, ts, pos, timed_out, hist), end

    # -- event loop ------------------------------------------------------------

    def run(self) -> SimReport:
        cfg = self.cfg
        n = self.n_apps
        queue: list = []
        seq = 0

        def push(t, kind, data=None):
            nonlocal seq
            heapq.heappush(queue, (t, seq, kind, data))
            seq += 1

        gpus = [_Gpu(i, cfg.seed, cfg.S, self.O_ns) for i in range(cfg.gpus)]
        for g in gpus:
            nxt = self.next_message(g, 0)
            if nxt is not None:
                push(nxt[0].emitted_ns, FLUSH, nxt)
        push(0, TRAJECTORY)
        push(self.delta_ns, REPORT)

        covered = [np.zeros(t.k, dtype=bool) for t in self.tables] if cfg.track_coverage else None
        n_cov = np.zeros(n, dtype=np.int64)
        need = np.array([math.ceil(cfg.coverage_target * t.k - 1e-9) for t in self.tables])
        t_reach = np.full(n, np.inf)
        reached = 0
        quorum = math.ceil(cfg.app_quantile * n - 1e-9)
        quantile_time = math.inf

        traj_t, traj, ingress = [], [], []
        arrivals_step = 0
        emitted = arrived = dropped = timeouts = 0
        period_counts = [0, 0]
        period_messages = []
        shadow_total: dict[int, np.ndarray] = {}
        shadow_period: dict[int, np.ndarray] = {}
        crypto = _CryptoPath(self) if cfg.crypto else None
        kept = []
        now = 0

        def snapshot(t):
            nonlocal arrivals_step
            elapsed = t / NS - traj_t[-1] if traj_t else 0.0
            traj_t.append(t / NS)
            traj.append(n_cov / self.kernel_counts)
            ingress.append(arrivals_step / elapsed if elapsed > 0 else 0.0)
            arrivals_step = 0

        while queue:
            t, _, kind, data = heapq.heappop(queue)
            if t > self.horizon_ns:
                now = self.horizon_ns
                break
            now = t
            if kind == FLUSH:
                msg, end = data
                emitted += 1
                period_counts[0] += 1
                timeouts += msg.timed_out
                if self.keep_messages:
                    kept.append(msg)
                if self.latency.dropped(self.net_rng):
                    dropped += 1
                else:
                    push(t + self.latency.sample_ns(self.net_rng), ARRIVAL, msg)
                nxt = self.next_message(gpus[msg.gpu], end)
                if nxt is not None:
                    push(nxt[0].emitted_ns, FLUSH, nxt)
            elif kind == ARRIVAL:
                msg = data
                arrived += 1
                arrivals_step += 1
                period_counts[1] += 1
                a = msg.app
                if covered is not None:
                    cov = covered[a]
                    fresh = np.unique(msg.positions[~cov[msg.positions]])
                    if len(fresh):
                        cov[fresh] = True
                        n_cov[a] += len(fresh)
                        if n_cov[a] >= need[a] and math.isinf(t_reach[a]):
                            t_reach[a] = t / NS
                            reached += 1
                            if reached >= quorum and math.isinf(quantile_time):
                                quantile_time = t / NS
                if msg.hist is not None:
                    for store in (shadow_total, shadow_period):
                        store[a] = store.get(a, np.zeros(128, dtype=np.uint64)) + msg.hist
                    if crypto is not None:
                        crypto.ingest(msg)
                if cfg.stop_at_quantile and covered is not None and not math.isinf(quantile_time):
                    break
            elif kind == REPORT:
                period_messages.append((len(period_messages), period_counts[0], period_counts[1]))
                period_counts = [0, 0]
                if crypto is not None:
                    crypto.seal(shadow_period)
                shadow_period = {}
                push(t + self.delta_ns, REPORT)
            elif kind == TRAJECTORY:
                snapshot(t)
                push(t + self.step_ns, TRAJECTORY)

        if not traj_t or traj_t[-1] < now / NS:
            snapshot(now)
        if period_counts != [0, 0] or not period_messages:
            period_messages.append((len(period_messages), period_counts[0], period_counts[1]))
        if crypto is not None and shadow_period:
            crypto.seal(shadow_period)
        in_flight = sum(1 for e in queue if e[2] == ARRIVAL)
        return SimReport(
            config=cfg, corpus_digest=self.corpus.digest(), app_names=[a.name for a in self.corpus.apps],
            kernel_counts=self.kernel_counts, popularity=self.popularity, time_to_target_s=t_reach,
            quantile_time_s=quantile_time, end_time_s=now / NS, trajectory_t_s=np.array(traj_t),
            trajectory=np.array(traj, dtype=np.float64).reshape(len(traj_t), n),
            ingress_per_s=np.array(ingress), messages_emitted=emitted, messages_arrived=arrived,
            messages_dropped=dropped, messages_in_flight=in_flight, timeouts=timeouts,
            period_messages=period_messages, final_coverage=n_cov / self.kernel_counts,
            shadow=shadow_total, crypto_checked=crypto.checked if crypto else 0,
            crypto_mismatches=crypto.mismatches if crypto else 0, messages=kept)


class _CryptoPath:
    """End-to-end mode: every arriving message is encrypted and folded by a real AS."""

    def __init__(self, sim: Simulator):
        from ..crypto.private import keygen
        from ..server.store import AshStore
        from ..snippets import SnippetTables

        self.pk, self.sk = keygen(sim.cfg.key_bits)
        self.store = AshStore(self.pk, SnippetTables(), clock=lambda: 0.0)
        self.fingerprints = {}
        self.sim = sim
        self.checked = 0
        self.mismatches = 0
        self.canonical_of: dict[int, bytes] = {}

    def _fingerprint(self, a: int):
        if a not in self.fingerprints:
            app = self.sim.corpus.apps[a]
            self.fingerprints[a] = self.sim.corpus.fingerprint(app, self.sim.cfg.L)
        return self.fingerprints[a]

    def ingest(self, msg: Message) -> None:
        from ..wire import UpdateMessage, encode_update

        sh, sig = self._fingerprint(msg.app)
        bins = [self.pk.encrypt(int(v)) for v in msg.hist]
        frame = encode_update(UpdateMessage(DRAM_ID, sh, sig, self.pk.fingerprint, self.pk.ciphertext_bytes,
                                            len(msg.positions), bins))
        if not self.store.handle_update(frame):
            self.mismatches += 1
        if msg.app not in self.canonical_of:
            self.canonical_of[msg.app] = self.store.tables.classify(sh, sig, self.store.tau).canonical

    def seal(self, period: dict) -> None:
        """Decrypt the sealed period and compare it with the plaintext shadow sums."""
        from ..designer.console import decrypt_report

        zero = np.zeros(128, dtype=np.uint64)
        expected: dict[bytes, np.ndarray] = {}
        for a, hist in period.items():
            c = self.canonical_of[a]
            expected[c] = expected.get(c, zero) + hist
        got = {ash.canonical: np.array(ash.bins, dtype=np.uint64)
               for ash in decrypt_report(self.sk, self.store.emit_report())}
        for c in set(expected) | set(got):
            self.checked += 1
            if not np.array_equal(expected.get(c, zero), got.get(c, zero)):
                self.mismatches += 1


def run_sim(config: SimConfig, corpus: Corpus | None = None, keep_messages: bool = False) -> SimReport:
    return Simulator(config, corpus, keep_messages).run()


def single_app_corpus(kernel_count: int, latency_ns: int = 30_000, seed: int = 0) -> Corpus:
    """A one-app corpus with uniform kernel latency, for small exact checks."""
    from .corpus import App

    rng = np.random.default_rng([seed, kernel_count])
    app = App("app0000", np.arange(kernel_count, dtype=np.int32) % 10_000,
              np.full(kernel_count, latency_ns, dtype=np.int64),
              np.round(rng.random(kernel_count) * 100, 3), np.round(rng.random(kernel_count) * 100, 3))
    base = generate_corpus(CorpusSpec(n_apps=1, seed=seed))
    return Corpus(CorpusSpec(n_apps=1, seed=seed), [app], base.pool, base.alpha)
