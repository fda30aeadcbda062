import asyncio
import threading
from contextlib import contextmanager

import numpy as np
import pytest

from penrose.crypto.private import keygen
from penrose.server.service import AggregationService
from penrose.snippets import minhash, snippet_hash

# One line per acceptance criterion, printed at the end of the run.
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def keys():
    """One 1024-bit key pair shared by the whole run."""
    return keygen(1024)


@pytest.fixture(scope="session")
def pk(keys):
    return keys[0]


@pytest.fixture(scope="session")
def sk(keys):
    return keys[1]


def names(prefix: str, n: int) -> list[str]:
    return [f"{prefix}_{i}" for i in range(n)]


def fingerprint(kernels):
    sig = minhash(kernels)
    return snippet_hash(sig), sig


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@contextmanager
def serving(store, **kw):
    """Run an AggregationService on an ephemeral port in a background thread."""
    loop = asyncio.new_event_loop()
    service = AggregationService(store, **kw)
    ready = threading.Event()
    box = {}

    def run():
        asyncio.set_event_loop(loop)
        box["addrs"] = loop.run_until_complete(service.start("127.0.0.1", 0, metrics_port=0))
        ready.set()
        loop.run_forever()

    th = threading.Thread(target=run, daemon=True)
    th.start()
    ready.wait(10)
    try:
        yield box["addrs"]
    finally:
        asyncio.run_coroutine_threadsafe(service.stop(), loop).result(30)
        loop.call_soon_threadsafe(loop.stop)
        th.join(10)


def brute_force_worst_bin(gpus, A, delta_s, min_period_s, w_max):
    """Play every client at full speed for one period and add up the heaviest bin."""
    total = 0
    for _ in range(gpus):
        t = 0.0
        while t < delta_s:  # a message may start at any instant inside the period
            total += sum(w_max for _ in range(A))
            t += min_period_s
    return total


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
