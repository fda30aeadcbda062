"""as-server: the untrusted aggregation server.  Holds only the public key."""
from __future__ import annotations

import argparse
import asyncio
import sys

from ..config import ConfigError, parse_duration
from ..crypto.public import CryptoError, PublicKey
from ..server.service import AggregationService
from ..server.store import CUMULATIVE, WINDOWED, AshStore
from ..snippets import DEFAULT_TAU, SnippetTables
from ..transport import parse_addr
from ._common import fail, setup_logging


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="as-server", description=__doc__)
    p.add_argument("--bind", required=True, help="host:port to listen on")
    p.add_argument("--pubkey", required=True, help="designer public key file")
    p.add_argument("--state-dir", required=True, help="directory for the snippet tables")
    p.add_argument("--report-interval", default="1d", help="report period, e.g. 1d, 30m, 45s")
    p.add_argument("--mode", choices=(WINDOWED, CUMULATIVE), default=WINDOWED)
    p.add_argument("--tau", type=float, default=DEFAULT_TAU, help="similarity threshold")
    p.add_argument("--queue-bound", type=int, default=1024, help="updates in flight before shedding")
    p.add_argument("--workers", type=int, default=2, help="fold threads")
    p.add_argument("--metrics-port", type=int, help="plain-text metrics listener")
    p.add_argument("--root-seed-id", type=int, default=1, help="min-hash family id")
    p.add_argument("-v", "--verbose", action="count", default=1)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        pk = PublicKey.load(args.pubkey)
        interval = parse_duration(args.report_interval)
        host, port = parse_addr(args.bind)
        tables = SnippetTables(args.state_dir, args.root_seed_id)
    except (ConfigError, CryptoError, OSError, ValueError) as exc:
        return fail(str(exc))
    if interval <= 0:
        return fail("report interval must be positive")
    store = AshStore(pk, tables, args.tau, args.mode)
    service = AggregationService(store, args.queue_bound, args.workers, interval)
    try:
        asyncio.run(service.serve_forever(host, port, args.metrics_port))
    except KeyboardInterrupt:
        pass
    finally:
        tables.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
