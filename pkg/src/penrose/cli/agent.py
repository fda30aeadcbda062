"""agent: replay a kernel trace through the sampling agent and ship updates."""
from __future__ import annotations

import argparse
import json
import sys

from ..agent.client import Agent, VirtualClock, WallClock
from ..agent.trace import TraceError, ingest_trace
from ..config import AgentConfig, ConfigError
from ..crypto.public import CryptoError, PublicKey
from ..histogram import CounterRegistry, default_registry
from ..transport import Socks5Transport, TcpTransport, TransportError, parse_addr
from ._common import fail, setup_logging


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="agent", description=__doc__)
    p.add_argument("--trace", required=True, help="kernel trace file")
    p.add_argument("--config", help="agent config file ([agent] section)")
    p.add_argument("--pubkey", required=True, help="designer public key file")
    p.add_argument("--server", required=True, help="aggregation server host:port")
    p.add_argument("--socks5", help="SOCKS5 proxy host:port; each update uses a fresh circuit")
    p.add_argument("--seed", type=int, help="RNG seed for offsets and rotation")
    p.add_argument("--load-factor", type=float, help="override the configured load factor")
    p.add_argument("--clock", choices=("virtual", "wall"), default="virtual")
    p.add_argument("--time-scale", type=float, default=1.0, help="wall clock speed-up factor")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        cfg = AgentConfig.load(args.config) if args.config else AgentConfig()
        if args.load_factor is not None:
            cfg.load_factor = args.load_factor
            cfg.validate()
        registry = CounterRegistry.load(cfg.registry) if cfg.registry else default_registry()
        pk = PublicKey.load(args.pubkey)
        host, port = parse_addr(args.server)
    except (ConfigError, CryptoError, OSError, ValueError) as exc:
        return fail(str(exc))
    if args.socks5:
        ph, pp = parse_addr(args.socks5)
        transport = Socks5Transport(ph, pp, host, port)
    else:
        transport = TcpTransport(host, port)
    clock = VirtualClock() if args.clock == "virtual" else WallClock(args.time_scale)
    agent = Agent(cfg, registry, pk, transport, seed=args.seed, clock=clock)
    diagnostics: list = []
    try:
        stats = agent.run(ingest_trace(args.trace, diagnostics))
    except (TraceError, OSError) as exc:
        return fail(str(exc))
    except TransportError as exc:
        return fail(f"transport: {exc}", 3)
    for d in diagnostics:
        print(f"warning: {d}", file=sys.stderr)
    print(json.dumps({"kernels": stats.kernels, "sampled": stats.sampled, "updates": stats.updates,
                      "announces": stats.announces, "missing_counter": stats.missing_counter,
                      "acked": stats.delivery.acked, "failed": stats.delivery.failed,
                      "skipped_lines": len(diagnostics)}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
