"""ds-console: key custody, report retrieval and analyses for the designer."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .. import plots
from ..crypto.private import KeyFileError, PrivateKey, keygen
from ..crypto.public import CryptoError
from ..designer.analytics import (AnalyticsError, AppRegistry, ash_rows, breakdown_rows, coverage_report,
                                  error_report, export_analytics)
from ..designer.console import fetch_and_decrypt, load_ashes, merge_ashes, save_ashes
from ..transport import TcpTransport, TransportError, parse_addr
from ..wire import PERIOD_CURRENT, PERIOD_LATEST_SEALED
from ._common import fail, read_passphrase, setup_logging

PUBLIC_FILE = "paillier.pub"
PRIVATE_FILE = "paillier.key"
POSITIONS_FILE = "positions.json"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ds-console", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="cmd", required=True)

    k = sub.add_parser("keygen", help="generate a Paillier key pair")
    k.add_argument("--bits", type=int, default=2048, choices=(1024, 2048, 3072))
    k.add_argument("--out", required=True, help="directory for the key files")
    k.add_argument("--passphrase-file")

    f = sub.add_parser("fetch", help="fetch and decrypt the server's report")
    f.add_argument("--server", required=True)
    f.add_argument("--key", required=True, help="private key file")
    f.add_argument("--out", required=True, help="output directory")
    f.add_argument("--period", default="current", help="current, latest or a period number")
    f.add_argument("--passphrase-file")

    a = sub.add_parser("analyze", help="run an analysis over decrypted histograms")
    a.add_argument("kind", choices=("breakdown", "coverage", "error"))
    a.add_argument("--in", dest="indir", required=True, help="directory holding ash.json")
    a.add_argument("--registry", help="app registry JSON (coverage)")
    a.add_argument("--truth", help="ground-truth histograms JSON, canonical hex -> bins (error)")
    a.add_argument("--threshold", type=float, default=1 / 3, help="low-utilization threshold (breakdown)")
    a.add_argument("--out", required=True, help="CSV (or .json) output; a PNG is written beside it")
    return p


def _period(text: str) -> int:
    if text == "current":
        return PERIOD_CURRENT
    if text == "latest":
        return PERIOD_LATEST_SEALED
    return int(text)


def cmd_keygen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    passphrase = read_passphrase(args.passphrase_file, confirm=True)
    pk, sk = keygen(args.bits)
    pk.save(out / PUBLIC_FILE)
    sk.save(out / PRIVATE_FILE, passphrase)
    print(json.dumps({"public": str(out / PUBLIC_FILE), "private": str(out / PRIVATE_FILE),
                      "fingerprint": pk.fingerprint.hex(), "bits": pk.bits}))
    return 0


def cmd_fetch(args) -> int:
    sk = PrivateKey.load(args.key, read_passphrase(args.passphrase_file))
    host, port = parse_addr(args.server)
    ashes = fetch_and_decrypt(TcpTransport(host, port), sk, _period(args.period))
    path = save_ashes(args.out, ashes)
    export_analytics(Path(args.out) / "ash.csv", "ash", ash_rows(ashes))
    print(json.dumps({"histograms": len(ashes), "out": str(path)}))
    return 0


def cmd_analyze(args) -> int:
    ashes = load_ashes(args.indir)
    out = Path(args.out)
    png = out.with_suffix(".png")
    if args.kind == "breakdown":
        rows = breakdown_rows(merge_ashes(ashes).values(), args.threshold)
        export_analytics(out, "breakdown", rows)
        if rows:
            plots.breakdown_bars(rows, png)
    elif args.kind == "coverage":
        if not args.registry:
            raise AnalyticsError("coverage needs --registry")
        registry = AppRegistry.loads(Path(args.registry).read_text())
        pos_file = Path(args.indir) / POSITIONS_FILE
        observed = ({bytes.fromhex(h): v for h, v in json.loads(pos_file.read_text()).items()}
                    if pos_file.exists() else {})
        rep = coverage_report(ashes, registry, observed)
        rows = [{"app": name, "kernel_count": registry.apps[name].kernel_count, "coverage": c}
                for name, c in sorted(rep.coverage.items())]
        export_analytics(out, "coverage", rows)
        if rows:
            plots.coverage_bars(rows, png)
        for h in rep.unknown_canonicals:
            print(f"unknown canonical {h.hex()}", file=sys.stderr)
    else:
        if not args.truth:
            raise AnalyticsError("error analysis needs --truth")
        truth = {bytes.fromhex(h): v for h, v in json.loads(Path(args.truth).read_text()).items()}
        reports, rows = [], []
        for (canon, cid), ash in sorted(merge_ashes(ashes).items()):
            if canon not in truth:
                continue
            r = error_report(ash.bins, truth[canon])
            reports.append(r)
            rows += [{"histogram": f"{canon.hex()}:{cid}", "bin": i, "truth_fraction": float(t),
                      "sampled_fraction": float(s), "relative_error": float(e)}
                     for i, (t, s, e) in enumerate(zip(r.truth_fraction, r.sampled_fraction, r.relative_error))]
        export_analytics(out, "error", rows)
        if reports:
            plots.error_scatter(reports, png)
    print(json.dumps({"analysis": args.kind, "out": str(out)}))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    handlers = {"keygen": cmd_keygen, "fetch": cmd_fetch, "analyze": cmd_analyze}
    try:
        return handlers[args.cmd](args)
    except (KeyFileError, CryptoError) as exc:
        return fail(str(exc))
    except TransportError as exc:
        return fail(f"transport: {exc}", 3)
    except (AnalyticsError, OSError, ValueError) as exc:
        return fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
