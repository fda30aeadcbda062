"""Designer-side key custody, report retrieval and decryption."""
from __future__ import annotations

import json
import time
from pathlib import Path
from typing import Iterable

from ..crypto.private import PrivateKey
from ..crypto.public import KeyMismatchError
from ..transport import Transport, TransportError
from ..wire import PERIOD_CURRENT, ReportMessage, ReportRequest, decode_report, encode_request
from .analytics import DecryptedASH

ASH_FILE = "ash.json"


def decrypt_report(sk: PrivateKey, report: ReportMessage) -> list[DecryptedASH]:
    if report.entries and report.key_fingerprint != sk.public.fingerprint:
        raise KeyMismatchError(f"report encrypted for key {report.key_fingerprint.hex()}, "
                               f"console holds {sk.public.fingerprint.hex()}")
    return [DecryptedASH(e.snippet_hash, e.counter_id, tuple(sk.decrypt(c) for c in e.bins),
                         e.contribution_count, report.period_id)
            for e in report.sorted_entries()]


def fetch_report(transport: Transport, period_id: int = PERIOD_CURRENT, retries: int = 3,
                 backoff: float = 0.5) -> ReportMessage:
    for attempt in range(retries + 1):
        try:
            return decode_report(transport.request(encode_request(ReportRequest(period_id))))
        except TransportError:
            if attempt == retries:
                raise
            time.sleep(backoff * 2 ** attempt)
    raise AssertionError("unreachable")


def fetch_and_decrypt(transport: Transport, sk: PrivateKey, period_id: int = PERIOD_CURRENT,
                      retries: int = 3) -> list[DecryptedASH]:
    return decrypt_report(sk, fetch_report(transport, period_id, retries))


def save_ashes(out_dir: str | Path, ashes: Iterable[DecryptedASH]) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / ASH_FILE
    path.write_text(json.dumps([a.to_dict() for a in ashes], indent=1) + "\n")
    return path


def load_ashes(in_dir: str | Path) -> list[DecryptedASH]:
    path = Path(in_dir)
    if path.is_dir():
        path = path / ASH_FILE
    return [DecryptedASH.from_dict(d) for d in json.loads(path.read_text())]


def merge_ashes(ashes: Iterable[DecryptedASH]) -> dict:
    """Sum bins across periods per (canonical, counter)."""
    out: dict[tuple[bytes, int], DecryptedASH] = {}
    for a in ashes:
        key = (a.canonical, a.counter_id)
        prev = out.get(key)
        if prev is None:
            out[key] = a
        else:
            out[key] = DecryptedASH(a.canonical, a.counter_id,
                                    tuple(x + y for x, y in zip(prev.bins, a.bins)),
                                    prev.contribution_count + a.contribution_count,
                                    max(prev.period_id, a.period_id))
    return out
