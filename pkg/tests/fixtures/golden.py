"""Messages behind the committed golden frames.

Run as a script to regenerate the .bin files; the tests only read them.
"""
from pathlib import Path

from penrose.snippets import minhash, snippet_hash
from penrose.wire import (ReportEntry, ReportMessage, ReportRequest, UpdateMessage, encode_report,
                          encode_request, encode_update)

HERE = Path(__file__).parent
FINGERPRINT = bytes(range(1, 9))
WIDTH = 16


def _snippet():
    sig = minhash([f"gemm_k{i % 5}" for i in range(40)])
    return snippet_hash(sig), sig


def update_message() -> UpdateMessage:
    sh, sig = _snippet()
    return UpdateMessage(1, sh, sig, FINGERPRINT, WIDTH, 10_000,
                         [(i * 0x0101010101) << 40 | i for i in range(1, 9)])


def announce_message() -> UpdateMessage:
    sh, sig = _snippet()
    return UpdateMessage(0, sh, sig, FINGERPRINT, 0, 0, [])


def report_message() -> ReportMessage:
    sh, _ = _snippet()
    return ReportMessage(7, FINGERPRINT, WIDTH, [
        ReportEntry(sh, 0x8001, 3, [5, 6]),
        ReportEntry(b"\x00" * 32, 1, 1, [2**127 - 1, 1]),
    ])


def request_message() -> ReportRequest:
    return ReportRequest(7)


FRAMES = {
    "update.bin": lambda: encode_update(update_message()),
    "announce.bin": lambda: encode_update(announce_message()),
    "report.bin": lambda: encode_report(report_message()),
    "request.bin": lambda: encode_request(request_message()),
}

if __name__ == "__main__":
    for name, make in FRAMES.items():
        (HERE / name).write_bytes(make())
