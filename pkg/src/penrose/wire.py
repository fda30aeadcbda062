"""Binary framing for updates, reports and report requests.

Every frame is ``u32 length ‖ body`` where ``length`` counts the bytes after
the prefix and ``body`` is::

    "PNRS" ‖ version u8 ‖ msg_type u8 ‖ payload ‖ crc32 u32

The CRC covers everything from the magic through the payload.  All integers
are little-endian; ciphertexts are fixed-width big-endian integers as
produced by :meth:`PublicKey.ct_to_bytes`.  See ``docs/protocol.md``.
"""
from __future__ import annotations

import enum
import struct
import zlib
from dataclasses import dataclass, field
from typing import BinaryIO

from .snippets import HASH_BYTES, SIGNATURE_BYTES, MinHashSignature

MAGIC = b"PNRS"
VERSION = 1
MSG_UPDATE = 0x01
MSG_REPORT = 0x02
MSG_REPORT_REQUEST = 0x03

PERIOD_CURRENT = (1 << 64) - 1
PERIOD_LATEST_SEALED = (1 << 64) - 2

MAX_FRAME = 64 * 1024 * 1024

_PREFIX = struct.Struct("<I")
_HEAD = struct.Struct("<4sBB")
# root_seed_id, counter_id, snippet_hash, minhash, key_fp, bin_count, ct_width, sample_count
_UPDATE = struct.Struct(f"<IH{HASH_BYTES}s{SIGNATURE_BYTES}s8sHIQ")
# period_id, key_fp, ct_width, entry_count
_REPORT = struct.Struct("<Q8sII")
# snippet_hash, counter_id, contribution_count, bin_count
_ENTRY = struct.Struct(f"<{HASH_BYTES}sHQH")
_REQUEST = struct.Struct("<Q")
_CRC = struct.Struct("<I")


class ErrorCode(enum.Enum):
    TRUNCATED = "truncated"
    BAD_LENGTH = "bad_length"
    BAD_MAGIC = "bad_magic"
    BAD_CRC = "bad_crc"
    BAD_VERSION = "bad_version"
    BAD_TYPE = "bad_type"
    MALFORMED = "malformed"


class ProtocolError(Exception):
    def __init__(self, code: ErrorCode, detail: str = ""):
        super().__init__(f"{code.value}: {detail}" if detail else code.value)
        self.code = code


@dataclass
class UpdateMessage:
    counter_id: int
    snippet_hash: bytes
    minhash: MinHashSignature
    key_fingerprint: bytes
    ct_width: int
    sample_count: int
    bins: list = field(default_factory=list)
    version: int = VERSION

    @property
    def root_seed_id(self) -> int:
        return self.minhash.family_id

    @property
    def bin_count(self) -> int:
        return len(self.bins)

    @property
    def is_announce(self) -> bool:
        return not self.bins


@dataclass
class ReportEntry:
    snippet_hash: bytes
    counter_id: int
    contribution_count: int
    bins: list


@dataclass
class ReportMessage:
    period_id: int
    key_fingerprint: bytes
    ct_width: int
    entries: list = field(default_factory=list)

    def sorted_entries(self) -> list:
        return sorted(self.entries, key=lambda e: (e.snippet_hash, e.counter_id))


@dataclass
class ReportRequest:
    period_id: int = PERIOD_CURRENT


def _frame(msg_type: int, payload: bytes) -> bytes:
    body = _HEAD.pack(MAGIC, VERSION, msg_type) + payload
    body += _CRC.pack(zlib.crc32(body))
    return _PREFIX.pack(len(body)) + body


def _pack_bins(bins, width: int) -> bytes:
    return b"".join(int(c).to_bytes(width, "big") for c in bins)


def _unpack_bins(buf: bytes, off: int, count: int, width: int) -> list[int]:
    return [int.from_bytes(buf[off + i * width: off + (i + 1) * width], "big") for i in range(count)]


def update_size(bin_count: int, ct_width: int) -> int:
    """Total bytes on the wire for one update, prefix included."""
    return _PREFIX.size + _HEAD.size + _UPDATE.size + bin_count * ct_width + _CRC.size


def encode_update(msg: UpdateMessage) -> bytes:
    if len(msg.snippet_hash) != HASH_BYTES or len(msg.key_fingerprint) != 8:
        raise ValueError("snippet hash must be 32 bytes and key fingerprint 8 bytes")
    if msg.bins and msg.ct_width <= 0:
        raise ValueError("ct_width must be positive when bins are present")
    payload = _UPDATE.pack(msg.root_seed_id, msg.counter_id, msg.snippet_hash, msg.minhash.to_bytes(),
                           msg.key_fingerprint, len(msg.bins), msg.ct_width, msg.sample_count)
    return _frame(MSG_UPDATE, payload + _pack_bins(msg.bins, msg.ct_width))


def encode_report(msg: ReportMessage) -> bytes:
    entries = msg.sorted_entries()
    parts = [_REPORT.pack(msg.period_id, msg.key_fingerprint, msg.ct_width, len(entries))]
    for e in entries:
        parts.append(_ENTRY.pack(e.snippet_hash, e.counter_id, e.contribution_count, len(e.bins)))
        parts.append(_pack_bins(e.bins, msg.ct_width))
    return _frame(MSG_REPORT, b"".join(parts))


def encode_request(req: ReportRequest) -> bytes:
    return _frame(MSG_REPORT_REQUEST, _REQUEST.pack(req.period_id))


def _open(frame: bytes) -> tuple[int, bytes]:
    """Validate framing; return (msg_type, payload)."""
    if len(frame) < _PREFIX.size:
        raise ProtocolError(ErrorCode.TRUNCATED, "missing length prefix")
    (length,) = _PREFIX.unpack_from(frame)
    if length > MAX_FRAME or length < _HEAD.size + _CRC.size:
        raise ProtocolError(ErrorCode.BAD_LENGTH, f"length {length}")
    if len(frame) < _PREFIX.size + length:
        raise ProtocolError(ErrorCode.TRUNCATED, f"have {len(frame) - 4} of {length} bytes")
    if len(frame) > _PREFIX.size + length:
        raise ProtocolError(ErrorCode.BAD_LENGTH, "trailing bytes after frame")
    body = frame[_PREFIX.size:]
    magic, version, msg_type = _HEAD.unpack_from(body)
    if magic != MAGIC:
        raise ProtocolError(ErrorCode.BAD_MAGIC, repr(magic))
    (crc,) = _CRC.unpack_from(body, len(body) - _CRC.size)
    if zlib.crc32(body[:-_CRC.size]) != crc:
        raise ProtocolError(ErrorCode.BAD_CRC)
    if version != VERSION:
        raise ProtocolError(ErrorCode.BAD_VERSION, str(version))
    if msg_type not in (MSG_UPDATE, MSG_REPORT, MSG_REPORT_REQUEST):
        raise ProtocolError(ErrorCode.BAD_TYPE, f"{msg_type:#04x}")
    return msg_type, body[_HEAD.size:-_CRC.size]


def peek_type(frame: bytes) -> int:
    return _open(frame)[0]


def _expect(frame: bytes, want: int) -> bytes:
    msg_type, payload = _open(frame)
    if msg_type != want:
        raise ProtocolError(ErrorCode.BAD_TYPE, f"expected {want:#04x}, got {msg_type:#04x}")
    return payload


def decode_update(frame: bytes) -> UpdateMessage:
    p = _expect(frame, MSG_UPDATE)
    if len(p) < _UPDATE.size:
        raise ProtocolError(ErrorCode.MALFORMED, "short update header")
    seed, cid, sh, mh, fp, nbins, width, samples = _UPDATE.unpack_from(p)
    if len(p) != _UPDATE.size + nbins * width:
        raise ProtocolError(ErrorCode.MALFORMED, f"{nbins} bins of {width} bytes do not fit payload")
    if nbins and width == 0:
        raise ProtocolError(ErrorCode.MALFORMED, "zero ciphertext width")
    return UpdateMessage(cid, sh, MinHashSignature.from_bytes(mh, seed), fp, width, samples,
                         _unpack_bins(p, _UPDATE.size, nbins, width))


def decode_report(frame: bytes) -> ReportMessage:
    p = _expect(frame, MSG_REPORT)
    if len(p) < _REPORT.size:
        raise ProtocolError(ErrorCode.MALFORMED, "short report header")
    period, fp, width, count = _REPORT.unpack_from(p)
    off, entries = _REPORT.size, []
    for _ in range(count):
        if len(p) < off + _ENTRY.size:
            raise ProtocolError(ErrorCode.MALFORMED, "entry header past end")
        sh, cid, contrib, nbins = _ENTRY.unpack_from(p, off)
        off += _ENTRY.size
        if len(p) < off + nbins * width:
            raise ProtocolError(ErrorCode.MALFORMED, "entry bins past end")
        entries.append(ReportEntry(sh, cid, contrib, _unpack_bins(p, off, nbins, width)))
        off += nbins * width
    if off != len(p):
        raise ProtocolError(ErrorCode.MALFORMED, "trailing bytes in report")
    return ReportMessage(period, fp, width, entries)


def decode_request(frame: bytes) -> ReportRequest:
    p = _expect(frame, MSG_REPORT_REQUEST)
    if len(p) != _REQUEST.size:
        raise ProtocolError(ErrorCode.MALFORMED, "request payload size")
    return ReportRequest(_REQUEST.unpack(p)[0])


def read_frame(stream: BinaryIO) -> bytes:
    """Read exactly one length-prefixed frame from a blocking stream."""
    prefix = _read_exact(stream, _PREFIX.size)
    (length,) = _PREFIX.unpack(prefix)
    if length > MAX_FRAME:
        raise ProtocolError(ErrorCode.BAD_LENGTH, f"length {length}")
    return prefix + _read_exact(stream, length)


def _read_exact(stream: BinaryIO, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            raise ProtocolError(ErrorCode.TRUNCATED, f"stream ended after {len(buf)} of {n} bytes")
        buf += chunk
    return bytes(buf)
