"""Message transports.

Every message travels over its own connection; nothing is reused between
messages.  Through a Tor SOCKS port, the SOCKS5 transport sends a fresh
random username/password per connection, which Tor's stream isolation turns
into a separate circuit per message.

The server answers each update with a one-byte status (``ACK_OK`` or
``ACK_DROPPED``) and each report request with a report frame.
"""
from __future__ import annotations

import io
import random
import secrets
import socket
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import socks

from .wire import read_frame

ACK_OK = b"\x00"
ACK_DROPPED = b"\x01"


class TransportError(OSError):
    pass


class Transport(Protocol):
    def send(self, frame: bytes) -> bytes:
        """Deliver one frame on a new connection; return the one-byte status."""

    def request(self, frame: bytes) -> bytes:
        """Deliver one frame and read one response frame."""


def parse_addr(addr: str, default_port: int | None = None) -> tuple[str, int]:
    host, sep, port = addr.rpartition(":")
    if not sep:
        if default_port is None:
            raise ValueError(f"address {addr!r} needs host:port")
        return addr, default_port
    return host.strip("[]") or "127.0.0.1", int(port)


class _SocketTransport:
    timeout: float

    def _connect(self) -> socket.socket:
        raise NotImplementedError

    def send(self, frame: bytes) -> bytes:
        try:
            with self._connect() as s:
                s.sendall(frame)
                ack = s.recv(1)
        except OSError as exc:
            raise TransportError(str(exc)) from exc
        if not ack:
            raise TransportError("connection closed before acknowledgement")
        return ack

    def request(self, frame: bytes) -> bytes:
        try:
            with self._connect() as s:
                s.sendall(frame)
                return read_frame(s.makefile("rb"))
        except OSError as exc:
            raise TransportError(str(exc)) from exc


@dataclass
class TcpTransport(_SocketTransport):
    host: str
    port: int
    timeout: float = 30.0

    def _connect(self) -> socket.socket:
        return socket.create_connection((self.host, self.port), timeout=self.timeout)


@dataclass
class Socks5Transport(_SocketTransport):
    proxy_host: str
    proxy_port: int
    host: str
    port: int
    timeout: float = 60.0
    isolate: bool = True

    def credentials(self) -> tuple[str, str] | tuple[None, None]:
        if not self.isolate:
            return None, None
        return secrets.token_hex(8), secrets.token_hex(8)

    def _connect(self) -> socket.socket:
        user, password = self.credentials()
        s = socks.socksocket()
        s.set_proxy(socks.SOCKS5, self.proxy_host, self.proxy_port, rdns=True,
                    username=user, password=password)
        s.settimeout(self.timeout)
        try:
            s.connect((self.host, self.port))
        except (socks.ProxyError, OSError) as exc:
            s.close()
            raise TransportError(f"SOCKS5 connect failed: {exc}") from exc
        return s


@dataclass
class LoopbackTransport:
    """In-process delivery to a handler; used by tests and the simulator."""

    handler: Callable[[bytes], bytes]
    request_handler: Callable[[bytes], bytes] | None = None
    sent: list = field(default_factory=list)
    record: bool = False

    def send(self, frame: bytes) -> bytes:
        if self.record:
            self.sent.append(frame)
        return self.handler(frame)

    def request(self, frame: bytes) -> bytes:
        if self.request_handler is None:
            raise TransportError("loopback has no request handler")
        return read_frame(io.BytesIO(self.request_handler(frame)))


@dataclass
class DeliveryStats:
    sent: int = 0
    acked: int = 0
    dropped_by_server: int = 0
    failed: int = 0
    retries: int = 0


def send_with_retry(transport: Transport, frame: bytes, stats: DeliveryStats, max_retries: int = 3,
                    base_delay: float = 0.5, rng: random.Random | None = None,
                    sleep: Callable[[float], None] = time.sleep) -> bool:
    """Bounded retry with full jitter; gives up silently after ``max_retries``."""
    rng = rng or random.Random()
    stats.sent += 1
    for attempt in range(max_retries + 1):
        try:
            ack = transport.send(frame)
        except TransportError:
            if attempt == max_retries:
                stats.failed += 1
                return False
            stats.retries += 1
            sleep(rng.uniform(0, base_delay * 2 ** attempt))
            continue
        if ack == ACK_OK:
            stats.acked += 1
            return True
        stats.dropped_by_server += 1
        return False
    return False
