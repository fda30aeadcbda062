"""asyncio front end for the aggregation server.

One frame per connection.  Updates are acknowledged with a single status
byte after they are folded (or dropped); report requests are answered with a
report frame.  In-flight folds are bounded; past the bound new updates are
dropped, which costs coverage but never correctness.
"""
from __future__ import annotations

import asyncio
import concurrent.futures
import logging
import struct

from ..transport import ACK_DROPPED, ACK_OK
from ..wire import (MAX_FRAME, MSG_REPORT_REQUEST, MSG_UPDATE, ErrorCode, ProtocolError,
                    decode_request, encode_report, peek_type)
from .store import AshStore

log = logging.getLogger(__name__)

_PREFIX = struct.Struct("<I")


class AggregationService:
    def __init__(self, store: AshStore, queue_bound: int = 1024, workers: int = 2,
                 report_interval: float | None = None, read_timeout: float = 30.0):
        self.store = store
        self.queue_bound = queue_bound
        self.workers = workers
        self.report_interval = report_interval
        self.read_timeout = read_timeout
        self._inflight = 0
        self._pool = concurrent.futures.ThreadPoolExecutor(max_workers=workers)
        self._servers: list[asyncio.base_events.Server] = []
        self._ticker: asyncio.Task | None = None

    async def _read_frame(self, reader: asyncio.StreamReader) -> bytes:
        prefix = await asyncio.wait_for(reader.readexactly(4), self.read_timeout)
        (length,) = _PREFIX.unpack(prefix)
        if length > MAX_FRAME:
            raise ProtocolError(ErrorCode.BAD_LENGTH, str(length))
        return prefix + await asyncio.wait_for(reader.readexactly(length), self.read_timeout)

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        loop = asyncio.get_running_loop()
        try:
            try:
                frame = await self._read_frame(reader)
            except asyncio.IncompleteReadError:
                self.store.record_drop("truncated")
                return
            except ProtocolError as exc:
                self.store.record_drop(exc.code.value)
                writer.write(ACK_DROPPED)
                return
            try:
                msg_type = peek_type(frame)
            except ProtocolError as exc:
                self.store.record_drop(exc.code.value)
                writer.write(ACK_DROPPED)
                return
            if msg_type == MSG_REPORT_REQUEST:
                req = decode_request(frame)
                report = await loop.run_in_executor(self._pool, self.store.report_for, req.period_id)
                writer.write(encode_report(report))
                return
            if msg_type != MSG_UPDATE:
                self.store.record_drop("unexpected_type")
                writer.write(ACK_DROPPED)
                return
            if self._inflight >= self.queue_bound:
                self.store.record_drop("backpressure")
                writer.write(ACK_DROPPED)
                return
            self._inflight += 1
            try:
                outcome = await loop.run_in_executor(self._pool, self.store.handle_update, frame)
            finally:
                self._inflight -= 1
            writer.write(ACK_OK if outcome.accepted else ACK_DROPPED)
        except (asyncio.TimeoutError, ConnectionError) as exc:
            self.store.record_drop("connection")
            log.debug("connection error: %s", exc)
        except Exception:  # never let one connection take the service down
            log.exception("unexpected error handling connection")
            self.store.record_drop("internal")
        finally:
            try:
                await writer.drain()
                writer.close()
                await writer.wait_closed()
            except (ConnectionError, OSError):
                pass

    async def _metrics(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        lines = [f"{k} {v}" for k, v in self.store.metrics().items()]
        lines.append(f"inflight {self._inflight}")
        writer.write(("\n".join(lines) + "\n").encode())
        try:
            await writer.drain()
        finally:
            writer.close()

    async def _tick(self) -> None:
        loop = asyncio.get_running_loop()
        while True:
            await asyncio.sleep(self.report_interval)
            report = await loop.run_in_executor(self._pool, self.store.emit_report)
            log.info("sealed period %d with %d entries", report.period_id, len(report.entries))

    async def start(self, host: str, port: int, metrics_port: int | None = None) -> tuple:
        srv = await asyncio.start_server(self._handle, host, port, backlog=4096)
        self._servers.append(srv)
        addrs = [srv.sockets[0].getsockname()[:2]]
        if metrics_port is not None:
            msrv = await asyncio.start_server(self._metrics, host, metrics_port)
            self._servers.append(msrv)
            addrs.append(msrv.sockets[0].getsockname()[:2])
        if self.report_interval:
            self._ticker = asyncio.create_task(self._tick())
        return tuple(addrs)

    async def stop(self) -> None:
        if self._ticker is not None:
            self._ticker.cancel()
        for srv in self._servers:
            srv.close()
            await srv.wait_closed()
        self._pool.shutdown(wait=True)

    async def serve_forever(self, host: str, port: int, metrics_port: int | None = None) -> None:
        addrs = await self.start(host, port, metrics_port)
        log.info("listening on %s", addrs)
        try:
            await asyncio.Event().wait()
        finally:
            await self.stop()
