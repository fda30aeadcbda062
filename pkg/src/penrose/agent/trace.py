"""Kernel trace files.

One kernel per line::

    name,duration_ns,counter_id:value[,counter_id:value...]

Blank lines and lines starting with ``#`` are ignored.  Kernel names may
themselves contain commas (template arguments do), so lines are parsed from
the right: trailing ``id:value`` fields are counters, the field before them
is the duration and whatever remains is the name.
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, TextIO

_COUNTER = re.compile(r"^\s*(\d+)\s*:\s*(\S+)\s*$")


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class KernelRecord:
    name: str
    duration_ns: int
    counters: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.name:
            raise TraceError("empty kernel name")
        if self.duration_ns <= 0:
            raise TraceError(f"duration must be positive, got {self.duration_ns}")
        for cid, v in self.counters.items():
            if not (math.isfinite(v) and v >= 0):
                raise TraceError(f"counter {cid} value {v} must be finite and >= 0")

    def to_line(self) -> str:
        fields = [self.name, str(self.duration_ns)]
        fields += [f"{cid}:{self.counters[cid]!r}" for cid in sorted(self.counters)]
        return ",".join(fields)


@dataclass(frozen=True)
class Diagnostic:
    line_no: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line_no}: {self.message}"


def parse_line(line: str) -> KernelRecord:
    parts = line.rstrip("\r\n").split(",")
    counters: dict[int, float] = {}
    while len(parts) > 2:
        m = _COUNTER.match(parts[-1])
        if not m:
            break
        cid = int(m.group(1))
        if cid in counters:
            raise TraceError(f"duplicate counter {cid}")
        try:
            counters[cid] = float(m.group(2))
        except ValueError:
            raise TraceError(f"bad counter value {m.group(2)!r}") from None
        parts.pop()
    if not counters:
        raise TraceError("expected name,duration_ns,counter_id:value[,...]")
    if len(parts) < 2:
        raise TraceError("missing duration")
    try:
        duration = int(parts[-1].strip())
    except ValueError:
        raise TraceError(f"bad duration {parts[-1].strip()!r}") from None
    name = ",".join(parts[:-1])
    return KernelRecord(name, duration, dict(sorted(counters.items())))


def iter_records(lines: Iterable[str], diagnostics: list[Diagnostic] | None = None) -> Iterator[KernelRecord]:
    """Yield records in order; bad lines go to ``diagnostics`` (or raise if None)."""
    for no, line in enumerate(lines, 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            yield parse_line(line)
        except TraceError as exc:
            if diagnostics is None:
                raise TraceError(f"line {no}: {exc}") from None
            diagnostics.append(Diagnostic(no, str(exc)))


def ingest_trace(path: str | Path, diagnostics: list[Diagnostic] | None = None) -> Iterator[KernelRecord]:
    with open(path, encoding="utf-8") as fh:
        yield from iter_records(fh, diagnostics)


def read_trace(path: str | Path) -> tuple[list[KernelRecord], list[Diagnostic]]:
    diags: list[Diagnostic] = []
    return list(ingest_trace(path, diags)), diags


def write_trace(records: Iterable[KernelRecord], out: TextIO, header: str | None = None) -> int:
    n = 0
    if header:
        for ln in header.splitlines():
            out.write(f"# {ln}\n")
    for rec in records:
        out.write(rec.to_line() + "\n")
        n += 1
    return n


def convert_nsys_csv(src: TextIO, metric_columns: Mapping[str, int], name_column: str = "Name",
                     duration_column: str = "Duration (ns)") -> Iterator[KernelRecord]:
    """Map a kernel-trace CSV export to records.

    ``metric_columns`` maps CSV column headers (e.g. a joined NCU metric such
    as ``dram__throughput.avg.pct_of_peak_sustained_elapsed``) to counter ids.
    Rows lacking any mapped metric are skipped.
    """
    for row in csv.DictReader(src):
        counters = {}
        for col, cid in metric_columns.items():
            raw = (row.get(col) or "").strip().replace(",", "")
            if raw:
                counters[cid] = float(raw)
        if counters:
            yield KernelRecord(row[name_column], int(float(row[duration_column])), counters)
