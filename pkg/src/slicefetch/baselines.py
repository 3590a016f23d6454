"""Reference prefetchers: next-line and an ip-indexed stride table with
two-delta confirmation. Both share the cache hierarchy and prefetch-queue
plumbing with the slice prefetcher so coverage and accuracy are measured
identically.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .memsys import LINE_SIZE


@dataclass(slots=True)
class StrideEntry:
    last_addr: int
    last_delta: Optional[int] = None
    confidence: int = 0


class StridePrefetcher:
    """Classic reference-prediction stride table: a prefetch stream starts
    after two matching deltas (confidence >= 2)."""

    def __init__(self, degree: int = 3):
        self.degree = degree
        self.table: dict[int, StrideEntry] = {}

    def observe_and_issue(self, ip: int, addr: int) -> list[int]:
        e = self.table.get(ip)
        if e is None:
            self.table[ip] = StrideEntry(last_addr=addr)
            return []
        delta = addr - e.last_addr
        if e.last_delta is not None and delta == e.last_delta:
            e.confidence = min(e.confidence + 1, 3)
        else:
            e.confidence = 1 if e.last_delta is None else 0
        e.last_delta = delta
        e.last_addr = addr
        if e.confidence >= 2 and delta != 0:
            return [(addr + delta * k) & ((1 << 64) - 1) for k in range(1, self.degree + 1)]
        return []


class NextLinePrefetcher:
    """Issues the next cache line on every demand miss."""

    def on_demand(self, addr: int, missed: bool) -> list[int]:
        if not missed:
            return []
        return [(addr + LINE_SIZE) & ((1 << 64) - 1)]
