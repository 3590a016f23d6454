"""Cyclic retirement history buffer, traversed backward by the walkers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

from .isa import RetiredEvent


@dataclass(slots=True)
class HistoryEntry:
    event: RetiredEvent
    bhr: int  # branch-history snapshot at this op's retirement


class HistoryQueue:
    """Ring of the most recent `capacity` retired events, youngest at head."""

    def __init__(self, capacity: int = 128):
        if capacity < 2:
            raise ValueError("history capacity must be at least 2")
        self.capacity = capacity
        self._ring: list[Optional[HistoryEntry]] = [None] * capacity
        self._head = -1
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, event: RetiredEvent, bhr: int) -> HistoryEntry:
        self._head = (self._head + 1) % self.capacity
        entry = HistoryEntry(event=event, bhr=bhr)
        self._ring[self._head] = entry
        if self._size < self.capacity:
            self._size += 1
        return entry

    def head(self) -> Optional[HistoryEntry]:
        return self._ring[self._head] if self._size else None

    def walk_backward(self, skip_head: bool = False) -> Iterator[HistoryEntry]:
        """Yield entries youngest to oldest, at most `capacity` of them."""
        start = 1 if skip_head else 0
        for back in range(start, self._size):
            yield self._ring[(self._head - back) % self.capacity]
