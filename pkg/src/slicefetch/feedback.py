"""Prefetch queue for usefulness and timeliness tracking, plus the dynamic
lookahead controller (hit-depth normalization).

Every issued prefetch is pushed with its predicting PIE id. Demand load
addresses are matched line-granular against the queue, newest first; a
record evicted without ever being hit is reported useless to its PIE. The
controller nudges each slice's lookahead so the average hit depth sits
inside a useful-distance band: hits near the newest end mean the prefetch
was late (double the lookahead), hits near the oldest end mean it was far
too early (back it off by one).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .pie import LOOKAHEAD_MAX, PIE


@dataclass(slots=True)
class PrefetchRecord:
    line: int
    pie: Optional[PIE]
    pie_generation: int
    seq: int
    trigger_ip: Optional[int]
    issue_cycle: int
    hit: bool = False


@dataclass
class QueueStats:
    sent: int = 0
    useful: int = 0
    useless: int = 0
    depth_histogram: dict = field(default_factory=dict)
    per_ip: dict = field(default_factory=dict)

    def ip_rec(self, ip) -> dict:
        rec = self.per_ip.get(ip)
        if rec is None:
            rec = {"sent": 0, "useful": 0}
            self.per_ip[ip] = rec
        return rec


class PrefetchQueue:
    def __init__(self, capacity: int = 64):
        self.capacity = capacity
        self.records: deque[PrefetchRecord] = deque()
        self._by_line: dict[int, list[PrefetchRecord]] = {}
        self._seq = 0
        self.stats = QueueStats()

    def __len__(self) -> int:
        return len(self.records)

    def enqueue(self, line: int, pie: Optional[PIE], trigger_ip: Optional[int],
                now: int) -> list[PrefetchRecord]:
        """Push a record; returns records evicted without a hit (useless)."""
        evicted_useless = []
        if len(self.records) >= self.capacity:
            old = self.records.popleft()
            if not old.hit:
                evicted_useless.append(old)
                bucket = self._by_line.get(old.line)
                if bucket:
                    try:
                        bucket.remove(old)
                    except ValueError:
                        pass
                    if not bucket:
                        del self._by_line[old.line]
                self.stats.useless += 1
        rec = PrefetchRecord(
            line=line, pie=pie, pie_generation=pie.generation if pie else 0,
            seq=self._seq, trigger_ip=trigger_ip, issue_cycle=now,
        )
        self._seq += 1
        self.records.append(rec)
        self._by_line.setdefault(line, []).append(rec)
        self.stats.sent += 1
        if trigger_ip is not None:
            self.stats.ip_rec(trigger_ip)["sent"] += 1
        return evicted_useless

    def match_demand(self, line: int) -> Optional[tuple[PrefetchRecord, int]]:
        """Mark the most recent un-hit record for this line as hit; the depth
        is the number of prefetches issued after it (0 = newest)."""
        bucket = self._by_line.get(line)
        if not bucket:
            return None
        rec = bucket.pop()
        if not bucket:
            del self._by_line[line]
        rec.hit = True
        depth = (self._seq - 1) - rec.seq
        self.stats.useful += 1
        b = min(depth // 8, 7)
        self.stats.depth_histogram[b] = self.stats.depth_histogram.get(b, 0) + 1
        if rec.trigger_ip is not None:
            self.stats.ip_rec(rec.trigger_ip)["useful"] += 1
        return rec, depth

    def reset_stats(self):
        self.stats = QueueStats()


def reward(depth: int, q: int, band_low_frac: float = 0.125,
           band_high_frac: float = 0.75) -> int:
    """Score 2 inside the useful-distance band [q/8, 3q/4], 1 otherwise."""
    if not 0 <= depth < q:
        raise ValueError("depth must be in [0, queue capacity)")
    lo = q * band_low_frac
    hi = q * band_high_frac
    return 2 if lo <= depth <= hi else 1


def observe_hit(pie: PIE, depth: int, alpha: float = 0.125) -> None:
    if pie.hit_depth_ewma is None:
        pie.hit_depth_ewma = float(depth)
    else:
        pie.hit_depth_ewma += alpha * (depth - pie.hit_depth_ewma)
    pie.hits_since_eval += 1


def adapt_lookahead(pie: PIE, q: int, band_low_frac: float = 0.125,
                    band_high_frac: float = 0.75) -> int:
    """Hit-depth normalization: shallow hits mean the prefetch was late, so
    double the lookahead; very deep hits mean it was too early, back off by
    one. Always clamped to [1, 64]."""
    ewma = pie.hit_depth_ewma
    L = pie.lookahead
    if ewma is None:
        return L
    if ewma < q * band_low_frac:
        L = min(2 * L, LOOKAHEAD_MAX)
    elif ewma > q * band_high_frac:
        L = max(L - 1, 1)
    pie.lookahead = L
    return L
