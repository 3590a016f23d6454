"""Three-level inclusive cache hierarchy with an additive timing estimator.

Each access probes L1 -> L2 -> L3 -> memory, accumulating each probed
level's latency. Misses allocate in every level (inclusive, LRU). A
prefetch installs lines with fill_time = now + miss latency; a demand that
arrives before a pending fill completes reports IN_FLIGHT with the residual
latency and is counted as a late prefetch.

Coverage accounting: the first demand touch of a prefetch-installed line is
counted exactly once as a covered miss, whether the line had already filled
(a clean prefetch hit) or was still in flight (a late prefetch that still
shortened the stall). In-flight demands count as L1 misses for MPKI.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

LINE_BITS = 6
LINE_SIZE = 64

DEMAND_LOAD = "demand_load"
DEMAND_STORE = "demand_store"
PREFETCH = "prefetch"
ACCESS_KINDS = (DEMAND_LOAD, DEMAND_STORE, PREFETCH)

L1, L2, L3, MEM, IN_FLIGHT = "L1", "L2", "L3", "MEM", "IN_FLIGHT"


def line_of(addr: int) -> int:
    return addr >> LINE_BITS


@dataclass(frozen=True)
class LevelConfig:
    name: str
    size: int
    assoc: int
    latency: int

    def __post_init__(self):
        if self.size % (self.assoc * LINE_SIZE) != 0:
            raise ValueError(f"{self.name}: size must divide into assoc*{LINE_SIZE} lines")

    @property
    def num_sets(self) -> int:
        return self.size // (self.assoc * LINE_SIZE)


@dataclass(frozen=True)
class CacheConfig:
    l1: LevelConfig
    l2: LevelConfig
    l3: LevelConfig
    memory_latency: int = 200

    @staticmethod
    def default() -> "CacheConfig":
        return CacheConfig(
            l1=LevelConfig("L1", 32 * 1024, 8, 2),
            l2=LevelConfig("L2", 256 * 1024, 4, 12),
            l3=LevelConfig("L3", 4 * 1024 * 1024, 16, 40),
            memory_latency=200,
        )


@dataclass(slots=True)
class LineState:
    fill_time: int
    prefetched: bool


@dataclass
class AccessResult:
    hit_level: str
    latency: int
    fill_time: int


class KindStats:
    __slots__ = ("accesses", "hits", "misses")

    def __init__(self):
        self.accesses = 0
        self.hits = 0
        self.misses = 0

    def to_dict(self) -> dict:
        return {"accesses": self.accesses, "hits": self.hits, "misses": self.misses}


class CacheLevel:
    def __init__(self, cfg: LevelConfig):
        self.cfg = cfg
        self.num_sets = cfg.num_sets
        self.sets: list[OrderedDict[int, LineState]] = [OrderedDict() for _ in range(self.num_sets)]
        self.stats: dict[str, KindStats] = {k: KindStats() for k in ACCESS_KINDS}

    def lookup(self, line: int, touch: bool = True):
        s = self.sets[line % self.num_sets]
        st = s.get(line)
        if st is not None and touch:
            s.move_to_end(line)
        return st

    def insert(self, line: int, st: LineState):
        """Insert a line; returns the evicted victim line id, if any."""
        s = self.sets[line % self.num_sets]
        victim = None
        if line not in s and len(s) >= self.cfg.assoc:
            victim, _ = s.popitem(last=False)
        s[line] = st
        s.move_to_end(line)
        return victim

    def invalidate(self, line: int):
        self.sets[line % self.num_sets].pop(line, None)

    def contains(self, line: int) -> bool:
        return line in self.sets[line % self.num_sets]

    def reset_stats(self):
        self.stats = {k: KindStats() for k in ACCESS_KINDS}


class CacheHierarchy:
    def __init__(self, cfg: CacheConfig | None = None):
        self.cfg = cfg or CacheConfig.default()
        self.levels = [CacheLevel(self.cfg.l1), CacheLevel(self.cfg.l2), CacheLevel(self.cfg.l3)]
        self.covered = 0
        self.uncovered_misses = 0
        self.late_prefetches = 0
        self.per_ip: dict[int, dict[str, int]] = {}

    # -- stats plumbing ----------------------------------------------------

    def reset_stats(self):
        for lv in self.levels:
            lv.reset_stats()
        self.covered = 0
        self.uncovered_misses = 0
        self.late_prefetches = 0
        self.per_ip = {}

    def _ip_rec(self, ip: int) -> dict[str, int]:
        rec = self.per_ip.get(ip)
        if rec is None:
            rec = {"misses": 0, "covered": 0, "late": 0, "late_covered": 0, "accesses": 0}
            self.per_ip[ip] = rec
        return rec

    def demand_l1_misses(self) -> int:
        return (
            self.levels[0].stats[DEMAND_LOAD].misses
            + self.levels[0].stats[DEMAND_STORE].misses
        )

    # -- the access path ---------------------------------------------------

    def access(self, addr: int, kind: str, now: int, ip: int | None = None) -> AccessResult:
        line = addr >> LINE_BITS
        demand = kind != PREFETCH
        ip_rec = self._ip_rec(ip) if demand and kind == DEMAND_LOAD and ip is not None else None
        if ip_rec is not None:
            ip_rec["accesses"] += 1

        latency = 0
        covered_here = False
        for depth, level in enumerate(self.levels):
            latency += level.cfg.latency
            st = level.lookup(line)
            stats = level.stats[kind]
            stats.accesses += 1
            if st is None:
                stats.misses += 1
                continue
            if st.fill_time > now:
                # pending fill: a prefetch merges, a demand waits out the residual
                # (floored at the probe latency so faster memory never reports slower)
                stats.misses += 1
                if not demand:
                    return AccessResult(IN_FLIGHT, max(st.fill_time - now, latency), st.fill_time)
                residual = max(st.fill_time - now, latency)
                self.late_prefetches += 1
                if st.prefetched:
                    self.covered += 1
                    covered_here = True
                    st.prefetched = False
                else:
                    self.uncovered_misses += 1
                if ip_rec is not None:
                    ip_rec["misses"] += 1
                    ip_rec["late"] += 1
                    if covered_here:
                        ip_rec["covered"] += 1
                        ip_rec["late_covered"] += 1
                if depth > 0:
                    self._fill_inner(depth, line, st.fill_time, prefetched=False)
                return AccessResult(IN_FLIGHT, residual, st.fill_time)
            # resident and filled
            stats.hits += 1
            if demand:
                if st.prefetched:
                    self.covered += 1
                    covered_here = True
                    st.prefetched = False
                if depth > 0 and not covered_here:
                    self.uncovered_misses += 1
                if ip_rec is not None:
                    if depth > 0:
                        ip_rec["misses"] += 1
                    if covered_here:
                        ip_rec["covered"] += 1
                if depth > 0:
                    self._fill_inner(depth, line, now + latency, prefetched=False)
            else:
                if depth > 0:
                    self._fill_inner(depth, line, now + latency, prefetched=True)
            return AccessResult(level.cfg.name, latency, st.fill_time if depth == 0 else now + latency)

        # miss everywhere
        latency += self.cfg.memory_latency
        fill = now + latency
        self._fill_inner(len(self.levels), line, fill, prefetched=not demand)
        if demand:
            self.uncovered_misses += 1
            if ip_rec is not None:
                ip_rec["misses"] += 1
        return AccessResult(MEM, latency, fill)

    def _fill_inner(self, outer_depth: int, line: int, fill_time: int, prefetched: bool):
        """Install `line` into all levels inside `outer_depth`, back-invalidating
        inner copies of any victim to keep the hierarchy inclusive."""
        for d in range(outer_depth - 1, -1, -1):
            victim = self.levels[d].insert(line, LineState(fill_time=fill_time, prefetched=prefetched))
            if victim is not None:
                for inner in range(d - 1, -1, -1):
                    self.levels[inner].invalidate(victim)

    # -- invariant helper (used by tests) ----------------------------------

    def check_inclusion(self) -> bool:
        for d in range(len(self.levels) - 1):
            inner, outer = self.levels[d], self.levels[d + 1]
            for s in inner.sets:
                for line in s:
                    if not outer.contains(line):
                        return False
        return True


def mpki(l1_demand_misses: int, retired: int) -> float:
    if retired <= 0:
        raise ValueError("retired must be positive")
    return 1000.0 * l1_demand_misses / retired
