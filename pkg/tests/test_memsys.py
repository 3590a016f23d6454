import random

import pytest

from slicefetch.memsys import (
    DEMAND_LOAD,
    DEMAND_STORE,
    PREFETCH,
    CacheConfig,
    CacheHierarchy,
    LevelConfig,
    line_of,
    mpki,
)


def small_config(mem_latency=200):
    # tiny caches so eviction paths get exercised quickly
    return CacheConfig(
        l1=LevelConfig("L1", 1024, 2, 2),
        l2=LevelConfig("L2", 4096, 4, 12),
        l3=LevelConfig("L3", 16384, 8, 40),
        memory_latency=mem_latency,
    )


def test_cold_access_latency_is_sum_of_levels():
    cfg = CacheConfig.default()
    # independent oracle: accumulate the configured latencies by hand
    expected = cfg.l1.latency + cfg.l2.latency + cfg.l3.latency + cfg.memory_latency
    assert expected == 254
    h = CacheHierarchy(cfg)
    res = h.access(0x1000, DEMAND_LOAD, now=0)
    assert res.hit_level == "MEM"
    assert res.latency == expected
    assert res.fill_time == expected


def test_immediate_reaccess_hits_l1():
    h = CacheHierarchy(CacheConfig.default())
    first = h.access(0x1000, DEMAND_LOAD, now=0)
    res = h.access(0x1000, DEMAND_LOAD, now=first.fill_time + 1)
    assert res.hit_level == "L1"
    assert res.latency == 2


def test_pending_prefetch_reports_in_flight_with_residual():
    h = CacheHierarchy(CacheConfig.default())
    p = h.access(0x2000, PREFETCH, now=100)
    assert p.fill_time == 100 + 254
    res = h.access(0x2000, DEMAND_LOAD, now=150)
    assert res.hit_level == "IN_FLIGHT"
    assert res.latency == p.fill_time - 150
    assert h.late_prefetches == 1
    assert h.covered == 1  # late but still a covered would-be miss


def test_prefetch_hit_counts_covered_exactly_once():
    h = CacheHierarchy(CacheConfig.default())
    p = h.access(0x3000, PREFETCH, now=0)
    h.access(0x3000, DEMAND_LOAD, now=p.fill_time + 1)
    h.access(0x3000, DEMAND_LOAD, now=p.fill_time + 2)
    assert h.covered == 1
    assert h.late_prefetches == 0


def test_line_of():
    assert line_of(0) == 0
    assert line_of(63) == 0
    assert line_of(64) == 1


def test_mpki_examples():
    assert mpki(500, 1_000_000) == 0.5
    assert mpki(0, 123) == 0.0
    with pytest.raises(ValueError):
        mpki(1, 0)


def test_demand_promotion_latency_accumulates():
    cfg = CacheConfig.default()
    h = CacheHierarchy(cfg)
    first = h.access(0x4000, DEMAND_LOAD, now=0)
    # evict from L1 only, by filling the L1 set
    line = 0x4000 >> 6
    l1 = h.levels[0]
    set_lines = [line + k * l1.num_sets for k in range(1, cfg.l1.assoc + 1)]
    t = first.fill_time + 1
    for other in set_lines:
        r = h.access(other << 6, DEMAND_LOAD, now=t)
        t = r.fill_time + 1
    res = h.access(0x4000, DEMAND_LOAD, now=t)
    assert res.hit_level == "L2"
    assert res.latency == cfg.l1.latency + cfg.l2.latency


def test_inclusion_invariant_under_random_traffic():
    h = CacheHierarchy(small_config())
    rng = random.Random(7)
    now = 0
    for _ in range(4000):
        addr = rng.randrange(0, 1 << 16) & ~7
        kind = rng.choice([DEMAND_LOAD, DEMAND_STORE, PREFETCH])
        res = h.access(addr, kind, now)
        now += 1 + res.latency
    assert h.check_inclusion()


def test_stats_hits_plus_misses_equals_accesses():
    h = CacheHierarchy(small_config())
    rng = random.Random(3)
    now = 0
    for _ in range(2000):
        res = h.access(rng.randrange(0, 1 << 14) & ~7, DEMAND_LOAD, now)
        now += 1 + res.latency
    for lv in h.levels:
        for ks in lv.stats.values():
            assert ks.hits + ks.misses == ks.accesses


def test_timing_monotonicity_lower_memory_latency():
    rng = random.Random(11)
    schedule = []
    now = 0
    for _ in range(1500):
        addr = rng.randrange(0, 1 << 15) & ~7
        kind = rng.choice([DEMAND_LOAD, PREFETCH])
        schedule.append((addr, kind, now))
        now += rng.randrange(1, 30)
    slow = CacheHierarchy(small_config(mem_latency=200))
    fast = CacheHierarchy(small_config(mem_latency=100))
    for addr, kind, t in schedule:
        ls = slow.access(addr, kind, t).latency
        lf = fast.access(addr, kind, t).latency
        assert lf <= ls


def test_reset_stats_keeps_cache_state():
    h = CacheHierarchy(CacheConfig.default())
    h.access(0x5000, DEMAND_LOAD, now=0)
    h.reset_stats()
    assert h.levels[0].stats[DEMAND_LOAD].accesses == 0
    res = h.access(0x5000, DEMAND_LOAD, now=1000)
    assert res.hit_level == "L1"  # line survived the stats reset
