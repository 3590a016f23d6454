import random

from slicefetch.baselines import NextLinePrefetcher, StridePrefetcher


def test_stride_two_delta_confirmation():
    p = StridePrefetcher(degree=3)
    assert p.observe_and_issue(0x40, 0) == []
    assert p.observe_and_issue(0x40, 64) == []
    assert p.observe_and_issue(0x40, 128) == [192, 256, 320]


def test_stride_breaks_on_delta_change():
    p = StridePrefetcher(degree=1)
    p.observe_and_issue(0x40, 0)
    p.observe_and_issue(0x40, 64)
    assert p.observe_and_issue(0x40, 128) == [192]
    assert p.observe_and_issue(0x40, 1000) == []   # confidence lost
    assert p.observe_and_issue(0x40, 1064) == []   # stale delta contradicted
    assert p.observe_and_issue(0x40, 1128) == []   # first matching delta
    assert p.observe_and_issue(0x40, 1192) == [1256]


def test_stride_never_confident_on_random_addresses():
    p = StridePrefetcher()
    rng = random.Random(5)
    issued = []
    for _ in range(500):
        issued += p.observe_and_issue(0x40, rng.randrange(0, 1 << 30) & ~7)
    assert issued == []


def test_stride_tables_are_per_ip():
    p = StridePrefetcher(degree=1)
    for addr in (0, 64):
        p.observe_and_issue(0x40, addr)
        p.observe_and_issue(0x50, addr + 1)
    assert p.observe_and_issue(0x40, 128) == [192]
    assert p.observe_and_issue(0x50, 129) == [193]


def test_next_line():
    p = NextLinePrefetcher()
    assert p.on_demand(0, missed=True) == [64]
    assert p.on_demand(64, missed=True) == [128]
    assert p.on_demand(0, missed=False) == []
