import pytest

from slicefetch.config import RunConfig


def make_config(kind="stride", iterations=2000, measured=8000, warmup=0,
                prefetcher="semantic", seed=1, **workload_kw):
    cfg = RunConfig()
    cfg.workload.kind = kind
    cfg.workload.iterations = iterations
    for k, v in workload_kw.items():
        setattr(cfg.workload, k, v)
    cfg.prefetcher = prefetcher
    cfg.warmup = warmup
    cfg.measured = measured
    cfg.seed = seed
    return cfg


@pytest.fixture
def stride_config():
    return make_config()
