import pytest

from slicefetch.config import (
    ConfigError,
    RunConfig,
    apply_kv,
    parse_config_text,
    to_flat_dict,
)

SAMPLE = """
# experiment: deep-chain coverage
workload.kind = bfs_csr
workload.iterations = 2000
workload.nodes = 4096
prefetcher = semantic
cache.l1.size = 0x8000
cache.memory_latency = 180
semantic.context_bits = 16
semantic.lookahead_policy = dynamic_from_16
baseline.stride_degree = 2
run.warmup = 1000
run.measured = 5000
run.seed = 42
"""


def test_parse_sample():
    cfg = parse_config_text(SAMPLE)
    assert cfg.workload.kind == "bfs_csr"
    assert cfg.cache.l1.size == 0x8000
    assert cfg.cache.memory_latency == 180
    assert cfg.semantic.context_bits == 16
    assert cfg.semantic.lookahead_policy == "dynamic_from_16"
    assert cfg.stride_degree == 2
    assert cfg.seed == 42
    cfg.validate()


def test_empty_config_runs_with_defaults():
    cfg = parse_config_text("")
    cfg.validate()
    assert cfg.prefetcher == "semantic"
    assert cfg.measured > 0


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ConfigError, match="line 3"):
        parse_config_text("workload.kind = stride\n\nnot a kv pair\n")
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("workload.bogus = 3\n")
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("prefetcher = semantic\nworkload.iterations = soon\n")


def test_unknown_keys_rejected():
    cfg = RunConfig()
    with pytest.raises(ConfigError):
        apply_kv(cfg, "cache.l4.size", "1")
    with pytest.raises(ConfigError):
        apply_kv(cfg, "workload.seed", "1")  # seed comes from run.seed


def test_validation_bounds():
    cfg = RunConfig()
    cfg.semantic.context_bits = 25
    with pytest.raises(ConfigError):
        cfg.validate()
    cfg = RunConfig()
    cfg.semantic.loop_unroll = 9
    with pytest.raises(ConfigError):
        cfg.validate()
    cfg = RunConfig()
    cfg.prefetcher = "ghb"
    with pytest.raises(ConfigError):
        cfg.validate()
    cfg = RunConfig()
    cfg.measured = 0
    with pytest.raises(ConfigError):
        cfg.validate()


def test_flat_dict_round_trips_through_apply():
    cfg = parse_config_text(SAMPLE)
    flat = to_flat_dict(cfg)
    rebuilt = RunConfig()
    for k, v in flat.items():
        apply_kv(rebuilt, k, str(v))
    assert to_flat_dict(rebuilt) == flat


def test_bundled_config_files_parse_and_validate():
    from pathlib import Path

    cfg_dir = Path(__file__).resolve().parent.parent / "configs"
    files = sorted(cfg_dir.glob("*.cfg"))
    assert len(files) >= 4
    for f in files:
        cfg = parse_config_text(f.read_text())
        cfg.validate()
