"""Run configuration: every knob with a default (an empty config runs), and
a flat key=value config-file parser with line-numbered errors.

Config keys use dotted section prefixes, e.g.

    workload.kind = bfs_csr
    workload.iterations = 20000
    prefetcher = semantic
    cache.l1.size = 32768
    semantic.context_bits = 24
    run.measured = 100000
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Any

from .memsys import CacheConfig, LevelConfig
from .workloads import WorkloadSpec


class ConfigError(ValueError):
    pass


@dataclass
class SemanticConfig:
    context_bits: int = 24
    walkers: int = 2
    validation_rounds: int = 3
    loop_unroll: int = 1
    history_capacity: int = 128
    pie_entries: int = 16
    usefulness_threshold: float = 0.10
    stale_reset_cap: int = 25
    gen_timeout_cycles: int = 100_000
    injection_mode: str = "dedicated"
    lookahead_policy: str = "dynamic_from_1"
    queue_capacity: int = 64
    ewma_alpha: float = 0.125
    band_low_frac: float = 0.125
    band_high_frac: float = 0.75
    adapt_period: int = 32
    hot_threshold: int = 2
    flaky_threshold: int = 1
    hotness_window: int = 10_000
    repeat_limit: int = 4

    def validate(self) -> None:
        if not 0 <= self.context_bits <= 24:
            raise ConfigError("semantic.context_bits must be in [0, 24]")
        if not 1 <= self.validation_rounds <= 7:
            raise ConfigError("semantic.validation_rounds must be in [1, 7]")
        if not 1 <= self.loop_unroll <= 4:
            raise ConfigError("semantic.loop_unroll must be in [1, 4]")
        if self.pie_entries & (self.pie_entries - 1):
            raise ConfigError("semantic.pie_entries must be a power of two")
        if self.injection_mode not in ("dedicated", "shared"):
            raise ConfigError("semantic.injection_mode must be dedicated or shared")
        if self.lookahead_policy not in ("dynamic_from_1", "dynamic_from_16", "fixed_32"):
            raise ConfigError("unknown semantic.lookahead_policy")
        if self.walkers < 1:
            raise ConfigError("semantic.walkers must be >= 1")

    def initial_lookahead(self) -> tuple[int, bool]:
        return {
            "dynamic_from_1": (1, True),
            "dynamic_from_16": (16, True),
            "fixed_32": (32, False),
        }[self.lookahead_policy]

    @property
    def index_bits(self) -> int:
        return (self.pie_entries - 1).bit_length()


PREFETCHERS = ("none", "nextline", "stride", "semantic")


@dataclass
class RunConfig:
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    prefetcher: str = "semantic"
    cache: CacheConfig = field(default_factory=CacheConfig.default)
    semantic: SemanticConfig = field(default_factory=SemanticConfig)
    stride_degree: int = 3
    warmup: int = 0
    measured: int = 200_000
    seed: int = 1

    def validate(self) -> None:
        if self.prefetcher not in PREFETCHERS:
            raise ConfigError(f"prefetcher must be one of {PREFETCHERS}")
        if self.measured <= 0:
            raise ConfigError("run.measured must be positive")
        if self.warmup < 0:
            raise ConfigError("run.warmup must be >= 0")
        self.semantic.validate()
        self.workload.validate()


def _parse_typed(key: str, value: str, current: Any) -> Any:
    try:
        if isinstance(current, bool):
            return value.lower() in ("1", "true", "yes")
        if isinstance(current, int):
            return int(value, 0)
        if isinstance(current, float):
            return float(value)
        return value
    except ValueError:
        raise ConfigError(f"bad value {value!r} for {key}") from None


def _set_level(cache: CacheConfig, level: str, attr: str, value: str, key: str) -> CacheConfig:
    lv: LevelConfig = getattr(cache, level)
    if attr == "size":
        lv = replace(lv, size=_parse_typed(key, value, lv.size))
    elif attr == "assoc":
        lv = replace(lv, assoc=_parse_typed(key, value, lv.assoc))
    elif attr == "latency":
        lv = replace(lv, latency=_parse_typed(key, value, lv.latency))
    else:
        raise ConfigError(f"unknown cache key {key}")
    return replace(cache, **{level: lv})


def apply_kv(cfg: RunConfig, key: str, value: str) -> None:
    parts = key.split(".")
    if key == "prefetcher":
        cfg.prefetcher = value
    elif parts[0] == "workload" and len(parts) == 2:
        if not hasattr(cfg.workload, parts[1]) or parts[1] == "seed":
            raise ConfigError(f"unknown workload key {key}")
        cur = getattr(cfg.workload, parts[1])
        setattr(cfg.workload, parts[1], _parse_typed(key, value, cur))
    elif parts[0] == "semantic" and len(parts) == 2:
        if not hasattr(cfg.semantic, parts[1]):
            raise ConfigError(f"unknown semantic key {key}")
        cur = getattr(cfg.semantic, parts[1])
        setattr(cfg.semantic, parts[1], _parse_typed(key, value, cur))
    elif parts[0] == "cache" and len(parts) == 3 and parts[1] in ("l1", "l2", "l3"):
        try:
            cfg.cache = _set_level(cfg.cache, parts[1], parts[2], value, key)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    elif key == "cache.memory_latency":
        cfg.cache = replace(cfg.cache, memory_latency=_parse_typed(key, value, cfg.cache.memory_latency))
    elif key == "baseline.stride_degree":
        cfg.stride_degree = _parse_typed(key, value, cfg.stride_degree)
    elif parts[0] == "run" and len(parts) == 2 and parts[1] in ("warmup", "measured", "seed"):
        setattr(cfg, parts[1], _parse_typed(key, value, getattr(cfg, parts[1])))
    else:
        raise ConfigError(f"unknown config key {key}")


def parse_config_text(text: str) -> RunConfig:
    cfg = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        try:
            apply_kv(cfg, key.strip(), value.strip())
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return cfg


def to_flat_dict(cfg: RunConfig) -> dict[str, Any]:
    out: dict[str, Any] = {"prefetcher": cfg.prefetcher}
    for f in fields(cfg.workload):
        if f.name != "seed":
            out[f"workload.{f.name}"] = getattr(cfg.workload, f.name)
    for level in ("l1", "l2", "l3"):
        lv: LevelConfig = getattr(cfg.cache, level)
        out[f"cache.{level}.size"] = lv.size
        out[f"cache.{level}.assoc"] = lv.assoc
        out[f"cache.{level}.latency"] = lv.latency
    out["cache.memory_latency"] = cfg.cache.memory_latency
    for f in fields(cfg.semantic):
        out[f"semantic.{f.name}"] = getattr(cfg.semantic, f.name)
    out["baseline.stride_degree"] = cfg.stride_degree
    out["run.warmup"] = cfg.warmup
    out["run.measured"] = cfg.measured
    out["run.seed"] = cfg.seed
    return out
