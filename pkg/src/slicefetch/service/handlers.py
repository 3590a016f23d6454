"""Service handlers, shared by the HTTP routes and the local CLI client."""

from __future__ import annotations

from dataclasses import replace

from ..config import ConfigError, RunConfig, apply_kv, parse_config_text
from ..engine import compare, dump_program, dump_slices, run
from .schemas import (
    CompareRequest,
    CompareResponse,
    DumpProgramRequest,
    DumpProgramResponse,
    DumpSlicesRequest,
    DumpSlicesResponse,
    RunRequest,
    RunResponse,
)


def build_config(req) -> RunConfig:
    cfg = parse_config_text(req.config or "")
    for kv in req.overrides:
        if "=" not in kv:
            raise ConfigError(f"override {kv!r} is not key=value")
        key, _, value = kv.partition("=")
        apply_kv(cfg, key.strip(), value.strip())
    if getattr(req, "workload", None):
        apply_kv(cfg, "workload.kind", req.workload)
    if getattr(req, "prefetcher", None):
        apply_kv(cfg, "prefetcher", req.prefetcher)
    if getattr(req, "seed", None) is not None:
        cfg.seed = req.seed
    cfg.validate()
    return cfg


def handle_run(req: RunRequest) -> RunResponse:
    cfg = build_config(req)
    result = run(cfg)
    return RunResponse(report=result.report)


def handle_compare(req: CompareRequest) -> CompareResponse:
    base = build_config(req)
    configs = []
    for name in req.prefetchers:
        c = replace(base)
        c.prefetcher = name
        c.validate()
        configs.append(c)
    out = compare(configs)
    return CompareResponse(reports=out["reports"],
                           cycle_ratio_vs_first=out["cycle_ratio_vs_first"])


def handle_dump_slices(req: DumpSlicesRequest) -> DumpSlicesResponse:
    cfg = build_config(req)
    result = run(cfg)
    text, structured = dump_slices(result)
    return DumpSlicesResponse(text=text, slices=structured)


def handle_dump_program(req: DumpProgramRequest) -> DumpProgramResponse:
    cfg = build_config(req)
    return DumpProgramResponse(text=dump_program(cfg, include_image=req.include_image))
