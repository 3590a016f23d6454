"""Request/response models for the experiment service."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class RunRequest(BaseModel):
    config: str = Field(default="", description="flat key=value config text")
    overrides: list[str] = Field(default_factory=list, description="extra key=value pairs")
    seed: Optional[int] = None
    prefetcher: Optional[str] = None
    workload: Optional[str] = None


class RunResponse(BaseModel):
    report: dict[str, Any]


class CompareRequest(BaseModel):
    config: str = ""
    overrides: list[str] = Field(default_factory=list)
    prefetchers: list[str] = Field(min_length=2)
    seed: Optional[int] = None
    workload: Optional[str] = None


class CompareResponse(BaseModel):
    reports: dict[str, dict[str, Any]]
    cycle_ratio_vs_first: dict[str, float]


class DumpSlicesRequest(BaseModel):
    config: str = ""
    overrides: list[str] = Field(default_factory=list)
    seed: Optional[int] = None
    workload: Optional[str] = None


class DumpSlicesResponse(BaseModel):
    text: str
    slices: list[dict[str, Any]]


class DumpProgramRequest(BaseModel):
    config: str = ""
    overrides: list[str] = Field(default_factory=list)
    seed: Optional[int] = None
    workload: Optional[str] = None
    include_image: bool = False


class DumpProgramResponse(BaseModel):
    text: str


class HealthResponse(BaseModel):
    status: str
    version: str
