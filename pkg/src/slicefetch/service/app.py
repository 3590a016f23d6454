"""FastAPI application wrapping the simulator."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from ..config import ConfigError
from ..isa import SimulationFault
from . import handlers
from .schemas import (
    CompareRequest,
    CompareResponse,
    DumpProgramRequest,
    DumpProgramResponse,
    DumpSlicesRequest,
    DumpSlicesResponse,
    HealthResponse,
    RunRequest,
    RunResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(
        title="slicefetch",
        description="Deterministic micro-op simulator with a slice-learning "
                    "forecast prefetcher; runs experiments and reports "
                    "coverage/accuracy/timeliness.",
        version="0.1.0",
    )

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version="0.1.0")

    @app.post("/run", response_model=RunResponse)
    def run_experiment(req: RunRequest) -> RunResponse:
        try:
            return handlers.handle_run(req)
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except SimulationFault as exc:
            raise HTTPException(status_code=422, detail=f"simulation fault: {exc}") from exc

    @app.post("/compare", response_model=CompareResponse)
    def compare_experiments(req: CompareRequest) -> CompareResponse:
        try:
            return handlers.handle_compare(req)
        except (ConfigError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except SimulationFault as exc:
            raise HTTPException(status_code=422, detail=f"simulation fault: {exc}") from exc

    @app.post("/dump-program", response_model=DumpProgramResponse)
    def dump_program_endpoint(req: DumpProgramRequest) -> DumpProgramResponse:
        try:
            return handlers.handle_dump_program(req)
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.post("/dump-slices", response_model=DumpSlicesResponse)
    def dump_slices_endpoint(req: DumpSlicesRequest) -> DumpSlicesResponse:
        try:
            return handlers.handle_dump_slices(req)
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except SimulationFault as exc:
            raise HTTPException(status_code=422, detail=f"simulation fault: {exc}") from exc

    return app


app = create_app()
