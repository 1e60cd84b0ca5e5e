"""HTTP facade over the experiment handlers.

Domain failures map to structured 422 responses whose ``error`` field the
command-line client translates back into exit codes: ``no-definiteness`` and
``infeasible`` mean the mathematical precondition failed, ``invalid`` means
the request itself was malformed.
"""
from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..calibration import NoDefiniteness
from ..convex_solver import InfeasibleStart
from ..forward import DomainError
from ..measurement import DimensionMismatch
from . import handlers
from .schemas import (
    BasinsResponse,
    CalibrateResponse,
    ExperimentConfig,
    ForwardRequest,
    ForwardResponse,
    HealthResponse,
    LandscapeResponse,
    PropertiesResponse,
    SolveRequest,
    SolveResponse,
)


def _error_payload(exc: Exception) -> dict:
    if isinstance(exc, NoDefiniteness):
        return {"error": "no-definiteness", "message": str(exc), "layer": exc.layer}
    if isinstance(exc, InfeasibleStart):
        return {"error": "infeasible", "message": str(exc)}
    return {"error": "invalid", "message": str(exc)}


def create_app() -> FastAPI:
    app = FastAPI(title="eitconvex", version=__version__)

    @app.exception_handler(NoDefiniteness)
    @app.exception_handler(InfeasibleStart)
    @app.exception_handler(DomainError)
    @app.exception_handler(DimensionMismatch)
    @app.exception_handler(ValueError)
    async def _domain_error(_, exc: Exception) -> JSONResponse:
        return JSONResponse(status_code=422, content={"detail": _error_payload(exc)})

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/forward", response_model=ForwardResponse)
    def forward(request: ForwardRequest) -> ForwardResponse:
        return handlers.handle_forward(request)

    @app.post("/landscape", response_model=LandscapeResponse)
    def landscape(config: ExperimentConfig) -> LandscapeResponse:
        return handlers.handle_landscape(config)

    @app.post("/basins", response_model=BasinsResponse)
    def basins(config: ExperimentConfig) -> BasinsResponse:
        return handlers.handle_basins(config)

    @app.post("/calibrate", response_model=CalibrateResponse)
    def calibrate(config: ExperimentConfig) -> CalibrateResponse:
        return handlers.handle_calibrate(config)

    @app.post("/solve", response_model=SolveResponse)
    def solve(request: SolveRequest) -> SolveResponse:
        return handlers.handle_solve(request)

    @app.post("/properties", response_model=PropertiesResponse)
    def properties(config: ExperimentConfig) -> PropertiesResponse:
        return handlers.handle_properties(config)

    return app


app = create_app()
