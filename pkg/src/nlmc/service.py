"""HTTP service exposing the solver pipeline.

Each endpoint wraps the corresponding runner function.  Artifacts are produced
in a per-request temporary directory and returned inline as text, so the
service stays stateless and the CLI can act as a thin client that writes the
returned files wherever its ``--out`` points.
"""

from __future__ import annotations

from dataclasses import asdict
from tempfile import TemporaryDirectory
from typing import Literal

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import runner
from .config import ExperimentConfig, apply_overrides
from .errors import NLMCError

__all__ = [
    "SolveRequest", "SolveResponse", "SweepRequest", "SweepResponse",
    "BasisRequest", "BasisResponse", "ValidateRequest", "ValidateResponse",
    "CheckModel", "create_app", "app",
]


class SolveRequest(BaseModel):
    config: ExperimentConfig


class SolveResponse(BaseModel):
    report: dict
    timings: dict
    layers: int
    total_regions: int
    artifacts: dict[str, str]


class SweepRequest(BaseModel):
    config: ExperimentConfig
    axis: Literal["layers", "H", "contrast"]
    values: list[float] = Field(min_length=1)


class SweepResponse(BaseModel):
    axis: str
    rows: list[dict]
    artifacts: dict[str, str]


class BasisRequest(BaseModel):
    config: ExperimentConfig
    block: int | None = None   # None selects the center block
    region: int = 0


class BasisResponse(BaseModel):
    block: int
    region: int
    layers: int | None
    energy: float
    profile: list[float]
    artifacts: dict[str, str]


class ValidateRequest(BaseModel):
    perturb_stiffness: bool = False


class CheckModel(BaseModel):
    name: str
    passed: bool
    detail: str


class ValidateResponse(BaseModel):
    passed: bool
    checks: list[CheckModel]


def _collect(paths: dict) -> dict[str, str]:
    return {name: path.read_text() for name, path in paths.items()}


def create_app() -> FastAPI:
    app = FastAPI(title="nlmc", description="Non-local multicontinuum upscaling solver")

    @app.exception_handler(NLMCError)
    async def _nlmc_error(request: Request, exc: NLMCError) -> JSONResponse:
        status = 400 if exc.exit_code == 2 else 500
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.get("/health")
    async def health() -> dict:
        return {"status": "ok"}

    @app.post("/solve", response_model=SolveResponse)
    def solve(req: SolveRequest) -> SolveResponse:
        with TemporaryDirectory() as tmp:
            out = runner.run_solve(apply_overrides(req.config, out_dir=tmp))
            artifacts = _collect(out.paths)
        report = out.result.report
        return SolveResponse(
            report={**asdict(report), "bins": [list(iv) for iv in report.bins]},
            timings=asdict(out.result.timings),
            layers=out.result.layers,
            total_regions=out.result.regions.total_regions,
            artifacts=artifacts)

    @app.post("/sweep", response_model=SweepResponse)
    def do_sweep(req: SweepRequest) -> SweepResponse:
        with TemporaryDirectory() as tmp:
            table, paths = runner.run_sweep(
                apply_overrides(req.config, out_dir=tmp), req.axis, req.values)
            artifacts = _collect(paths)
        return SweepResponse(
            axis=table.axis, rows=[asdict(row) for row in table.rows],
            artifacts=artifacts)

    @app.post("/basis", response_model=BasisResponse)
    def basis(req: BasisRequest) -> BasisResponse:
        with TemporaryDirectory() as tmp:
            out = runner.run_basis(
                apply_overrides(req.config, out_dir=tmp), req.block, req.region)
            artifacts = _collect(out.paths)
        return BasisResponse(
            block=out.basis.block, region=out.basis.region, layers=out.basis.layers,
            energy=out.basis.energy, profile=[float(f) for f in out.profile],
            artifacts=artifacts)

    @app.post("/validate", response_model=ValidateResponse)
    def do_validate(req: ValidateRequest) -> ValidateResponse:
        checks = runner.run_validate(req.perturb_stiffness)
        return ValidateResponse(
            passed=all(c.passed for c in checks),
            checks=[CheckModel(name=c.name, passed=c.passed, detail=c.detail)
                    for c in checks])

    return app


app = create_app()
