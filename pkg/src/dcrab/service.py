"""HTTP facade over the optimization engine.

FastAPI application with one endpoint per workflow: /optimize, /evaluate,
/diagnose, plus /health.  Request and response bodies are the same JSON
documents the CLI reads and writes.
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ValidationError

from . import pulses as pl
from .config import ConfigError, RunConfig, pointer_errors
from .runner import handle_diagnose, handle_evaluate, handle_optimize

app = FastAPI(title="dcrab", version="1.0.0")


class PulsePayload(BaseModel):
    times: list[float]
    values: list[float]

    def build(self) -> pl.Pulse:
        grid = pl.TimeGrid(duration=self.times[-1], n_samples=len(self.times))
        return pl.Pulse(grid, list(self.values))


class OptimizeRequest(BaseModel):
    config: RunConfig
    seed: Optional[int] = None


class OptimizeResponse(BaseModel):
    summary: dict
    final_pulse: Optional[PulsePayload] = None


class EvaluateRequest(BaseModel):
    config: RunConfig
    pulse: Optional[PulsePayload] = None  # default: the config's guess pulse


class EvaluateResponse(BaseModel):
    J: float
    raw_fom: float
    penalties: dict[str, float]


class DiagnoseRequest(BaseModel):
    inputs: dict


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/optimize", response_model=OptimizeResponse)
def optimize(req: OptimizeRequest) -> OptimizeResponse:
    try:
        problem_config = req.config
        from .runner import run_one

        record = run_one(problem_config, seed=req.seed)
    except (ConfigError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    from .runner import summary_payload

    final = None
    if record.final_pulse is not None:
        final = PulsePayload(
            times=[float(t) for t in record.final_pulse.grid.times()],
            values=[float(v) for v in record.final_pulse.values],
        )
    return OptimizeResponse(summary=summary_payload(record), final_pulse=final)


@app.post("/evaluate", response_model=EvaluateResponse)
def evaluate(req: EvaluateRequest) -> EvaluateResponse:
    try:
        pulse = req.pulse.build() if req.pulse is not None else None
        breakdown = handle_evaluate(req.config, pulse)
    except (ConfigError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return EvaluateResponse(**breakdown)


@app.post("/diagnose")
def diagnose(req: DiagnoseRequest) -> dict:
    try:
        return handle_diagnose(req.inputs)
    except ValidationError as exc:
        raise HTTPException(status_code=422, detail=pointer_errors(exc)) from exc
    except (ValueError, KeyError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
