"""Run configuration schema (pydantic) and builders for CLI and service.

A run config is a single JSON document naming the model, time grid, guess
pulse, objective and search settings.  Validation errors are reported with
JSON-pointer style paths.
"""

from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

from . import pulses as pl
from .dynamics import Model, build_model, complex_matrix_from_json
from .objectives import ObjectiveSpec
from .optimizer import SearchConfig, SimulationProblem


class ConfigError(ValueError):
    """Invalid run configuration; message carries JSON pointer paths."""


class GridConfig(BaseModel):
    duration: float = Field(gt=0)
    n_samples: int = Field(ge=2)

    def build(self) -> pl.TimeGrid:
        return pl.TimeGrid(self.duration, self.n_samples)


class ModelConfig(BaseModel):
    kind: Literal["two_level", "random_ising", "decaying_qubit"]
    params: dict = Field(default_factory=dict)
    seed: Optional[int] = None

    def build(self) -> Model:
        return build_model(self.kind, self.params, seed=self.seed)


class GuessConfig(BaseModel):
    builtin: Optional[Literal["constant", "zero"]] = None
    value: float = 1.0
    path: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.builtin is None) == (self.path is None):
            raise ValueError("specify exactly one of builtin or path")
        return self

    def build(self, grid: pl.TimeGrid) -> pl.Pulse:
        if self.path is not None:
            pulse = pl.read_pulse_csv(self.path)
            if pulse.grid != grid:
                raise ConfigError("/guess/path: pulse grid does not match /grid")
            return pulse
        if self.builtin == "zero":
            return pl.Pulse(grid, np.zeros(grid.n_samples))
        return pl.Pulse(grid, np.full(grid.n_samples, self.value))


class PenaltyConfig(BaseModel):
    kind: Literal["height", "energy"]
    weight: float = Field(ge=0)


class ObjectiveConfig(BaseModel):
    kind: Literal[
        "state_fidelity", "mixed_fidelity", "gate_re", "gate_sm", "gate_ss",
        "nonlocal", "perfect_entangler", "phase_gate", "entropy",
    ]
    initial: list  # state vector as [re, im] pairs, or matrix for mixed initial
    target: Optional[list] = None
    gate_mode: Literal["plain", "local_phase", "re", "sm", "ss"] = "sm"
    entropy_cut: int = 1
    local_dims: list[int] = Field(default_factory=list)
    penalties: list[PenaltyConfig] = Field(default_factory=list)
    constraint: Literal["none", "hard_wall", "rescale"] = "none"
    f_max: Optional[float] = None

    def build_spec(self) -> ObjectiveSpec:
        target = None
        if self.target is not None:
            target = parse_complex_payload(self.target)
        return ObjectiveSpec(
            kind=self.kind,
            target=target,
            penalties=tuple((p.kind, p.weight) for p in self.penalties),
            constraint=self.constraint,
            f_max=self.f_max,
            gate_mode=self.gate_mode,
            entropy_cut=self.entropy_cut,
            local_dims=tuple(self.local_dims),
        )

    def build_initial(self) -> np.ndarray:
        return parse_complex_payload(self.initial)


class SearchSettings(BaseModel):
    algorithm: Literal["crab", "dcrab"] = "dcrab"
    n_funcs: int = Field(default=4, ge=1)
    max_superiterations: int = Field(default=10, ge=1)
    max_evals: int = Field(default=200, ge=0)
    simplex_tol: float = Field(default=1e-10, gt=0, lt=1)
    initial_scale: Optional[float] = None
    c0_scale: float = 0.05
    stall_threshold: float = Field(default=1e-6, gt=0, lt=1)
    target_j: Optional[float] = None
    omega_max: Optional[float] = None
    envelope: Literal["flat", "sine", "blackman"] = "sine"
    assemble_mode: Literal["auto", "multiplicative", "additive"] = "auto"
    seed: int = 0

    def build(self) -> SearchConfig:
        return SearchConfig(
            n_funcs=self.n_funcs,
            max_superiterations=self.max_superiterations,
            max_evals=self.max_evals,
            simplex_tol=self.simplex_tol,
            initial_scale=self.initial_scale,
            c0_scale=self.c0_scale,
            stall_threshold=self.stall_threshold,
            target_j=self.target_j,
            omega_max=self.omega_max,
            envelope=self.envelope,
            assemble_mode=self.assemble_mode,
            seed=self.seed,
        )


class RunConfig(BaseModel):
    model: ModelConfig
    grid: GridConfig
    guess: GuessConfig
    objective: ObjectiveConfig
    search: SearchSettings = Field(default_factory=SearchSettings)
    seeds: Optional[list[int]] = None  # ensemble mode: one run per seed
    output: Optional[str] = None


class TransportConfig(BaseModel):
    kind: Literal["tcp", "dir"]
    host: str = "127.0.0.1"
    port: int = 0
    path: Optional[str] = None

    @model_validator(mode="after")
    def _dir_needs_path(self):
        if self.kind == "dir" and not self.path:
            raise ValueError("dir transport requires a path")
        return self


class ServeConfig(BaseModel):
    grid: GridConfig
    guess: GuessConfig
    search: SearchSettings = Field(default_factory=SearchSettings)
    constraint: Literal["none", "hard_wall", "rescale"] = "none"
    f_max: Optional[float] = None
    transport: TransportConfig
    timeout: float = Field(default=30.0, gt=0)
    session_id: Optional[str] = None
    output: Optional[str] = None


def parse_complex_payload(payload: list) -> np.ndarray:
    """[[re, im], ...] -> vector; [[[re, im], ...], ...] -> matrix."""
    arr = np.asarray(payload, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 2:
        return arr[:, 0] + 1j * arr[:, 1]
    if arr.ndim == 3 and arr.shape[2] == 2:
        return complex_matrix_from_json(payload)
    raise ValueError("complex payload must be [re, im] pairs")


def complex_payload(arr: np.ndarray) -> list:
    arr = np.asarray(arr, dtype=complex)
    if arr.ndim == 1:
        return [[float(x.real), float(x.imag)] for x in arr]
    return [[[float(x.real), float(x.imag)] for x in row] for row in arr]


def pointer_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        pointer = "/" + "/".join(str(p) for p in err["loc"])
        lines.append(f"{pointer}: {err['msg']}")
    return "\n".join(lines)


def load_run_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(pointer_errors(exc)) from exc


def load_serve_config(data: dict) -> ServeConfig:
    try:
        return ServeConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(pointer_errors(exc)) from exc


def build_problem(config: RunConfig) -> SimulationProblem:
    grid = config.grid.build()
    return SimulationProblem(
        model=config.model.build(),
        grid=grid,
        guess=config.guess.build(grid),
        objective=config.objective.build_spec(),
        initial=config.objective.build_initial(),
    )
