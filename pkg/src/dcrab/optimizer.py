"""Nelder-Mead inner search and the CRAB/dCRAB drivers.

The inner loop is a plain Nelder-Mead simplex (reflection 1, expansion 2,
contraction 0.5, shrink 0.5) maximizing the figure of merit.  ``run_crab``
optimizes the coefficients of a single random basis; ``run_dcrab`` wraps it
in super-iterations where each new basis dresses the incumbent pulse
through a scaling coefficient c0, so the first evaluation of every
super-iteration reproduces the previous best pulse exactly.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Protocol

import numpy as np

from . import pulses as pl
from .dynamics import Model, propagate
from .objectives import ObjectiveSpec, compose_objective


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for the (d)CRAB drivers."""

    n_funcs: int = 4
    max_superiterations: int = 10
    max_evals: int = 200  # per super-iteration
    simplex_tol: float = 1e-10
    initial_scale: float | None = None  # None: 0.1 * max|guess| (or 0.1 if zero guess)
    c0_scale: float = 0.05
    stall_threshold: float = 1e-6
    target_j: float | None = None
    omega_max: float | None = None  # None: 2*pi*(n_funcs/2 + 1)/T
    envelope: str = "sine"
    assemble_mode: str = "auto"  # auto | multiplicative | additive
    seed: int = 0

    def __post_init__(self):
        # max_evals may be 0 so a closed-loop session can open and close
        # without evaluating anything.
        if self.n_funcs < 1 or self.max_superiterations < 1 or self.max_evals < 0:
            raise ValueError("counts must be positive")
        if not (0 < self.simplex_tol < 1) or not (0 < self.stall_threshold < 1):
            raise ValueError("tolerances must lie in (0, 1)")


@dataclass(frozen=True)
class EvalRecord:
    superiteration: int
    iteration: int
    coefficients: tuple[float, ...]
    j: float


@dataclass(frozen=True)
class SuperIterationResult:
    index: int
    basis_seed: int
    basis_json: str
    best_coefficients: tuple[float, ...]
    best_j: float
    n_evals: int


@dataclass
class OptimizationRecord:
    """Full audit trail of a (d)CRAB run."""

    evaluations: list[EvalRecord] = field(default_factory=list)
    superiterations: list[SuperIterationResult] = field(default_factory=list)
    best_pulses: list[pl.Pulse] = field(default_factory=list)
    final_pulse: pl.Pulse | None = None
    final_j: float = -np.inf
    termination: str = ""
    total_evaluations: int = 0
    wall_clock: float = 0.0
    seed: int = 0
    reported_errors: list[float | None] = field(default_factory=list)

    def summary_dict(self) -> dict:
        return {
            "final_j": self.final_j,
            "termination": self.termination,
            "total_evaluations": self.total_evaluations,
            "wall_clock": self.wall_clock,
            "seed": self.seed,
            "superiterations": [
                {
                    "index": s.index,
                    "basis_seed": s.basis_seed,
                    "basis": json.loads(s.basis_json),
                    "best_coefficients": list(s.best_coefficients),
                    "best_j": s.best_j,
                    "n_evals": s.n_evals,
                }
                for s in self.superiterations
            ],
        }

    def evaluations_jsonl(self) -> str:
        lines = [
            json.dumps(
                {
                    "superiteration": e.superiteration,
                    "iteration": e.iteration,
                    "coefficients": list(e.coefficients),
                    "J": e.j,
                }
            )
            for e in self.evaluations
        ]
        return "\n".join(lines) + ("\n" if lines else "")


class EvaluationFailure(RuntimeError):
    """An evaluator failed hard; the run aborts with a partial record."""


def nelder_mead(
    fom: Callable[[np.ndarray], float],
    x0: np.ndarray,
    initial_scale: np.ndarray | float,
    tol: float,
    max_evals: int,
) -> tuple[np.ndarray, float, int]:
    """Maximize ``fom`` with a standard Nelder-Mead simplex.

    The initial simplex is x0 plus per-coordinate offsets of
    ``initial_scale``.  Terminates when the spread of simplex values drops
    below ``tol`` or the evaluation budget is exhausted.  Returns the best
    point seen, its value and the number of evaluations used.
    """
    x0 = np.asarray(x0, dtype=float)
    n = len(x0)
    scale = np.broadcast_to(np.asarray(initial_scale, dtype=float), (n,))
    evals = 0

    def g(x):
        nonlocal evals
        evals += 1
        return -fom(x)

    if max_evals == 0:
        return x0, -np.inf, 0
    simplex = [x0.copy()]
    for i in range(n):
        v = x0.copy()
        v[i] += scale[i]
        simplex.append(v)
    values = []
    for v in simplex:
        if evals >= max_evals:
            break
        values.append(g(v))
    simplex = simplex[: len(values)]

    def order():
        idx = np.argsort(values)
        return [simplex[i] for i in idx], [values[i] for i in idx]

    simplex, values = order()
    while evals < max_evals and len(simplex) == n + 1:
        if max(values) - min(values) < tol:
            break
        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]
        reflected = centroid + (centroid - worst)
        fr = g(reflected)
        if fr < values[0]:
            if evals < max_evals:
                expanded = centroid + 2.0 * (centroid - worst)
                fe = g(expanded)
                if fe < fr:
                    simplex[-1], values[-1] = expanded, fe
                else:
                    simplex[-1], values[-1] = reflected, fr
            else:
                simplex[-1], values[-1] = reflected, fr
        elif fr < values[-2]:
            simplex[-1], values[-1] = reflected, fr
        else:
            if fr < values[-1]:
                simplex[-1], values[-1] = reflected, fr
            if evals >= max_evals:
                break
            contracted = centroid + 0.5 * (simplex[-1] - centroid)
            fc = g(contracted)
            if fc < values[-1]:
                simplex[-1], values[-1] = contracted, fc
            else:
                best = simplex[0]
                for i in range(1, n + 1):
                    if evals >= max_evals:
                        break
                    simplex[i] = best + 0.5 * (simplex[i] - best)
                    values[i] = g(simplex[i])
        simplex, values = order()
    best_i = int(np.argmin(values))
    return simplex[best_i], -values[best_i], evals


class Problem(Protocol):
    grid: pl.TimeGrid
    guess: pl.Pulse

    def evaluate(self, pulse: pl.Pulse) -> float: ...


@dataclass
class SimulationProblem:
    """Model-based problem: assemble, constrain, propagate, score."""

    model: Model
    grid: pl.TimeGrid
    guess: pl.Pulse
    objective: ObjectiveSpec
    initial: np.ndarray

    def evaluate(self, pulse: pl.Pulse) -> float:
        prop = propagate(
            self.model,
            pulse,
            self.initial,
            want_unitary=self.objective.wants_unitary,
            store_trajectory=False,
        )
        raw = self.objective.raw_fom(prop)
        return compose_objective(self.objective, raw, pulse)

    @property
    def constraint(self) -> tuple[str, float | None]:
        return self.objective.constraint, self.objective.f_max


def apply_constraint(pulse: pl.Pulse, mode: str, f_max: float | None) -> pl.Pulse:
    if mode == "none":
        return pulse
    if mode == "hard_wall":
        return pl.clip_hard_wall(pulse, f_max)
    if mode == "rescale":
        return pl.rescale_to_bound(pulse, f_max)
    raise ValueError(f"unknown constraint mode {mode!r}")


def child_seed(master_seed: int, superiteration: int) -> int:
    """Deterministic independent seed for one super-iteration's basis."""
    ss = np.random.SeedSequence([int(master_seed), int(superiteration)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] % (2**63))


def _resolve_mode(config: SearchConfig, guess: pl.Pulse) -> str:
    if config.assemble_mode != "auto":
        return config.assemble_mode
    return "additive" if np.max(np.abs(guess.values)) == 0 else "multiplicative"


def _resolve_scale(config: SearchConfig, guess: pl.Pulse) -> float:
    if config.initial_scale is not None:
        return config.initial_scale
    peak = float(np.max(np.abs(guess.values)))
    return 0.1 * peak if peak > 0 else 0.1


def _resolve_omega_max(config: SearchConfig, grid: pl.TimeGrid) -> float:
    if config.omega_max is not None:
        return config.omega_max
    return 2.0 * np.pi * (config.n_funcs / 2.0 + 1.0) / grid.duration


def _constrained(problem, pulse: pl.Pulse) -> pl.Pulse:
    mode, f_max = getattr(problem, "constraint", ("none", None))
    return apply_constraint(pulse, mode, f_max)


def _abort(record: OptimizationRecord, problem, reason: str, t0: float) -> OptimizationRecord:
    record.final_pulse = record.best_pulses[-1] if record.best_pulses else _constrained(
        problem, problem.guess
    )
    record.final_j = max((e.j for e in record.evaluations), default=-np.inf)
    record.total_evaluations = len(record.evaluations)
    record.termination = reason
    record.wall_clock = time.perf_counter() - t0
    return record


def run_crab(problem, config: SearchConfig, seed: int | None = None) -> OptimizationRecord:
    """Single-basis CRAB: one random basis, coefficients optimized from zero."""
    t0 = time.perf_counter()
    seed = config.seed if seed is None else seed
    record = OptimizationRecord(seed=seed)
    grid = problem.grid
    guess = problem.guess
    mode = _resolve_mode(config, guess)
    basis_seed = child_seed(seed, 0)
    basis = pl.sample_basis(
        config.n_funcs, grid, _resolve_omega_max(config, grid), config.envelope, basis_seed
    )
    iteration = 0

    def evaluate_coeffs(c: np.ndarray) -> float:
        nonlocal iteration
        pulse = pl.assemble_pulse(guess, basis, pl.CrabCoefficients(c), mode=mode)
        pulse = _constrained(problem, pulse)
        try:
            j = problem.evaluate(pulse)
        except (ValueError, ArithmeticError):
            j = -np.inf
        record.evaluations.append(
            EvalRecord(1, iteration, tuple(float(x) for x in c), float(j))
        )
        iteration += 1
        return j

    try:
        x_best, j_best, n_evals = nelder_mead(
            evaluate_coeffs,
            np.zeros(config.n_funcs),
            _resolve_scale(config, guess),
            config.simplex_tol,
            config.max_evals,
        )
    except EvaluationFailure as exc:
        return _abort(record, problem, f"evaluator_failure: {exc}", t0)
    best_pulse = _constrained(
        problem,
        pl.assemble_pulse(guess, basis, pl.CrabCoefficients(x_best), mode=mode),
    )
    record.superiterations.append(
        SuperIterationResult(
            1, basis_seed, basis.to_json(), tuple(float(x) for x in x_best),
            float(j_best), n_evals,
        )
    )
    record.best_pulses.append(best_pulse)
    record.final_pulse = best_pulse
    record.final_j = float(j_best)
    record.total_evaluations = n_evals
    if config.target_j is not None and j_best >= config.target_j:
        record.termination = "target_reached"
    elif n_evals >= config.max_evals:
        record.termination = "budget_exhausted"
    else:
        record.termination = "simplex_converged"
    record.wall_clock = time.perf_counter() - t0
    return record


def run_dcrab(problem, config: SearchConfig, seed: int | None = None) -> OptimizationRecord:
    """Dressed CRAB: super-iterations with a fresh random basis each."""
    t0 = time.perf_counter()
    seed = config.seed if seed is None else seed
    record = OptimizationRecord(seed=seed)
    grid = problem.grid
    guess = problem.guess
    omega_max = _resolve_omega_max(config, grid)
    incumbent = _constrained(problem, guess)
    best_j = None
    termination = "max_superiterations"
    if config.max_evals == 0:
        record.final_pulse = incumbent
        record.termination = "zero_budget"
        record.wall_clock = time.perf_counter() - t0
        return record

    for j_iter in range(1, config.max_superiterations + 1):
        basis_seed = child_seed(seed, j_iter)
        basis = pl.sample_basis(
            config.n_funcs, grid, omega_max, config.envelope, basis_seed
        )
        iteration = 0

        def evaluate_coeffs(x: np.ndarray) -> float:
            nonlocal iteration
            coeffs = pl.CrabCoefficients(x[1:], c0=float(x[0]))
            pulse = pl.assemble_pulse(
                guess, basis, coeffs, mode="dressed", previous=incumbent
            )
            pulse = _constrained(problem, pulse)
            try:
                jv = problem.evaluate(pulse)
            except (ValueError, ArithmeticError):
                jv = -np.inf
            record.evaluations.append(
                EvalRecord(j_iter, iteration, tuple(float(v) for v in x), float(jv))
            )
            iteration += 1
            return jv

        x0 = np.zeros(config.n_funcs + 1)
        x0[0] = 1.0
        scales = np.full(config.n_funcs + 1, _resolve_scale(config, incumbent))
        scales[0] = config.c0_scale
        try:
            x_best, j_best, n_evals = nelder_mead(
                evaluate_coeffs, x0, scales, config.simplex_tol, config.max_evals
            )
        except EvaluationFailure as exc:
            return _abort(record, problem, f"evaluator_failure: {exc}", t0)
        record.total_evaluations += n_evals
        coeffs = pl.CrabCoefficients(x_best[1:], c0=float(x_best[0]))
        candidate = _constrained(
            problem,
            pl.assemble_pulse(guess, basis, coeffs, mode="dressed", previous=incumbent),
        )
        record.superiterations.append(
            SuperIterationResult(
                j_iter, basis_seed, basis.to_json(),
                tuple(float(v) for v in x_best), float(j_best), n_evals,
            )
        )
        record.best_pulses.append(candidate)
        incumbent = candidate
        if config.target_j is not None and j_best >= config.target_j:
            best_j = j_best
            termination = "target_reached"
            break
        if best_j is not None:
            improvement = (j_best - best_j) / max(abs(best_j), 1e-300)
            if improvement < config.stall_threshold:
                best_j = max(best_j, j_best)
                termination = "stalled"
                break
        best_j = j_best if best_j is None else max(best_j, j_best)

    record.final_pulse = incumbent
    record.final_j = float(best_j) if best_j is not None else -np.inf
    record.termination = termination
    record.wall_clock = time.perf_counter() - t0
    return record


def reassemble_final_pulse(
    problem, config: SearchConfig, record: OptimizationRecord
) -> pl.Pulse:
    """Rebuild the final pulse from the stored coefficient history."""
    guess = problem.guess
    incumbent = _constrained(problem, guess)
    for s in record.superiterations:
        basis = pl.BasisSet.from_json(s.basis_json)
        x = np.asarray(s.best_coefficients)
        coeffs = pl.CrabCoefficients(x[1:], c0=float(x[0]))
        incumbent = _constrained(
            problem,
            pl.assemble_pulse(guess, basis, coeffs, mode="dressed", previous=incumbent),
        )
    return incumbent
