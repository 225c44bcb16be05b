"""Shared handlers behind the CLI and the HTTP service."""

from __future__ import annotations

import dataclasses
import json
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import diagnostics as dg
from . import pulses as pl
from .config import RunConfig, ServeConfig, build_problem, parse_complex_payload
from .loopserver import SessionConfig, serve
from .objectives import compose_objective
from .optimizer import OptimizationRecord, run_crab, run_dcrab


def summary_payload(record: OptimizationRecord) -> dict:
    # wall_clock excluded so reruns with the same seed are byte-identical
    d = record.summary_dict()
    d.pop("wall_clock")
    d["error"] = 1.0 - d["final_j"] if np.isfinite(d["final_j"]) else None
    return d


def write_record(record: OptimizationRecord, out_dir: str) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    summary = summary_payload(record)
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "record.jsonl"), "w", encoding="utf-8") as fh:
        fh.write(record.evaluations_jsonl())
    if record.final_pulse is not None:
        pl.write_pulse_csv(record.final_pulse, os.path.join(out_dir, "final_pulse.csv"))
    return summary


def run_one(config: RunConfig, seed: int | None = None) -> OptimizationRecord:
    problem = build_problem(config)
    search = config.search.build()
    runner = run_crab if config.search.algorithm == "crab" else run_dcrab
    return runner(problem, search, seed=seed)


def handle_optimize(
    config: RunConfig,
    seed: int | None = None,
    output: str | None = None,
    jobs: int = 1,
    seeds: list[int] | None = None,
) -> dict:
    """Run one optimization, or an ensemble over explicit seeds."""
    out_dir = output or config.output
    if seeds:
        with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
            records = list(pool.map(lambda s: run_one(config, seed=s), seeds))
        summaries = []
        for s, rec in zip(seeds, records):
            if out_dir:
                summaries.append(write_record(rec, os.path.join(out_dir, f"seed_{s}")))
            else:
                summaries.append(summary_payload(rec))
        best = max(range(len(records)), key=lambda i: records[i].final_j)
        result = {
            "ensemble": summaries,
            "best_seed": seeds[best],
            "final_j": records[best].final_j,
            "termination": records[best].termination,
        }
        if out_dir:
            with open(os.path.join(out_dir, "ensemble.json"), "w", encoding="utf-8") as fh:
                json.dump(result, fh, indent=2, sort_keys=True)
                fh.write("\n")
        return result
    record = run_one(config, seed=seed)
    if out_dir:
        return write_record(record, out_dir)
    return summary_payload(record)


def handle_evaluate(config: RunConfig, pulse: pl.Pulse | None = None) -> dict:
    """Propagate one pulse and break J down into raw figure and penalties."""
    problem = build_problem(config)
    if pulse is None:
        pulse = problem.guess
    if pulse.grid != problem.grid:
        raise ValueError("/guess: pulse grid does not match /grid")
    spec = problem.objective
    from .dynamics import propagate

    prop = propagate(
        problem.model, pulse, problem.initial, want_unitary=spec.wants_unitary
    )
    raw = spec.raw_fom(prop)
    j = compose_objective(spec, raw, pulse)
    breakdown = {"J": j, "raw_fom": raw, "penalties": {}}
    for kind, weight in spec.penalties:
        if kind == "height":
            breakdown["penalties"][kind] = weight * float(np.max(np.abs(pulse.values)))
        else:
            breakdown["penalties"][kind] = weight * pl.pulse_energy(pulse)
    return breakdown


def handle_diagnose(inputs: dict) -> dict:
    """Compute every diagnostic named in the input document."""
    report: dict = {}
    if "qsl" in inputs:
        d = inputs["qsl"]
        report["qsl"] = dg.qsl_bhattacharyya(
            float(d["delta_e"]),
            parse_complex_payload(d["initial"]),
            parse_complex_payload(d["target"]),
        )
    if "qsl_gap" in inputs:
        report["qsl_gap"] = dg.qsl_gap(float(inputs["qsl_gap"]["gap"]))
    if "capacity" in inputs:
        d = dict(inputs["capacity"])
        report["capacity"] = dg.capacity(d.pop("mode"), **d)
    if "error_bound" in inputs:
        d = inputs["error_bound"]
        report["error_bound"] = dg.error_bound(
            float(d["info_bits"]), float(d["reachable_dims"])
        )
    if "time_bound" in inputs:
        d = inputs["time_bound"]
        report["time_bound"] = dg.time_bound(
            float(d["reachable_dims"]), float(d["capacity"]), float(d["error"])
        )
    if "state_transfer_dims" in inputs:
        report["state_transfer_dims"] = dg.state_transfer_dims(
            int(inputs["state_transfer_dims"]["hilbert_dim"])
        )
    if "error_scaling" in inputs:
        samples = [(float(a), float(b)) for a, b in inputs["error_scaling"]["samples"]]
        fit = dg.fit_error_scaling(samples)
        report["error_scaling"] = {
            "b1": fit.b1, "b2": fit.b2, "residual": fit.residual, "flagged": fit.flagged,
        }
    if not report:
        raise ValueError("no recognized diagnostic sections in input")
    return report


def handle_serve(config: ServeConfig, seed: int | None = None) -> dict:
    grid = config.grid.build()
    search = config.search.build()
    if seed is not None:
        search = dataclasses.replace(search, seed=seed)
    tc = config.transport
    transport = ("tcp", tc.host, tc.port) if tc.kind == "tcp" else ("dir", tc.path)
    session = SessionConfig(
        search=search,
        grid=grid,
        guess=config.guess.build(grid),
        transport=transport,
        timeout=config.timeout,
        constraint=config.constraint,
        f_max=config.f_max,
        session_id=config.session_id,
        algorithm=config.search.algorithm,
    )
    record = serve(session)
    if config.output:
        return write_record(record, config.output)
    return summary_payload(record)
