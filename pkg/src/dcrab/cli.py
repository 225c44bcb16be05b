"""Command line entry point.

Subcommands: optimize, evaluate, diagnose, serve, serve-http.  All take a
single JSON configuration document.  Exit codes: 0 success, 1 optimization
ran cleanly but missed its target, 2 configuration or runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import pulses as pl
from .config import ConfigError, load_run_config, load_serve_config
from .runner import handle_diagnose, handle_evaluate, handle_optimize, handle_serve

EXIT_OK = 0
EXIT_TARGET_MISSED = 1
EXIT_ERROR = 2

CLEAN_TERMINATIONS = ("target_reached", "stalled", "zero_budget", "simplex_converged")


def _load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc.msg} (line {exc.lineno})") from exc


def _optimize_exit_code(summary: dict, target_j: float | None) -> int:
    termination = summary.get("termination", "")
    if termination.startswith(("aborted", "evaluator_failure")):
        return EXIT_ERROR
    if target_j is None or termination in CLEAN_TERMINATIONS:
        return EXIT_OK
    final_j = summary.get("final_j")
    if final_j is not None and final_j >= target_j:
        return EXIT_OK
    return EXIT_TARGET_MISSED


def cmd_optimize(args) -> int:
    config = load_run_config(_load_json(args.config))
    result = handle_optimize(
        config,
        seed=args.seed,
        output=args.output,
        jobs=args.jobs,
        seeds=config.seeds,
    )
    print(json.dumps(result, indent=2, sort_keys=True))
    return _optimize_exit_code(result, config.search.target_j)


def cmd_evaluate(args) -> int:
    config = load_run_config(_load_json(args.config))
    pulse = pl.read_pulse_csv(args.pulse) if args.pulse else None
    breakdown = handle_evaluate(config, pulse)
    print(json.dumps(breakdown, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_diagnose(args) -> int:
    report = handle_diagnose(_load_json(args.config))
    print(json.dumps(report, indent=2, sort_keys=True))
    if args.output:
        import os

        os.makedirs(args.output, exist_ok=True)
        with open(os.path.join(args.output, "diagnostics.json"), "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


def cmd_serve(args) -> int:
    config = load_serve_config(_load_json(args.config))
    summary = handle_serve(config, seed=args.seed)
    print(json.dumps(summary, indent=2, sort_keys=True))
    if summary.get("termination", "").startswith("aborted"):
        return EXIT_ERROR
    return _optimize_exit_code(summary, config.search.target_j)


def cmd_serve_http(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcrab")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="path to JSON config")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--jobs", type=int, default=1, help="parallel runs for ensembles")
        p.add_argument("--output", default=None, help="output directory")

    p_opt = sub.add_parser("optimize", help="run a CRAB/dCRAB optimization")
    common(p_opt)
    p_opt.set_defaults(func=cmd_optimize)

    p_eval = sub.add_parser("evaluate", help="propagate one pulse and print the J breakdown")
    common(p_eval)
    p_eval.add_argument("--pulse", default=None, help="pulse CSV (default: config guess)")
    p_eval.set_defaults(func=cmd_evaluate)

    p_diag = sub.add_parser("diagnose", help="compute speed limits, capacities and bounds")
    common(p_diag)
    p_diag.set_defaults(func=cmd_diagnose)

    p_srv = sub.add_parser("serve", help="run the closed-loop optimization server")
    common(p_srv)
    p_srv.set_defaults(func=cmd_serve)

    p_http = sub.add_parser("serve-http", help="start the HTTP API")
    p_http.add_argument("--host", default="127.0.0.1")
    p_http.add_argument("--port", type=int, default=8000)
    p_http.set_defaults(func=cmd_serve_http)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
