"""Reference closed-loop client for the line protocol.

Simulates a remote experiment: receives trial pulses from the optimization
server, evaluates a figure of merit on a local model, and replies.  Optional
shot noise (binomial sampling of a fidelity) and additive Gaussian noise.
Usable in-process (``MockClient``) or standalone::

    python3 -m dcrab.mock_client --config cfg.json --host H --port P
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import sys
import time

import numpy as np

from . import pulses as pl
from .config import RunConfig, load_run_config
from .loopserver import LoopMessage, ProtocolError, decode, encode
from .optimizer import SimulationProblem


class MockClient:
    """Evaluates each requested pulse on a local simulation problem."""

    def __init__(
        self,
        problem: SimulationProblem,
        noise: float = 0.0,
        shots: int | None = None,
        seed: int = 0,
    ):
        self.problem = problem
        self.noise = noise
        self.shots = shots
        self.rng = np.random.default_rng(seed)
        self.n_evaluated = 0
        self.close_reason: str | None = None
        self.best_j: float | None = None

    def measure(self, pulse: pl.Pulse) -> tuple[float, float | None]:
        j = self.problem.evaluate(pulse)
        err = None
        if self.shots is not None:
            p = min(max(j, 0.0), 1.0)
            j = self.rng.binomial(self.shots, p) / self.shots
            err = float(np.sqrt(max(j * (1.0 - j), 1e-12) / self.shots))
        if self.noise > 0:
            j += self.rng.normal(0.0, self.noise)
            err = self.noise if err is None else float(np.hypot(err, self.noise))
        self.n_evaluated += 1
        return float(j), err

    def handle(self, msg: LoopMessage) -> LoopMessage | None:
        """Reply to one server message; None means the session is over."""
        if msg.type == "session_open":
            return None
        if msg.type == "session_close":
            self.close_reason = msg.reason
            self.best_j = msg.best_j
            raise StopIteration
        if msg.type == "error":
            self.close_reason = f"server error: {msg.status}"
            raise StopIteration
        if msg.type != "pulse_request":
            raise ProtocolError("type", f"client cannot handle {msg.type!r}")
        payload = msg.pulses[0]
        grid = pl.TimeGrid(duration=float(payload["times"][-1]), n_samples=len(payload["times"]))
        pulse = pl.Pulse(grid, np.asarray(payload["values"], dtype=float))
        j, err = self.measure(pulse)
        return LoopMessage(
            type="fom_reply", session=msg.session, iter=msg.iter, j=j, err=err
        )

    def run_tcp(self, host: str, port: int, timeout: float = 60.0) -> None:
        with socket.create_connection((host, port), timeout=timeout) as conn:
            reader = conn.makefile("r", encoding="utf-8", newline="\n")
            try:
                while True:
                    line = reader.readline()
                    if not line:
                        break
                    try:
                        reply = self.handle(decode(line))
                    except StopIteration:
                        break
                    if reply is not None:
                        conn.sendall((encode(reply) + "\n").encode("utf-8"))
            finally:
                reader.close()

    def run_dir(self, directory: str, timeout: float = 60.0, poll: float = 0.02) -> None:
        manifest_path = os.path.join(directory, "session.json")
        deadline = time.monotonic() + timeout
        while not os.path.exists(manifest_path):
            if time.monotonic() > deadline:
                raise TimeoutError("no session manifest")
            time.sleep(poll)
        with open(manifest_path, encoding="utf-8") as fh:
            session = json.load(fh)["session"]
        iteration = 0
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if os.path.exists(os.path.join(directory, "session_close.json")):
                with open(os.path.join(directory, "session_close.json"), encoding="utf-8") as fh:
                    msg = decode(fh.read())
                if msg.session == session:
                    self.close_reason = msg.reason
                    self.best_j = msg.best_j
                    return
            ready = os.path.join(directory, f"pulse_{iteration}.ready")
            if os.path.exists(ready):
                pulse = pl.read_pulse_csv(os.path.join(directory, f"pulse_{iteration}.csv"))
                j, err = self.measure(pulse)
                reply = LoopMessage(
                    type="fom_reply", session=session, iter=iteration, j=j, err=err
                )
                tmp = os.path.join(directory, f"fom_{iteration}.json.tmp")
                with open(tmp, "w", encoding="utf-8") as fh:
                    fh.write(encode(reply))
                os.replace(tmp, os.path.join(directory, f"fom_{iteration}.json"))
                iteration += 1
                deadline = time.monotonic() + timeout
            else:
                time.sleep(poll)
        raise TimeoutError("server went silent")


def client_from_config(config: RunConfig, noise: float, shots: int | None, seed: int) -> MockClient:
    from .config import build_problem

    return MockClient(build_problem(config), noise=noise, shots=shots, seed=seed)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="dcrab-mock-client")
    parser.add_argument("--config", required=True, help="run config with model and objective")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=None)
    parser.add_argument("--dir", default=None, help="exchange directory instead of TCP")
    parser.add_argument("--noise", type=float, default=0.0)
    parser.add_argument("--shots", type=int, default=None)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--timeout", type=float, default=60.0)
    args = parser.parse_args(argv)
    with open(args.config, encoding="utf-8") as fh:
        config = load_run_config(json.load(fh))
    client = client_from_config(config, args.noise, args.shots, args.seed)
    if args.dir:
        client.run_dir(args.dir, timeout=args.timeout)
    else:
        if args.port is None:
            print("error: --port required for TCP mode", file=sys.stderr)
            return 2
        client.run_tcp(args.host, args.port, timeout=args.timeout)
    print(json.dumps({
        "evaluations": client.n_evaluated,
        "close_reason": client.close_reason,
        "best_J": client.best_j,
    }))
    return 0


if __name__ == "__main__":
    sys.exit(main())
