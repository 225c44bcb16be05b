"""Closed-loop optimization server.

The dCRAB engine runs server-side; an external client evaluates the figure
of merit for each trial pulse.  Wire format: UTF-8 line-delimited JSON,
one message per line, strict request/reply alternation.  Two transports:
TCP and a shared exchange directory (pulse_<iter>.csv + .ready marker,
fom_<iter>.json replies, session.json manifest).
"""

from __future__ import annotations

import json
import math
import os
import socket
import time
import uuid
from dataclasses import dataclass, field

import numpy as np

from . import pulses as pl
from .optimizer import (
    EvaluationFailure,
    OptimizationRecord,
    SearchConfig,
    apply_constraint,
    run_dcrab,
)

MESSAGE_TYPES = ("pulse_request", "fom_reply", "session_open", "session_close", "error")


class ProtocolError(ValueError):
    """Malformed or out-of-protocol message; carries the offending field."""

    def __init__(self, fieldname: str, detail: str = ""):
        self.fieldname = fieldname
        super().__init__(f"protocol error in {fieldname!r}: {detail}" if detail else
                         f"protocol error in {fieldname!r}")


@dataclass(frozen=True)
class LoopMessage:
    type: str
    session: str
    iter: int | None = None
    pulses: tuple[dict, ...] | None = None  # each {"times": [...], "values": [...]}
    j: float | None = None
    err: float | None = None
    reason: str | None = None
    best_j: float | None = None
    config: dict | None = None
    status: str | None = None


def encode(msg: LoopMessage) -> str:
    """One line of JSON; optional fields are dropped when absent."""
    d: dict = {"type": msg.type, "session": msg.session}
    if msg.iter is not None:
        d["iter"] = msg.iter
    if msg.pulses is not None:
        d["pulses"] = list(msg.pulses)
    if msg.j is not None:
        d["J"] = msg.j
    if msg.err is not None:
        d["err"] = msg.err
    if msg.reason is not None:
        d["reason"] = msg.reason
    if msg.best_j is not None:
        d["best_J"] = msg.best_j
    if msg.config is not None:
        d["config"] = msg.config
    if msg.status is not None:
        d["status"] = msg.status
    return json.dumps(d)


def decode(line: str) -> LoopMessage:
    """Parse one line; unknown fields are ignored for forward compatibility."""
    line = line.strip()
    if not line:
        raise ProtocolError("line", "unexpected end of input")
    try:
        d = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError("line", f"unexpected end or invalid JSON: {exc.msg}") from exc
    if not isinstance(d, dict):
        raise ProtocolError("line", "message must be a JSON object")
    mtype = d.get("type")
    if mtype not in MESSAGE_TYPES:
        raise ProtocolError("type", f"unknown message type {mtype!r}")
    session = d.get("session")
    if not isinstance(session, str):
        raise ProtocolError("session", "missing or not a string")
    msg = LoopMessage(
        type=mtype,
        session=session,
        iter=d.get("iter"),
        pulses=tuple(d["pulses"]) if "pulses" in d else None,
        j=d.get("J"),
        err=d.get("err"),
        reason=d.get("reason"),
        best_j=d.get("best_J"),
        config=d.get("config"),
        status=d.get("status"),
    )
    if mtype == "pulse_request":
        if msg.iter is None:
            raise ProtocolError("iter", "pulse_request requires an iteration index")
        if msg.pulses is None:
            raise ProtocolError("pulses", "pulse_request requires pulses")
    if mtype == "fom_reply":
        if msg.iter is None:
            raise ProtocolError("iter", "fom_reply requires an iteration index")
        if msg.j is None or not isinstance(msg.j, (int, float)):
            raise ProtocolError("J", "fom_reply requires a numeric J")
        if not math.isfinite(msg.j):
            raise ProtocolError("J", "J must be finite")
    if mtype == "session_close" and msg.reason is None:
        raise ProtocolError("reason", "session_close requires a reason")
    return msg


def pulse_to_payload(pulse: pl.Pulse) -> dict:
    return {
        "times": [float(t) for t in pulse.grid.times()],
        "values": [float(v) for v in pulse.values],
    }


@dataclass(frozen=True)
class SessionConfig:
    search: SearchConfig
    grid: pl.TimeGrid
    guess: pl.Pulse
    transport: tuple  # ("tcp", host, port) or ("dir", path)
    timeout: float = 30.0
    constraint: str = "none"
    f_max: float | None = None
    session_id: str | None = None
    algorithm: str = "dcrab"

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


class TcpTransport:
    """Server side of the TCP line protocol: listen, accept one client."""

    def __init__(self, host: str, port: int, timeout: float):
        self.timeout = timeout
        self._listener = socket.create_server((host, port))
        self._listener.settimeout(timeout)
        self._conn = None
        self._reader = None
        self.port = self._listener.getsockname()[1]

    def open(self):
        self._conn, _ = self._listener.accept()
        self._conn.settimeout(self.timeout)
        self._reader = self._conn.makefile("r", encoding="utf-8", newline="\n")

    def send(self, msg: LoopMessage) -> None:
        self._conn.sendall((encode(msg) + "\n").encode("utf-8"))

    def recv(self) -> LoopMessage:
        try:
            line = self._reader.readline()
        except (TimeoutError, socket.timeout) as exc:
            raise TimeoutError("no reply within timeout") from exc
        if not line:
            raise ProtocolError("line", "connection closed")
        return decode(line)

    def close(self) -> None:
        for closable in (self._reader, self._conn, self._listener):
            if closable is not None:
                try:
                    closable.close()
                except OSError:
                    pass


class ExchangeDirTransport:
    """File-based transport on a shared exchange directory."""

    def __init__(self, directory: str, timeout: float, poll_interval: float = 0.02):
        self.directory = directory
        self.timeout = timeout
        self.poll_interval = poll_interval
        self.session_id = None
        self._awaiting: int | None = None

    def open(self, session_id: str, manifest: dict) -> None:
        os.makedirs(self.directory, exist_ok=True)
        self.session_id = session_id
        self._write_atomic("session.json", json.dumps({"session": session_id, **manifest}))

    def send(self, msg: LoopMessage) -> None:
        if msg.type == "pulse_request":
            name = f"pulse_{msg.iter}.csv"
            path = os.path.join(self.directory, name)
            if os.path.exists(path):
                raise ProtocolError("iter", f"{name} already exists; files are never overwritten")
            pulse = pl.Pulse(
                _grid_from_times(msg.pulses[0]["times"]),
                np.asarray(msg.pulses[0]["values"], dtype=float),
            )
            self._write_atomic(name, pl.pulse_to_csv(pulse))
            self._write_atomic(f"pulse_{msg.iter}.ready", "")
            self._awaiting = msg.iter
        elif msg.type == "session_close":
            self._write_atomic("session_close.json", encode(msg))
        elif msg.type == "error":
            self._write_atomic("session_error.json", encode(msg))

    def recv(self) -> LoopMessage:
        assert self._awaiting is not None, "recv without outstanding pulse_request"
        path = os.path.join(self.directory, f"fom_{self._awaiting}.json")
        deadline = time.monotonic() + self.timeout
        while time.monotonic() < deadline:
            if os.path.exists(path):
                with open(path, encoding="utf-8") as fh:
                    msg = decode(fh.read())
                if msg.session != self.session_id:
                    # stale file from a prior session: reject and keep waiting
                    raise ProtocolError("session", "fom reply from a stale session")
                if msg.iter != self._awaiting:
                    raise ProtocolError("iter", "fom reply for the wrong iteration")
                self._awaiting = None
                return msg
            time.sleep(self.poll_interval)
        raise TimeoutError(f"no fom_{self._awaiting}.json within timeout")

    def close(self) -> None:
        pass

    def _write_atomic(self, name: str, content: str) -> None:
        path = os.path.join(self.directory, name)
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(content)
        os.replace(tmp, path)


def _grid_from_times(times) -> pl.TimeGrid:
    return pl.TimeGrid(duration=float(times[-1]), n_samples=len(times))


@dataclass
class RemoteProblem:
    """Problem whose figure of merit is evaluated by the connected client."""

    grid: pl.TimeGrid
    guess: pl.Pulse
    transport: object
    session_id: str
    constraint_mode: str = "none"
    f_max: float | None = None
    iteration: int = 0
    reported_errors: list = field(default_factory=list)

    @property
    def constraint(self) -> tuple[str, float | None]:
        return self.constraint_mode, self.f_max

    def evaluate(self, pulse: pl.Pulse) -> float:
        request = LoopMessage(
            type="pulse_request",
            session=self.session_id,
            iter=self.iteration,
            pulses=(pulse_to_payload(pulse),),
        )
        self.transport.send(request)
        try:
            reply = self._await_reply(request)
        except TimeoutError as exc:
            raise EvaluationFailure(f"timeout at iteration {self.iteration}") from exc
        except ProtocolError as exc:
            self.transport.send(
                LoopMessage(type="error", session=self.session_id, status=str(exc))
            )
            raise EvaluationFailure(str(exc)) from exc
        if reply.type != "fom_reply":
            raise EvaluationFailure(f"expected fom_reply, got {reply.type}")
        if reply.iter != self.iteration:
            self.transport.send(
                LoopMessage(type="error", session=self.session_id,
                            status=f"expected iteration {self.iteration}, got {reply.iter}")
            )
            raise EvaluationFailure("iteration index mismatch")
        self.reported_errors.append(reply.err)
        self.iteration += 1
        return float(reply.j)

    def _await_reply(self, request: LoopMessage) -> LoopMessage:
        try:
            return self.transport.recv()
        except TimeoutError:
            # one retry, then give up
            if isinstance(self.transport, TcpTransport):
                self.transport.send(request)
            return self.transport.recv()


def serve(config: SessionConfig) -> OptimizationRecord:
    """Run a closed-loop dCRAB session against one connected client."""
    session_id = config.session_id or uuid.uuid4().hex
    kind = config.transport[0]
    if kind == "tcp":
        _, host, port = config.transport
        transport = TcpTransport(host, port, config.timeout)
        transport.open()
    elif kind == "dir":
        transport = ExchangeDirTransport(config.transport[1], config.timeout)
        transport.open(session_id, {"grid": {"duration": config.grid.duration,
                                             "n_samples": config.grid.n_samples}})
    else:
        raise ValueError(f"unknown transport {kind!r}")

    problem = RemoteProblem(
        grid=config.grid,
        guess=config.guess,
        transport=transport,
        session_id=session_id,
        constraint_mode=config.constraint,
        f_max=config.f_max,
    )
    reason = "completed"
    record = OptimizationRecord(seed=config.search.seed)
    try:
        if kind == "tcp":
            transport.send(
                LoopMessage(
                    type="session_open",
                    session=session_id,
                    config={
                        "grid": {"duration": config.grid.duration,
                                 "n_samples": config.grid.n_samples},
                        "constraint": config.constraint,
                        "f_max": config.f_max,
                        "n_funcs": config.search.n_funcs,
                    },
                )
            )
        record = run_dcrab(problem, config.search)
        reason = record.termination
    except EvaluationFailure as exc:
        record.termination = f"aborted: {exc}"
        record.total_evaluations = problem.iteration
        reason = record.termination
    finally:
        try:
            transport.send(
                LoopMessage(
                    type="session_close",
                    session=session_id,
                    reason=reason,
                    best_j=None if record.final_j == -np.inf else record.final_j,
                )
            )
        except OSError:
            pass
        transport.close()
    record.reported_errors = problem.reported_errors
    if record.final_pulse is None:
        record.final_pulse = apply_constraint(config.guess, config.constraint, config.f_max)
    return record
