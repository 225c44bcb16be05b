import json
import os
import threading
import time

import numpy as np
import pytest

from dcrab import dynamics as dyn
from dcrab import loopserver as ls
from dcrab import objectives as obj
from dcrab import optimizer as opt
from dcrab import pulses as pl
from dcrab.mock_client import MockClient

KET0 = np.array([1.0, 0.0], dtype=complex)
KET1 = np.array([0.0, 1.0], dtype=complex)


def small_problem(n=40, duration=3 * np.pi):
    grid = pl.TimeGrid(duration, n)
    return opt.SimulationProblem(
        model=dyn.build_model("two_level", {"delta": 1.0}),
        grid=grid,
        guess=pl.Pulse(grid, np.full(n, np.pi / duration)),
        objective=obj.ObjectiveSpec(kind="state_fidelity", target=KET1),
        initial=KET0,
    )


def small_search(**kw):
    defaults = dict(n_funcs=2, max_superiterations=2, max_evals=15, seed=7)
    defaults.update(kw)
    return opt.SearchConfig(**defaults)


class TestCodec:
    def test_pulse_request_round_trip(self):
        msg = ls.LoopMessage(
            type="pulse_request",
            session="abc",
            iter=3,
            pulses=({"times": [0.0, 0.5, 1.0], "values": [0.1, -0.2, 0.3]},),
        )
        assert ls.decode(ls.encode(msg)) == msg

    def test_fom_reply_without_err(self):
        decoded = ls.decode('{"type": "fom_reply", "session": "s", "iter": 0, "J": 0.5}')
        assert decoded.j == 0.5
        assert decoded.err is None

    def test_all_types_round_trip(self):
        for msg in (
            ls.LoopMessage(type="session_open", session="s", config={"n_funcs": 2}),
            ls.LoopMessage(type="session_close", session="s", reason="done", best_j=0.9),
            ls.LoopMessage(type="error", session="s", status="boom"),
        ):
            assert ls.decode(ls.encode(msg)) == msg

    def test_unknown_fields_ignored(self):
        decoded = ls.decode(
            '{"type": "fom_reply", "session": "s", "iter": 1, "J": 0.1, "extra": [1, 2]}'
        )
        assert decoded.j == 0.1

    def test_truncated_line(self):
        with pytest.raises(ls.ProtocolError, match="unexpected end"):
            ls.decode('{"type": "fom_reply", "session":')
        with pytest.raises(ls.ProtocolError, match="unexpected end"):
            ls.decode("")

    def test_missing_fields_named(self):
        with pytest.raises(ls.ProtocolError, match="J"):
            ls.decode('{"type": "fom_reply", "session": "s", "iter": 0}')
        with pytest.raises(ls.ProtocolError, match="iter"):
            ls.decode('{"type": "fom_reply", "session": "s", "J": 0.5}')
        with pytest.raises(ls.ProtocolError, match="reason"):
            ls.decode('{"type": "session_close", "session": "s"}')

    def test_nonfinite_j_rejected(self):
        with pytest.raises(ls.ProtocolError, match="J"):
            ls.decode('{"type": "fom_reply", "session": "s", "iter": 0, "J": NaN}')


def run_tcp_session(search, problem, client, port, timeout=20.0):
    session = ls.SessionConfig(
        search=search,
        grid=problem.grid,
        guess=problem.guess,
        transport=("tcp", "127.0.0.1", port),
        timeout=timeout,
    )
    out = {}

    def srv():
        out["record"] = ls.serve(session)

    thread = threading.Thread(target=srv)
    thread.start()
    time.sleep(0.1)
    client.run_tcp("127.0.0.1", port)
    thread.join()
    return out["record"]


class TestTcpLoop:
    def test_loopback_matches_direct_run(self):
        problem = small_problem()
        search = small_search()
        direct = opt.run_dcrab(small_problem(), search)
        record = run_tcp_session(search, problem, MockClient(small_problem()), 39311)
        assert [e.coefficients for e in record.evaluations] == [
            e.coefficients for e in direct.evaluations
        ]
        for a, b in zip(record.evaluations, direct.evaluations):
            assert abs(a.j - b.j) < 1e-9
        assert abs(record.final_j - direct.final_j) < 1e-9

    def test_nonfinite_j_terminates_session(self):
        problem = small_problem()

        class BadClient(MockClient):
            def measure(self, pulse):
                return float("nan"), None

        record = run_tcp_session(small_search(), problem, BadClient(small_problem()), 39312)
        assert record.termination.startswith(("aborted", "evaluator_failure"))

    def test_zero_budget_session(self):
        problem = small_problem()
        search = small_search(max_evals=0, max_superiterations=1)
        record = run_tcp_session(search, problem, MockClient(small_problem()), 39313)
        np.testing.assert_array_equal(record.final_pulse.values, problem.guess.values)
        assert record.total_evaluations == 0

    def test_reported_errors_recorded(self):
        problem = small_problem()
        client = MockClient(small_problem(), shots=500, seed=4)
        record = run_tcp_session(small_search(max_superiterations=1), problem, client, 39314)
        errs = [e for e in record.reported_errors if e is not None]
        assert errs and all(e >= 0 for e in errs)


class TestExchangeDir:
    def run_dir_session(self, tmp_path, search, client, timeout=20.0):
        problem = small_problem()
        session = ls.SessionConfig(
            search=search,
            grid=problem.grid,
            guess=problem.guess,
            transport=("dir", str(tmp_path)),
            timeout=timeout,
        )
        out = {}

        def srv():
            out["record"] = ls.serve(session)

        thread = threading.Thread(target=srv)
        thread.start()
        time.sleep(0.1)
        client.run_dir(str(tmp_path), timeout=timeout)
        thread.join()
        return out["record"]

    def test_transport_equivalence_with_direct_run(self, tmp_path):
        search = small_search()
        direct = opt.run_dcrab(small_problem(), search)
        record = self.run_dir_session(tmp_path, search, MockClient(small_problem()))
        assert [e.coefficients for e in record.evaluations] == [
            e.coefficients for e in direct.evaluations
        ]
        assert abs(record.final_j - direct.final_j) < 1e-9

    def test_artifacts_and_manifest(self, tmp_path):
        search = small_search(max_superiterations=1, max_evals=5)
        self.run_dir_session(tmp_path, search, MockClient(small_problem()))
        manifest = json.loads((tmp_path / "session.json").read_text())
        assert "session" in manifest
        assert (tmp_path / "pulse_0.csv").exists()
        assert (tmp_path / "pulse_0.ready").exists()
        assert (tmp_path / "fom_0.json").exists()
        close = ls.decode((tmp_path / "session_close.json").read_text())
        assert close.reason

    def test_wrong_iteration_reply_rejected(self, tmp_path):
        transport = ls.ExchangeDirTransport(str(tmp_path), timeout=1.0)
        transport.open("sess", {})
        msg = ls.LoopMessage(
            type="pulse_request",
            session="sess",
            iter=0,
            pulses=({"times": [0.0, 1.0], "values": [0.0, 0.0]},),
        )
        transport.send(msg)
        reply = ls.LoopMessage(type="fom_reply", session="sess", iter=5, j=0.5)
        (tmp_path / "fom_0.json").write_text(ls.encode(reply))
        with pytest.raises(ls.ProtocolError, match="iter"):
            transport.recv()

    def test_stale_session_reply_rejected(self, tmp_path):
        transport = ls.ExchangeDirTransport(str(tmp_path), timeout=1.0)
        transport.open("fresh", {})
        msg = ls.LoopMessage(
            type="pulse_request",
            session="fresh",
            iter=0,
            pulses=({"times": [0.0, 1.0], "values": [0.0, 0.0]},),
        )
        transport.send(msg)
        stale = ls.LoopMessage(type="fom_reply", session="old", iter=0, j=0.5)
        (tmp_path / "fom_0.json").write_text(ls.encode(stale))
        with pytest.raises(ls.ProtocolError, match="session"):
            transport.recv()

    def test_files_never_overwritten(self, tmp_path):
        transport = ls.ExchangeDirTransport(str(tmp_path), timeout=1.0)
        transport.open("sess", {})
        msg = ls.LoopMessage(
            type="pulse_request",
            session="sess",
            iter=0,
            pulses=({"times": [0.0, 1.0], "values": [0.0, 0.0]},),
        )
        transport.send(msg)
        with pytest.raises(ls.ProtocolError):
            transport.send(msg)

    def test_missing_ready_marker_ignored(self, tmp_path):
        # a pulse csv without its .ready marker must not be consumed
        (tmp_path / "session.json").write_text(json.dumps({"session": "sess"}))
        grid = pl.TimeGrid(1.0, 3)
        pl.write_pulse_csv(pl.Pulse(grid, np.zeros(3)), tmp_path / "pulse_0.csv")
        client = MockClient(small_problem())
        with pytest.raises(TimeoutError):
            client.run_dir(str(tmp_path), timeout=0.5)
        assert not (tmp_path / "fom_0.json").exists()


class TestSessionConfig:
    def test_timeout_must_be_positive(self):
        problem = small_problem()
        with pytest.raises(ValueError):
            ls.SessionConfig(
                search=small_search(),
                grid=problem.grid,
                guess=problem.guess,
                transport=("tcp", "127.0.0.1", 0),
                timeout=0.0,
            )
