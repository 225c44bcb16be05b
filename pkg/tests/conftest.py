from pathlib import Path

import numpy as np
import pytest


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def haar_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_su2(rng: np.random.Generator) -> np.ndarray:
    u = haar_unitary(2, rng)
    return u / np.sqrt(np.linalg.det(u).astype(complex))


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


VERDICT_FILE = Path(__file__).with_name("_acceptance_verdicts.txt")


def pytest_sessionstart(session):
    VERDICT_FILE.unlink(missing_ok=True)


def pytest_terminal_summary(terminalreporter):
    # acceptance verdict lines survive output capture
    if VERDICT_FILE.exists():
        terminalreporter.section("acceptance criteria")
        for line in VERDICT_FILE.read_text().splitlines():
            terminalreporter.write_line(line)
