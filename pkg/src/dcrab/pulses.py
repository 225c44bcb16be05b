"""Time grids, randomized trigonometric bases and pulse assembly.

A control pulse is a real waveform sampled on a uniform time grid.  The
search bases are chopped random trigonometric bases: cosine/sine pairs
whose frequencies are drawn around the principal harmonics of the grid
duration, optionally multiplied by an envelope that pins the pulse to the
guess value at the start and end of the window.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

ENVELOPES = ("flat", "sine", "blackman")
BASIS_KINDS = ("cos", "sin")


class GridMismatchError(ValueError):
    """Two objects that must share a time grid do not."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid on [0, T] with ``n_samples`` points inclusive."""

    duration: float
    n_samples: int

    def __post_init__(self):
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ValueError(f"duration must be positive and finite, got {self.duration}")
        if self.n_samples < 2:
            raise ValueError(f"need at least 2 samples, got {self.n_samples}")

    @property
    def dt(self) -> float:
        return self.duration / (self.n_samples - 1)

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.duration, self.n_samples)


@dataclass(frozen=True)
class BasisFunctionSpec:
    """One trigonometric basis function: kind, angular frequency, envelope."""

    kind: str
    omega: float
    envelope: str = "sine"

    def __post_init__(self):
        if self.kind not in BASIS_KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.envelope not in ENVELOPES:
            raise ValueError(f"unknown envelope {self.envelope!r}")
        if not (self.omega > 0 and math.isfinite(self.omega)):
            raise ValueError(f"frequency must be positive, got {self.omega}")

    def evaluate(self, grid: TimeGrid) -> np.ndarray:
        t = grid.times()
        trig = np.cos(self.omega * t) if self.kind == "cos" else np.sin(self.omega * t)
        return trig * envelope_values(self.envelope, grid)


def envelope_values(kind: str, grid: TimeGrid) -> np.ndarray:
    t = grid.times()
    T = grid.duration
    if kind == "flat":
        return np.ones_like(t)
    if kind == "sine":
        return np.sin(np.pi * t / T)
    if kind == "blackman":
        x = 2.0 * np.pi * t / T
        return 0.42 - 0.5 * np.cos(x) + 0.08 * np.cos(2.0 * x)
    raise ValueError(f"unknown envelope {kind!r}")


@dataclass(frozen=True)
class BasisSet:
    """A randomized truncated basis spanning one super-iteration's search space."""

    functions: tuple[BasisFunctionSpec, ...]
    omega_max: float
    seed: int

    def __len__(self) -> int:
        return len(self.functions)

    def evaluate(self, grid: TimeGrid) -> np.ndarray:
        """Stack of basis functions sampled on the grid, shape (n_funcs, n_samples)."""
        return np.array([f.evaluate(grid) for f in self.functions])

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": int(self.seed),
                "omega_max": self.omega_max,
                "envelope": self.functions[0].envelope if self.functions else "sine",
                "functions": [{"kind": f.kind, "omega": f.omega} for f in self.functions],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "BasisSet":
        d = json.loads(text)
        env = d.get("envelope", "sine")
        funcs = tuple(
            BasisFunctionSpec(kind=f["kind"], omega=f["omega"], envelope=env)
            for f in d["functions"]
        )
        return cls(functions=funcs, omega_max=d["omega_max"], seed=int(d["seed"]))


@dataclass(frozen=True)
class Pulse:
    """A real control waveform on a uniform time grid."""

    grid: TimeGrid
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_samples,):
            raise ValueError(
                f"values length {v.shape} does not match grid ({self.grid.n_samples},)"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("pulse values must be finite")
        object.__setattr__(self, "values", _freeze(v))

    def with_values(self, values: np.ndarray, label: str | None = None) -> "Pulse":
        return Pulse(self.grid, values, self.label if label is None else label)


@dataclass(frozen=True)
class CrabCoefficients:
    """Expansion coefficients; ``c0`` scales the incumbent pulse (dressed mode only)."""

    values: np.ndarray
    c0: float | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", _freeze(v))


def sample_basis(
    n_funcs: int,
    grid: TimeGrid,
    omega_max: float,
    envelope: str = "sine",
    seed: int = 0,
) -> BasisSet:
    """Draw ``n_funcs`` cos/sin basis functions around the principal harmonics.

    The i-th function (1-based) uses angular frequency
    ``2*pi*(ceil(i/2) + r)/T`` with r uniform in (-0.5, 0.5), clipped to
    (0, omega_max].  Functions alternate cosine/sine.  Deterministic in seed.
    """
    if n_funcs < 1:
        raise ValueError("need at least one basis function")
    if omega_max <= 0:
        raise ValueError("omega_max must be positive")
    T = grid.duration
    # If even the lowest candidate frequency already exceeds omega_max, every
    # draw clips to omega_max and the basis is degenerate.
    if 2.0 * np.pi * 0.5 / T >= omega_max:
        raise ValueError(
            f"omega_max={omega_max} too small for duration {T}: all candidate "
            "frequencies clip to the same value"
        )
    rng = np.random.default_rng(seed)
    funcs = []
    for i in range(1, n_funcs + 1):
        harmonic = (i + 1) // 2
        r = rng.uniform(-0.5, 0.5)
        omega = 2.0 * np.pi * (harmonic + r) / T
        omega = min(omega, omega_max)
        kind = "cos" if i % 2 == 1 else "sin"
        funcs.append(BasisFunctionSpec(kind=kind, omega=omega, envelope=envelope))
    return BasisSet(functions=tuple(funcs), omega_max=omega_max, seed=int(seed))


def assemble_pulse(
    guess: Pulse,
    basis: BasisSet,
    coeffs: CrabCoefficients,
    mode: str = "multiplicative",
    previous: Pulse | None = None,
) -> Pulse:
    """Build a trial pulse from guess, basis and coefficients.

    multiplicative: f = g * (1 + sum_i c_i f_i)
    additive:       f = g + sum_i c_i f_i
    dressed:        f = c0 * previous + sum_i c_i f_i
    """
    if mode not in ("multiplicative", "additive", "dressed"):
        raise ValueError(f"unknown assembly mode {mode!r}")
    c = np.asarray(coeffs.values, dtype=float)
    if len(c) != len(basis):
        raise ValueError(
            f"coefficient count {len(c)} does not match basis size {len(basis)}"
        )
    grid = guess.grid
    if previous is not None and previous.grid != grid:
        raise GridMismatchError("previous pulse grid does not match guess grid")
    correction = basis.evaluate(grid).T @ c if len(c) else np.zeros(grid.n_samples)
    if mode == "multiplicative":
        values = guess.values * (1.0 + correction)
    elif mode == "additive":
        values = guess.values + correction
    else:
        if previous is None:
            raise ValueError("dressed mode requires a previous pulse")
        if coeffs.c0 is None:
            raise ValueError("dressed mode requires c0")
        values = coeffs.c0 * previous.values + correction
    return Pulse(grid, values, label=guess.label)


def clip_hard_wall(pulse: Pulse, f_max: float) -> Pulse:
    """Pointwise clip the pulse to [-f_max, f_max]."""
    if f_max <= 0:
        raise ValueError("f_max must be positive")
    v = pulse.values
    clipped = np.where(np.abs(v) < f_max, v, np.sign(v) * f_max)
    return pulse.with_values(clipped)


def rescale_to_bound(pulse: Pulse, f_max: float) -> Pulse:
    """Uniformly rescale the pulse so max|f| <= f_max, preserving its shape."""
    if f_max <= 0:
        raise ValueError("f_max must be positive")
    peak = np.max(np.abs(pulse.values))
    if peak < f_max:
        return pulse
    return pulse.with_values(pulse.values * (f_max / peak))


def pulse_power(pulse: Pulse) -> float:
    """Mean power (1/T) * integral of f(t)^2, trapezoidal quadrature."""
    t = pulse.grid.times()
    return float(np.trapezoid(pulse.values**2, t) / pulse.grid.duration)


def pulse_energy(pulse: Pulse) -> float:
    """Integral of f(t)^2 over [0, T] (no 1/T), trapezoidal quadrature."""
    t = pulse.grid.times()
    return float(np.trapezoid(pulse.values**2, t))


def pulse_psd(pulse: Pulse) -> tuple[np.ndarray, np.ndarray]:
    """Power spectral density on an angular frequency axis (rad/time).

    Returns (omegas, psd) with psd = |dt * DFT(f)|^2 / T at the nonnegative
    DFT frequencies.
    """
    n = pulse.grid.n_samples
    dt = pulse.grid.dt
    spectrum = np.fft.rfft(pulse.values) * dt
    omegas = 2.0 * np.pi * np.fft.rfftfreq(n, d=dt)
    psd = np.abs(spectrum) ** 2 / pulse.grid.duration
    return omegas, psd


def write_pulse_csv(pulse: Pulse, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(pulse_to_csv(pulse))


def pulse_to_csv(pulse: Pulse) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["time", "value"])
    for t, v in zip(pulse.grid.times(), pulse.values):
        writer.writerow([repr(float(t)), repr(float(v))])
    return buf.getvalue()


def read_pulse_csv(path) -> Pulse:
    with open(path, newline="") as fh:
        return pulse_from_csv(fh.read())


def pulse_from_csv(text: str) -> Pulse:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["time", "value"]:
        raise ValueError("pulse CSV must start with header 'time,value'")
    times = np.array([float(r[0]) for r in rows[1:]])
    values = np.array([float(r[1]) for r in rows[1:]])
    if len(times) < 2:
        raise ValueError("pulse CSV needs at least two samples")
    grid = TimeGrid(duration=float(times[-1]), n_samples=len(times))
    if not np.allclose(times, grid.times(), atol=1e-9 * max(1.0, times[-1])):
        raise ValueError("pulse CSV samples are not on a uniform grid starting at 0")
    return Pulse(grid, values)
