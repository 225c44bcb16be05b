"""Dense-matrix propagation of closed and open small-system dynamics.

Controls are piecewise constant: on each grid interval the control value is
the average of the two endpoint samples (midpoint rule, second order in the
control resolution) and the step propagator is the exact matrix exponential
of the resulting constant generator.  Closed dynamics use a Hermitian
eigendecomposition per step, open dynamics a dense matrix exponential of
the vectorized Lindblad generator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .pulses import GridMismatchError, Pulse, TimeGrid

MAX_DIM = 32  # dense backend cap (5 qubits)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|, decay into ground


def _check_hermitian(m: np.ndarray, name: str, tol: float = 1e-12) -> None:
    if np.max(np.abs(m - m.conj().T)) > tol:
        raise ValueError(f"{name} is not Hermitian within {tol}")


@dataclass(frozen=True)
class Model:
    """Drift + control Hamiltonians, optional collapse operators."""

    drift: np.ndarray
    controls: tuple[np.ndarray, ...]
    collapse: tuple[tuple[np.ndarray, float], ...] = ()
    label: str = ""
    kind: str = ""
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        h0 = np.asarray(self.drift, dtype=complex)
        n = h0.shape[0]
        if h0.shape != (n, n):
            raise ValueError("drift must be square")
        if n > MAX_DIM:
            raise ValueError(f"dimension {n} exceeds dense backend cap {MAX_DIM}")
        _check_hermitian(h0, "drift")
        ctrls = tuple(np.asarray(h, dtype=complex) for h in self.controls)
        for i, h in enumerate(ctrls):
            if h.shape != (n, n):
                raise ValueError(f"control {i} has shape {h.shape}, expected {(n, n)}")
            _check_hermitian(h, f"control {i}")
        for op, rate in self.collapse:
            if np.asarray(op).shape != (n, n):
                raise ValueError("collapse operator dimension mismatch")
            if rate < 0:
                raise ValueError("collapse rates must be nonnegative")
        object.__setattr__(self, "drift", h0)
        object.__setattr__(self, "controls", ctrls)

    @property
    def dim(self) -> int:
        return self.drift.shape[0]

    @property
    def is_open(self) -> bool:
        return any(rate > 0 for _, rate in self.collapse)

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "params": self.params,
                "seed": self.seed,
                "label": self.label,
                "drift": complex_matrix_to_json(self.drift),
                "controls": [complex_matrix_to_json(h) for h in self.controls],
                "collapse": [
                    {"operator": complex_matrix_to_json(op), "rate": rate}
                    for op, rate in self.collapse
                ],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Model":
        d = json.loads(text)
        if d.get("kind") and "drift" not in d:
            return build_model(d["kind"], d.get("params", {}), seed=d.get("seed"))
        return cls(
            drift=complex_matrix_from_json(d["drift"]),
            controls=tuple(complex_matrix_from_json(h) for h in d["controls"]),
            collapse=tuple(
                (complex_matrix_from_json(c["operator"]), c["rate"])
                for c in d.get("collapse", [])
            ),
            label=d.get("label", ""),
            kind=d.get("kind", ""),
            params=d.get("params", {}),
            seed=d.get("seed"),
        )


def complex_matrix_to_json(m: np.ndarray) -> list:
    return [[[float(x.real), float(x.imag)] for x in row] for row in np.asarray(m, dtype=complex)]


def complex_matrix_from_json(rows: list) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def normalize_state(vec: np.ndarray) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).ravel()
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("cannot normalize the zero vector")
    return v / n


def check_state(vec: np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).ravel()
    if dim is not None and v.shape != (dim,):
        raise ValueError(f"state dimension {v.shape[0]} does not match model dim {dim}")
    if abs(np.linalg.norm(v) - 1.0) > 1e-10:
        raise ValueError("pure state is not normalized within 1e-10")
    return v


def check_density_matrix(rho: np.ndarray, dim: int | None = None) -> np.ndarray:
    r = np.asarray(rho, dtype=complex)
    n = r.shape[0]
    if r.shape != (n, n) or (dim is not None and n != dim):
        raise ValueError("density matrix dimension mismatch")
    if np.max(np.abs(r - r.conj().T)) > 1e-10:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(r).real - 1.0) > 1e-10:
        raise ValueError("density matrix trace is not 1")
    if np.min(np.linalg.eigvalsh(r)) < -1e-10:
        raise ValueError("density matrix is not positive semidefinite")
    return r


def _pauli_on(n_qubits: int, site: int, op: np.ndarray) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for i in range(n_qubits):
        out = np.kron(out, op if i == site else np.eye(2))
    return out


def build_model(kind: str, params: dict | None = None, seed: int | None = None) -> Model:
    """Model library: two_level, random_ising (2-5 qubits), decaying_qubit."""
    params = dict(params or {})
    if kind == "two_level":
        delta = float(params.get("delta", 1.0))
        return Model(
            drift=0.5 * delta * SIGMA_Z,
            controls=(0.5 * SIGMA_X,),
            label=f"two_level(delta={delta})",
            kind=kind,
            params={"delta": delta},
        )
    if kind == "decaying_qubit":
        delta = float(params.get("delta", 1.0))
        gamma = float(params.get("gamma", 0.0))
        if gamma < 0:
            raise ValueError("decay rate must be nonnegative")
        return Model(
            drift=0.5 * delta * SIGMA_Z,
            controls=(0.5 * SIGMA_X,),
            collapse=((SIGMA_MINUS, gamma),),
            label=f"decaying_qubit(delta={delta}, gamma={gamma})",
            kind=kind,
            params={"delta": delta, "gamma": gamma},
        )
    if kind == "random_ising":
        n = int(params.get("n_qubits", 2))
        if not 2 <= n <= 5:
            raise ValueError("random_ising supports 2 to 5 qubits")
        rng = np.random.default_rng(seed)
        couplings = rng.uniform(-1.0, 1.0, size=n - 1)
        fields = rng.uniform(-1.0, 1.0, size=n)
        dim = 2**n
        h0 = np.zeros((dim, dim), dtype=complex)
        for i, j in enumerate(couplings):
            h0 += j * _pauli_on(n, i, SIGMA_Z) @ _pauli_on(n, i + 1, SIGMA_Z)
        for i, h in enumerate(fields):
            h0 += h * _pauli_on(n, i, SIGMA_Z)
        h1 = sum(_pauli_on(n, i, SIGMA_X) for i in range(n))
        return Model(
            drift=h0,
            controls=(h1,),
            label=f"random_ising(n={n}, seed={seed})",
            kind=kind,
            params={"n_qubits": n},
            seed=seed,
        )
    raise ValueError(f"unsupported model kind {kind!r}")


@dataclass(frozen=True)
class Propagation:
    """Result of a propagation: trajectory, final state, optional unitaries."""

    grid: TimeGrid
    states: np.ndarray | None
    final_state: np.ndarray
    unitaries: np.ndarray | None = None
    is_density: bool = False

    @property
    def final_unitary(self) -> np.ndarray:
        if self.unitaries is None:
            raise ValueError("propagation was run without want_unitary")
        return self.unitaries[-1]


def _midpoint_controls(pulses: list[Pulse]) -> np.ndarray:
    vals = np.array([p.values for p in pulses])
    return 0.5 * (vals[:, :-1] + vals[:, 1:])


def _step_unitaries(model: Model, pulses: list[Pulse], dt: float) -> np.ndarray:
    """Per-interval propagators exp(-i H dt), batched over intervals."""
    u_mid = _midpoint_controls(pulses)  # (n_controls, n_steps)
    n_steps = u_mid.shape[1]
    h = np.broadcast_to(model.drift, (n_steps, model.dim, model.dim)).copy()
    for hk, uk in zip(model.controls, u_mid):
        h += uk[:, None, None] * hk
    w, v = np.linalg.eigh(h)
    phases = np.exp(-1j * w * dt)
    return (v * phases[:, None, :]) @ v.conj().transpose(0, 2, 1)


def _lindblad_generator(model: Model, control_values: np.ndarray) -> np.ndarray:
    """Vectorized generator for row-major vec(rho): d vec/dt = L vec."""
    n = model.dim
    h = model.drift.copy()
    for hk, uk in zip(model.controls, control_values):
        h = h + uk * hk
    eye = np.eye(n)
    lv = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for op, rate in model.collapse:
        c = np.asarray(op, dtype=complex)
        cdc = c.conj().T @ c
        lv += rate * (
            np.kron(c, c.conj())
            - 0.5 * np.kron(cdc, eye)
            - 0.5 * np.kron(eye, cdc.T)
        )
    return lv


def propagate(
    model: Model,
    pulses: list[Pulse] | Pulse,
    initial: np.ndarray,
    want_unitary: bool = False,
    store_trajectory: bool = True,
) -> Propagation:
    """Propagate a state or density matrix under piecewise-constant controls."""
    if isinstance(pulses, Pulse):
        pulses = [pulses]
    if len(pulses) != len(model.controls):
        raise ValueError(
            f"got {len(pulses)} pulses for {len(model.controls)} control operators"
        )
    grid = pulses[0].grid
    for p in pulses[1:]:
        if p.grid != grid:
            raise GridMismatchError("all pulses must share one grid")
    initial = np.asarray(initial, dtype=complex)
    as_density = initial.ndim == 2
    if model.is_open and not as_density:
        raise ValueError("open-system propagation requires a density-matrix initial state")
    if as_density:
        rho = check_density_matrix(initial, model.dim)
        return _propagate_lindblad(model, pulses, rho, grid, store_trajectory)
    psi = check_state(initial, model.dim)
    steps = _step_unitaries(model, pulses, grid.dt)
    n = grid.n_samples
    if want_unitary:
        unitaries = np.empty((n, model.dim, model.dim), dtype=complex)
        u = np.eye(model.dim, dtype=complex)
        unitaries[0] = u
        for k in range(n - 1):
            u = steps[k] @ u
            unitaries[k + 1] = u
        states = unitaries @ psi if store_trajectory else None
        final = unitaries[-1] @ psi
        return Propagation(grid=grid, states=states, final_state=final, unitaries=unitaries)
    states = np.empty((n, model.dim), dtype=complex) if store_trajectory else None
    if store_trajectory:
        states[0] = psi
    for k in range(n - 1):
        psi = steps[k] @ psi
        if store_trajectory:
            states[k + 1] = psi
    return Propagation(grid=grid, states=states, final_state=psi, unitaries=None)


def _propagate_lindblad(model, pulses, rho, grid, store_trajectory) -> Propagation:
    n = grid.n_samples
    dim = model.dim
    u_mid = _midpoint_controls(pulses)
    vec = rho.reshape(-1)
    states = np.empty((n, dim, dim), dtype=complex) if store_trajectory else None
    if store_trajectory:
        states[0] = rho
    # generator is affine in the controls: assemble all steps by broadcasting,
    # then one stacked expm instead of n-1 separate calls
    base = _lindblad_generator(model, np.zeros(len(model.controls)))
    eye = np.eye(dim)
    generators = np.broadcast_to(base, (n - 1, dim * dim, dim * dim)).copy()
    for hk, uk in zip(model.controls, u_mid):
        lk = -1j * (np.kron(hk, eye) - np.kron(eye, hk.T))
        generators += uk[:, None, None] * lk
    step_maps = expm(generators * grid.dt)
    for k in range(n - 1):
        vec = step_maps[k] @ vec
        if store_trajectory:
            states[k + 1] = vec.reshape(dim, dim)
    final = vec.reshape(dim, dim)
    return Propagation(
        grid=grid, states=states, final_state=final, unitaries=None, is_density=True
    )


def gradient_kernel(
    model: Model,
    pulse: Pulse,
    initial: np.ndarray,
    costate: np.ndarray,
) -> np.ndarray:
    """Landscape kernel k(t) = -Im <phi_T| U(T) U^dag(t) H1 U(t) |xi> on the grid.

    The pairing of k with a pulse perturbation gives the first-order change
    of Re <phi_T|psi(T)> under that perturbation.
    """
    if model.is_open:
        raise ValueError("gradient kernel is defined for closed dynamics only")
    if len(model.controls) != 1:
        raise ValueError("gradient kernel requires a single control operator")
    xi = check_state(initial, model.dim)
    phi = np.asarray(costate, dtype=complex).ravel()
    prop = propagate(model, [pulse], xi, want_unitary=True, store_trajectory=False)
    us = prop.unitaries
    u_T = us[-1]
    h1 = model.controls[0]
    # k_t = -Im( phi^dag U(T) U^dag(t) H1 U(t) xi )
    left = phi.conj() @ u_T  # row vector
    k = np.empty(pulse.grid.n_samples)
    for t in range(len(k)):
        k[t] = -np.imag(left @ us[t].conj().T @ h1 @ (us[t] @ xi))
    return k
