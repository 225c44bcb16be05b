"""Figures of merit: state/gate fidelities, two-qubit invariants, entropy,
filter functions, and penalty composition.

Two-qubit gates are characterized by their Weyl-chamber coordinates
(c1, c2, c3), extracted via the magic-basis construction (eigenphases of
m = U_B^T U_B for U_B the gate in the Bell/magic basis) and folded into the
canonical cell c1 >= c2 >= c3 >= 0, c1 <= pi/2.  All gate functionals that
quote single-qubit symmetry (nonlocal fidelity, perfect-entangler fidelity)
are functions of these coordinates only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, polar

from .pulses import Pulse, TimeGrid, pulse_energy

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

# Magic (Bell) basis transformation.
MAGIC_BASIS = np.array(
    [
        [1, 0, 0, 1j],
        [0, 1j, 1, 0],
        [0, 1j, -1, 0],
        [1, 0, 0, -1j],
    ],
    dtype=complex,
) / np.sqrt(2.0)

OBJECTIVE_KINDS = (
    "state_fidelity",
    "mixed_fidelity",
    "gate_re",
    "gate_sm",
    "gate_ss",
    "nonlocal",
    "perfect_entangler",
    "phase_gate",
    "entropy",
    "filter_overlap",
)


def _check_unitary(u: np.ndarray, tol: float, name: str = "matrix") -> None:
    n = u.shape[0]
    if np.max(np.abs(u.conj().T @ u - np.eye(n))) > tol:
        raise ValueError(f"{name} is not unitary within {tol}")


def state_fidelity(final: np.ndarray, target: np.ndarray) -> float:
    """Squared overlap |<target|final>|^2."""
    f = np.asarray(final, dtype=complex).ravel()
    t = np.asarray(target, dtype=complex).ravel()
    if f.shape != t.shape:
        raise ValueError("state dimension mismatch")
    return float(np.abs(np.vdot(t, f)) ** 2)


def mixed_fidelity(rho: np.ndarray, target: np.ndarray) -> float:
    """<target|rho|target> for a density matrix against a pure target."""
    r = np.asarray(rho, dtype=complex)
    t = np.asarray(target, dtype=complex).ravel()
    if r.shape != (t.shape[0], t.shape[0]):
        raise ValueError("dimension mismatch between rho and target")
    val = np.vdot(t, r @ t)
    if abs(val.imag) > 1e-12:
        raise ValueError("fidelity has a non-negligible imaginary part")
    return float(val.real)


def gate_fidelity(u: np.ndarray, v: np.ndarray, mode: str = "sm") -> float:
    """Gate fidelities: re = Re tr(U^dag V)/N, sm = |tr U^dag V|^2/N^2,
    ss = sum |u*_kl v_kl|^2 / N^2 (phase-insensitive per element)."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape != v.shape:
        raise ValueError("gate dimension mismatch")
    n = u.shape[0]
    _check_unitary(v, 1e-10, "target gate")
    if mode == "re":
        return float(np.real(np.trace(u.conj().T @ v)) / n)
    if mode == "sm":
        return float(np.abs(np.trace(u.conj().T @ v)) ** 2 / n**2)
    if mode == "ss":
        return float(np.sum(np.abs(u.conj() * v) ** 2) / n**2)
    raise ValueError(f"unknown gate fidelity mode {mode!r}")


@dataclass(frozen=True)
class LocalInvariants:
    """Canonical Weyl-chamber coordinates of a two-qubit gate, radians."""

    c1: float
    c2: float
    c3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.c1, self.c2, self.c3])


def local_invariants(u: np.ndarray, tol: float = 1e-8) -> LocalInvariants:
    """Weyl-chamber coordinates (c1, c2, c3) of a two-qubit gate.

    Eigenphase construction in the magic basis, canonicalized to
    c1 >= c2 >= c3 >= 0 with c1 folded to <= pi/2.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4):
        raise ValueError("local invariants are defined for 4x4 gates")
    _check_unitary(u, tol, "gate")
    u_tilde = np.kron(SIGMA_Y, SIGMA_Y) @ u.T @ np.kron(SIGMA_Y, SIGMA_Y)
    det = complex(np.linalg.det(u))
    ev = np.linalg.eigvals(u @ u_tilde / np.sqrt(det))
    two_s = np.angle(ev) / np.pi
    two_s = np.where(two_s <= -0.5, two_s + 2.0, two_s)
    s = np.sort(two_s / 2.0)[::-1]
    n = int(round(float(np.sum(s))))
    s -= np.concatenate([np.ones(n), np.zeros(4 - n)])
    s = np.roll(s, -n)
    m = np.array([[1, 1, 0], [1, 0, 1], [0, 1, 1]])
    c1, c2, c3 = m @ s[:3]
    if c3 < 0:
        c1 = 1.0 - c1
        c3 = -c3
    # fold the chamber half c1 > 1/2 back onto c1 <= 1/2
    if c1 > 0.5:
        c1 = 1.0 - c1
    c = np.clip(np.array([c1, c2, c3]) * np.pi, 0.0, None)
    c = np.sort(c)[::-1]
    return LocalInvariants(float(c[0]), float(c[1]), float(c[2]))


def canonical_gate(c1: float, c2: float, c3: float) -> np.ndarray:
    """Nonlocal gate A = exp(i/2 (c1 XX + c2 YY + c3 ZZ)), coordinates in radians."""
    gen = (
        c1 * np.kron(SIGMA_X, SIGMA_X)
        + c2 * np.kron(SIGMA_Y, SIGMA_Y)
        + c3 * np.kron(SIGMA_Z, SIGMA_Z)
    )
    return expm(0.5j * gen)


def makhlin_invariants(u: np.ndarray) -> tuple[float, float, float]:
    """Local invariants (g1, g2, g3) from the magic-basis construction."""
    q = MAGIC_BASIS
    ub = q.conj().T @ np.asarray(u, dtype=complex) @ q
    m = ub.T @ ub
    det = complex(np.linalg.det(u))
    tr = np.trace(m)
    g12 = tr**2 / (16.0 * det)
    g3 = (tr**2 - np.trace(m @ m)) / (4.0 * det)
    return float(g12.real), float(g12.imag), float(g3.real)


def nonlocal_fidelity(u: np.ndarray, v: np.ndarray) -> float:
    """Fidelity up to single-qubit operations: prod_i cos(dc_i / 2).

    Non-unitary u is replaced by its closest unitary (polar factor); the
    Frobenius distance to that unitary is subtracted when non-negligible.
    """
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape != (4, 4) or v.shape != (4, 4):
        raise ValueError("nonlocal fidelity is defined for 4x4 gates")
    u_closest, _ = polar(u)
    dist = float(np.linalg.norm(u - u_closest))
    dc = local_invariants(u_closest).as_array() - local_invariants(v).as_array()
    fid = float(np.prod(np.cos(dc / 2.0)))
    if dist > 1e-8:
        return fid - dist
    return fid


def is_perfect_entangler(inv: LocalInvariants, tol: float = 0.0) -> bool:
    c1, c2, c3 = inv.c1, inv.c2, inv.c3
    half_pi = np.pi / 2.0
    return (
        c1 + c2 >= half_pi - tol
        and c1 - c2 <= half_pi + tol
        and c2 + c3 <= half_pi + tol
    )


def perfect_entangler_fidelity(u: np.ndarray) -> float:
    """1 on the perfect-entangler polytope, else the max of the three
    boundary cosine terms."""
    inv = local_invariants(np.asarray(u, dtype=complex))
    if is_perfect_entangler(inv):
        return 1.0
    c1, c2, c3 = inv.c1, inv.c2, inv.c3
    half_pi = np.pi / 2.0
    terms = (
        math.cos((c1 + c2 - half_pi) / 4.0) ** 2,
        math.cos((c1 - c2 - half_pi) / 4.0) ** 2,
        math.cos((c2 + c3 - half_pi) / 4.0) ** 2,
    )
    return float(max(terms))


def _diagonal_phases(u: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    off = u - np.diag(np.diag(u))
    if np.linalg.norm(off) > tol:
        raise ValueError("phase-gate fidelity requires diagonal gates")
    return np.angle(np.diag(u))


def _wrap_angle(x: float) -> float:
    return float((x + np.pi) % (2.0 * np.pi) - np.pi)


def phase_gate_fidelity(u: np.ndarray, v: np.ndarray, mode: str = "plain") -> float:
    """Fidelity between two diagonal two-qubit gates.

    plain: (1/4) sum_i cos(dphi_i).  local_phase: cos(dphi/4) with
    dphi = dphi_1 - dphi_2 - dphi_3 + dphi_4, the combination invariant
    under single-qubit phase operations (wrapped to (-pi, pi]).
    """
    pu = _diagonal_phases(u)
    pv = _diagonal_phases(v)
    if pu.shape != pv.shape:
        raise ValueError("gate dimension mismatch")
    dphi = pu - pv
    if mode == "plain":
        return float(np.mean(np.cos(dphi)))
    if mode == "local_phase":
        if len(dphi) != 4:
            raise ValueError("local_phase mode requires two-qubit (4x4) gates")
        combo = _wrap_angle(dphi[0] - dphi[1] - dphi[2] + dphi[3])
        return float(np.cos(combo / 4.0))
    raise ValueError(f"unknown phase gate mode {mode!r}")


def entanglement_entropy(state: np.ndarray, cut: int, local_dims: list[int]) -> float:
    """Von Neumann entropy (nats) of the reduced state left of ``cut``."""
    psi = np.asarray(state, dtype=complex).ravel()
    dims = list(local_dims)
    if int(np.prod(dims)) != psi.shape[0]:
        raise ValueError(
            f"state dimension {psi.shape[0]} does not factor into {dims}"
        )
    if not 1 <= cut < len(dims):
        raise ValueError(f"cut must lie strictly inside the {len(dims)} sites")
    d_left = int(np.prod(dims[:cut]))
    d_right = int(np.prod(dims[cut:]))
    mat = psi.reshape(d_left, d_right)
    svals = np.linalg.svd(mat, compute_uv=False)
    probs = svals**2
    probs = probs[probs > 1e-14]
    return float(-np.sum(probs * np.log(probs)))


@dataclass(frozen=True)
class FilterSpec:
    """Modulation y(t) plus a noise spectrum S(omega) on a frequency grid."""

    modulation: Pulse
    omegas: np.ndarray
    spectrum: np.ndarray

    def __post_init__(self):
        om = np.asarray(self.omegas, dtype=float)
        s = np.asarray(self.spectrum, dtype=float)
        if om.shape != s.shape:
            raise ValueError("frequency grid and spectrum lengths differ")
        if np.any(s < 0):
            raise ValueError("noise spectrum must be nonnegative")
        object.__setattr__(self, "omegas", om)
        object.__setattr__(self, "spectrum", s)


def filter_function(y: Pulse, omegas: np.ndarray) -> np.ndarray:
    """F(omega) = |integral_0^T y(t) exp(-i omega t) dt|^2, trapezoid in t."""
    t = y.grid.times()
    om = np.asarray(omegas, dtype=float)
    phases = np.exp(-1j * np.outer(om, t))
    integrals = np.trapezoid(phases * y.values, t, axis=1)
    return np.abs(integrals) ** 2


def filter_overlap(spec: FilterSpec) -> float:
    """Decoherence integral chi(T) = integral F(omega) S(omega) d omega."""
    f = filter_function(spec.modulation, spec.omegas)
    return float(np.trapezoid(f * spec.spectrum, spec.omegas))


@dataclass(frozen=True)
class ObjectiveSpec:
    """Declarative description of a figure of merit plus penalties.

    ``target`` payload depends on kind: a state vector for the fidelity and
    entropy-free kinds, a gate matrix for the gate kinds, (cut, local_dims)
    for entropy, a FilterSpec for filter_overlap.
    """

    kind: str
    target: object = None
    penalties: tuple[tuple[str, float], ...] = ()
    constraint: str = "none"
    f_max: float | None = None
    gate_mode: str = "sm"
    entropy_cut: int = 1
    local_dims: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}")
        for name, lam in self.penalties:
            if name not in ("height", "energy"):
                raise ValueError(f"unknown penalty {name!r}")
            if lam < 0:
                raise ValueError("penalty weights must be nonnegative")
        if self.constraint not in ("none", "hard_wall", "rescale"):
            raise ValueError(f"unknown constraint mode {self.constraint!r}")
        if self.constraint != "none" and (self.f_max is None or self.f_max <= 0):
            raise ValueError("amplitude constraint requires positive f_max")

    @property
    def wants_unitary(self) -> bool:
        return self.kind in (
            "gate_re", "gate_sm", "gate_ss", "nonlocal", "perfect_entangler", "phase_gate"
        )

    def raw_fom(self, propagation) -> float:
        """Evaluate the raw figure of merit on a propagation result."""
        if self.kind == "state_fidelity":
            return state_fidelity(propagation.final_state, self.target)
        if self.kind == "mixed_fidelity":
            return mixed_fidelity(propagation.final_state, self.target)
        if self.kind in ("gate_re", "gate_sm", "gate_ss"):
            mode = self.kind.split("_")[1]
            return gate_fidelity(propagation.final_unitary, self.target, mode=mode)
        if self.kind == "nonlocal":
            return nonlocal_fidelity(propagation.final_unitary, self.target)
        if self.kind == "perfect_entangler":
            return perfect_entangler_fidelity(propagation.final_unitary)
        if self.kind == "phase_gate":
            return phase_gate_fidelity(
                propagation.final_unitary, self.target, mode=self.gate_mode
            )
        if self.kind == "entropy":
            return entanglement_entropy(
                propagation.final_state, self.entropy_cut, list(self.local_dims)
            )
        raise ValueError(f"objective kind {self.kind!r} does not use propagation")

    def to_json(self) -> str:
        target = self.target
        if isinstance(target, np.ndarray):
            target = [
                [float(x.real), float(x.imag)] for x in np.asarray(target, dtype=complex).ravel()
            ] if target.ndim == 1 else [
                [[float(x.real), float(x.imag)] for x in row]
                for row in np.asarray(target, dtype=complex)
            ]
        return json.dumps(
            {
                "kind": self.kind,
                "target": target,
                "penalties": [[n, lam] for n, lam in self.penalties],
                "constraint": self.constraint,
                "f_max": self.f_max,
                "gate_mode": self.gate_mode,
                "entropy_cut": self.entropy_cut,
                "local_dims": list(self.local_dims),
            }
        )


def compose_objective(spec: ObjectiveSpec, raw_fom: float, pulse: Pulse) -> float:
    """J = F minus height/energy penalties of the evaluated pulse."""
    j = raw_fom
    for name, lam in spec.penalties:
        if name == "height":
            j -= lam * float(np.max(np.abs(pulse.values)))
        else:
            j -= lam * pulse_energy(pulse)
    return float(j)


# Named gates used across tests and targets.
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
CZ = np.diag([1, 1, 1, -1]).astype(complex)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)
