"""Quantum speed limits, channel capacities and information-theoretic bounds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .optimizer import nelder_mead


def qsl_bhattacharyya(delta_e: float, initial: np.ndarray, target: np.ndarray) -> float:
    """Minimal transfer time  arccos|<target|initial>| / delta_e."""
    if delta_e <= 0:
        raise ValueError("energy variance must be positive")
    xi = np.asarray(initial, dtype=complex).ravel()
    zeta = np.asarray(target, dtype=complex).ravel()
    if xi.shape != zeta.shape:
        raise ValueError("state dimension mismatch")
    overlap = min(abs(np.vdot(zeta, xi)), 1.0)
    return float(np.arccos(overlap) / delta_e)


def qsl_gap(gap: float) -> float:
    """Gap-based speed limit pi / gap."""
    if gap <= 0:
        raise ValueError("spectral gap must be positive")
    return float(np.pi / gap)


def capacity(mode: str, **inputs) -> float:
    """Channel capacity in bits/time.

    hartley: bandwidth * log2(1 + f_max/df) for a noiseless channel of
    finite bit depth; gaussian: bandwidth * log2(1 + P_f/P_n) for white
    noise; colored: integral of log2(1 + signal_psd/noise_psd) d omega by
    trapezoid on the supplied frequency grid.
    """
    if mode == "hartley":
        bw = float(inputs["bandwidth"])
        ratio = float(inputs["f_max"]) / float(inputs["delta_f"])
        if bw <= 0:
            raise ValueError("bandwidth must be positive")
        if ratio < 0:
            raise ValueError("bit depth must be nonnegative")
        return bw * float(np.log2(1.0 + ratio))
    if mode == "gaussian":
        bw = float(inputs["bandwidth"])
        pf, pn = float(inputs["signal_power"]), float(inputs["noise_power"])
        if bw <= 0 or pn <= 0 or pf < 0:
            raise ValueError("need positive bandwidth and noise power, nonnegative signal")
        return bw * float(np.log2(1.0 + pf / pn))
    if mode == "colored":
        omegas = np.asarray(inputs["omegas"], dtype=float)
        f_psd = np.asarray(inputs["signal_psd"], dtype=float)
        n_psd = np.asarray(inputs["noise_psd"], dtype=float)
        if omegas.shape != f_psd.shape or omegas.shape != n_psd.shape:
            raise ValueError("frequency grid and spectra lengths differ")
        if np.any((n_psd == 0) & (f_psd > 0)):
            raise ValueError("zero noise density with nonzero signal gives infinite capacity")
        ratio = np.where(n_psd > 0, f_psd / np.where(n_psd > 0, n_psd, 1.0), 0.0)
        return float(np.trapezoid(np.log2(1.0 + ratio), omegas))
    raise ValueError(f"unknown capacity mode {mode!r}")


def error_bound(info_bits: float, reachable_dims: float) -> float:
    """Minimal achievable error 2^(-I_f / D_r)."""
    if reachable_dims < 1:
        raise ValueError("reachable-set dimension must be at least 1")
    return float(2.0 ** (-info_bits / reachable_dims))


def time_bound(reachable_dims: float, cap: float, error: float) -> float:
    """Minimal time  -(D_r / C) log2(error)."""
    if cap <= 0:
        raise ValueError("capacity must be positive")
    if not 0 < error < 1:
        raise ValueError("error must lie in (0, 1)")
    if reachable_dims < 1:
        raise ValueError("reachable-set dimension must be at least 1")
    return float(-reachable_dims / cap * np.log2(error))


def state_transfer_dims(hilbert_dim: int) -> int:
    """Real dimension of the state-transfer control problem: 2N - 2."""
    if hilbert_dim < 2:
        raise ValueError("need Hilbert dimension >= 2")
    return 2 * hilbert_dim - 2


@dataclass(frozen=True)
class ErrorScalingFit:
    b1: float
    b2: float
    residual: float
    flagged: bool  # b1 <= 0: data not decaying with bandwidth


def fit_error_scaling(samples: list[tuple[float, float]]) -> ErrorScalingFit:
    """Least-squares fit of error = exp(-b1 * bandwidth) + b2.

    Nonlinear fit by Nelder-Mead on the RMS residual.  Returns the fit
    parameters and the RMS residual; a nonpositive decay rate is flagged.
    """
    if len(samples) < 3:
        raise ValueError("need at least 3 samples")
    bw = np.array([s[0] for s in samples], dtype=float)
    eps = np.array([s[1] for s in samples], dtype=float)
    if np.any(eps <= 0) or np.any(eps > 1):
        raise ValueError("errors must lie in (0, 1]")
    if np.allclose(bw, bw[0]):
        raise ValueError("degenerate samples: all bandwidths equal")

    def rms(params):
        b1, b2 = params
        model = np.exp(-b1 * bw) + b2
        return float(np.sqrt(np.mean((model - eps) ** 2)))

    # starting decay rate from the log-slope of the two extreme points
    i_lo, i_hi = int(np.argmin(bw)), int(np.argmax(bw))
    floor = max(min(eps) * 0.5, 1e-12)
    slope = (np.log(max(eps[i_hi] - floor, 1e-12)) - np.log(max(eps[i_lo] - floor, 1e-12))) / (
        bw[i_hi] - bw[i_lo]
    )
    best = None
    for b1_init in (-slope, 0.1, 1.0):
        for b2_init in (floor, 0.0):
            x, neg, _ = nelder_mead(
                lambda p: -rms(p),
                np.array([b1_init, b2_init]),
                initial_scale=np.array([max(abs(b1_init) * 0.5, 0.01), max(floor, 1e-6)]),
                tol=1e-14,
                max_evals=2000,
            )
            if best is None or -neg < best[1]:
                best = (x, -neg)
    params, residual = best
    b1, b2 = float(params[0]), float(params[1])
    return ErrorScalingFit(b1=b1, b2=b2, residual=float(residual), flagged=b1 <= 0)
