"""Coordinate optimization of unit-modulus phase vectors.

The shared objective family is

    f(u) = sum_t | coeffs[t] . u - offsets[t] |^2 ,   |u_n| = 1,

where the dot is the plain (unconjugated) inner product. Holding all but one
coordinate fixed, f(u_n) = 2 Re{u_n * phi_n} + const, so each coordinate has
a closed-form minimizer (or maximizer) on the unit circle; sweeps repeat
until the objective stalls. Quantized reflection hardware is handled by
projecting each coordinate candidate onto the phase grid and keeping the
previous value whenever the projection would hurt the objective.
"""

from __future__ import annotations

import numpy as np


def project_discrete(phasor: np.ndarray, bits: int) -> np.ndarray:
    """Snap unit phasors to the nearest of 2**bits uniformly spaced angles.

    Exact half-way ties resolve to the smaller grid index (after wrap).
    """
    if bits < 1:
        raise ValueError("bits must be >= 1")
    levels = 2 ** bits
    phasor = np.asarray(phasor, dtype=complex)
    theta = np.mod(np.angle(phasor), 2.0 * np.pi)
    kf = theta * levels / (2.0 * np.pi)
    k0 = np.floor(kf)
    frac = kf - k0
    lo = k0.astype(np.int64) % levels
    hi = (k0.astype(np.int64) + 1) % levels
    k = np.where(frac > 0.5, hi, lo)
    k = np.where(frac == 0.5, np.minimum(lo, hi), k)
    return np.exp(2j * np.pi * k / levels)


def _project_scalar(value: complex, bits: int) -> complex:
    return complex(project_discrete(np.asarray([value]), bits)[0])


def coordinate_phase_opt(coeffs: np.ndarray, offsets: np.ndarray,
                         phasor: np.ndarray, *, maximize: bool = False,
                         bits: int = 0, frac_tol: float = 1e-4,
                         max_sweeps: int = 50) -> tuple[np.ndarray, list[float]]:
    """Sweep exact per-coordinate updates of f until it stalls.

    coeffs has shape (terms, N), offsets (terms,); bits = 0 keeps phases
    continuous. Returns the final phasor and the objective after the start
    and each sweep. Each accepted step cannot worsen the objective, so the
    trace is monotone (non-increasing when minimizing, non-decreasing when
    maximizing).
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    offsets = np.asarray(offsets, dtype=complex)
    u = np.asarray(phasor, dtype=complex).copy()
    n = u.size
    if coeffs.shape != (offsets.size, n):
        raise ValueError("coeffs/offsets/phasor shapes disagree")

    def objective(vec: np.ndarray) -> float:
        return float(np.sum(np.abs(coeffs @ vec - offsets) ** 2))

    trace = [objective(u)]
    if n == 0 or coeffs.shape[0] == 0:
        return u, trace
    # Gram accumulators make each coordinate's phi an O(N) read.
    gram = coeffs.T @ coeffs.conj()
    cross = coeffs.T @ offsets.conj()
    for _ in range(max_sweeps):
        for i in range(n):
            phi = gram[i] @ u.conj() - gram[i, i] * u[i].conj() - cross[i]
            mag = abs(phi)
            if mag == 0.0:
                # objective is flat in this coordinate
                cand = u[i] if maximize else 1.0 + 0.0j
            else:
                cand = phi.conjugate() / mag if maximize else -phi.conjugate() / mag
            if bits:
                cand = _project_scalar(cand, bits)
            delta = 2.0 * ((cand - u[i]) * phi).real
            if (delta >= 0.0) if maximize else (delta <= 0.0):
                u[i] = cand
        trace.append(objective(u))
        prev, cur = trace[-2], trace[-1]
        if abs(prev - cur) <= frac_tol * max(abs(prev), 1e-300):
            break
    return u, trace
