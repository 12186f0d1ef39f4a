"""Slow, independent reference routes used to certify the fast solver algebra.

Everything here deliberately avoids the closed forms used by the production
blocks: exhaustive search instead of coordinate updates, geometric bisection
instead of direct scaling, finite differences instead of derived gradients.
Tests and the `oracle-check` CLI command compare the two routes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import PhaseShifts, effective_channel

GRID_BUDGET = 1_000_000


def optimal_precoder_single_iu(h: np.ndarray, sinr_min: float, noise_pow: float
                               ) -> tuple[np.ndarray, float]:
    """Minimum-power beam for one information user and no energy users.

    Matched filtering is optimal here; the SINR constraint holds with
    equality at the optimum. Returns (beam, power).
    """
    h = np.asarray(h, dtype=complex).reshape(-1)
    gain = float(np.vdot(h, h).real)
    if gain <= 0:
        raise ValueError("channel must be nonzero")
    if sinr_min <= 0 or noise_pow <= 0:
        raise ValueError("sinr_min and noise_pow must be positive")
    power = sinr_min * noise_pow / gain
    w = np.sqrt(sinr_min * noise_pow) * h / gain
    return w, power


def grid_search_phases(problem, levels: int) -> tuple[PhaseShifts, float]:
    """Exhaustive search over uniformly quantized phase combinations.

    Enumerates all levels**N configurations and solves the beams-only
    problem at each: analytically when there is a single information user
    and nothing else, otherwise by freezing the phases and dispatching to
    the production solver (the phases, not the beams, are being certified).
    Ties resolve to the lexicographically smallest index tuple. Guarded to
    GRID_BUDGET combinations.
    """
    from .penalty import solve  # deferred: beams-only fallback for K > 1

    channels = problem.channels
    n = channels.n_elements
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if levels ** n > GRID_BUDGET:
        raise ValueError("grid too large; reduce levels or elements")
    analytic = channels.n_iu == 1 and channels.n_eu == 0
    step = 2.0 * np.pi / levels
    best_power = np.inf
    best_idx = None
    for idx in np.ndindex(*([levels] * n)):
        phases = PhaseShifts.from_theta(step * np.asarray(idx, dtype=float))
        if analytic:
            row = effective_channel(channels, phases, "iu", 0)
            _, power = optimal_precoder_single_iu(
                row, float(problem.targets.sinr_min[0]), float(problem.noise_pow[0]))
        else:
            from .channels import freeze_phases
            from .penalty import Problem
            frozen = Problem(freeze_phases(channels, phases), problem.targets,
                             problem.noise_pow, problem.dedicated_energy_beams)
            power = solve(frozen).power_w
        if power < best_power:
            best_power, best_idx = power, idx
    phases = PhaseShifts.from_theta(step * np.asarray(best_idx, dtype=float))
    return phases, best_power


def dual_bisection_eu(info_row: np.ndarray, energy_row: np.ndarray,
                      harvest_min: float, rel_tol: float = 1e-12
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Reference route for the harvested-power projection.

    Searches the common magnification factor by geometric bisection on the
    constraint instead of solving it in closed form. Requires at least one
    nonzero entry; the degenerate all-zero case is a solver-side convention.
    """
    info_row = np.asarray(info_row, dtype=complex).reshape(-1)
    energy_row = np.asarray(energy_row, dtype=complex).reshape(-1)
    if harvest_min <= 0:
        raise ValueError("harvest_min must be positive")
    base = float(np.sum(np.abs(info_row) ** 2) + np.sum(np.abs(energy_row) ** 2))
    if base == 0.0:
        raise ValueError("all-zero row has no unique scaling")
    if base >= harvest_min:
        return info_row.copy(), energy_row.copy()

    def harvested(scale: float) -> float:
        return base * scale ** 2

    lo, hi = 1.0, 2.0
    while harvested(hi) < harvest_min:
        hi *= 2.0
        if hi > 1e200:
            raise RuntimeError("bisection bracket blew up")
    for _ in range(400):
        if hi / lo <= 1.0 + rel_tol:
            break
        mid = np.sqrt(lo * hi)
        if harvested(mid) < harvest_min:
            lo = mid
        else:
            hi = mid
    scale = np.sqrt(lo * hi)
    return scale * info_row, scale * energy_row


@dataclass
class CertResult:
    name: str
    passed: bool
    detail: str


def _cert_single_iu_precoder(rng: np.random.Generator, trials: int) -> CertResult:
    worst = 0.0
    for _ in range(trials):
        m = rng.integers(1, 6)
        h = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2)
        if np.vdot(h, h).real < 1e-6:
            continue
        gamma = float(rng.uniform(0.5, 100.0))
        sigma2 = float(rng.uniform(0.1, 2.0))
        w, power = optimal_precoder_single_iu(h, gamma, sigma2)
        achieved = abs(np.vdot(h, w)) ** 2 / sigma2
        worst = max(worst, abs(achieved / gamma - 1.0))
        # any competitor meeting the constraint needs at least this power
        for _ in range(20):
            c = rng.standard_normal(m) + 1j * rng.standard_normal(m)
            gain = abs(np.vdot(h, c)) ** 2
            if gain == 0:
                continue
            c = c * np.sqrt(gamma * sigma2 / gain)
            if np.sum(np.abs(c) ** 2) < power * (1 - 1e-9):
                return CertResult("single_iu_precoder", False,
                                  "random beam beat the closed form")
    return CertResult("single_iu_precoder", worst < 1e-9,
                      f"worst SINR mismatch {worst:.2e}")


def _cert_eu_scaling(rng: np.random.Generator, trials: int) -> CertResult:
    from .penalty import update_eu_targets  # deferred: solver depends on this module

    worst = 0.0
    for _ in range(trials):
        k_i = int(rng.integers(0, 4))
        n_e = int(rng.integers(0, 4))
        if k_i + n_e == 0:
            continue
        from_info = rng.standard_normal(k_i) + 1j * rng.standard_normal(k_i)
        from_energy = rng.standard_normal(n_e) + 1j * rng.standard_normal(n_e)
        e_min = float(rng.uniform(0.5, 50.0))
        fast = update_eu_targets(from_info, from_energy, e_min)
        slow = dual_bisection_eu(from_info, from_energy, e_min)
        scale = np.concatenate([np.abs(fast[0]), np.abs(fast[1]), [1.0]])
        ref = np.concatenate([np.abs(slow[0]), np.abs(slow[1]), [1.0]])
        worst = max(worst, float(np.max(np.abs(scale - ref) / np.maximum(ref, 1e-30))))
    return CertResult("eu_scaling_matches_bisection", worst <= 1e-8,
                      f"worst relative gap {worst:.2e}")


def _cert_iu_projection(rng: np.random.Generator, trials: int) -> CertResult:
    from .penalty import update_iu_targets

    worst = 0.0
    for _ in range(trials):
        k_i = int(rng.integers(1, 5))
        i = int(rng.integers(0, k_i))
        row = rng.standard_normal(k_i) + 1j * rng.standard_normal(k_i)
        gamma = float(rng.uniform(0.5, 20.0))
        sigma2 = float(rng.uniform(0.1, 2.0))
        new = update_iu_targets(row, i, gamma, sigma2, rel_tol=1e-12)
        signal = abs(new[i]) ** 2
        others = float(np.sum(np.abs(np.delete(new, i)) ** 2))
        unchanged = np.allclose(new, row)
        slack = signal - gamma * (others + sigma2)
        if unchanged:
            ok = slack >= -1e-9 * max(signal, 1.0)
            resid = max(0.0, -slack)
        else:
            # projection lands on the constraint boundary
            resid = abs(slack) / max(signal, 1e-30)
            ok = resid <= 1e-6
        if not ok:
            return CertResult("iu_projection_boundary", False,
                              f"constraint residual {resid:.2e}")
        worst = max(worst, resid)
    return CertResult("iu_projection_boundary", True,
                      f"worst boundary residual {worst:.2e}")


def _cert_precoder_gradient(rng: np.random.Generator, trials: int) -> CertResult:
    from .penalty import penalized_power, update_precoders

    worst = 0.0
    for _ in range(max(1, trials // 50)):
        m, k_i, k_e, n_e = 3, 2, 2, 2
        iu_rows = rng.standard_normal((k_i, m)) + 1j * rng.standard_normal((k_i, m))
        eu_rows = rng.standard_normal((k_e, m)) + 1j * rng.standard_normal((k_e, m))
        surr_iu = rng.standard_normal((k_i, k_i)) + 1j * rng.standard_normal((k_i, k_i))
        surr_info = rng.standard_normal((k_e, k_i)) + 1j * rng.standard_normal((k_e, k_i))
        surr_energy = rng.standard_normal((k_e, n_e)) + 1j * rng.standard_normal((k_e, n_e))
        rho = float(rng.uniform(0.05, 5.0))
        w, v = update_precoders(iu_rows, eu_rows, surr_iu, surr_info, surr_energy, rho)

        def f(w_, v_):
            return penalized_power(iu_rows, eu_rows, w_, v_,
                                   surr_iu, surr_info, surr_energy, rho)

        h = 1e-6
        base = f(w, v)
        grad = 0.0
        for mat in (w, v):
            for pos in np.ndindex(*mat.shape):
                for delta in (h, 1j * h):
                    bump = mat.copy()
                    bump[pos] += delta
                    fp = f(bump, v) if mat is w else f(w, bump)
                    bump[pos] -= 2 * delta
                    fm = f(bump, v) if mat is w else f(w, bump)
                    grad = max(grad, abs(fp - fm) / (2 * h) / max(base, 1.0))
        worst = max(worst, grad)
    return CertResult("precoder_stationarity", worst <= 1e-5,
                      f"worst normalized gradient {worst:.2e}")


def run_certification(trials: int = 200, seed: int = 0) -> list[CertResult]:
    """Run every solver-vs-oracle certification; used by tests and the CLI."""
    rng = np.random.default_rng(seed)
    return [
        _cert_single_iu_precoder(rng, trials),
        _cert_eu_scaling(rng, trials),
        _cert_iu_projection(rng, trials),
        _cert_precoder_gradient(rng, trials),
    ]
