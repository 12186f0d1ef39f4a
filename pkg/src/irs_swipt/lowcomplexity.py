"""One-shot low-complexity design: tune each panel locally, then solve beams.

Each user is associated with its nearest panel; each panel's phases maximize
the aggregate effective-channel power of its own users (a generic gain
proxy, independent of beams and QoS targets); the beams-only problem is then
solved once on the frozen effective channels. No joint re-optimization
rounds, by design: the scheme trades optimality for a single cheap pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import ChannelSet, PhaseShifts, freeze_phases
from .metrics import BeamformingSolution, qos_feasibility
from .penalty import (FEASIBILITY_REL_TOL, Problem, SolveReport, SolverParams,
                      solve)
from .phase_opt import coordinate_phase_opt
from .scenario import Scenario

PANEL_SWEEP_CAP = 100


@dataclass(eq=False)
class Association:
    """Nearest-panel assignment of every user, ties to the smaller index."""

    panel_of_iu: np.ndarray  # (K_I,) int
    panel_of_eu: np.ndarray  # (K_E,) int

    def members(self, panel: int) -> tuple[np.ndarray, np.ndarray]:
        """IU and EU indices assigned to one panel."""
        return (np.nonzero(self.panel_of_iu == panel)[0],
                np.nonzero(self.panel_of_eu == panel)[0])


def associate_users(scenario: Scenario) -> Association:
    """Map each user to the panel whose reference element is closest."""
    if not scenario.irs:
        raise ValueError("association needs at least one panel")
    refs = np.stack([p.reference_position for p in scenario.irs])

    def nearest(positions: np.ndarray) -> np.ndarray:
        if positions.shape[0] == 0:
            return np.zeros(0, dtype=int)
        d = np.linalg.norm(positions[:, None, :] - refs[None, :, :], axis=2)
        return np.argmin(d, axis=1)  # argmin takes the first minimum on ties

    return Association(panel_of_iu=nearest(scenario.iu_positions),
                       panel_of_eu=nearest(scenario.eu_positions))


def optimize_irs_phases(channels: ChannelSet, assoc: Association, panel: int,
                        params: SolverParams) -> np.ndarray:
    """Phases of one panel maximizing its users' summed channel power.

    The objective sum_k ||effective row of user k||^2, restricted to this
    panel's elements, is the shared coordinate form with one term per
    (user, antenna) pair, so the same sweep machinery applies with the
    ascent rule. A panel with no assigned users keeps zero phases.
    """
    start, stop = channels.irs_slices[panel]
    width = stop - start
    iu_idx, eu_idx = assoc.members(panel)
    coeffs_blocks, offset_blocks = [], []
    f_block = channels.ap_irs[start:stop]  # (N_l, M)
    for refl, direct, idx in ((channels.iu_reflected, channels.iu_direct, iu_idx),
                              (channels.eu_reflected, channels.eu_direct, eu_idx)):
        for k in idx:
            # conj(effective row) entries are linear in the phasor: one term
            # per antenna, coefficient vector conj(refl) * F column
            coeffs_blocks.append((refl[k, start:stop].conj()[:, None] * f_block).T)
            offset_blocks.append(-direct[k].conj())
    if not coeffs_blocks:
        return np.ones(width, dtype=complex)
    coeffs = np.concatenate(coeffs_blocks, axis=0)
    offsets = np.concatenate(offset_blocks)
    u, _ = coordinate_phase_opt(coeffs, offsets, np.ones(width, dtype=complex),
                                maximize=True, bits=params.phase_bits,
                                frac_tol=params.inner_tol,
                                max_sweeps=PANEL_SWEEP_CAP)
    return u


def solve_low_complexity(problem: Problem, scenario: Scenario,
                         params: SolverParams | None = None) -> SolveReport:
    """Associate, tune panels independently, freeze, then solve beams only."""
    if params is None:
        params = SolverParams()
    channels = problem.channels
    if scenario.n_elements_total != channels.n_elements:
        raise ValueError("scenario and channels disagree on element count")
    # no panels: the scheme collapses to the beams-only solve (same as no-IRS)
    phasor = np.ones(channels.n_elements, dtype=complex)
    if scenario.irs:
        assoc = associate_users(scenario)
        for panel in range(len(scenario.irs)):
            start, stop = channels.irs_slices[panel]
            phasor[start:stop] = optimize_irs_phases(channels, assoc, panel, params)
    phases = PhaseShifts(phasor)
    frozen = Problem(freeze_phases(channels, phases), problem.targets,
                     problem.noise_pow, problem.dedicated_energy_beams)
    report = solve(frozen, params)
    solution = BeamformingSolution(report.solution.info_beams,
                                   report.solution.energy_beams, phases)
    feas = qos_feasibility(channels, solution, problem.targets,
                           problem.noise_pow, rel_tol=FEASIBILITY_REL_TOL)
    return SolveReport(
        solution=solution,
        power_w=report.power_w,
        violation=report.violation,
        feasibility=feas,
        converged=report.converged,
        outer_rounds=report.outer_rounds,
        inner_rounds=report.inner_rounds,
        objective_trace=report.objective_trace,
        violation_trace=report.violation_trace,
    )
