"""Reference schemes the joint design is compared against.

All four return the same SolveReport as the joint solver so experiment rows
stay uniform. Restriction schemes (no panels, frozen phases) can only do
worse than the joint design on the same instance; the alternating and
separate designs are reconstructions of common practice, kept simple on
purpose.
"""

from __future__ import annotations

import numpy as np

from .channels import ChannelSet, PhaseShifts, effective_rows, freeze_phases, strip_irs
from .metrics import BeamformingSolution, QosTargets, qos_feasibility
from .penalty import (FEASIBILITY_REL_TOL, Problem, SolveReport, SolverParams,
                      SurrogateProducts, init_state, max_violation,
                      _project_eu, penalty_vectors, solve,
                      update_precoders)
from .phase_opt import coordinate_phase_opt

ALTERNATING_ROUNDS_CAP = 30
ALTERNATING_GRID_LEVELS = 16
ENERGY_BEAM_REL_THRESHOLD = 1e-3


def _beams_only(problem: Problem, phases: PhaseShifts,
                params: SolverParams) -> SolveReport:
    frozen = Problem(freeze_phases(problem.channels, phases), problem.targets,
                     problem.noise_pow, problem.dedicated_energy_beams)
    return solve(frozen, params)


def _with_phases(problem: Problem, report: SolveReport,
                 phases: PhaseShifts) -> SolveReport:
    """Re-attach a phase configuration and re-judge feasibility on the full model."""
    solution = BeamformingSolution(report.solution.info_beams,
                                   report.solution.energy_beams, phases)
    feas = qos_feasibility(problem.channels, solution, problem.targets,
                           problem.noise_pow, rel_tol=FEASIBILITY_REL_TOL)
    return SolveReport(
        solution=solution, power_w=report.power_w, violation=report.violation,
        feasibility=feas, converged=report.converged,
        outer_rounds=report.outer_rounds, inner_rounds=report.inner_rounds,
        objective_trace=report.objective_trace,
        violation_trace=report.violation_trace)


def solve_no_irs(problem: Problem, params: SolverParams | None = None) -> SolveReport:
    """Baseline with every reflected path removed."""
    if params is None:
        params = SolverParams()
    bare = Problem(strip_irs(problem.channels), problem.targets,
                   problem.noise_pow, problem.dedicated_energy_beams)
    return solve(bare, params)


def solve_fixed_phase(problem: Problem, params: SolverParams | None = None
                      ) -> SolveReport:
    """Panels present but never tuned: all phase shifts stay at zero."""
    if params is None:
        params = SolverParams()
    phases = PhaseShifts.flat(problem.channels.n_elements)
    report = _beams_only(problem, phases, params)
    return _with_phases(problem, report, phases)


def _min_qos_margin(problem: Problem, solution: BeamformingSolution) -> float:
    feas = qos_feasibility(problem.channels, solution, problem.targets,
                           problem.noise_pow, rel_tol=FEASIBILITY_REL_TOL)
    return feas.min_margin


def _margin_phase_step(problem: Problem, info_beams: np.ndarray,
                       energy_beams: np.ndarray, phases: PhaseShifts,
                       levels: int) -> PhaseShifts:
    """Greedy per-element grid search maximizing the worst QoS margin."""
    u = phases.phasor.copy()
    grid = np.exp(2j * np.pi * np.arange(levels) / levels)

    def margin(vec: np.ndarray) -> float:
        sol = BeamformingSolution(info_beams, energy_beams, PhaseShifts(vec))
        return _min_qos_margin(problem, sol)

    for idx in range(u.size):
        best_val = margin(u)
        best_entry = u[idx]
        for cand in grid:
            if cand == best_entry:
                continue
            u[idx] = cand
            val = margin(u)
            if val > best_val:  # strict: keep the current entry on ties
                best_val, best_entry = val, cand
        u[idx] = best_entry
    return PhaseShifts(u)


def solve_alternating(problem: Problem, params: SolverParams | None = None,
                      max_rounds: int = ALTERNATING_ROUNDS_CAP,
                      grid_levels: int = ALTERNATING_GRID_LEVELS) -> SolveReport:
    """Alternate beams-only solves with margin-driven per-element phase tweaks.

    The phase step never sees the power objective, only constraint margins,
    which is what makes this scheme fall behind the joint design when many
    users compete. Stops when the round-over-round power stalls, keeping the
    best feasible round; an unconverged round keeps the previous best and
    still takes its phase step.
    """
    if params is None:
        params = SolverParams()
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    phases = PhaseShifts.flat(problem.channels.n_elements)
    best: SolveReport | None = None
    prev_power = None
    for _ in range(max_rounds):
        report = _with_phases(problem, _beams_only(problem, phases, params), phases)
        if report.converged and report.feasibility.feasible:
            if best is None or report.power_w < best.power_w:
                best = report
        if prev_power is not None and abs(prev_power - report.power_w) \
                <= params.inner_tol * max(prev_power, 1e-300):
            break
        prev_power = report.power_w
        if problem.channels.n_elements == 0:
            break
        phases = _margin_phase_step(problem, report.solution.info_beams,
                                    report.solution.energy_beams, phases,
                                    grid_levels)
    if best is not None:
        return best
    return SolveReport(
        solution=report.solution, power_w=report.power_w,
        violation=report.violation, feasibility=report.feasibility,
        converged=False, outer_rounds=report.outer_rounds,
        inner_rounds=report.inner_rounds,
        objective_trace=report.objective_trace,
        violation_trace=report.violation_trace)


def _nullspace_basis(rows: np.ndarray, dim: int) -> np.ndarray:
    """Orthonormal basis of vectors v with rows.conj() @ v = 0."""
    if rows.shape[0] == 0:
        return np.eye(dim, dtype=complex)
    _, _, vh = np.linalg.svd(rows.conj(), full_matrices=True)
    return vh[rows.shape[0]:].conj().T


def solve_separate_beams(problem: Problem, params: SolverParams | None = None
                         ) -> SolveReport:
    """Design information and energy beams independently.

    Information beams solve the SINR problem on the direct channels alone,
    treating reflections at IUs as negligible. Energy beams are then forced
    into the nullspace of those direct channels (so they are invisible to
    IUs even without waveform cancellation) and tuned jointly with the
    phases to meet the harvest targets, with the information beams frozen.
    The report judges the result on the full model, where the ignored IU
    reflections may void the SINR guarantee; converged means both stages
    finished and the full-model check passed.
    """
    if params is None:
        params = SolverParams()
    cs = problem.channels
    m, k_i, k_e = cs.n_antennas, cs.n_iu, cs.n_eu
    n_e = problem.n_energy_beams
    if n_e and k_i >= m:
        raise ValueError("energy beams need a nullspace: requires K_I <= M - 1")

    stages_ok = True
    if k_i:
        iu_only = Problem(
            ChannelSet(iu_direct=strip_irs(cs).iu_direct,
                       iu_reflected=np.zeros((k_i, 0), dtype=complex),
                       eu_direct=np.zeros((0, m), dtype=complex),
                       eu_reflected=np.zeros((0, 0), dtype=complex),
                       ap_irs=np.zeros((0, m), dtype=complex)),
            QosTargets(problem.targets.sinr_min, np.zeros(0)),
            problem.noise_pow, dedicated_energy_beams=False)
        stage1 = solve(iu_only, params)
        info_beams = stage1.solution.info_beams
        stages_ok &= stage1.converged
        outer1, inner1 = stage1.outer_rounds, stage1.inner_rounds
    else:
        info_beams = np.zeros((m, 0), dtype=complex)
        outer1 = inner1 = 0

    basis = _nullspace_basis(cs.iu_direct, m)
    reduced, phases, outer2, inner2, stage2_ok, stage2_viol = _energy_stage(
        problem, info_beams, basis, params)
    stages_ok &= stage2_ok
    solution = BeamformingSolution(info_beams, basis @ reduced, phases)
    feas = qos_feasibility(cs, solution, problem.targets, problem.noise_pow,
                           rel_tol=FEASIBILITY_REL_TOL)
    return SolveReport(
        solution=solution,
        power_w=float(np.sum(np.abs(info_beams) ** 2)
                      + np.sum(np.abs(reduced) ** 2)),
        violation=stage2_viol,
        feasibility=feas,
        converged=bool(stages_ok and feas.feasible),
        outer_rounds=outer1 + outer2,
        inner_rounds=inner1 + inner2,
        objective_trace=[],
        violation_trace=[])


def _energy_stage(problem: Problem, info_beams: np.ndarray, basis: np.ndarray,
                  params: SolverParams
                  ) -> tuple[np.ndarray, PhaseShifts, int, int, bool, float]:
    """Phases plus reduced-space energy beams meeting the harvest targets.

    Same penalty scheme as the joint solver, with the information beams
    frozen: surrogates split into products of the frozen beams (original
    antenna space) and products of the energy beams (nullspace coordinates,
    where the power of a beam is the power of its coefficients).
    """
    cs = problem.channels
    m, k_i, k_e = cs.n_antennas, cs.n_iu, cs.n_eu
    n, n_e = cs.n_elements, problem.n_energy_beams
    dim = basis.shape[1]
    phases = PhaseShifts.flat(n)
    reduced = np.zeros((dim, n_e), dtype=complex)
    if k_e == 0:
        return reduced, phases, 0, 0, True, 0.0

    kappa2 = float(np.mean(problem.targets.harvest_min_w))
    kappa = np.sqrt(kappa2)
    harvest = problem.targets.harvest_min_w / kappa2
    # original-space channels carry the frozen-beam products, reduced-space
    # channels carry the energy-beam products; both scale by the same kappa
    cs_frozen = ChannelSet(
        iu_direct=np.zeros((0, m), dtype=complex),
        iu_reflected=np.zeros((0, n), dtype=complex),
        eu_direct=cs.eu_direct / kappa,
        eu_reflected=cs.eu_reflected / kappa,
        ap_irs=cs.ap_irs)
    cs_reduced = ChannelSet(
        iu_direct=np.zeros((0, dim), dtype=complex),
        iu_reflected=np.zeros((0, n), dtype=complex),
        eu_direct=cs.eu_direct @ basis.conj() / kappa,
        eu_reflected=cs.eu_reflected / kappa,
        ap_irs=cs.ap_irs @ basis)

    rng = np.random.default_rng(params.seed)

    def draw(*shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)

    surr_info = draw(k_e, k_i)
    surr_energy = draw(k_e, n_e)
    none_iu = np.zeros((0, 0), dtype=complex)
    none_info = np.zeros((k_e, 0), dtype=complex)
    empty_frozen_energy = np.zeros((m, 0), dtype=complex)
    empty_reduced_info = np.zeros((dim, 0), dtype=complex)

    def eu_rows(channel_set: ChannelSet) -> np.ndarray:
        return effective_rows(channel_set.eu_direct, channel_set.eu_reflected,
                              channel_set.ap_irs, phases)

    rho = params.penalty_start
    converged = False
    outer = 0
    total_inner = 0
    for outer in range(1, params.max_outer + 1):
        trace: list[float] = []
        inner_converged = False
        for _ in range(params.max_inner):
            rows_red = eu_rows(cs_reduced)
            _, reduced = update_precoders(
                np.zeros((0, dim), dtype=complex), rows_red,
                none_iu, none_info, surr_energy, rho)
            if n:
                sp1 = SurrogateProducts(iu=none_iu, eu_info=surr_info,
                                        eu_energy=np.zeros((k_e, 0), dtype=complex))
                sp2 = SurrogateProducts(iu=none_iu,
                                        eu_info=np.zeros((k_e, 0), dtype=complex),
                                        eu_energy=surr_energy)
                c1, o1 = penalty_vectors(cs_frozen, info_beams,
                                         empty_frozen_energy, sp1)
                c2, o2 = penalty_vectors(cs_reduced, empty_reduced_info,
                                         reduced, sp2)
                u, _ = coordinate_phase_opt(
                    np.concatenate([c1, c2]), np.concatenate([o1, o2]),
                    phases.phasor, maximize=False, bits=params.phase_bits,
                    frac_tol=params.inner_tol, max_sweeps=params.max_phase_sweeps)
                phases = PhaseShifts(u)
            prods_info = eu_rows(cs_frozen).conj() @ info_beams
            prods_energy = eu_rows(cs_reduced).conj() @ reduced
            gap = 0.0
            for j in range(k_e):
                surr_info[j], surr_energy[j], r_i, r_e = _project_eu(
                    prods_info[j], prods_energy[j], harvest[j], j)
                gap += float(np.sum(np.abs(r_i) ** 2) + np.sum(np.abs(r_e) ** 2))
            obj = float(np.sum(np.abs(reduced) ** 2)) + gap / (2.0 * rho)
            if trace:
                prev = trace[-1]
                scale = max(abs(prev), 1e-300)
                if obj > prev:
                    if obj - prev > params.inner_tol * scale:
                        raise RuntimeError(
                            "energy-stage objective rose; "
                            "a block update is not a descent step")
                    inner_converged = True
                    break
                if prev - obj <= params.inner_tol * scale:
                    trace.append(obj)
                    inner_converged = True
                    break
            trace.append(obj)
        total_inner += len(trace)
        prods_info = eu_rows(cs_frozen).conj() @ info_beams
        prods_energy = eu_rows(cs_reduced).conj() @ reduced
        viol = 0.0
        if surr_info.size:
            viol = float(np.max(np.abs(prods_info - surr_info) ** 2))
        if surr_energy.size:
            viol = max(viol, float(np.max(np.abs(prods_energy - surr_energy) ** 2)))
        if viol <= params.violation_tol and inner_converged:
            converged = True
            break
        rho *= params.penalty_decay
    return reduced, phases, outer, total_inner, converged, viol


def count_energy_beams(energy_beams: np.ndarray,
                       rel_threshold: float = ENERGY_BEAM_REL_THRESHOLD) -> int:
    """Number of energy beams carrying a non-negligible share of their total power."""
    if not 0.0 < rel_threshold < 1.0:
        raise ValueError("rel_threshold must lie in (0, 1)")
    energy_beams = np.asarray(energy_beams, dtype=complex)
    if energy_beams.size == 0:
        return 0
    col_power = np.sum(np.abs(energy_beams) ** 2, axis=0)
    total = float(col_power.sum())
    if total == 0.0:
        return 0
    return int(np.count_nonzero(col_power > rel_threshold * total))
