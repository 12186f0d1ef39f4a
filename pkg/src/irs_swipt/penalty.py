"""Two-layer penalty method for joint transmit and reflection beamforming.

The power-minimization problem couples transmit beams, per-element phase
shifts, and QoS constraints. The reformulation used here introduces one
surrogate scalar per (user, beam) product and penalizes the mismatch between
surrogates and true products:

    P = ||W||^2 + ||V||^2 + 1/(2 rho) * sum |product - surrogate|^2

with the QoS constraints imposed on the surrogates, where they separate per
user. The inner layer runs block coordinate descent over precoders, phases,
and surrogates; every block is an exact minimizer, so P never increases
within an inner pass. The outer layer shrinks rho so the products are driven
onto their surrogates, at which point the QoS constraints hold for the true
channel.

Internally `solve` rescales user-side channels by the root mean noise power
(harvest targets stand in when there are no information users), making the
default violation tolerance meaningful at radio link budgets; beams and
reported powers stay in watts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelSet, PhaseShifts, effective_rows
from .metrics import BeamformingSolution, FeasibilityReport, QosTargets, qos_feasibility
from .phase_opt import coordinate_phase_opt

FEASIBILITY_REL_TOL = 1e-3

# cushion against exactly-representable boundary values in bisections
_LAMBDA_CAP = 1.0 - 1e-12


@dataclass(eq=False)
class Problem:
    """One solvable instance: channels, service targets, receiver noise."""

    channels: ChannelSet
    targets: QosTargets
    noise_pow: np.ndarray  # (K_I,) watts
    dedicated_energy_beams: bool = True

    def __post_init__(self):
        self.noise_pow = np.broadcast_to(
            np.asarray(self.noise_pow, dtype=float), (self.channels.n_iu,)).copy()
        if self.targets.sinr_min.size != self.channels.n_iu:
            raise ValueError("sinr_min length must equal the IU count")
        if self.targets.harvest_min_w.size != self.channels.n_eu:
            raise ValueError("harvest_min_w length must equal the EU count")
        if self.channels.n_iu + self.channels.n_eu == 0:
            raise ValueError("problem needs at least one user")
        if self.noise_pow.size and np.any(self.noise_pow <= 0):
            raise ValueError("noise powers must be positive")
        if (self.channels.n_eu and not self.dedicated_energy_beams
                and self.channels.n_iu == 0):
            raise ValueError("harvest targets need energy beams or information beams")

    @property
    def n_energy_beams(self) -> int:
        return self.channels.n_eu if self.dedicated_energy_beams else 0


@dataclass
class SolverParams:
    """Knobs of the two-layer solver; defaults match the reference setup."""

    penalty_start: float = 1000.0
    penalty_decay: float = 0.9
    inner_tol: float = 1e-4        # fractional objective stall, inner loop
    violation_tol: float = 1e-7    # max squared surrogate mismatch, normalized units
    bisect_tol: float = 1e-7       # scalar bisection width
    max_outer: int = 300
    max_inner: int = 100
    max_phase_sweeps: int = 50
    phase_bits: int = 0            # 0 = continuous phases
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.penalty_decay < 1.0:
            raise ValueError("penalty_decay must lie in (0, 1)")
        if min(self.penalty_start, self.inner_tol, self.violation_tol,
               self.bisect_tol) <= 0:
            raise ValueError("tolerances and penalty_start must be positive")
        if min(self.max_outer, self.max_inner, self.max_phase_sweeps) < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.phase_bits < 0:
            raise ValueError("phase_bits must be >= 0")


@dataclass(eq=False)
class SurrogateProducts:
    """Free copies of the beam products, one per (user, beam) pair.

    iu[k, i] stands for the product of IU k's row with info beam i;
    eu_info[j, i] and eu_energy[j, m] likewise for EU j.
    """

    iu: np.ndarray
    eu_info: np.ndarray
    eu_energy: np.ndarray


@dataclass(eq=False)
class SolverState:
    problem: Problem
    info_beams: np.ndarray
    energy_beams: np.ndarray
    phases: PhaseShifts
    surrogates: SurrogateProducts
    penalty_weight: float
    objective: float = np.inf
    inner_converged: bool = False
    objective_trace: list = field(default_factory=list)   # list per outer round
    violation_trace: list = field(default_factory=list)


@dataclass(eq=False)
class SolveReport:
    solution: BeamformingSolution
    power_w: float
    violation: float
    feasibility: FeasibilityReport
    converged: bool
    outer_rounds: int
    inner_rounds: int
    objective_trace: list
    violation_trace: list


def _effective(problem: Problem, phases: PhaseShifts) -> tuple[np.ndarray, np.ndarray]:
    cs = problem.channels
    iu = effective_rows(cs.iu_direct, cs.iu_reflected, cs.ap_irs, phases)
    eu = effective_rows(cs.eu_direct, cs.eu_reflected, cs.ap_irs, phases)
    return iu, eu


def _ridge_lstsq(rows: np.ndarray, targets: np.ndarray,
                 penalty_weight: float) -> np.ndarray:
    """Columns minimizing ||w||^2 + ||rows.conj() @ w - targets||^2 / (2 rho).

    Solved as a stacked least-squares problem whose condition number is the
    square root of the normal equations', so the beams stay accurate however
    deep the penalty anneal goes.
    """
    m = rows.shape[1]
    root = np.sqrt(2.0 * penalty_weight)
    stack = np.concatenate([rows.conj() / root, np.eye(m, dtype=complex)])
    rhs = np.concatenate([targets / root,
                          np.zeros((m, targets.shape[1]), dtype=complex)])
    return np.linalg.lstsq(stack, rhs, rcond=None)[0]


def update_precoders(iu_rows: np.ndarray, eu_rows: np.ndarray,
                     surr_iu: np.ndarray, surr_eu_info: np.ndarray,
                     surr_eu_energy: np.ndarray, penalty_weight: float
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Exact unconstrained minimizer of the penalized power in (W, V)."""
    m = iu_rows.shape[1]
    k_i = iu_rows.shape[0]
    n_e = surr_eu_energy.shape[1]
    if k_i:
        info = _ridge_lstsq(np.concatenate([iu_rows, eu_rows]),
                            np.concatenate([surr_iu, surr_eu_info]),
                            penalty_weight)
    else:
        info = np.zeros((m, 0), dtype=complex)
    if n_e:
        energy = _ridge_lstsq(eu_rows, surr_eu_energy, penalty_weight)
    else:
        energy = np.zeros((m, 0), dtype=complex)
    return info, energy


def penalized_power(iu_rows: np.ndarray, eu_rows: np.ndarray,
                    info_beams: np.ndarray, energy_beams: np.ndarray,
                    surr_iu: np.ndarray, surr_eu_info: np.ndarray,
                    surr_eu_energy: np.ndarray, penalty_weight: float) -> float:
    """Objective of the inner problem at a full variable assignment."""
    power = np.sum(np.abs(info_beams) ** 2) + np.sum(np.abs(energy_beams) ** 2)
    gap = 0.0
    if surr_iu.size:
        gap += np.sum(np.abs(iu_rows.conj() @ info_beams - surr_iu) ** 2)
    if surr_eu_info.size:
        gap += np.sum(np.abs(eu_rows.conj() @ info_beams - surr_eu_info) ** 2)
    if surr_eu_energy.size:
        gap += np.sum(np.abs(eu_rows.conj() @ energy_beams - surr_eu_energy) ** 2)
    return float(power + gap / (2.0 * penalty_weight))


def max_violation(channels: ChannelSet, solution: BeamformingSolution,
                  surrogates: SurrogateProducts) -> float:
    """Largest squared mismatch between true products and surrogates."""
    iu = effective_rows(channels.iu_direct, channels.iu_reflected,
                        channels.ap_irs, solution.phases)
    eu = effective_rows(channels.eu_direct, channels.eu_reflected,
                        channels.ap_irs, solution.phases)
    worst = 0.0
    pairs = (
        (iu, solution.info_beams, surrogates.iu),
        (eu, solution.info_beams, surrogates.eu_info),
        (eu, solution.energy_beams, surrogates.eu_energy),
    )
    for rows, beams, surr in pairs:
        if surr.size:
            worst = max(worst, float(np.max(np.abs(rows.conj() @ beams - surr) ** 2)))
    return worst


def _project_iu(products: np.ndarray, self_idx: int, sinr_min: float,
                noise_pow: float, rel_tol: float = 1e-7
                ) -> tuple[np.ndarray, np.ndarray]:
    """IU projection returning (surrogate row, products - row).

    The residual is formed multiplicatively (entry times a shrink factor),
    never by subtracting nearly equal numbers, so the inner objective can be
    tracked without cancellation noise.
    """
    row = np.asarray(products, dtype=complex).reshape(-1).copy()
    g = float(sinr_min)
    sig = float(noise_pow)
    others = np.delete(row, self_idx)
    own = row[self_idx]
    oth_sq = np.abs(others) ** 2
    own_sq = abs(own) ** 2

    def slack(lam: float) -> float:
        boosted = own_sq / (1.0 - lam) ** 2
        shrunk = oth_sq / (1.0 + lam * g) ** 2
        return boosted - g * (float(np.sum(shrunk)) + sig)

    mask = np.arange(row.size) != self_idx
    if slack(0.0) >= 0.0:
        return row, np.zeros_like(row)
    if own_sq == 0.0 or slack(_LAMBDA_CAP) <= 0.0:
        # signal entry too weak to ever activate the multiplier: take the
        # limit point where interference shrinks fully and the signal entry
        # is rebuilt to exact equality, keeping its phase
        new_others = others / (1.0 + g)
        amp = np.sqrt(g * (float(np.sum(np.abs(new_others) ** 2)) + sig))
        phase = own / abs(own) if abs(own) > 0 else 1.0
        out = np.empty_like(row)
        out[mask] = new_others
        out[self_idx] = amp * phase
        resid = np.empty_like(row)
        resid[mask] = others * (g / (1.0 + g))
        resid[self_idx] = phase * (abs(own) - amp)
        return out, resid
    lo, hi = 0.0, _LAMBDA_CAP
    for _ in range(200):
        if hi - lo <= rel_tol:
            break
        mid = 0.5 * (lo + hi)
        if slack(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    # safeguarded Newton polish inside the bracket: the bisection width alone
    # leaves enough multiplier error to wiggle the inner objective near a
    # stall, breaking descent by more than roundoff
    for _ in range(60):
        val = slack(lam)
        if val == 0.0:
            break
        if val < 0.0:
            lo = lam
        else:
            hi = lam
        grad = (2.0 * own_sq / (1.0 - lam) ** 3
                + 2.0 * g * g * float(np.sum(oth_sq / (1.0 + lam * g) ** 3)))
        step = val / grad
        nxt = lam - step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - lam) <= 1e-16 * max(lam, 1e-30):
            lam = nxt
            break
        lam = nxt
    out = np.empty_like(row)
    out[mask] = others / (1.0 + lam * g)
    out[self_idx] = own / (1.0 - lam)
    resid = np.empty_like(row)
    resid[mask] = others * (lam * g / (1.0 + lam * g))
    resid[self_idx] = own * (-lam / (1.0 - lam))
    return out, resid


def update_iu_targets(products: np.ndarray, self_idx: int, sinr_min: float,
                      noise_pow: float, rel_tol: float = 1e-7) -> np.ndarray:
    """Project one IU's surrogate row onto its SINR constraint.

    Minimizes the distance to `products` subject to
    |row[self]|^2 >= sinr_min * (sum others |row|^2 + noise_pow).
    The Lagrangian shrinks interference entries and magnifies the signal
    entry; the multiplier comes from a scalar bisection plus a Newton polish.
    """
    return _project_iu(products, self_idx, sinr_min, noise_pow, rel_tol)[0]


def _project_eu(info_products: np.ndarray, energy_products: np.ndarray,
                harvest_min: float, self_idx: int = 0
                ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """EU projection returning (info row, energy row, and both residuals).

    Residuals are formed as entry * (1 - scale), cancellation-free, for the
    same reason as in `_project_iu`.
    """
    info = np.asarray(info_products, dtype=complex).reshape(-1).copy()
    energy = np.asarray(energy_products, dtype=complex).reshape(-1).copy()
    total = float(np.sum(np.abs(info) ** 2) + np.sum(np.abs(energy) ** 2))
    if total >= harvest_min:
        return info, energy, np.zeros_like(info), np.zeros_like(energy)
    if total == 0.0:
        r_info = np.zeros_like(info)
        r_energy = np.zeros_like(energy)
        if energy.size:
            j = min(self_idx, energy.size - 1)
            energy[j] = np.sqrt(harvest_min)
            r_energy[j] = -energy[j]
        elif info.size:
            info[0] = np.sqrt(harvest_min)
            r_info[0] = -info[0]
        else:
            raise ValueError("no beams available to meet the harvest target")
        return info, energy, r_info, r_energy
    scale = np.sqrt(harvest_min / total)
    shrink = 1.0 - scale
    return scale * info, scale * energy, shrink * info, shrink * energy


def update_eu_targets(info_products: np.ndarray, energy_products: np.ndarray,
                      harvest_min: float, self_idx: int = 0
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Project one EU's surrogate rows onto its harvested-power constraint.

    The projection magnifies every entry by a common factor; a deficit with
    all-zero products is patched on the user's own energy beam (first info
    beam if there are none), echoing the constraint's preferred direction.
    """
    out = _project_eu(info_products, energy_products, harvest_min, self_idx)
    return out[0], out[1]


def penalty_vectors(channels: ChannelSet, info_beams: np.ndarray,
                    energy_beams: np.ndarray, surrogates: SurrogateProducts
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Linear coefficients of every surrogate mismatch in the phase vector.

    Each (user, beam) pair contributes one residual coeffs . u - offset;
    stacking them turns the phase subproblem into the shared coordinate
    objective of `phase_opt`.
    """
    n = channels.n_elements
    fw = channels.ap_irs @ info_beams      # (N, K_I)
    fv = channels.ap_irs @ energy_beams    # (N, n_e)
    blocks_c, blocks_o = [], []

    def add(refl, direct, beams_at_irs, beams, surr):
        if surr.size == 0:
            return
        coeffs = refl.conj()[:, None, :] * beams_at_irs.T[None, :, :]
        offsets = surr - direct.conj() @ beams
        blocks_c.append(coeffs.reshape(-1, n))
        blocks_o.append(offsets.reshape(-1))

    add(channels.iu_reflected, channels.iu_direct, fw, info_beams, surrogates.iu)
    add(channels.eu_reflected, channels.eu_direct, fw, info_beams, surrogates.eu_info)
    add(channels.eu_reflected, channels.eu_direct, fv, energy_beams, surrogates.eu_energy)
    if not blocks_c:
        return np.zeros((0, n), dtype=complex), np.zeros(0, dtype=complex)
    return np.concatenate(blocks_c, axis=0), np.concatenate(blocks_o)


def update_phase_shifts(channels: ChannelSet, phases: PhaseShifts,
                        info_beams: np.ndarray, energy_beams: np.ndarray,
                        surrogates: SurrogateProducts, params: SolverParams
                        ) -> PhaseShifts:
    """Coordinate-descent step of the phase block at fixed beams and surrogates."""
    if channels.n_elements == 0:
        return phases
    coeffs, offsets = penalty_vectors(channels, info_beams, energy_beams, surrogates)
    u, _ = coordinate_phase_opt(coeffs, offsets, phases.phasor,
                                maximize=False, bits=params.phase_bits,
                                frac_tol=params.inner_tol,
                                max_sweeps=params.max_phase_sweeps)
    return PhaseShifts(u)


def _normalized(problem: Problem) -> tuple[Problem, float]:
    """Rescale user-side channels so noise (or harvest) sits near unity."""
    if problem.channels.n_iu:
        kappa2 = float(np.mean(problem.noise_pow))
    else:
        kappa2 = float(np.mean(problem.targets.harvest_min_w))
    kappa = np.sqrt(kappa2)
    cs = problem.channels
    scaled = ChannelSet(
        iu_direct=cs.iu_direct / kappa,
        iu_reflected=cs.iu_reflected / kappa,
        eu_direct=cs.eu_direct / kappa,
        eu_reflected=cs.eu_reflected / kappa,
        ap_irs=cs.ap_irs,  # cascade scale lives in the user-side segment
        irs_slices=cs.irs_slices,
    )
    targets = QosTargets(sinr_min=problem.targets.sinr_min,
                         harvest_min_w=problem.targets.harvest_min_w / kappa2)
    return Problem(scaled, targets, problem.noise_pow / kappa2,
                   problem.dedicated_energy_beams), kappa2


def init_state(problem: Problem, params: SolverParams) -> SolverState:
    """Zero beams, flat phases, random surrogates, fresh penalty weight."""
    rng = np.random.default_rng(params.seed)
    cs = problem.channels
    m, k_i, k_e = cs.n_antennas, cs.n_iu, cs.n_eu
    n_e = problem.n_energy_beams

    def draw(*shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)

    surr = SurrogateProducts(iu=draw(k_i, k_i), eu_info=draw(k_e, k_i),
                             eu_energy=draw(k_e, n_e))
    return SolverState(
        problem=problem,
        info_beams=np.zeros((m, k_i), dtype=complex),
        energy_beams=np.zeros((m, n_e), dtype=complex),
        phases=PhaseShifts.flat(cs.n_elements),
        surrogates=surr,
        penalty_weight=params.penalty_start,
    )


def inner_bcd(state: SolverState, params: SolverParams) -> None:
    """Run block coordinate descent at the current penalty weight until it stalls.

    Appends this round's per-pass objectives to state.objective_trace and
    records whether the stall test fired before the iteration cap. Every block
    is an exact minimizer, so the objective can only rise by roundoff; a rise
    inside the stall tolerance ends the round as converged without recording
    the risen value, and a rise beyond it means a block update is wrong, so it
    raises instead of continuing.
    """
    problem = state.problem
    surr = state.surrogates
    targets = problem.targets
    noise = problem.noise_pow
    trace: list[float] = []
    converged = False
    for _ in range(params.max_inner):
        iu_rows, eu_rows = _effective(problem, state.phases)
        state.info_beams, state.energy_beams = update_precoders(
            iu_rows, eu_rows, surr.iu, surr.eu_info, surr.eu_energy,
            state.penalty_weight)
        if problem.channels.n_elements:
            state.phases = update_phase_shifts(
                problem.channels, state.phases, state.info_beams,
                state.energy_beams, surr, params)
            iu_rows, eu_rows = _effective(problem, state.phases)
        mismatch = 0.0
        if surr.iu.size:
            prods = iu_rows.conj() @ state.info_beams
            for k in range(problem.channels.n_iu):
                surr.iu[k], resid = _project_iu(prods[k], k, targets.sinr_min[k],
                                                noise[k], params.bisect_tol)
                mismatch += float(np.sum(np.abs(resid) ** 2))
        if problem.channels.n_eu:
            info_prods = eu_rows.conj() @ state.info_beams
            energy_prods = eu_rows.conj() @ state.energy_beams
            for j in range(problem.channels.n_eu):
                surr.eu_info[j], surr.eu_energy[j], r_i, r_e = _project_eu(
                    info_prods[j], energy_prods[j], targets.harvest_min_w[j], j)
                mismatch += float(np.sum(np.abs(r_i) ** 2)
                                  + np.sum(np.abs(r_e) ** 2))
        # mismatch comes from the projections' multiplicative residuals, so
        # the trace is free of the cancellation noise a fresh products-minus-
        # surrogates subtraction would add at this magnitude
        obj = (float(np.sum(np.abs(state.info_beams) ** 2)
                     + np.sum(np.abs(state.energy_beams) ** 2))
               + mismatch / (2.0 * state.penalty_weight))
        if trace:
            prev = trace[-1]
            scale = max(abs(prev), 1e-300)
            if obj > prev:
                if obj - prev > params.inner_tol * scale:
                    raise RuntimeError(
                        f"inner objective rose from {prev!r} to {obj!r}; "
                        "a block update is not a descent step")
                converged = True
                break
            if prev - obj <= params.inner_tol * scale:
                trace.append(obj)
                converged = True
                break
        trace.append(obj)
    state.objective = trace[-1]
    state.inner_converged = converged
    state.objective_trace.append(trace)


def _principal_columns(beams: np.ndarray) -> np.ndarray:
    """Rotate a beam matrix onto its principal axes.

    The covariance beams @ beams.conj().T is preserved, so transmit power,
    harvested power, and interference are all untouched. The descent tends
    to spread a single effective direction across several parallel columns;
    this puts each independent direction in its own column so column counts
    reflect how many beams the solution actually needs.
    """
    if min(beams.shape) == 0:
        return beams.copy()
    left, scales, _ = np.linalg.svd(beams, full_matrices=False)
    out = np.zeros_like(beams)
    out[:, :scales.size] = left * scales
    return out


def solve(problem: Problem, params: SolverParams | None = None) -> SolveReport:
    """Minimize transmit power subject to every user's QoS target.

    Anneals the penalty weight until the surrogate mismatch is negligible
    and the inner descent has stalled on its own test; stopping on a small
    mismatch alone can truncate the descent far from stationarity.

    Energy beams are reported on their principal axes: only their Gram
    matrix affects any metric, and the principal form keeps per-column
    powers meaningful for beam counting.
    """
    if params is None:
        params = SolverParams()
    norm_problem, _ = _normalized(problem)
    state = init_state(norm_problem, params)
    converged = False
    outer = 0
    for outer in range(1, params.max_outer + 1):
        inner_bcd(state, params)
        solution = BeamformingSolution(state.info_beams, state.energy_beams,
                                       state.phases)
        viol = max_violation(norm_problem.channels, solution, state.surrogates)
        state.violation_trace.append(viol)
        if viol <= params.violation_tol and state.inner_converged:
            converged = True
            break
        state.penalty_weight *= params.penalty_decay
    solution = BeamformingSolution(state.info_beams.copy(),
                                   _principal_columns(state.energy_beams),
                                   PhaseShifts(state.phases.phasor.copy()))
    feas = qos_feasibility(problem.channels, solution, problem.targets,
                           problem.noise_pow, rel_tol=FEASIBILITY_REL_TOL)
    return SolveReport(
        solution=solution,
        power_w=float(np.sum(np.abs(solution.info_beams) ** 2)
                      + np.sum(np.abs(solution.energy_beams) ** 2)),
        violation=state.violation_trace[-1],
        feasibility=feas,
        converged=converged,
        outer_rounds=outer,
        inner_rounds=sum(len(t) for t in state.objective_trace),
        objective_trace=state.objective_trace,
        violation_trace=state.violation_trace,
    )
