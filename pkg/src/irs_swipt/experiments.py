"""Monte-Carlo experiment harness: config file -> solver sweep -> CSV.

Config files are YAML key-value trees. Short keys (M, L, N0, K_I, K_E, d_x,
d_y1, d_y2, r_I, r_E, E0, gamma0_db) follow the conventional simulation
nomenclature for this deployment family: an AP d_x meters off the panel
wall, an EU cluster at lateral offset d_y1 next to panel 1, an IU cluster
at d_y2 on the opposite side next to panel 2, users dropped uniformly in
disks of radius r_E / r_I.

Every output row is a deterministic function of (config, base_seed): trial
seeds are base_seed + trial index, channels and user placement draw from
disjoint named substreams, floats are serialized via repr. Wall-clock
timings are the one nondeterministic quantity, so they go to a sidecar
file and the main CSV stays byte-reproducible.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .benchmarks import (count_energy_beams, solve_alternating,
                         solve_fixed_phase, solve_no_irs, solve_separate_beams)
from .channels import generate_channels
from .lowcomplexity import solve_low_complexity
from .metrics import QosTargets
from .penalty import Problem, SolveReport, SolverParams, solve
from .scenario import AP_IRS_FADING_MODES, IrsSpec, Scenario, db2pow

SWEEP_VARIABLES = ("d_y1", "K_E", "K_I", "N0", "E0", "gamma0_db",
                   "qos_ratio_alpha", "phase_bits")
SOLVER_NAMES = ("penalty", "low_complexity", "alternating", "fixed_phase",
                "no_irs", "separate_beams")
_INT_SWEEPS = {"K_E", "K_I", "N0", "phase_bits"}


@dataclass
class ExperimentConfig:
    """Scenario template plus sweep, solver list, and run bookkeeping."""

    # deployment template
    M: int = 4
    L: int = 2
    N0: int = 8                    # elements per panel
    n_y: int | None = None         # grid columns; None picks the largest divisor <= 5
    element_spacing_m: float = 0.2
    d_x: float = 3.5
    d_y1: float = 8.0
    d_y2: float = 100.0
    r_I: float = 2.5
    r_E: float = 2.5
    K_I: int = 2
    K_E: int = 2
    carrier_freq_hz: float = 750e6
    bandwidth_hz: float = 1e6
    noise_psd_dbm_hz: float = -150.0
    pl_exp_ap_user: float = 3.8
    pl_exp_ap_irs: float = 2.2
    pl_exp_irs_user: float = 2.2
    ap_gain_dbi: float = 0.0
    irs_element_gain_dbi: float = 3.0
    ap_irs_fading: str = "los"     # one mode, or comma-separated per panel
    # service targets
    gamma0_db: float = 20.0
    E0: float = 5e-6               # watts
    qos_ratio_alpha: float = 1.0   # common multiplier on both linear targets
    energy_beams_enabled: bool = True
    phase_bits: int = 0            # 0 = continuous
    # solver knobs
    penalty_start: float = 1000.0
    penalty_decay: float = 0.9
    inner_tol: float = 1e-4
    violation_tol: float = 1e-7
    bisect_tol: float = 1e-7
    max_outer: int = 300
    max_inner: int = 100
    max_phase_sweeps: int = 50
    # experiment plan
    sweep_variable: str = "d_y1"
    sweep_values: tuple = (8.0,)
    solvers: tuple = ("penalty",)
    n_seeds: int = 50
    base_seed: int = 1
    output_path: str = "results.csv"

    def __post_init__(self):
        self.sweep_values = tuple(self.sweep_values)
        self.solvers = tuple(self.solvers)
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ValueError(f"sweep variable must be one of {SWEEP_VARIABLES}, "
                             f"got {self.sweep_variable!r}")
        if not self.sweep_values:
            raise ValueError("sweep values must be nonempty")
        for name in self.solvers:
            if name not in SOLVER_NAMES:
                raise ValueError(f"unknown solver {name!r}; "
                                 f"choose from {SOLVER_NAMES}")
        if not self.solvers:
            raise ValueError("solvers must be nonempty")
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be >= 1")
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.L not in (0, 1, 2):
            raise ValueError("L must be 0, 1 or 2 (panel geometry is fixed)")
        if self.N0 < 1:
            raise ValueError("N0 must be >= 1")
        if min(self.K_I, self.K_E) < 0 or self.K_I + self.K_E == 0:
            raise ValueError("need K_I + K_E >= 1 users")
        if self.E0 <= 0:
            raise ValueError("E0 must be positive")
        if self.qos_ratio_alpha <= 0:
            raise ValueError("qos_ratio_alpha must be positive")
        if self.phase_bits < 0:
            raise ValueError("phase_bits must be >= 0")
        if len(self.fading_modes()) not in (1, max(self.L, 1)):
            raise ValueError("ap_irs_fading needs one mode or one per panel")
        for mode in self.fading_modes():
            if mode not in AP_IRS_FADING_MODES:
                raise ValueError(f"ap_irs_fading must use modes from "
                                 f"{AP_IRS_FADING_MODES}, got {mode!r}")

    def fading_modes(self) -> tuple[str, ...]:
        return tuple(s.strip() for s in self.ap_irs_fading.split(","))

    def experiment_id(self) -> str:
        blob = ";".join(f"{f.name}={getattr(self, f.name)!r}"
                        for f in dataclasses.fields(self))
        return hashlib.sha1(blob.encode()).hexdigest()[:10]


def load_config(path) -> ExperimentConfig:
    """Parse and validate a YAML config; absent keys take the defaults above."""
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ValueError("config root must be a mapping")
    return config_from_mapping(raw)


def config_from_mapping(raw: dict) -> ExperimentConfig:
    raw = dict(raw)
    sweep = raw.pop("sweep", None)
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key in raw:
        if key not in known or key in ("sweep_variable", "sweep_values"):
            raise ValueError(f"unknown config key {key!r}")
    kwargs = dict(raw)
    if sweep is not None:
        if not isinstance(sweep, dict) or set(sweep) - {"variable", "values"}:
            raise ValueError("sweep must be a mapping with keys "
                             "'variable' and 'values'")
        if "variable" in sweep:
            kwargs["sweep_variable"] = sweep["variable"]
        if "values" in sweep:
            kwargs["sweep_values"] = tuple(sweep["values"])
    return ExperimentConfig(**kwargs)


def _panel_grid(n0: int, n_y: int | None) -> tuple[int, int]:
    if n_y is None:
        n_y = max(d for d in range(1, min(5, n0) + 1) if n0 % d == 0)
    if n0 % n_y:
        raise ValueError(f"n_y={n_y} does not divide N0={n0}")
    return n_y, n0 // n_y


def apply_sweep(cfg: ExperimentConfig, value) -> ExperimentConfig:
    """Copy of the config with the swept variable set to one value."""
    caster = int if cfg.sweep_variable in _INT_SWEEPS else float
    return dataclasses.replace(cfg, **{cfg.sweep_variable: caster(value)})


def place_users(cfg: ExperimentConfig, trial_seed: int
                ) -> tuple[np.ndarray, np.ndarray]:
    """Drop users uniformly in their cluster disks (z = 0 plane).

    Each user draws from its own substream, so changing one count never
    moves the other users.
    """
    centers = {0: np.array([cfg.d_x, -cfg.d_y2, 0.0]),   # IU cluster
               1: np.array([cfg.d_x, cfg.d_y1, 0.0])}    # EU cluster
    radii = {0: cfg.r_I, 1: cfg.r_E}

    def drop(kind: int, count: int) -> np.ndarray:
        out = np.zeros((count, 3))
        for idx in range(count):
            ss = np.random.SeedSequence(trial_seed, spawn_key=(10 + kind, idx))
            rng = np.random.default_rng(ss)
            r = radii[kind] * np.sqrt(rng.uniform())
            ang = rng.uniform(0.0, 2.0 * np.pi)
            out[idx] = centers[kind] + [r * np.cos(ang), r * np.sin(ang), 0.0]
        return out

    return drop(0, cfg.K_I), drop(1, cfg.K_E)


def build_scenario(cfg: ExperimentConfig, trial_seed: int) -> Scenario:
    """Instantiate one deployment snapshot from the template."""
    n_y, n_z = _panel_grid(cfg.N0, cfg.n_y)
    panel_refs = ([np.array([0.0, cfg.d_y1, 0.0])] if cfg.L >= 1 else []) \
        + ([np.array([0.0, -cfg.d_y2, 0.0])] if cfg.L >= 2 else [])
    panels = tuple(IrsSpec(ref, n_y=n_y, n_z=n_z,
                           element_spacing=cfg.element_spacing_m)
                   for ref in panel_refs)
    iu_pos, eu_pos = place_users(cfg, trial_seed)
    return Scenario(
        ap_position=np.array([cfg.d_x, 0.0, 0.0]),
        ap_antennas=cfg.M,
        irs=panels,
        iu_positions=iu_pos,
        eu_positions=eu_pos,
        carrier_freq_hz=cfg.carrier_freq_hz,
        bandwidth_hz=cfg.bandwidth_hz,
        noise_psd_dbm_hz=cfg.noise_psd_dbm_hz,
        pl_exp_ap_user=cfg.pl_exp_ap_user,
        pl_exp_ap_irs=cfg.pl_exp_ap_irs,
        pl_exp_irs_user=cfg.pl_exp_irs_user,
        ap_gain_dbi=cfg.ap_gain_dbi,
        irs_element_gain_dbi=cfg.irs_element_gain_dbi,
        ap_irs_fading=(cfg.fading_modes() if "," in cfg.ap_irs_fading
                       else cfg.ap_irs_fading),
        seed=trial_seed,
    )


def build_problem(cfg: ExperimentConfig, scenario: Scenario) -> Problem:
    channels = generate_channels(scenario)
    gamma = cfg.qos_ratio_alpha * db2pow(cfg.gamma0_db)
    e_min = cfg.qos_ratio_alpha * cfg.E0
    targets = QosTargets(sinr_min=np.full(cfg.K_I, gamma),
                         harvest_min_w=np.full(cfg.K_E, e_min))
    return Problem(channels, targets, scenario.noise_vector(),
                   dedicated_energy_beams=cfg.energy_beams_enabled)


def solver_params(cfg: ExperimentConfig, trial_seed: int) -> SolverParams:
    return SolverParams(
        penalty_start=cfg.penalty_start, penalty_decay=cfg.penalty_decay,
        inner_tol=cfg.inner_tol, violation_tol=cfg.violation_tol,
        bisect_tol=cfg.bisect_tol, max_outer=cfg.max_outer,
        max_inner=cfg.max_inner, max_phase_sweeps=cfg.max_phase_sweeps,
        phase_bits=cfg.phase_bits, seed=trial_seed)


def run_one(name: str, problem: Problem, scenario: Scenario,
            params: SolverParams) -> SolveReport:
    if name == "penalty":
        return solve(problem, params)
    if name == "low_complexity":
        return solve_low_complexity(problem, scenario, params)
    if name == "alternating":
        return solve_alternating(problem, params)
    if name == "fixed_phase":
        return solve_fixed_phase(problem, params)
    if name == "no_irs":
        return solve_no_irs(problem, params)
    if name == "separate_beams":
        return solve_separate_beams(problem, params)
    raise ValueError(f"unknown solver {name!r}")


@dataclass
class ResultRow:
    experiment_id: str
    sweep_value: object
    seed: int
    solver: str
    n_antennas: int
    n_elements: int
    n_iu: int
    n_eu: int
    power_w: float
    power_dbm: float
    outer_iters: int
    inner_iters: int
    violation_final: float
    feasible: bool
    energy_beam_count: int
    wall_time_s: float


MAIN_COLUMNS = [f.name for f in dataclasses.fields(ResultRow)
                if f.name != "wall_time_s"]
TIMING_COLUMNS = ["experiment_id", "sweep_value", "seed", "solver", "wall_time_s"]


def power_dbm(power_w: float) -> float:
    return 10.0 * np.log10(power_w * 1e3) if power_w > 0 else float("-inf")


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _trial_rows(args) -> tuple[list[ResultRow], list[str]]:
    """All solver rows of one (sweep value, trial); used by worker processes."""
    cfg, sweep_value, trial = args
    point = apply_sweep(cfg, sweep_value)
    trial_seed = point.base_seed + trial
    scenario = build_scenario(point, trial_seed)
    problem = build_problem(point, scenario)
    params = solver_params(point, trial_seed)
    exp_id = cfg.experiment_id()
    rows, errors = [], []
    for name in point.solvers:
        start = time.perf_counter()
        try:
            report = run_one(name, problem, scenario, params)
        except Exception as exc:  # a crashed solver loses its row, not the run
            errors.append(f"solver={name} sweep={sweep_value} seed={trial_seed}: "
                          f"{type(exc).__name__}: {exc}")
            continue
        elapsed = time.perf_counter() - start
        rows.append(ResultRow(
            experiment_id=exp_id,
            sweep_value=sweep_value,
            seed=trial_seed,
            solver=name,
            n_antennas=point.M,
            n_elements=problem.channels.n_elements,
            n_iu=point.K_I,
            n_eu=point.K_E,
            power_w=report.power_w,
            power_dbm=power_dbm(report.power_w),
            outer_iters=report.outer_rounds,
            inner_iters=report.inner_rounds,
            violation_final=report.violation,
            feasible=report.feasibility.feasible,
            energy_beam_count=count_energy_beams(report.solution.energy_beams),
            wall_time_s=elapsed,
        ))
    return rows, errors


def timing_path_for(out_path: Path) -> Path:
    return out_path.with_name(out_path.stem + ".timing.csv")


def run_experiment(cfg: ExperimentConfig, workers: int = 1,
                   out_path=None, base_seed: int | None = None,
                   log=sys.stderr) -> tuple[Path, int]:
    """Run the full sweep and write the result CSV plus a timing sidecar.

    Returns (main CSV path, crashed-solver count). Rows appear in canonical
    (sweep value, trial, solver) order regardless of worker count, and the
    main CSV is byte-identical across reruns; timings go to the sidecar
    because wall clocks are not reproducible.
    """
    if base_seed is not None:
        cfg = dataclasses.replace(cfg, base_seed=base_seed)
    out = Path(out_path) if out_path is not None else Path(cfg.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    tasks = [(cfg, sv, trial)
             for sv in cfg.sweep_values for trial in range(cfg.n_seeds)]
    failures = 0
    with open(out, "w", newline="", encoding="utf-8") as main_f, \
            open(timing_path_for(out), "w", newline="", encoding="utf-8") as time_f:
        main_w = csv.writer(main_f, lineterminator="\n")
        time_w = csv.writer(time_f, lineterminator="\n")
        main_w.writerow(MAIN_COLUMNS)
        time_w.writerow(TIMING_COLUMNS)

        def write(batch: tuple[list[ResultRow], list[str]]) -> None:
            nonlocal failures
            rows, errors = batch
            for msg in errors:
                failures += 1
                print(f"solver failure: {msg}", file=log)
            for row in rows:
                main_w.writerow([_cell(getattr(row, c)) for c in MAIN_COLUMNS])
                time_w.writerow([_cell(getattr(row, c)) for c in TIMING_COLUMNS])
            main_f.flush()
            time_f.flush()

        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for batch in pool.map(_trial_rows, tasks):
                    write(batch)
        else:
            for task in tasks:
                write(_trial_rows(task))
    return out, failures
