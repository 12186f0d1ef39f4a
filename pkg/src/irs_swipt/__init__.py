"""Joint active/passive beamforming for IRS-assisted SWIPT downlinks.

Transmit power minimization with per-user SINR and harvested-power targets:
a penalty-based joint solver, a one-shot low-complexity design, reference
benchmarks, independent certification oracles, and a Monte-Carlo experiment
harness with a CLI.
"""

from .benchmarks import (count_energy_beams, solve_alternating,
                         solve_fixed_phase, solve_no_irs, solve_separate_beams)
from .channels import (ChannelSet, PhaseShifts, effective_channel,
                       freeze_phases, generate_channels, path_loss, strip_irs)
from .experiments import (ExperimentConfig, ResultRow, load_config,
                          place_users, run_experiment)
from .lowcomplexity import Association, associate_users, solve_low_complexity
from .metrics import (BeamformingSolution, FeasibilityReport, QosTargets,
                      harvested_power, qos_feasibility, sinr, transmit_power)
from .oracles import (dual_bisection_eu, grid_search_phases,
                      optimal_precoder_single_iu, run_certification)
from .penalty import Problem, SolveReport, SolverParams, solve
from .phase_opt import coordinate_phase_opt, project_discrete
from .scenario import IrsSpec, Scenario

__version__ = "0.1.0"

__all__ = [
    "Association", "BeamformingSolution", "ChannelSet", "ExperimentConfig",
    "FeasibilityReport", "IrsSpec", "PhaseShifts", "Problem", "QosTargets",
    "ResultRow", "Scenario", "SolveReport", "SolverParams",
    "associate_users", "coordinate_phase_opt", "count_energy_beams",
    "dual_bisection_eu", "effective_channel", "freeze_phases",
    "generate_channels", "grid_search_phases", "harvested_power",
    "load_config", "optimal_precoder_single_iu", "path_loss", "place_users",
    "project_discrete", "qos_feasibility", "run_certification",
    "run_experiment", "sinr", "solve", "solve_alternating",
    "solve_fixed_phase", "solve_low_complexity", "solve_no_irs",
    "solve_separate_beams", "strip_irs", "transmit_power",
]
