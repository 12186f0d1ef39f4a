"""End-to-end behavior of the two-layer penalty solver on hand-sized instances."""

import numpy as np
import pytest

from irs_swipt.channels import ChannelSet
from irs_swipt.metrics import QosTargets, transmit_power
from irs_swipt.penalty import Problem, SolverParams, solve

from conftest import random_channels, small_problem


def trace_is_nonincreasing(report):
    eps = np.finfo(float).eps
    for round_trace in report.objective_trace:
        for a, b in zip(round_trace, round_trace[1:]):
            if b > a + 10 * eps * abs(a):
                return False
    return True


class TestSolve:
    def test_small_instance_converges(self):
        report = solve(small_problem())
        assert report.converged
        assert report.violation <= SolverParams().violation_tol
        assert report.feasibility.feasible
        assert report.power_w > 0

    def test_inner_traces_never_rise(self):
        report = solve(small_problem(seed=5))
        assert trace_is_nonincreasing(report)

    def test_deterministic(self):
        a = solve(small_problem(seed=2))
        b = solve(small_problem(seed=2))
        assert a.power_w == b.power_w
        assert np.array_equal(a.solution.info_beams, b.solution.info_beams)
        assert np.array_equal(a.solution.phases.phasor, b.solution.phases.phasor)

    def test_report_bookkeeping(self):
        report = solve(small_problem(seed=1))
        assert report.power_w == pytest.approx(transmit_power(report.solution))
        assert len(report.violation_trace) == report.outer_rounds
        assert report.violation == report.violation_trace[-1]
        assert report.inner_rounds == sum(len(t) for t in report.objective_trace)

    def test_single_iu_no_elements_hits_closed_form(self):
        # no reflections, one user: optimal power is gamma * noise / ||h||^2
        cs = ChannelSet(iu_direct=np.array([[1.0, 0.0]], dtype=complex),
                        iu_reflected=np.zeros((1, 0), dtype=complex),
                        eu_direct=np.zeros((0, 2), dtype=complex),
                        eu_reflected=np.zeros((0, 0), dtype=complex),
                        ap_irs=np.zeros((0, 2), dtype=complex))
        problem = Problem(cs, QosTargets([2.0], []), [1.0])
        report = solve(problem)
        assert report.converged
        assert report.power_w == pytest.approx(2.0, rel=1e-2)

    def test_no_elements_random_instance(self, rng):
        cs = random_channels(rng, n=0)
        problem = Problem(cs, QosTargets([1.5, 1.5], [0.2, 0.2]), [1.0, 1.0])
        report = solve(problem)
        assert report.feasibility.feasible

    def test_harvest_only(self):
        report = solve(small_problem(k_i=0))
        assert report.converged and report.feasibility.feasible
        assert report.solution.info_beams.shape[1] == 0

    def test_info_only(self):
        report = solve(small_problem(k_e=0))
        assert report.converged and report.feasibility.feasible
        assert report.solution.energy_beams.shape[1] == 0

    def test_energy_beam_toggle(self):
        with_beams = solve(small_problem(seed=6))
        without = solve(small_problem(seed=6, energy_beams=False))
        assert with_beams.solution.energy_beams.shape[1] == 2
        assert without.solution.energy_beams.shape[1] == 0
        assert without.feasibility.feasible

    def test_discrete_phases_land_on_grid(self):
        report = solve(small_problem(seed=7), SolverParams(phase_bits=3))
        k = np.angle(report.solution.phases.phasor) * 8 / (2 * np.pi)
        assert np.allclose(k, np.round(k), atol=1e-9)
        assert report.feasibility.feasible

    def test_outer_cap_respected(self):
        report = solve(small_problem(seed=8), SolverParams(max_outer=3))
        assert report.outer_rounds <= 3
        assert not report.converged  # three rounds cannot anneal the penalty down

    def test_physical_scale_instance(self):
        # link-budget magnitudes: ~1e-6 channels against 1e-12 W noise
        rng = np.random.default_rng(11)
        cs = random_channels(rng, m=3, n=4, k_i=1, k_e=1, scale=1e-6)
        problem = Problem(cs, QosTargets([2.0], [1e-13]), [1e-12])
        report = solve(problem)
        assert report.converged
        assert report.feasibility.feasible
        assert trace_is_nonincreasing(report)
