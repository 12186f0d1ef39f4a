"""Exactness of the individual penalty-solver blocks."""

import numpy as np
import pytest

from irs_swipt.channels import PhaseShifts
from irs_swipt.penalty import (Problem, SolverParams, _project_eu, _project_iu,
                               init_state, penalized_power, penalty_vectors,
                               update_eu_targets, update_iu_targets,
                               update_phase_shifts, update_precoders)

from conftest import crandn, random_channels, small_problem


class TestIuProjection:
    def test_feasible_row_untouched(self):
        row = update_iu_targets(np.array([3.0, 0.1 + 0j]), 0, 1.0, 1.0)
        assert np.array_equal(row, [3.0, 0.1])

    def test_single_user_closed_form(self):
        # |x|^2 >= 4 * 1 forces x = 2 from x = 0.5 (multiplier 3/4)
        row = update_iu_targets(np.array([0.5 + 0j]), 0, 4.0, 1.0)
        assert row[0] == pytest.approx(2.0, rel=1e-9)

    def test_phase_preserved(self):
        row = update_iu_targets(np.array([0.5j]), 0, 4.0, 1.0)
        assert row[0] == pytest.approx(2.0j, rel=1e-9)

    def test_two_entry_multiplier_consistency(self):
        row = update_iu_targets(np.array([1.0 + 0j, 1.0 + 0j]), 0, 1.0, 0.5)
        own, other = row[0].real, row[1].real
        # boosted signal, shrunk interference, active constraint
        assert own > 1.0 > other > 0.0
        assert own ** 2 == pytest.approx(other ** 2 + 0.5, rel=1e-9)
        lam_own = 1.0 - 1.0 / own          # own = 1 / (1 - lam)
        lam_other = 1.0 / other - 1.0      # other = 1 / (1 + lam * gamma)
        assert lam_own == pytest.approx(lam_other, rel=1e-6)

    def test_matches_boundary_scan(self):
        # closest feasible point, independently: walk the active constraint
        row = update_iu_targets(np.array([1.0 + 0j, 1.0 + 0j]), 0, 1.0, 0.5)
        dist = np.sum(np.abs(row - np.array([1.0, 1.0])) ** 2)
        b = np.linspace(0.0, 1.5, 2_000_001)
        a = np.sqrt(b ** 2 + 0.5)
        scan = ((a - 1.0) ** 2 + (b - 1.0) ** 2).min()
        assert dist == pytest.approx(scan, abs=1e-9)

    def test_zero_signal_limit_point(self):
        row = update_iu_targets(np.array([0.0 + 0j, 1.0 + 0j]), 0, 1.0, 1.0)
        assert row[1] == pytest.approx(0.5)
        assert abs(row[0]) ** 2 == pytest.approx(abs(row[1]) ** 2 + 1.0)

    def test_residual_identity(self, rng):
        prods = crandn(rng, 4)
        out, resid = _project_iu(prods, 1, 3.0, 0.8)
        assert np.allclose(prods - out, resid, rtol=0, atol=1e-12)

    def test_projection_activates_constraint(self, rng):
        for _ in range(20):
            prods = crandn(rng, 3) * rng.uniform(0.1, 2.0)
            out = update_iu_targets(prods, 0, 2.5, 1.0)
            lhs = abs(out[0]) ** 2
            rhs = 2.5 * (np.sum(np.abs(out[1:]) ** 2) + 1.0)
            assert lhs >= rhs * (1.0 - 1e-6)


class TestEuProjection:
    def test_scaling_example(self):
        info, energy = update_eu_targets(np.array([1.0 + 0j]),
                                         np.array([1.0, 1.0j]), 12.0)
        assert np.allclose(info, [2.0])
        assert np.allclose(energy, [2.0, 2.0j])

    def test_boundary_row_untouched(self):
        info, energy = update_eu_targets(np.array([1.0 + 0j]),
                                         np.array([1.0, 1.0j]), 3.0)
        assert np.array_equal(info, [1.0]) and np.allclose(energy, [1.0, 1.0j])

    def test_all_zero_uses_own_energy_entry(self):
        info, energy = update_eu_targets(np.zeros(2, dtype=complex),
                                         np.zeros(3, dtype=complex), 4.0,
                                         self_idx=1)
        assert np.array_equal(info, np.zeros(2))
        assert np.allclose(energy, [0.0, 2.0, 0.0])

    def test_all_zero_without_energy_beams(self):
        info, energy = update_eu_targets(np.zeros(2, dtype=complex),
                                         np.zeros(0, dtype=complex), 4.0)
        assert info[0] == pytest.approx(2.0) and np.allclose(info[1:], 0.0)

    def test_all_zero_no_beams_at_all(self):
        with pytest.raises(ValueError):
            update_eu_targets(np.zeros(0, dtype=complex),
                              np.zeros(0, dtype=complex), 1.0)

    def test_residual_identity(self, rng):
        info, energy = 0.1 * crandn(rng, 2), 0.1 * crandn(rng, 2)
        out_i, out_e, r_i, r_e = _project_eu(info, energy, 2.0)
        assert np.allclose(info - out_i, r_i, rtol=0, atol=1e-12)
        assert np.allclose(energy - out_e, r_e, rtol=0, atol=1e-12)

    def test_radial_projection_is_closest(self, rng):
        info, energy = 0.3 * crandn(rng, 2), 0.3 * crandn(rng, 1)
        target = 5.0
        out_i, out_e = update_eu_targets(info, energy, target)
        own = np.sum(np.abs(out_i - info) ** 2) + np.sum(np.abs(out_e - energy) ** 2)
        for _ in range(200):
            cand = crandn(rng, 3)
            cand *= np.sqrt(target / np.sum(np.abs(cand) ** 2))
            other = (np.sum(np.abs(cand[:2] - info) ** 2)
                     + np.sum(np.abs(cand[2:] - energy) ** 2))
            assert other >= own - 1e-12


class TestPrecoderUpdate:
    def test_scalar_ridge(self):
        info, energy = update_precoders(
            np.ones((1, 1), dtype=complex), np.zeros((0, 1), dtype=complex),
            np.ones((1, 1), dtype=complex), np.zeros((0, 1), dtype=complex),
            np.zeros((0, 0), dtype=complex), 0.5)
        assert info[0, 0] == pytest.approx(0.5)
        assert energy.shape == (1, 0)

    def test_zero_surrogates_zero_beams(self, rng):
        cs = random_channels(rng)
        info, energy = update_precoders(cs.iu_direct, cs.eu_direct,
                                        np.zeros((2, 2), dtype=complex),
                                        np.zeros((2, 2), dtype=complex),
                                        np.zeros((2, 2), dtype=complex), 1.0)
        assert not info.any() and not energy.any()

    def test_huge_penalty_weight_kills_beams(self, rng):
        cs = random_channels(rng)
        surr = crandn(rng, 2, 2)
        info, _ = update_precoders(cs.iu_direct, cs.eu_direct, surr, crandn(rng, 2, 2),
                                   np.zeros((2, 0), dtype=complex), 1e6)
        assert np.linalg.norm(info) < 1e-4

    def test_tiny_penalty_weight_matches_products(self, rng):
        iu = crandn(rng, 2, 4)
        eu = crandn(rng, 1, 4)
        surr_iu, surr_eu = crandn(rng, 2, 2), crandn(rng, 1, 2)
        info, _ = update_precoders(iu, eu, surr_iu, surr_eu,
                                   np.zeros((1, 0), dtype=complex), 1e-12)
        prods = np.concatenate([iu, eu]).conj() @ info
        assert np.allclose(prods, np.concatenate([surr_iu, surr_eu]), atol=1e-5)

    def test_update_is_unimprovable(self, rng):
        iu, eu = crandn(rng, 2, 3), crandn(rng, 2, 3)
        s_iu, s_ei, s_ee = crandn(rng, 2, 2), crandn(rng, 2, 2), crandn(rng, 2, 2)
        rho = 0.07
        info, energy = update_precoders(iu, eu, s_iu, s_ei, s_ee, rho)
        base = penalized_power(iu, eu, info, energy, s_iu, s_ei, s_ee, rho)
        for scale in (1e-3, 0.3):
            for _ in range(50):
                trial = penalized_power(iu, eu,
                                        info + scale * crandn(rng, 3, 2),
                                        energy + scale * crandn(rng, 3, 2),
                                        s_iu, s_ei, s_ee, rho)
                assert trial >= base - 1e-12 * abs(base)


class TestPhaseBlock:
    def test_penalty_vectors_reproduce_mismatch(self, rng):
        cs = random_channels(rng)
        info, energy = crandn(rng, 3, 2), crandn(rng, 3, 2)
        from irs_swipt.penalty import SurrogateProducts
        surr = SurrogateProducts(iu=crandn(rng, 2, 2), eu_info=crandn(rng, 2, 2),
                                 eu_energy=crandn(rng, 2, 2))
        coeffs, offsets = penalty_vectors(cs, info, energy, surr)
        u = np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
        phases = PhaseShifts(u)
        from irs_swipt.channels import effective_rows
        iu_rows = effective_rows(cs.iu_direct, cs.iu_reflected, cs.ap_irs, phases)
        eu_rows = effective_rows(cs.eu_direct, cs.eu_reflected, cs.ap_irs, phases)
        direct = (np.sum(np.abs(iu_rows.conj() @ info - surr.iu) ** 2)
                  + np.sum(np.abs(eu_rows.conj() @ info - surr.eu_info) ** 2)
                  + np.sum(np.abs(eu_rows.conj() @ energy - surr.eu_energy) ** 2))
        stacked = np.sum(np.abs(coeffs @ u - offsets) ** 2)
        assert stacked == pytest.approx(direct, rel=1e-10)

    def test_phase_step_never_raises_objective(self, rng):
        problem = small_problem(seed=3)
        params = SolverParams()
        state = init_state(problem, params)
        state.info_beams, state.energy_beams = crandn(rng, 3, 2), crandn(rng, 3, 2)
        cs = problem.channels

        def objective(phases):
            from irs_swipt.channels import effective_rows
            iu = effective_rows(cs.iu_direct, cs.iu_reflected, cs.ap_irs, phases)
            eu = effective_rows(cs.eu_direct, cs.eu_reflected, cs.ap_irs, phases)
            return penalized_power(iu, eu, state.info_beams, state.energy_beams,
                                   state.surrogates.iu, state.surrogates.eu_info,
                                   state.surrogates.eu_energy, state.penalty_weight)

        before = objective(state.phases)
        after_phases = update_phase_shifts(cs, state.phases, state.info_beams,
                                           state.energy_beams, state.surrogates,
                                           params)
        assert objective(after_phases) <= before + 1e-12 * abs(before)

    def test_discrete_phase_step_stays_on_grid(self, rng):
        problem = small_problem(seed=4)
        params = SolverParams(phase_bits=2)
        state = init_state(problem, params)
        state.info_beams = crandn(rng, 3, 2)
        phases = update_phase_shifts(problem.channels, state.phases,
                                     state.info_beams, state.energy_beams,
                                     state.surrogates, params)
        k = np.angle(phases.phasor) * 4 / (2 * np.pi)
        assert np.allclose(k, np.round(k), atol=1e-9)


class TestInitState:
    def test_shapes_and_zeros(self):
        problem = small_problem()
        state = init_state(problem, SolverParams())
        assert state.info_beams.shape == (3, 2) and not state.info_beams.any()
        assert state.energy_beams.shape == (3, 2) and not state.energy_beams.any()
        assert np.array_equal(state.phases.phasor, np.ones(4))
        assert state.surrogates.eu_energy.shape == (2, 2)
        assert state.penalty_weight == 1000.0

    def test_no_dedicated_energy_beams(self):
        problem = small_problem(energy_beams=False)
        state = init_state(problem, SolverParams())
        assert state.energy_beams.shape == (3, 0)
        assert state.surrogates.eu_energy.shape == (2, 0)

    def test_seed_controls_surrogates(self):
        a = init_state(small_problem(), SolverParams(seed=1))
        b = init_state(small_problem(), SolverParams(seed=1))
        c = init_state(small_problem(), SolverParams(seed=2))
        assert np.array_equal(a.surrogates.iu, b.surrogates.iu)
        assert not np.array_equal(a.surrogates.iu, c.surrogates.iu)


class TestValidation:
    def test_params_reject_bad_decay(self):
        with pytest.raises(ValueError):
            SolverParams(penalty_decay=1.0)

    def test_params_reject_nonpositive_tols(self):
        with pytest.raises(ValueError):
            SolverParams(violation_tol=0.0)

    def test_params_reject_zero_caps(self):
        with pytest.raises(ValueError):
            SolverParams(max_outer=0)

    def test_params_reject_negative_bits(self):
        with pytest.raises(ValueError):
            SolverParams(phase_bits=-1)

    def test_problem_rejects_bad_noise(self, rng):
        cs = random_channels(rng)
        from irs_swipt.metrics import QosTargets
        with pytest.raises(ValueError):
            Problem(cs, QosTargets([1.0, 1.0], [0.1, 0.1]), [1.0, 0.0])

    def test_problem_rejects_target_mismatch(self, rng):
        cs = random_channels(rng)
        from irs_swipt.metrics import QosTargets
        with pytest.raises(ValueError):
            Problem(cs, QosTargets([1.0], [0.1, 0.1]), [1.0])

    def test_harvest_needs_some_beam_family(self, rng):
        cs = random_channels(rng, k_i=0, k_e=2)
        from irs_swipt.metrics import QosTargets
        with pytest.raises(ValueError):
            Problem(cs, QosTargets([], [0.1, 0.1]), np.zeros(0),
                    dedicated_energy_beams=False)
