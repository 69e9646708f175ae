"""
Tests for system-bath evolution, the deviation bounds and state-level quantities.
"""

from dataclasses import replace

import numpy as np
import pytest
import scipy.linalg

from code_construction import (
    codespace_projector,
    encode_hamiltonian,
    encoding_unitary,
    gauge_sum_penalty,
    logical_state,
    projector_penalty,
)
from dynamics_bounds import DynamicsSimulator, InteractionTerm, SystemBathModel, TimeGrid
from hamiltonian import transverse_ising_chain
from pauli_algebra import (
    BlockOverlapError,
    ConditionPreconditionError,
    InvalidDensityOperatorError,
    PauliOperator,
)
from tests.conftest import PAULI_X, PAULI_Z, memory_model


def codespace_state(code, model, bloch=(0.0, 0.0, 1.0)):
    system = logical_state(code, {1: list(bloch)}, model.penalty)
    _, vectors = np.linalg.eigh(model.bath_matrix())
    state = np.kron(system, vectors[:, 0])
    return np.outer(state, state.conj())


class TestTimeGrid:
    """Grid construction."""

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            TimeGrid(1.0, 0)
        with pytest.raises(ValueError):
            TimeGrid(-1.0, 10)

    def test_midpoints(self):
        grid = TimeGrid(2.0, 4)
        np.testing.assert_allclose(grid.midpoints(), [0.25, 0.75, 1.25, 1.75])
        assert grid.s_at(1.0) == pytest.approx(0.5)
        assert grid.with_steps(8).dt == pytest.approx(0.25)


class TestEvolution:
    """Time-ordered evolution and step control."""

    def test_static_model_is_exponentiated_exactly(self, simulator, model_412):
        model = model_412.with_strength(3.0)
        grid = simulator.grid_for(model)
        assert grid.num_steps == 1
        generator = 3.0 * model.penalty_matrix() + model.v_matrix() + model.h0(0.0)
        expected = scipy.linalg.expm(-1j * generator * model.total_time)
        np.testing.assert_allclose(simulator.full_unitary(model, grid), expected, atol=1e-10)

    def test_step_count_scales_and_caps(self, simulator):
        assert simulator.steps_for(0.0, 1.0) == 20
        assert simulator.steps_for(50.0, 1.0) == 100
        assert simulator.steps_for(1000.0, 1.0) == 200

    def test_step_halving_on_commuting_schedule(self, simulator, code_412):
        """A ramp on a logical that commutes with everything else is integrated exactly by midpoints."""
        model = memory_model(code_412, penalty_strength=1.0)
        model = replace(model, system=encode_hamiltonian(transverse_ising_chain(1), code_412), _cache={})
        check = simulator.step_halving_check(model)
        assert check['fine_steps'] == 2 * check['coarse_steps']
        assert check['relative_change'] < 1e-8

    def test_penalty_suppresses_deviation(self, simulator, model_412):
        unprotected = simulator.run_point(model_412.with_strength(0.0))
        protected = simulator.run_point(model_412.with_strength(100.0))
        assert protected.deviation < unprotected.deviation / 5
        assert unprotected.bound_5b == np.inf


class TestBounds:
    """The deviation bounds hold on every run."""

    @pytest.mark.parametrize('strength', [5.0, 20.0, 100.0])
    def test_bound_dominance(self, simulator, model_412, strength):
        result = simulator.run_point(model_412.with_strength(strength))
        assert result.deviation <= result.bound_5a * (1 + 1e-9) + 1e-12
        assert result.k_norm_sup <= result.bound_5b * (1 + 1e-9)
        assert result.bound_5a <= result.global_envelope * (1 + 1e-9)
        assert result.quadrature_error < 1e-6

    @pytest.mark.parametrize('strength', [0.0, 10.0, 50.0])
    def test_global_envelope_dominates_deviation(self, simulator, model_412, strength):
        model = model_412.with_strength(strength)
        result = simulator.run_point(model)
        assert result.deviation <= result.global_envelope * (1 + 1e-9) + 1e-12
        grid = simulator.grid_for(model)
        k_data = simulator.compute_K(model, grid)
        direct = simulator.global_envelope_bound(model, grid, k_data)
        assert direct >= simulator.bound_eq5a(model, grid, k_data) * (1 - 1e-9)

    def test_logical_noise_violates_precondition(self, simulator, code_412):
        model = SystemBathModel(
            system=memory_model(code_412).system,
            penalty=gauge_sum_penalty(code_412),
            code=code_412,
            interaction=[InteractionTerm(code_412.logical_x(1), 0.1 * PAULI_X, 0)],
            bath_terms=[0.5 * PAULI_Z],
            penalty_strength=10.0,
        )
        with pytest.raises(ConditionPreconditionError):
            simulator.run_point(model)

    def test_dephased_sector_target_with_projector_penalty(self, simulator, code_412):
        model = replace(memory_model(code_412, penalty_strength=10.0), penalty=projector_penalty(code_412), _cache={})
        result = simulator.run_point(model, theorem='2', index_set=[0])
        assert result.deviation <= result.bound_5a * (1 + 1e-9) + 1e-12
        assert result.deviation == pytest.approx(result.theorem1_deviation, abs=1e-10)

    def test_index_set_must_reproduce_projector(self, simulator, model_412):
        with pytest.raises(ConditionPreconditionError):
            simulator.run_point(model_412.with_strength(10.0), theorem='2', index_set=[0])
        with pytest.raises(ConditionPreconditionError):
            simulator.run_point(model_412.with_strength(10.0), theorem='2', index_set=[99])

    def test_bound_5b_needs_positive_strength(self, simulator, model_412):
        with pytest.raises(ConditionPreconditionError):
            simulator.bound_eq5b(model_412.v_matrix(), None, model_412.penalty_decomposition(), 0.0)


class TestBlockBounds:
    """Local bounds over independent code blocks."""

    def test_single_block_dominates_deviation(self, simulator, model_412):
        model = model_412.with_strength(50.0)
        result = simulator.run_point(model, blocks=model.blocks())
        assert result.deviation <= result.block_bound

    def test_uncoupled_bath_qubits_do_not_change_bound(self, simulator, code_412):
        small = memory_model(code_412)
        large = replace(small, bath_terms=[0.5 * PAULI_Z, 0.5 * PAULI_Z], num_bath_qubits=2, _cache={})
        grid = TimeGrid(1.0, 1)
        assert simulator.block_bounds(large.blocks(), grid, 30.0) == pytest.approx(
            simulator.block_bounds(small.blocks(), grid, 30.0), rel=1e-12)

    def test_two_identical_blocks_double_the_bound(self, simulator, builder, code_412):
        doubled_code = builder.block_encoding(code_412, 2)
        two = SystemBathModel(
            system=memory_model(doubled_code).system,
            penalty=gauge_sum_penalty(doubled_code),
            code=doubled_code,
            interaction=[InteractionTerm(PauliOperator.single(8, 1, 'X'), 0.1 * PAULI_X, 0),
                         InteractionTerm(PauliOperator.single(8, 5, 'X'), 0.1 * PAULI_X, 0)],
            bath_terms=[0.5 * PAULI_Z],
            block_size=4,
        )
        one = memory_model(code_412)
        grid = TimeGrid(1.0, 1)
        pair = simulator.block_bounds(two.blocks(), grid, 30.0, interaction_norm=0.2)
        single = simulator.block_bounds(one.blocks(), grid, 30.0, interaction_norm=0.2)
        assert pair == pytest.approx(2 * single, rel=1e-12)

    def test_overlapping_blocks_rejected(self, simulator, model_412):
        blocks = model_412.blocks()
        with pytest.raises(BlockOverlapError):
            simulator.block_bounds(blocks + blocks, TimeGrid(1.0, 1), 10.0)


class TestStates:
    """Semi-distance, state bounds and logical measurements."""

    def test_semi_distance_ignores_gauge_operators(self, simulator, code_412, model_412):
        rho = codespace_state(code_412, model_412)
        u_enc = encoding_unitary(code_412)
        for gauge in code_412.gauge_gens:
            g = np.kron(gauge.to_dense(), np.eye(2))
            sigma = g @ rho @ g.conj().T
            assert simulator.semi_distance(rho, sigma, code_412, u_enc, 1) == pytest.approx(0.0, abs=1e-9)

    def test_semi_distance_sees_logical_flip(self, simulator, code_412, model_412):
        rho = codespace_state(code_412, model_412)
        x_bar = np.kron(code_412.logical_x(1).to_dense(), np.eye(2))
        flipped = x_bar @ rho @ x_bar
        distance = simulator.semi_distance(rho, flipped, code_412, encoding_unitary(code_412), 1)
        assert distance == pytest.approx(1.0, abs=1e-9)

    def test_invalid_density_rejected(self, simulator, code_412, model_412):
        rho = codespace_state(code_412, model_412)
        u_enc = encoding_unitary(code_412)
        with pytest.raises(InvalidDensityOperatorError):
            simulator.semi_distance(2 * rho, rho, code_412, u_enc, 1)
        skew = rho.copy()
        skew[0, 1] += 0.5
        with pytest.raises(InvalidDensityOperatorError):
            simulator.semi_distance(skew, rho, code_412, u_enc, 1)

    def test_penalty_leaves_logical_measurements_unchanged(self, simulator, code_412, model_412):
        model = model_412.with_strength(7.3)
        rho = codespace_state(code_412, model, (0.6, 0.0, 0.8))
        change = simulator.measurement_invariance(code_412, simulator.penalty_unitary(model), rho, 1)
        assert change < 1e-10

    def test_state_distance_bound(self, simulator, code_412, model_412):
        model = model_412.with_strength(10.0)
        result = simulator.run_point(model, keep_unitaries=True)
        rho = codespace_state(code_412, model)
        check = simulator.state_distance_bound(result.u_v, result.u_w, model.codespace_projector(), rho)
        assert check['holds']
        assert check['bound'] == pytest.approx(result.deviation)

    def test_state_outside_projector_rejected(self, simulator, model_412):
        model = model_412.with_strength(10.0)
        result = simulator.run_point(model, keep_unitaries=True)
        rho = np.zeros((32, 32))
        rho[0, 0] = 1.0
        with pytest.raises(ConditionPreconditionError):
            simulator.state_distance_bound(result.u_v, result.u_w, model.codespace_projector(), rho)

    def test_run_point_reports_state_quantities(self, simulator, code_412, model_412):
        model = model_412.with_strength(20.0)
        rho = codespace_state(code_412, model)
        result = simulator.run_point(model, initial_state=rho, u_enc=encoding_unitary(code_412))
        assert 0.0 <= result.semi_distance <= 1.0
        assert result.measurement_change < 1e-10
        assert set(result.row()) >= {'E_p', 'deviation', 'bound5a', 'bound5b', 'supK', 'semi_distance'}

    def test_logical_fidelity(self):
        assert DynamicsSimulator.logical_fidelity([0, 0, 1], [0, 0, 2]) == pytest.approx(1.0)
        assert DynamicsSimulator.logical_fidelity([0, 0, -1], [0, 0, 1]) == pytest.approx(0.0)
        assert DynamicsSimulator.logical_fidelity([0, 0, 0], [1, 0, 0]) == pytest.approx(0.5)


class TestSweep:
    """Penalty sweeps."""

    def test_single_strength(self, simulator, model_412):
        sweep = simulator.penalty_sweep(model_412, [10.0])
        assert len(sweep.results) == 1
        assert sweep.slope is None

    def test_results_follow_input_order(self, model_412):
        simulator = DynamicsSimulator(default_steps=20, max_steps=200, quadrature_samples=0, k_samples=21, workers=2)
        sweep = simulator.penalty_sweep(model_412, [0.0, 100.0, 10.0])
        assert [r.penalty_strength for r in sweep.results] == [0.0, 100.0, 10.0]
        assert sweep.slope is not None
        assert [row['E_p'] for row in sweep.rows()] == [0.0, 100.0, 10.0]

    def test_strength_copies_keep_separate_caches(self, model_412):
        model_412.prepare()
        copy = model_412.with_strength(7.0)
        assert copy._cache is not model_412._cache
        assert copy.v_matrix() is model_412.v_matrix()
        copy._cache['scratch'] = 1
        assert 'scratch' not in model_412._cache

    @pytest.mark.slow
    def test_deviation_falls_as_inverse_strength(self, simulator, model_412):
        sweep = simulator.penalty_sweep(model_412, np.logspace(1, 3, 9))
        assert sweep.slope < -0.5
        for result in sweep.results:
            assert result.deviation <= result.bound_5a * (1 + 1e-9) + 1e-12


def test_codespace_projector_lift(model_412, code_412):
    np.testing.assert_allclose(model_412.codespace_projector(), np.kron(codespace_projector(code_412), np.eye(2)))
