"""
Tests for subsystem code construction, detectability, encoding and penalties.
"""

import numpy as np
import pytest

from code_construction import (
    chain_penalty,
    codespace_projector,
    encode_hamiltonian,
    encoding_unitary,
    gauge_sum_penalty,
    is_detectable,
    logical_bloch_vector,
    logical_state,
    nonadditive_penalty,
    projector_penalty,
    slot_layout,
    stabilizer_penalty,
)
from hamiltonian import Hamiltonian, swap_interpolation
from ods_writer import ODSWriter
from pauli_algebra import (
    BinaryMatrix,
    CodeConstructionError,
    EncodingError,
    NotProjectorError,
    ParseError,
    PauliOperator,
)


class TestCodeParameters:
    """Builtin codes and the A-matrix construction."""

    def test_builtin_412(self, code_412):
        assert code_412.params == (4, 1, 2)
        assert (code_412.s, code_412.r, code_412.k) == (2, 1, 1)
        code_412.validate()

    def test_builtin_832(self, code_832):
        assert code_832.params == (8, 3, 2)
        assert (code_832.s, code_832.r, code_832.k) == (2, 3, 3)

    @pytest.mark.parametrize('num_logical', [2, 3, 4, 5, 6])
    def test_chain_code_from_a_matrix(self, builder, num_logical):
        code = builder.code_from_a_matrix(builder.chain_a_matrix(num_logical))
        assert code.params == (2 * num_logical + 2, num_logical, 2)

    def test_chain_code_needs_two_logicals(self, builder):
        with pytest.raises(CodeConstructionError):
            builder.builtin_chain(1)

    def test_full_2x2_matrix_gives_412(self, builder):
        code = builder.code_from_a_matrix(BinaryMatrix.from_rows([[1, 1], [1, 1]]))
        assert code.params == (4, 1, 2)

    def test_bacon_shor_3x3(self, builder):
        code = builder.code_from_a_matrix(BinaryMatrix.from_rows([[1] * 3] * 3))
        assert code.params == (9, 1, 3)

    def test_zero_matrix_rejected(self, builder):
        with pytest.raises(CodeConstructionError):
            builder.code_from_a_matrix(BinaryMatrix.from_rows([[0, 0], [0, 0]]))

    @pytest.mark.parametrize('name', ['412', '832'])
    def test_brute_force_distance_matches(self, builder, name):
        code = builder.builtin(name)
        assert builder.brute_force_distance(code) == code.params[2]

    def test_a_matrix_distance_matches_enumeration(self, builder):
        code = builder.code_from_a_matrix(builder.chain_a_matrix(3))
        assert builder.brute_force_distance(code) == 2

    def test_block_encoding(self, builder, code_412):
        doubled = builder.block_encoding(code_412, 2)
        assert doubled.params == (8, 2, 2)
        assert doubled.stabilizer_gens[2].support() == (5, 6, 7, 8)
        doubled.validate()

    def test_logical_inside_gauge_group_rejected(self, builder, code_412):
        stabilizer_pair = (PauliOperator.from_label('XXXX'), PauliOperator.from_label('ZZZZ'))
        with pytest.raises(CodeConstructionError, match='gauge group'):
            builder.code_from_generators(4, code_412.stabilizer_gens, code_412.gauge_gens, [stabilizer_pair],
                                         distance=2)

    def test_unknown_builtin(self, builder):
        with pytest.raises(CodeConstructionError):
            builder.builtin('713')


class TestAMatrixFiles:
    """A-matrices loaded from text and ODS files."""

    def test_shipped_text_file(self, builder, project_root):
        a = builder.load_a_matrix(str(project_root / 'codes' / 'a_832.txt'))
        assert builder.code_from_a_matrix(a).params == (8, 3, 2)

    def test_ods_file(self, builder, tmp_path):
        path = tmp_path / 'a.ods'
        ODSWriter(str(path)).write_binary_matrix(builder.chain_a_matrix(3))
        assert builder.load_a_matrix(str(path)) == builder.chain_a_matrix(3)

    def test_missing_file(self, builder, tmp_path):
        with pytest.raises(ParseError):
            builder.load_a_matrix(str(tmp_path / 'missing.txt'))


class TestDetectability:
    """Single-qubit errors, gauge operators and logicals against the codespace."""

    @pytest.mark.parametrize('name', ['412', '832'])
    def test_single_qubit_errors_detectable(self, builder, name):
        code = builder.builtin(name)
        for q in range(1, code.n + 1):
            for letter in 'XYZ':
                report = is_detectable(code, PauliOperator.single(code.n, q, letter))
                assert report.detectable
                assert report.mode == 'annihilated'
                assert report.anticommuting_stabilizers

    def test_gauge_generators_act_on_gauge_only(self, code_412):
        for g in code_412.gauge_gens:
            report = is_detectable(code_412, g)
            assert report.mode == 'gauge_only'
            assert not report.detectable
            assert report.subsystem_condition

    def test_logicals_are_not_detectable(self, code_412):
        report = is_detectable(code_412, code_412.logical_x(1))
        assert report.mode is None
        assert report.residual_norm > 0.5


class TestEncoding:
    """Logical Hamiltonian encoding and the encoding unitary."""

    def test_encoded_swap_commutes_with_penalty(self, code_832):
        encoded = encode_hamiltonian(swap_interpolation().embed(3), code_832)
        penalty = gauge_sum_penalty(code_832).to_matrix()
        for s in (0.0, 0.5, 1.0):
            h = encoded.to_matrix(s)
            assert np.max(np.abs(h @ penalty - penalty @ h)) < 1e-10

    def test_min_weight_representatives(self, code_832):
        canonical = encode_hamiltonian(swap_interpolation(), code_832, 'canonical')
        reduced = encode_hamiltonian(swap_interpolation(), code_832, 'min_weight')
        assert max(t.pauli.weight() for t in reduced.terms) == 2
        assert max(t.pauli.weight() for t in canonical.terms) > 2
        p = codespace_projector(code_832)
        for s in (0.0, 1.0):
            np.testing.assert_allclose(p @ canonical.to_matrix(s) @ p, p @ reduced.to_matrix(s) @ p, atol=1e-10)

    def test_register_mismatch(self, code_412):
        with pytest.raises(EncodingError):
            encode_hamiltonian(Hamiltonian(2), code_412)

    def test_unknown_policy(self, code_412):
        with pytest.raises(EncodingError):
            encode_hamiltonian(Hamiltonian(1), code_412, 'shortest')

    @pytest.mark.parametrize('name', ['412', '832'])
    def test_encoding_unitary_maps_ancillas_into_codespace(self, builder, name):
        code = builder.builtin(name)
        u = encoding_unitary(code)
        np.testing.assert_allclose(u.conj().T @ u, np.eye(1 << code.n), atol=1e-10)
        p = codespace_projector(code)
        inside = 1 << (code.n - code.s)
        np.testing.assert_allclose(p @ u[:, :inside], u[:, :inside], atol=1e-10)
        assert np.max(np.abs(p @ u[:, inside:])) < 1e-10

    def test_slot_layout(self, code_832):
        layout = slot_layout(code_832)
        assert list(layout.ancilla) == [0, 1]
        assert list(layout.logical) == [5, 6, 7]


class TestPenalties:
    """Penalty constructions."""

    def test_stabilizer_penalty_ground_is_codespace(self, code_412):
        h = stabilizer_penalty(code_412).to_matrix()
        values, vectors = np.linalg.eigh(h)
        ground = vectors[:, values < values[0] + 1e-9]
        np.testing.assert_allclose(ground @ ground.conj().T, codespace_projector(code_412), atol=1e-10)

    def test_projector_penalty_is_complement(self, code_832):
        expected = np.eye(256) - codespace_projector(code_832)
        np.testing.assert_allclose(projector_penalty(code_832).to_matrix(), expected, atol=1e-12)

    def test_nonadditive_penalty(self, code_412):
        p = codespace_projector(code_412)
        np.testing.assert_allclose(nonadditive_penalty(p), -p)
        with pytest.raises(NotProjectorError):
            nonadditive_penalty(2 * p)

    def test_coefficient_count_checked(self, code_412):
        with pytest.raises(CodeConstructionError):
            gauge_sum_penalty(code_412, [1.0])
        with pytest.raises(CodeConstructionError):
            stabilizer_penalty(code_412, [1.0, 1.0, 1.0])

    def test_chain_penalty_shape(self):
        h = chain_penalty(3)
        assert h.num_qubits == 8
        assert len(h.terms) == 8
        with pytest.raises(CodeConstructionError):
            chain_penalty(3, zz_sign=2)

    def test_chain_penalty_commutes_with_logicals(self, builder):
        code = builder.builtin_chain(3)
        h = chain_penalty(3).to_matrix()
        for op in code.bare_logicals() + list(code.stabilizer_gens):
            m = op.to_dense()
            assert np.max(np.abs(h @ m - m @ h)) < 1e-12


class TestLogicalStates:
    """Codespace states with prescribed logical Bloch vectors."""

    def test_bloch_vector_is_prepared(self, code_832):
        state = logical_state(code_832, {1: [0.6, 0.0, 0.8], 2: [0, 0, 1]}, gauge_sum_penalty(code_832))
        p = codespace_projector(code_832)
        np.testing.assert_allclose(p @ state, state, atol=1e-10)
        np.testing.assert_allclose(logical_bloch_vector(code_832, state, 1), [0.6, 0.0, 0.8], atol=1e-8)
        np.testing.assert_allclose(logical_bloch_vector(code_832, state, 2), [0.0, 0.0, 1.0], atol=1e-8)

    def test_correlation_constraint(self, code_832):
        xx = PauliOperator.from_sparse('X2 X3', 3)
        state = logical_state(code_832, {1: [1, 0, 0]}, correlations=[(xx, -1)])
        physical = (code_832.logical_x(2) * code_832.logical_x(3)).to_dense()
        assert np.real(state.conj() @ physical @ state) == pytest.approx(-1.0)

    def test_zero_bloch_vector_rejected(self, code_412):
        with pytest.raises(EncodingError):
            logical_state(code_412, {1: [0, 0, 0]})

    def test_contradictory_constraints(self, code_412):
        z = PauliOperator.from_sparse('Z1', 1)
        with pytest.raises(EncodingError):
            logical_state(code_412, {1: [0, 0, 1]}, correlations=[(z, -1)])
