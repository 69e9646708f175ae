"""
Tests for scheduled Pauli-sum Hamiltonians.
"""

import json

import numpy as np
import pytest

from hamiltonian import Hamiltonian, operator_matrix, swap_interpolation, transverse_ising_chain
from pauli_algebra import NotHermitianError, ParseError, PauliOperator, SizeMismatchError


class TestHamiltonian:
    """Term handling and matrices."""

    def test_minus_phase_folds_into_coefficient(self):
        h = Hamiltonian(2)
        h.add_term(0.5, PauliOperator.from_label('-XZ'))
        assert h.terms[0].coefficient == -0.5
        assert h.terms[0].pauli.phase_exponent == 0

    def test_non_hermitian_term_rejected(self):
        with pytest.raises(NotHermitianError):
            Hamiltonian(1).add_term(1.0, PauliOperator.from_label('iX'))

    def test_unknown_group_rejected(self):
        with pytest.raises(ParseError):
            Hamiltonian(1).add_term(1.0, PauliOperator.from_label('X'), 'sideways')

    def test_register_mismatch_rejected(self):
        with pytest.raises(SizeMismatchError):
            Hamiltonian(2).add_term(1.0, PauliOperator.from_label('X'))

    def test_matrix_is_weighted_sum(self):
        h = Hamiltonian.from_terms(2, [(0.3, PauliOperator.from_label('XI')), (-1.2, PauliOperator.from_label('ZZ'))])
        expected = 0.3 * PauliOperator.from_label('XI').to_dense() - 1.2 * PauliOperator.from_label('ZZ').to_dense()
        np.testing.assert_allclose(h.to_matrix(), expected)
        assert h.coefficient_norm() == pytest.approx(1.5)
        assert np.linalg.norm(h.to_matrix(), 2) <= h.coefficient_norm() + 1e-12

    def test_schedule_at_endpoints(self):
        h = transverse_ising_chain(3)
        x_sum = sum(PauliOperator.single(3, i, 'X').to_dense() for i in range(1, 4))
        np.testing.assert_allclose(h.to_matrix(0.0), x_sum)
        frozen = h.at(1.0)
        assert frozen.is_static()
        assert np.allclose(np.diag(np.diag(frozen.to_matrix())), frozen.to_matrix())

    def test_chain_couplings_length_checked(self):
        with pytest.raises(SizeMismatchError):
            transverse_ising_chain(3, [1.0])

    def test_swap_interpolation_ground_state_moves(self):
        """At s = 0 the ground space has qubits 2 and 3 in the singlet; at s = 1 qubits 1 and 2."""
        h = swap_interpolation()
        assert h.groups() == ['ramp_down', 'ramp_up']
        for s, pair in ((0.0, ('IXX', 'IZZ')), (1.0, ('XXI', 'ZZI'))):
            values, vectors = np.linalg.eigh(h.to_matrix(s))
            assert values[0] == pytest.approx(-2.0)
            ground = vectors[:, 0]
            for label in pair:
                op = PauliOperator.from_label(label).to_dense()
                assert np.real(ground.conj() @ op @ ground) == pytest.approx(-1.0)

    def test_embed_and_add(self):
        h = Hamiltonian.from_terms(1, [(1.0, PauliOperator.from_label('Z'))]).embed(3, 2)
        total = h + Hamiltonian.identity(3, 2.0)
        np.testing.assert_allclose(np.diag(total.to_matrix()), [3, 1, 3, 1, 3, 1, 3, 1])

    def test_file_records(self, tmp_path):
        path = tmp_path / 'h.json'
        path.write_text(json.dumps([{'coeff': 2.0, 'pauli': 'X1 Z2', 'group': 'ramp_up'}]), encoding='utf-8')
        h = Hamiltonian.from_file(str(path), 2)
        assert h.to_records() == [{'coeff': 2.0, 'pauli': 'X1 Z2', 'group': 'ramp_up'}]
        np.testing.assert_allclose(h.to_matrix(0.5), PauliOperator.from_label('XZ').to_dense())

    def test_saved_file_loads_back_with_groups(self, tmp_path):
        h = swap_interpolation()
        path = tmp_path / 'swap.json'
        h.save(str(path))
        loaded = Hamiltonian.from_file(str(path), 3)
        assert loaded.to_records() == h.to_records()
        np.testing.assert_allclose(loaded.to_matrix(0.3), h.to_matrix(0.3))

    def test_bad_records(self, tmp_path):
        with pytest.raises(ParseError):
            Hamiltonian.from_records([{'pauli': 'X1'}], 1)
        path = tmp_path / 'h.json'
        path.write_text('{"coeff": 1}', encoding='utf-8')
        with pytest.raises(ParseError):
            Hamiltonian.from_file(str(path), 1)

    def test_operator_matrix_accepts_arrays_and_paulis(self):
        m = np.diag([1.0, -1.0])
        np.testing.assert_allclose(operator_matrix(m), m)
        np.testing.assert_allclose(operator_matrix(PauliOperator.from_label('Z')), m)
