"""
Shared fixtures for the subpen test suite.
"""

from pathlib import Path

import numpy as np
import pytest

from code_construction import CodeBuilder, gauge_sum_penalty
from dynamics_bounds import DynamicsSimulator, InteractionTerm, SystemBathModel
from hamiltonian import Hamiltonian
from pauli_algebra import PauliOperator
from spectra_conditions import ConditionChecker

ROOT = Path(__file__).resolve().parent.parent

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@pytest.fixture
def project_root():
    return ROOT


@pytest.fixture
def builder():
    return CodeBuilder()


@pytest.fixture
def code_412(builder):
    return builder.builtin_412()


@pytest.fixture
def code_832(builder):
    return builder.builtin_832()


@pytest.fixture
def checker():
    return ConditionChecker()


@pytest.fixture
def simulator():
    return DynamicsSimulator(default_steps=20, max_steps=200, quadrature_samples=1, k_samples=21)


def memory_model(code, strength: float = 0.1, penalty_strength: float = 0.0, total_time: float = 1.0,
                 error_qubit: int = 1) -> SystemBathModel:
    """
    Idle [[4,1,2]]-style memory: gauge-sum penalty, one bath qubit, X on one system qubit coupled to bath X.
    """
    error = PauliOperator.single(code.num_physical, error_qubit, 'X')
    return SystemBathModel(
        system=Hamiltonian(code.num_physical),
        penalty=gauge_sum_penalty(code),
        code=code,
        interaction=[InteractionTerm(error, strength * PAULI_X, 0)],
        bath_terms=[0.5 * PAULI_Z],
        num_bath_qubits=1,
        penalty_strength=penalty_strength,
        total_time=total_time,
    )


@pytest.fixture
def model_412(code_412):
    return memory_model(code_412)
