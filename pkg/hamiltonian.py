"""
Module for scheduled Pauli-sum Hamiltonians and their matrix realizations.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from pauli_algebra import (
    DEFAULT_DENSE_LIMIT,
    DenseLimitError,
    NotHermitianError,
    ParseError,
    PauliOperator,
    SizeMismatchError,
)

STATIC_GROUP = 'static'

SCHEDULES: Dict[str, Callable[[float], float]] = {
    STATIC_GROUP: lambda s: 1.0,
    'ramp_down': lambda s: 1.0 - s,
    'ramp_up': lambda s: s,
}


@dataclass(frozen=True)
class HamiltonianTerm:
    coefficient: float
    pauli: PauliOperator
    group: str = STATIC_GROUP


@dataclass
class Hamiltonian:
    """
    A real-weighted sum of Hermitian Pauli operators, optionally split into
    schedule groups whose weights depend on the annealing parameter s in [0, 1].
    """

    num_qubits: int
    terms: List[HamiltonianTerm] = field(default_factory=list)

    def __post_init__(self):
        self.logger = logging.getLogger(__name__)
        terms, self.terms = self.terms, []
        for term in terms:
            self.add_term(term.coefficient, term.pauli, term.group)

    @classmethod
    def from_terms(cls, num_qubits: int,
                   terms: Iterable[Tuple[float, PauliOperator]],
                   group: str = STATIC_GROUP) -> 'Hamiltonian':
        h = cls(num_qubits)
        for coefficient, pauli in terms:
            h.add_term(coefficient, pauli, group)
        return h

    @classmethod
    def identity(cls, num_qubits: int, coefficient: float = 1.0) -> 'Hamiltonian':
        return cls.from_terms(num_qubits, [(coefficient, PauliOperator.identity(num_qubits))])

    def add_term(self, coefficient: float, pauli: PauliOperator, group: str = STATIC_GROUP) -> None:
        """
        Append a term, folding a -1 phase into the coefficient.

        Args:
            coefficient: Real weight
            pauli: Hermitian Pauli (phase exponent 0 or 2)
            group: Schedule group name
        """
        if pauli.num_qubits != self.num_qubits:
            raise SizeMismatchError(
                f"term on {pauli.num_qubits} qubits added to a {self.num_qubits}-qubit Hamiltonian"
            )
        if not pauli.is_hermitian():
            raise NotHermitianError(f"term {pauli.label()} is not Hermitian")
        if group not in SCHEDULES:
            raise ParseError(f"unknown schedule group {group!r}; known: {sorted(SCHEDULES)}")
        sign = -1.0 if pauli.phase_exponent == 2 else 1.0
        self.terms.append(HamiltonianTerm(float(coefficient) * sign, pauli.unsigned(), group))

    def __add__(self, other: 'Hamiltonian') -> 'Hamiltonian':
        if other.num_qubits != self.num_qubits:
            raise SizeMismatchError("cannot add Hamiltonians on different registers")
        return Hamiltonian(self.num_qubits, list(self.terms) + list(other.terms))

    def scaled(self, factor: float) -> 'Hamiltonian':
        return Hamiltonian(
            self.num_qubits,
            [HamiltonianTerm(t.coefficient * factor, t.pauli, t.group) for t in self.terms],
        )

    def embed(self, num_qubits: int, offset: int = 0) -> 'Hamiltonian':
        return Hamiltonian(
            num_qubits,
            [HamiltonianTerm(t.coefficient, t.pauli.embed(num_qubits, offset), t.group) for t in self.terms],
        )

    def groups(self) -> List[str]:
        return sorted({t.group for t in self.terms})

    def group(self, name: str) -> 'Hamiltonian':
        return Hamiltonian(
            self.num_qubits,
            [HamiltonianTerm(t.coefficient, t.pauli, STATIC_GROUP) for t in self.terms if t.group == name],
        )

    def is_static(self) -> bool:
        return all(t.group == STATIC_GROUP for t in self.terms)

    def paulis(self) -> List[PauliOperator]:
        return [t.pauli for t in self.terms]

    def coefficient_norm(self) -> float:
        """
        Sum of absolute coefficients, an upper bound on the operator norm at any s.
        """
        return float(sum(abs(t.coefficient) for t in self.terms))

    def at(self, s: float) -> 'Hamiltonian':
        """
        Freeze the schedule at s, returning a static Hamiltonian.
        """
        return Hamiltonian(
            self.num_qubits,
            [HamiltonianTerm(t.coefficient * SCHEDULES[t.group](s), t.pauli, STATIC_GROUP) for t in self.terms],
        )

    def to_sparse(self, s: Optional[float] = None) -> sp.csr_matrix:
        dim = 1 << self.num_qubits
        total = sp.csr_matrix((dim, dim), dtype=complex)
        for t in self.terms:
            weight = t.coefficient * (SCHEDULES[t.group](s) if s is not None else 1.0)
            if weight != 0.0:
                total = total + weight * t.pauli.to_sparse()
        return total

    def to_matrix(self, s: Optional[float] = None, dense_limit: int = DEFAULT_DENSE_LIMIT) -> np.ndarray:
        """
        Dense matrix at schedule value s (all group weights 1 when s is None).

        Args:
            s: Schedule parameter in [0, 1]
            dense_limit: Largest register realized densely

        Returns:
            2^n x 2^n Hermitian matrix; real dtype when every entry is real
        """
        if self.num_qubits > dense_limit:
            raise DenseLimitError(f"{self.num_qubits} qubits exceeds the dense limit of {dense_limit}")
        matrix = self.to_sparse(s).toarray()
        if not np.any(matrix.imag):
            return matrix.real
        return matrix

    def group_matrices(self, dense_limit: int = DEFAULT_DENSE_LIMIT) -> Dict[str, np.ndarray]:
        return {name: self.group(name).to_matrix(dense_limit=dense_limit) for name in self.groups()}

    def to_records(self) -> List[Dict[str, object]]:
        return [
            {'coeff': t.coefficient, 'pauli': t.pauli.sparse_label(), 'group': t.group}
            for t in self.terms
        ]

    @classmethod
    def from_records(cls, records: Sequence[Dict[str, object]], num_qubits: int) -> 'Hamiltonian':
        """
        Build from [{"coeff": .., "pauli": "X1 Z2", "group": "ramp_up"}, ...].

        Args:
            records: Term records as stored in Hamiltonian JSON files
            num_qubits: Register size

        Returns:
            Parsed Hamiltonian
        """
        h = cls(num_qubits)
        for index, record in enumerate(records):
            try:
                coefficient = float(record['coeff'])
                pauli = PauliOperator.from_sparse(str(record['pauli']), num_qubits)
            except (KeyError, TypeError, ValueError) as e:
                raise ParseError(f"term {index}: {e}") from e
            h.add_term(coefficient, pauli, str(record.get('group', STATIC_GROUP)))
        return h

    @classmethod
    def from_file(cls, path: str, num_qubits: int) -> 'Hamiltonian':
        with open(path, 'r', encoding='utf-8') as f:
            records = json.load(f)
        if not isinstance(records, list):
            raise ParseError(f"{path}: expected a JSON list of terms")
        return cls.from_records(records, num_qubits)

    def save(self, path: str) -> None:
        Path(path).write_text(json.dumps(self.to_records(), indent=2), encoding='utf-8')


def operator_matrix(op, s: Optional[float] = None, dense_limit: int = DEFAULT_DENSE_LIMIT) -> np.ndarray:
    """
    Dense matrix of a Hamiltonian, Pauli operator, sparse matrix or array.
    """
    if isinstance(op, Hamiltonian):
        return op.to_matrix(s, dense_limit)
    if isinstance(op, PauliOperator):
        return op.to_dense(dense_limit)
    if sp.issparse(op):
        return op.toarray()
    return np.asarray(op)


def transverse_ising_chain(num_qubits: int, couplings: Optional[Sequence[float]] = None) -> Hamiltonian:
    """
    Annealing Ising chain H(s) = (1-s) sum_i X_i + s sum_i J_i Z_i Z_{i+1}.

    Args:
        num_qubits: Chain length N
        couplings: J_1..J_{N-1}; all 1 when omitted

    Returns:
        Scheduled Hamiltonian on N qubits
    """
    couplings = [1.0] * (num_qubits - 1) if couplings is None else list(couplings)
    if len(couplings) != num_qubits - 1:
        raise SizeMismatchError(f"{len(couplings)} couplings for a chain of {num_qubits}")
    h = Hamiltonian(num_qubits)
    for i in range(1, num_qubits + 1):
        h.add_term(1.0, PauliOperator.single(num_qubits, i, 'X'), 'ramp_down')
    for i, j_coupling in enumerate(couplings, 1):
        zz = PauliOperator.single(num_qubits, i, 'Z') * PauliOperator.single(num_qubits, i + 1, 'Z')
        h.add_term(j_coupling, zz, 'ramp_up')
    return h


def swap_interpolation() -> Hamiltonian:
    """
    Three-qubit transfer H(s) = (1-s)(X2X3 + Z2Z3) + s(X1X2 + Z1Z2).

    The ground space carries a state from qubit 1 to qubit 3 when the
    pair (2, 3) starts in the singlet.
    """
    h = Hamiltonian(3)
    for label, group in (('IXX', 'ramp_down'), ('IZZ', 'ramp_down'), ('XXI', 'ramp_up'), ('ZZI', 'ramp_up')):
        h.add_term(1.0, PauliOperator.from_label(label), group)
    return h
