"""
Module for eigendecompositions and the suppression-condition checks built on them.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from code_construction import SubsystemCode, codespace_projector
from hamiltonian import Hamiltonian, operator_matrix
from pauli_algebra import (
    DEFAULT_DENSE_LIMIT,
    BinaryMatrix,
    BlockOverlapError,
    ConditionPreconditionError,
    DenseLimitError,
    NotHermitianError,
    NotProjectorError,
    PauliOperator,
    SizeMismatchError,
)

DEFAULT_S_SAMPLES = (0.0, 0.25, 0.5, 0.75, 1.0)
# registers above this size switch to sparse sector solvers
DENSE_EIGH_QUBITS = 10


def spectral_norm(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    return float(np.linalg.norm(matrix, 2))


def cluster_values(values: Sequence[float], tol: float) -> Tuple[np.ndarray, List[int]]:
    """
    Merge sorted eigenvalues closer than tol to their neighbour.

    Args:
        values: Eigenvalues in any order
        tol: Absolute merge tolerance

    Returns:
        Tuple of (cluster means, cluster sizes)
    """
    ordered = np.sort(np.asarray(values, dtype=float))
    if ordered.size == 0:
        return ordered, []
    means, sizes = [], []
    start = 0
    for i in range(1, ordered.size + 1):
        if i == ordered.size or ordered[i] - ordered[i - 1] > tol:
            means.append(float(np.mean(ordered[start:i])))
            sizes.append(i - start)
            start = i
    return np.array(means), sizes


def _absolute_tol(values: np.ndarray, relative: float) -> float:
    spread = float(values.max() - values.min()) if values.size else 0.0
    return relative * max(1.0, spread)


def _real_sparse(matrix: sp.spmatrix) -> sp.csr_matrix:
    matrix = sp.csr_matrix(matrix)
    if np.any(matrix.data.imag):
        return matrix
    return sp.csr_matrix((matrix.data.real, matrix.indices, matrix.indptr), shape=matrix.shape)


def _start_vector(dim: int) -> np.ndarray:
    # a constant vector misses sectors orthogonal to it, so start Lanczos from seeded noise
    return np.random.default_rng(0).standard_normal(dim)


@dataclass
class SpectralDecomposition:
    """
    Distinct eigenvalues with their eigenspaces; projectors are formed on demand.
    """

    eigenvalues: np.ndarray
    multiplicities: List[int]
    degeneracy_tol: float
    vectors: Optional[List[np.ndarray]] = None
    partial: bool = False

    @property
    def num_sectors(self) -> int:
        return len(self.eigenvalues)

    @property
    def dimension(self) -> int:
        return int(sum(self.multiplicities))

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def gap(self) -> float:
        if self.num_sectors < 2:
            return 0.0
        return float(self.eigenvalues[1] - self.eigenvalues[0])

    def projector(self, index: int) -> np.ndarray:
        if self.vectors is None:
            raise DenseLimitError("decomposition was computed without eigenvectors")
        v = self.vectors[index]
        return v @ v.conj().T

    @property
    def projectors(self) -> List[np.ndarray]:
        return [self.projector(a) for a in range(self.num_sectors)]

    def reconstruct(self) -> np.ndarray:
        return sum(value * self.projector(a) for a, value in enumerate(self.eigenvalues))

    def all_eigenvalues(self) -> np.ndarray:
        return np.repeat(self.eigenvalues, self.multiplicities)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'eigenvalues': [float(v) for v in self.eigenvalues],
            'multiplicities': list(self.multiplicities),
            'degeneracy_tol': self.degeneracy_tol,
            'partial': self.partial,
        }


@dataclass
class ConditionReport:
    condition: str
    satisfied: bool
    residuals: Dict[str, float]
    tolerance: float
    witness: Optional[Dict[str, Any]] = None
    constant: Optional[float] = None
    details: List[Dict[str, Any]] = field(default_factory=list)
    cross_check: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            'condition': self.condition,
            'satisfied': self.satisfied,
            'residuals': dict(self.residuals),
            'tolerance': self.tolerance,
            'witness': self.witness,
            'constant': self.constant,
            'details': list(self.details),
            'cross_check': self.cross_check,
        }


def chain_sector_hamiltonian(num_logical: int, s_x: int, s_z: int) -> Hamiltonian:
    """
    -(sum X_i + s_x prod X_i + Z_1 + sum Z_i Z_{i+1} + s_z Z_N) on N qubits.

    Args:
        num_logical: N >= 1
        s_x: Eigenvalue (+-1) of the X-type stabilizer
        s_z: Eigenvalue (+-1) of the Z-type stabilizer

    Returns:
        Sector Hamiltonian of the chain penalty
    """
    if s_x not in (-1, 1) or s_z not in (-1, 1):
        raise ValueError(f"sector signs must be +-1, got ({s_x}, {s_z})")
    n = num_logical
    h = Hamiltonian(n)
    for i in range(1, n + 1):
        h.add_term(-1.0, PauliOperator.single(n, i, 'X'))
    h.add_term(-float(s_x), PauliOperator(n, (1 << n) - 1, 0))
    h.add_term(-1.0, PauliOperator.single(n, 1, 'Z'))
    for i in range(1, n):
        h.add_term(-1.0, PauliOperator.single(n, i, 'Z') * PauliOperator.single(n, i + 1, 'Z'))
    h.add_term(-float(s_z), PauliOperator.single(n, n, 'Z'))
    return h


class ConditionChecker:
    """
    Exact numerical checks of the conditions under which a penalty suppresses noise.
    """

    def __init__(self, dense_limit: int = DEFAULT_DENSE_LIMIT, degeneracy_tol: float = 1e-8,
                 condition_tol: float = 1e-9, hermitian_tol: float = 1e-10, workers: int = 1):
        """
        Initialize the checker.

        Args:
            dense_limit: Largest register realized densely
            degeneracy_tol: Eigenvalue merge tolerance, relative to the spectral range
            condition_tol: Residual tolerance of every condition
            hermitian_tol: Hermiticity tolerance on inputs
            workers: Threads used by scans over independent problem sizes
        """
        self.dense_limit = dense_limit
        self.degeneracy_tol = degeneracy_tol
        self.condition_tol = condition_tol
        self.hermitian_tol = hermitian_tol
        self.workers = max(1, workers)
        self.logger = logging.getLogger(__name__)

    def _matrix(self, op, s: Optional[float] = None) -> np.ndarray:
        return operator_matrix(op, s, self.dense_limit)

    def _check_hermitian(self, matrix: np.ndarray, what: str) -> None:
        scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
        if np.max(np.abs(matrix - matrix.conj().T), initial=0.0) > self.hermitian_tol * scale:
            raise NotHermitianError(f"{what} is not Hermitian")

    def _check_projector(self, p: np.ndarray) -> None:
        if np.max(np.abs(p @ p - p), initial=0.0) > 1e-8 or np.max(np.abs(p - p.conj().T), initial=0.0) > 1e-8:
            raise NotProjectorError("P is not an orthogonal projector")

    # -- spectra --------------------------------------------------------------

    def eigendecompose(self, h, degeneracy_tol: Optional[float] = None) -> SpectralDecomposition:
        """
        Decompose a Hermitian operator into distinct eigenvalues and eigenspaces.

        Args:
            h: Hamiltonian, Pauli or dense Hermitian matrix
            degeneracy_tol: Relative merge tolerance (checker default when None)

        Returns:
            SpectralDecomposition with eigenvectors
        """
        matrix = self._matrix(h)
        self._check_hermitian(matrix, "operator")
        relative = self.degeneracy_tol if degeneracy_tol is None else degeneracy_tol
        values, vectors = scipy.linalg.eigh(matrix)
        tol = _absolute_tol(values, relative)
        means, sizes = cluster_values(values, tol)
        blocks, start = [], 0
        for size in sizes:
            blocks.append(vectors[:, start:start + size])
            start += size
        self.logger.debug(f"Eigendecomposition: {len(means)} distinct eigenvalues of a {matrix.shape[0]}-dim operator")
        return SpectralDecomposition(means, sizes, relative, blocks)

    def ground_projector(self, h) -> np.ndarray:
        """
        Projector onto the lowest eigenspace.
        """
        matrix = self._matrix(h)
        self._check_hermitian(matrix, "operator")
        lowest = scipy.linalg.eigh(matrix, eigvals_only=True, subset_by_index=[0, 0])[0]
        # twice the max absolute row sum bounds the spectral range
        tol = self.degeneracy_tol * max(1.0, 2.0 * float(np.abs(matrix).sum(axis=1).max()))
        _, vectors = scipy.linalg.eigh(matrix, subset_by_value=(-np.inf, lowest + tol))
        return vectors @ vectors.conj().T

    def _support_basis(self, p: np.ndarray) -> np.ndarray:
        values, vectors = np.linalg.eigh(0.5 * (p + p.conj().T))
        return vectors[:, values > 0.5]

    def restricted_ground_projector(self, h_p, p: np.ndarray) -> np.ndarray:
        """
        Projector onto the lowest eigenspace of h_p inside the support of p.
        """
        matrix = self._matrix(h_p)
        p = np.asarray(p)
        self._check_projector(p)
        basis = self._support_basis(p)
        reduced = basis.conj().T @ matrix @ basis
        values, vectors = np.linalg.eigh(0.5 * (reduced + reduced.conj().T))
        tol = _absolute_tol(values, self.degeneracy_tol)
        keep = basis @ vectors[:, values <= values[0] + tol]
        return keep @ keep.conj().T

    def codespace_spectra(self, h_p, p: np.ndarray, errors: Sequence[PauliOperator]) -> List[Dict[str, Any]]:
        """
        Distinct spectra of h_p.p and sigma h_p sigma.p on the support of p, one row per error.

        Args:
            h_p: Penalty commuting with p
            p: Orthogonal projector
            errors: Pauli errors sigma_j

        Returns:
            Rows with 'error', 'codespace_spectrum', 'conjugated_spectrum', 'min_separation'
        """
        matrix = self._matrix(h_p)
        p = np.asarray(p)
        basis = self._support_basis(p)
        reduced = basis.conj().T @ matrix @ basis
        base_values = np.linalg.eigvalsh(0.5 * (reduced + reduced.conj().T))
        tol = _absolute_tol(np.linalg.eigvalsh(matrix), self.degeneracy_tol)
        base, _ = cluster_values(base_values, tol)
        rows = []
        for error in errors:
            sigma = error.to_dense(self.dense_limit)
            if spectral_norm(sigma @ p) <= self.condition_tol:
                continue
            conjugated = basis.conj().T @ (sigma @ matrix @ sigma.conj().T) @ basis
            conj_values, _ = cluster_values(np.linalg.eigvalsh(0.5 * (conjugated + conjugated.conj().T)), tol)
            separation = float(np.min(np.abs(base[:, None] - conj_values[None, :])))
            rows.append({
                'error': error.sparse_label(),
                'codespace_spectrum': [float(v) for v in base],
                'conjugated_spectrum': [float(v) for v in conj_values],
                'min_separation': separation,
                'disjoint': separation > tol,
            })
        return rows

    # -- conditions -----------------------------------------------------------

    def check_commutation(self, hbar_s, h_p, p: np.ndarray,
                          s_samples: Sequence[float] = DEFAULT_S_SAMPLES) -> ConditionReport:
        """
        Max of |[Hbar_S(s), H_p]| and |[Hbar_S(s), P]| over sampled s.
        """
        penalty = self._matrix(h_p)
        p = np.asarray(p)
        worst_hp, worst_p, worst_s = 0.0, 0.0, None
        for s in s_samples:
            hs = self._matrix(hbar_s, s)
            c_hp = spectral_norm(hs @ penalty - penalty @ hs)
            c_p = spectral_norm(hs @ p - p @ hs)
            if max(c_hp, c_p) > max(worst_hp, worst_p):
                worst_s = s
            worst_hp, worst_p = max(worst_hp, c_hp), max(worst_p, c_p)
        satisfied = worst_hp <= self.condition_tol and worst_p <= self.condition_tol
        witness = None if satisfied else {'s': worst_s, 'norm': max(worst_hp, worst_p)}
        self.logger.info(f"Commutation check: |[H_S,H_p]|={worst_hp:.3e}, |[H_S,P]|={worst_p:.3e}")
        return ConditionReport('commutation', satisfied,
                               {'hs_hp_commutator': worst_hp, 'hs_p_commutator': worst_p},
                               self.condition_tol, witness)

    def check_theorem1_condition(self, v: np.ndarray, decomposition: SpectralDecomposition,
                                 p: np.ndarray) -> ConditionReport:
        """
        Test sum_a Pi_a V Pi_a P = c P.

        Args:
            v: Noise operator on the same space as the decomposition
            decomposition: Penalty eigendecomposition (Pi_a)
            p: Orthogonal projector

        Returns:
            Report whose constant is the least-squares c = tr(P R)/tr(P)
        """
        v = operator_matrix(v, dense_limit=self.dense_limit)
        p = np.asarray(p)
        self._check_projector(p)
        if v.shape != p.shape or decomposition.dimension != p.shape[0]:
            raise SizeMismatchError(f"V {v.shape}, P {p.shape} and decomposition dim {decomposition.dimension} differ")
        dephased = np.zeros_like(v, dtype=complex)
        for a in range(decomposition.num_sectors):
            block = decomposition.vectors[a]
            dephased += block @ (block.conj().T @ v @ block) @ block.conj().T
        r = dephased @ p
        trace_p = float(np.real(np.trace(p)))
        c = complex(np.trace(p @ r)) / trace_p if trace_p > 0 else 0.0
        residual = spectral_norm(r - c * p)
        satisfied = residual <= self.condition_tol
        self.logger.info(f"Dephasing check: c = {c.real:.6g}, residual = {residual:.3e}")
        witness = None if satisfied else {'residual': residual}
        return ConditionReport('theorem1_dephasing', satisfied, {'dephasing_residual': residual},
                               self.condition_tol, witness, float(np.real(c)))

    def check_condition1(self, h_p, p: np.ndarray, errors: Sequence[PauliOperator]) -> ConditionReport:
        """
        Condition 1: spec(h_p.p) and spec(sigma_j h_p sigma_j.p) are disjoint for every error.

        When satisfied, the dephasing condition for V = sum_j sigma_j is evaluated on
        the same data and reported as the constant.

        Args:
            h_p: Penalty Hamiltonian or matrix
            p: Orthogonal projector commuting with h_p
            errors: Pauli errors

        Returns:
            Report with per-error spectra in details
        """
        matrix = self._matrix(h_p)
        p = np.asarray(p)
        self._check_projector(p)
        commutator = spectral_norm(matrix @ p - p @ matrix)
        if commutator > self.condition_tol:
            raise ConditionPreconditionError(f"penalty does not commute with P: |[h_p, p]| = {commutator:.3e}")
        rows = self.codespace_spectra(matrix, p, errors)
        shared = [row for row in rows if not row['disjoint']]
        for row in shared:
            self.logger.debug(f"Condition 1 fails for {row['error']}: separation {row['min_separation']:.3e}")
        satisfied = not shared
        report = ConditionReport(
            'condition1', satisfied, {'shared_spectra': float(len(shared))}, self.condition_tol,
            {'error': shared[0]['error'], 'min_separation': shared[0]['min_separation']} if shared else None,
            details=rows,
        )
        if satisfied and errors:
            total = sum(e.to_dense(self.dense_limit) for e in errors)
            cross = self.check_theorem1_condition(total, self.eigendecompose(matrix), p)
            report.constant = cross.constant
            report.cross_check = {'dephasing_residual': cross.residuals['dephasing_residual'],
                                  'satisfied': cross.satisfied}
            if not cross.satisfied:
                self.logger.warning("Condition 1 holds but the dephasing condition fails on the same data")
        self.logger.info(f"Condition 1: {'satisfied' if report.satisfied else 'violated'} over {len(rows)} errors")
        return report

    def check_block_condition(self, v_blocks: Sequence[np.ndarray], penalties_per_block: Sequence,
                              projectors_per_block: Sequence[np.ndarray],
                              block_qubits: Optional[Sequence[Sequence[int]]] = None) -> ConditionReport:
        """
        Per-block dephasing condition pi_a v pi_a p = c p.

        Args:
            v_blocks: Block noise on block (x) local bath space
            penalties_per_block: Block penalties on the block register
            projectors_per_block: Block code projectors
            block_qubits: Physical qubits of every block, checked for disjointness

        Returns:
            Report listing every block constant c
        """
        if not (len(v_blocks) == len(penalties_per_block) == len(projectors_per_block)):
            raise SizeMismatchError("block lists have different lengths")
        if block_qubits is not None:
            seen = set()
            for index, qubits in enumerate(block_qubits):
                overlap = seen.intersection(qubits)
                if overlap:
                    raise BlockOverlapError(f"block {index + 1} reuses qubits {sorted(overlap)}")
                seen.update(qubits)
        constants, worst, details = [], 0.0, []
        for index, (v, penalty, p) in enumerate(zip(v_blocks, penalties_per_block, projectors_per_block)):
            penalty_matrix = self._matrix(penalty)
            v = np.asarray(v)
            p = np.asarray(p)
            ratio = v.shape[0] // penalty_matrix.shape[0]
            if ratio > 1:
                penalty_matrix = np.kron(penalty_matrix, np.eye(ratio))
                p = np.kron(p, np.eye(ratio))
            report = self.check_theorem1_condition(v, self.eigendecompose(penalty_matrix), p)
            constants.append(report.constant)
            worst = max(worst, report.residuals['dephasing_residual'])
            details.append({'block': index + 1, 'constant': report.constant,
                            'residual': report.residuals['dephasing_residual']})
        satisfied = worst <= self.condition_tol
        witness = None if satisfied else max(details, key=lambda d: d['residual'])
        return ConditionReport('block_dephasing', satisfied, {'max_block_residual': worst},
                               self.condition_tol, witness, details=details)

    def stabilizer_sign_condition(self, alphas: Sequence[float], anticomm: BinaryMatrix) -> ConditionReport:
        """
        sum_i alpha_i != sum_i alpha_i (-1)^{a_ij} for every error column j.
        """
        signs = 1 - 2 * anticomm.entries.astype(float)
        alphas = np.asarray(alphas, dtype=float)
        if anticomm.cols and anticomm.rows != alphas.size:
            raise SizeMismatchError(f"{alphas.size} alphas for {anticomm.rows} stabilizer rows")
        violating = []
        for j in range(anticomm.cols):
            difference = abs(alphas.sum() - float(alphas @ signs[:, j]))
            if difference <= self.condition_tol:
                violating.append(j)
        satisfied = not violating
        witness = None if satisfied else {'error_column': violating[0]}
        return ConditionReport('stabilizer_sign', satisfied, {'violating_columns': float(len(violating))},
                               self.condition_tol, witness)

    def ground_in_codespace(self, h_p, code: SubsystemCode) -> ConditionReport:
        """
        Test that the ground space of h_p lies inside the codespace.

        Dense registers use |(I - P_C) Pi_ground|; larger ones compare the lowest energy
        of every stabilizer sector with sparse solvers.
        """
        n = code.num_physical
        if n > self.dense_limit:
            raise DenseLimitError(f"{n} qubits exceeds the dense limit of {self.dense_limit}")
        if n <= DENSE_EIGH_QUBITS:
            ground = self.ground_projector(h_p)
            p_c = codespace_projector(code, self.dense_limit)
            residual = spectral_norm(ground - p_c @ ground)
            satisfied = residual <= self.condition_tol
            self.logger.info(f"Ground-in-codespace: residual {residual:.3e}")
            return ConditionReport('ground_in_codespace', satisfied, {'leakage': residual}, self.condition_tol,
                                   None if satisfied else {'leakage': residual})
        return self._ground_in_codespace_by_sector(h_p, code)

    def _ground_in_codespace_by_sector(self, h_p, code: SubsystemCode) -> ConditionReport:
        h = h_p if isinstance(h_p, Hamiltonian) else None
        matrix = _real_sparse(h.to_sparse()) if h is not None else sp.csr_matrix(np.asarray(h_p))
        shift = (h.coefficient_norm() if h is not None else float(np.abs(matrix).sum(axis=1).max())) + 1.0
        dim = matrix.shape[0]
        identity = sp.identity(dim, format='csr')
        energies = []
        for pattern in range(1 << code.s):
            projector = identity
            for i, stab in enumerate(code.stabilizer_gens):
                sign = -1.0 if (pattern >> i) & 1 else 1.0
                projector = projector @ ((identity + sign * _real_sparse(stab.to_sparse())) * 0.5)
            restricted = projector @ matrix @ projector + shift * (identity - projector)
            value = eigsh(restricted, k=1, which='SA', v0=_start_vector(dim), return_eigenvectors=False)[0]
            energies.append(float(value))
        code_energy, others = energies[0], energies[1:]
        margin = min(others) - code_energy if others else np.inf
        satisfied = margin > self.condition_tol
        self.logger.info(f"Ground-in-codespace by sectors: codespace {code_energy:.6f}, margin {margin:.3e}")
        return ConditionReport('ground_in_codespace', satisfied, {'sector_margin': float(margin)}, self.condition_tol,
                               None if satisfied else {'sector_energies': energies},
                               details=[{'sector': i, 'min_energy': e} for i, e in enumerate(energies)])

    # -- chain code -----------------------------------------------------------

    def chain_penalty_spectrum(self, num_logical: int, s_x: int, s_z: int,
                               num_lowest: Optional[int] = None) -> SpectralDecomposition:
        """
        Spectrum of one stabilizer sector of the chain penalty.

        Every sector eigenvalue occurs 2^N times in the full 2N+2-qubit spectrum.

        Args:
            num_logical: N, at most 14
            s_x: X-stabilizer sign
            s_z: Z-stabilizer sign
            num_lowest: Only the lowest eigenvalues (sparse solver); forced above the dense range

        Returns:
            Sector decomposition without eigenvectors
        """
        if num_logical > 14:
            raise DenseLimitError(f"sector method limited to N <= 14, got {num_logical}")
        h = chain_sector_hamiltonian(num_logical, s_x, s_z)
        if num_logical > DENSE_EIGH_QUBITS and num_lowest is None:
            num_lowest = 6
        if num_lowest is not None and num_lowest < (1 << num_logical) - 1:
            matrix = _real_sparse(h.to_sparse())
            values = eigsh(matrix, k=num_lowest, which='SA', v0=_start_vector(matrix.shape[0]),
                           return_eigenvectors=False)
            partial = True
        else:
            values = np.linalg.eigvalsh(h.to_matrix(dense_limit=max(self.dense_limit, num_logical)))
            partial = False
        tol = _absolute_tol(np.asarray(values), self.degeneracy_tol)
        means, sizes = cluster_values(values, tol)
        return SpectralDecomposition(means, sizes, self.degeneracy_tol, None, partial)

    def chain_full_spectrum(self, num_logical: int) -> SpectralDecomposition:
        """
        Union of the four sector spectra, each eigenvalue repeated 2^N times.
        """
        values = []
        for s_x in (1, -1):
            for s_z in (1, -1):
                sector = self.chain_penalty_spectrum(num_logical, s_x, s_z)
                values.append(np.repeat(sector.all_eigenvalues(), 1 << num_logical))
        merged = np.concatenate(values)
        means, sizes = cluster_values(merged, _absolute_tol(merged, self.degeneracy_tol))
        return SpectralDecomposition(means, sizes, self.degeneracy_tol)

    def _chain_gap_row(self, num_logical: int) -> Dict[str, Any]:
        lowest = []
        for s_x in (1, -1):
            for s_z in (1, -1):
                sector = self.chain_penalty_spectrum(
                    num_logical, s_x, s_z, num_lowest=4 if num_logical > DENSE_EIGH_QUBITS else None)
                lowest.extend((float(v), s_x, s_z) for v in sector.eigenvalues[:4])
        lowest.sort()
        ground, ground_sx, ground_sz = lowest[0]
        tol = self.degeneracy_tol * max(1.0, abs(ground))
        excited = next(v for v, _, _ in lowest if v - ground > tol)
        gap = excited - ground
        self.logger.info(f"Chain N={num_logical}: ground {ground:.8f}, gap {gap:.8f}")
        return {
            'N': num_logical,
            'ground_energy': ground,
            'gap': gap,
            'gap_times_n_plus_1': gap * (num_logical + 1),
            'ground_sector_sx': ground_sx,
            'ground_sector_sz': ground_sz,
        }

    def chain_gap_scan(self, n_range: Sequence[int]) -> Tuple[List[Dict[str, Any]], Dict[str, float]]:
        """
        Gap of the chain penalty for every N, with a constancy fit of gap*(N+1).

        Args:
            n_range: Chain lengths N

        Returns:
            Tuple of (rows, fit) where fit holds the mean, the relative spread and the
            least-squares exponent of gap ~ (N+1)^exponent
        """
        n_values = list(n_range)
        self.logger.info(f"Scanning chain gaps for N in {n_values}")
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            rows = list(pool.map(self._chain_gap_row, n_values))
        scaled = np.array([row['gap_times_n_plus_1'] for row in rows])
        mean = float(np.mean(scaled))
        fit = {
            'mean_gap_times_n_plus_1': mean,
            'relative_spread': float((scaled.max() - scaled.min()) / mean) if mean else 0.0,
        }
        if len(rows) >= 2:
            slope, _ = np.polyfit(np.log([r['N'] + 1 for r in rows]), np.log([r['gap'] for r in rows]), 1)
            fit['gap_exponent'] = float(slope)
        return rows, fit
