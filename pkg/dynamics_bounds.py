"""
Module for system-bath evolution under a penalty and the bounds on its deviation
from the decoupled target dynamics.

The full register is ordered system qubits first, bath qubits last. Evolutions
are products of exact exponentials of the Hamiltonian at the midpoint of each
time step; generators without a schedule are exponentiated in one step.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.integrate import quad_vec

from code_construction import SubsystemCode, codespace_projector, slot_layout
from hamiltonian import SCHEDULES, Hamiltonian, operator_matrix
from pauli_algebra import (
    DEFAULT_DENSE_LIMIT,
    BlockOverlapError,
    ConditionPreconditionError,
    DenseLimitError,
    InvalidDensityOperatorError,
    NotHermitianError,
    PauliOperator,
    SizeMismatchError,
)
from spectra_conditions import SpectralDecomposition, cluster_values, spectral_norm

logger = logging.getLogger(__name__)

Operator = Union[Hamiltonian, np.ndarray]


def embed_single_qubit(op: np.ndarray, qubit: int, num_qubits: int) -> np.ndarray:
    """
    op on the 0-based qubit of a num_qubits register, identity elsewhere.
    """
    if not 0 <= qubit < num_qubits:
        raise SizeMismatchError(f"qubit {qubit} outside a {num_qubits}-qubit register")
    left = np.eye(1 << qubit)
    right = np.eye(1 << (num_qubits - qubit - 1))
    return np.kron(np.kron(left, op), right)


def linear_schedule(t: float, total_time: float) -> float:
    return t / total_time if total_time > 0 else 0.0


@dataclass(frozen=True)
class TimeGrid:
    total_time: float
    num_steps: int = 400
    schedule: Callable[[float, float], float] = linear_schedule

    def __post_init__(self):
        if self.num_steps < 1:
            raise ValueError(f"num_steps must be >= 1, got {self.num_steps}")
        if self.total_time < 0:
            raise ValueError(f"total_time must be >= 0, got {self.total_time}")

    @property
    def dt(self) -> float:
        return self.total_time / self.num_steps

    def midpoints(self) -> np.ndarray:
        return (np.arange(self.num_steps) + 0.5) * self.dt

    def s_at(self, t: float) -> float:
        return self.schedule(t, self.total_time)

    def sample_times(self, count: int) -> np.ndarray:
        return np.linspace(0.0, self.total_time, max(2, count))

    def with_steps(self, num_steps: int) -> 'TimeGrid':
        return replace(self, num_steps=num_steps)


@dataclass(frozen=True)
class InteractionTerm:
    """
    One coupling E_j (x) B_j; B_j acts on a single bath qubit, or is a scalar when bath_qubit is None.
    """

    error: PauliOperator
    bath_operator: np.ndarray
    bath_qubit: Optional[int] = None

    def bath_matrix(self, num_bath_qubits: int) -> np.ndarray:
        if self.bath_qubit is None:
            return complex(np.asarray(self.bath_operator).reshape(-1)[0]) * np.eye(1 << num_bath_qubits)
        return embed_single_qubit(np.asarray(self.bath_operator), self.bath_qubit, num_bath_qubits)

    def local_bath_operator(self) -> np.ndarray:
        if self.bath_qubit is None:
            return np.asarray(self.bath_operator, dtype=complex).reshape(1, 1)
        return np.asarray(self.bath_operator, dtype=complex)


@dataclass
class SystemBathModel:
    """
    Encoded system, penalty, bath and system-bath coupling on one dense register.
    """

    system: Hamiltonian
    penalty: Operator
    code: SubsystemCode
    interaction: List[InteractionTerm] = field(default_factory=list)
    bath_terms: List[np.ndarray] = field(default_factory=list)
    num_bath_qubits: int = 0
    penalty_strength: float = 0.0
    total_time: float = 1.0
    block_size: Optional[int] = None
    dense_limit: int = DEFAULT_DENSE_LIMIT
    _cache: Dict[str, Any] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.num_bath_qubits = max(self.num_bath_qubits, len(self.bath_terms))
        if self.system.num_qubits != self.code.num_physical:
            raise SizeMismatchError(f"system Hamiltonian on {self.system.num_qubits} qubits, code has {self.code.num_physical}")
        if self.num_qubits > self.dense_limit:
            raise DenseLimitError(f"{self.num_qubits} qubits exceeds the dense limit of {self.dense_limit}")
        if self.penalty_strength < 0:
            raise ValueError(f"penalty strength must be >= 0, got {self.penalty_strength}")
        for term in self.interaction:
            b = np.asarray(term.bath_operator)
            if np.max(np.abs(b - b.conj().T)) > 1e-10:
                raise NotHermitianError(f"bath operator coupled to {term.error.sparse_label()} is not Hermitian")
            if term.error.num_qubits != self.code.num_physical:
                raise SizeMismatchError(f"error {term.error.sparse_label()} does not act on the system register")

    @property
    def num_system_qubits(self) -> int:
        return self.code.num_physical

    @property
    def num_qubits(self) -> int:
        return self.num_system_qubits + self.num_bath_qubits

    @property
    def bath_dim(self) -> int:
        return 1 << self.num_bath_qubits

    @property
    def dim(self) -> int:
        return 1 << self.num_qubits

    def is_static(self) -> bool:
        return self.system.is_static()

    def with_strength(self, penalty_strength: float) -> 'SystemBathModel':
        return replace(self, penalty_strength=penalty_strength, _cache=dict(self._cache))

    def without_noise(self) -> 'SystemBathModel':
        return replace(self, interaction=[], _cache={})

    def lift_system(self, op: np.ndarray) -> np.ndarray:
        return np.kron(op, np.eye(self.bath_dim))

    def lift_bath(self, op: np.ndarray) -> np.ndarray:
        return np.kron(np.eye(1 << self.num_system_qubits), op)

    def _cached(self, key: str, build: Callable[[], Any]) -> Any:
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def bath_matrix(self) -> np.ndarray:
        def build():
            total = np.zeros((self.bath_dim, self.bath_dim), dtype=complex)
            for q, term in enumerate(self.bath_terms):
                total += embed_single_qubit(np.asarray(term), q, self.num_bath_qubits)
            return total
        return self._cached('bath', build)

    def system_group_matrices(self) -> Dict[str, np.ndarray]:
        return self._cached('system_groups', lambda: {
            name: self.lift_system(m) for name, m in self.system.group_matrices(self.dense_limit).items()
        })

    def h0(self, s: float) -> np.ndarray:
        """
        H_0(s) = Hbar_S(s) + H_B on the full register.
        """
        total = self._cached('bath_lifted', lambda: self.lift_bath(self.bath_matrix())).astype(complex)
        for name, matrix in self.system_group_matrices().items():
            total = total + SCHEDULES[name](s) * matrix
        return total

    def penalty_system_matrix(self) -> np.ndarray:
        return self._cached('penalty_system', lambda: np.asarray(
            operator_matrix(self.penalty, dense_limit=self.dense_limit), dtype=complex))

    def penalty_matrix(self) -> np.ndarray:
        return self._cached('penalty', lambda: self.lift_system(self.penalty_system_matrix()))

    def v_matrix(self) -> np.ndarray:
        def build():
            total = np.zeros((self.dim, self.dim), dtype=complex)
            for term in self.interaction:
                total += np.kron(term.error.to_dense(self.dense_limit), term.bath_matrix(self.num_bath_qubits))
            return total
        return self._cached('v', build)

    def codespace_projector(self) -> np.ndarray:
        return self._cached('p_c', lambda: self.lift_system(codespace_projector(self.code, self.dense_limit)))

    def penalty_decomposition(self, degeneracy_tol: float = 1e-8) -> SpectralDecomposition:
        """
        Eigendecomposition of H_p lifted to the full register.
        """
        def build():
            values, vectors = scipy.linalg.eigh(self.penalty_system_matrix())
            tol = degeneracy_tol * max(1.0, float(values[-1] - values[0]))
            means, sizes = cluster_values(values, tol)
            blocks, start = [], 0
            eye = np.eye(self.bath_dim)
            for size in sizes:
                blocks.append(np.kron(vectors[:, start:start + size], eye))
                start += size
            return SpectralDecomposition(means, [m * self.bath_dim for m in sizes], degeneracy_tol, blocks)
        return self._cached(f'penalty_decomposition_{degeneracy_tol}', build)

    def interaction_norm(self) -> float:
        return self._cached('v_norm', lambda: spectral_norm(self.v_matrix()))

    def prepare(self) -> None:
        """Fill every E_p-independent matrix cache."""
        self.h0(0.0)
        self.penalty_matrix()
        self.v_matrix()
        self.codespace_projector()
        self.penalty_decomposition()
        self.interaction_norm()

    def blocks(self) -> List['PenaltyBlock']:
        """
        Split a block-encoded model into per-block penalties and local couplings.

        Returns:
            One PenaltyBlock per code block; each coupling keeps only the bath qubit it touches
        """
        size = self.block_size or self.num_system_qubits
        if self.num_system_qubits % size:
            raise BlockOverlapError(f"block size {size} does not divide {self.num_system_qubits} qubits")
        count = self.num_system_qubits // size
        if not isinstance(self.penalty, Hamiltonian):
            raise ConditionPreconditionError("block bounds need the penalty as a Pauli sum")

        def block_of(op: PauliOperator) -> int:
            owners = {(q - 1) // size for q in op.support()}
            if len(owners) > 1:
                raise BlockOverlapError(f"{op.sparse_label()} straddles blocks {sorted(owners)}")
            return owners.pop() if owners else 0

        def restrict(op: PauliOperator, b: int) -> PauliOperator:
            shift = b * size
            mask = ((1 << size) - 1) << shift
            return PauliOperator(size, (op.x_mask & mask) >> shift, (op.z_mask & mask) >> shift, op.phase_exponent)

        penalties = [Hamiltonian(size) for _ in range(count)]
        for term in self.penalty.terms:
            b = block_of(term.pauli)
            penalties[b].add_term(term.coefficient, restrict(term.pauli, b))
        systems = [Hamiltonian(size) for _ in range(count)]
        for term in self.system.terms:
            b = block_of(term.pauli)
            systems[b].add_term(term.coefficient, restrict(term.pauli, b), term.group)

        block_code_projector = codespace_projector(_first_block_code(self.code, size), self.dense_limit)
        result = []
        for b in range(count):
            couplings = []
            for term in self.interaction:
                if block_of(term.error) != b or term.error.is_identity():
                    continue
                bath_h = (np.asarray(self.bath_terms[term.bath_qubit], dtype=complex)
                          if term.bath_qubit is not None and term.bath_qubit < len(self.bath_terms)
                          else np.zeros_like(term.local_bath_operator()))
                couplings.append(BlockCoupling(
                    v=np.kron(restrict(term.error, b).to_dense(self.dense_limit), term.local_bath_operator()),
                    local_system=systems[b],
                    local_bath=bath_h,
                ))
            qubits = tuple(range(b * size + 1, (b + 1) * size + 1))
            result.append(PenaltyBlock(penalties[b], block_code_projector, qubits, couplings))
        return result


def _first_block_code(code: SubsystemCode, size: int) -> SubsystemCode:
    if size == code.num_physical:
        return code
    mask = (1 << size) - 1

    def keep(op: PauliOperator) -> bool:
        return not ((op.x_mask | op.z_mask) & ~mask)

    def cut(op: PauliOperator) -> PauliOperator:
        return PauliOperator(size, op.x_mask & mask, op.z_mask & mask, op.phase_exponent)

    return SubsystemCode(
        num_physical=size,
        stabilizer_gens=tuple(cut(s) for s in code.stabilizer_gens if keep(s)),
        gauge_gens=tuple(cut(g) for g in code.gauge_gens if keep(g)),
        bare_logical_pairs=tuple((cut(x), cut(z)) for x, z in code.bare_logical_pairs if keep(x) and keep(z)),
        gauge_pairs=tuple((cut(x), cut(z)) for x, z in code.gauge_pairs if keep(x) and keep(z)),
        params=(size, sum(1 for x, z in code.bare_logical_pairs if keep(x) and keep(z)), code.params[2]),
        name=f"block of {code.name}",
    )


@dataclass
class BlockCoupling:
    """
    One coupling on block (x) local bath, with the local parts of H_0 it fails to commute with.
    """

    v: np.ndarray
    w: Optional[np.ndarray] = None
    local_system: Optional[Hamiltonian] = None
    local_bath: Optional[np.ndarray] = None


@dataclass
class PenaltyBlock:
    penalty: Operator
    projector: np.ndarray
    qubits: Tuple[int, ...]
    couplings: List[BlockCoupling] = field(default_factory=list)


@dataclass
class KData:
    times: np.ndarray
    norms: np.ndarray
    sup_norm: float
    final_norm: float
    commutator_sup: float
    quadrature_error: Optional[float] = None


@dataclass
class EvolutionResult:
    """
    Outcome of one penalty strength: unitaries at T, the deviation and every bound.
    """

    penalty_strength: float
    theorem: str
    num_steps: int
    deviation: float
    u_v: Optional[np.ndarray] = None
    u_w: Optional[np.ndarray] = None
    u_0: Optional[np.ndarray] = None
    u_p: Optional[np.ndarray] = None
    bound_5a: Optional[float] = None
    bound_5b: Optional[float] = None
    block_bound: Optional[float] = None
    global_envelope: Optional[float] = None
    k_norm_sup: float = 0.0
    k_norm_final: float = 0.0
    commutator_sup: float = 0.0
    quadrature_error: Optional[float] = None
    semi_distance: Optional[float] = None
    theorem1_deviation: Optional[float] = None
    measurement_change: Optional[float] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def row(self) -> Dict[str, Any]:
        return {
            'E_p': self.penalty_strength,
            'deviation': self.deviation,
            'bound5a': self.bound_5a,
            'bound5b': self.bound_5b,
            'supK': self.k_norm_sup,
            'semi_distance': self.semi_distance,
            'K_final': self.k_norm_final,
            'commutator_sup': self.commutator_sup,
            'global_envelope': self.global_envelope,
            'block_bound': self.block_bound,
            'quadrature_error': self.quadrature_error,
            'measurement_change': self.measurement_change,
            'steps': self.num_steps,
        }


@dataclass
class SweepResult:
    results: List[EvolutionResult]
    slope: Optional[float] = None
    intercept: Optional[float] = None

    def rows(self) -> List[Dict[str, Any]]:
        return [r.row() for r in self.results]


def _exp_hermitian(h: np.ndarray, dt: float) -> np.ndarray:
    values, vectors = scipy.linalg.eigh(h)
    return (vectors * np.exp(-1j * values * dt)) @ vectors.conj().T


def _partial_trace_middle(matrix: np.ndarray, before: int, traced: int, after: int) -> np.ndarray:
    d_a, d_t, d_b = 1 << before, 1 << traced, 1 << after
    tensor = matrix.reshape(d_a, d_t, d_b, d_a, d_t, d_b)
    return np.einsum('ajbcjd->abcd', tensor).reshape(d_a * d_b, d_a * d_b)


def trace_norm(matrix: np.ndarray) -> float:
    return float(np.sum(scipy.linalg.svdvals(matrix)))


class DynamicsSimulator:
    """
    Evolves system-bath models and evaluates the deviation bounds.
    """

    def __init__(self, default_steps: int = 400, max_steps: int = 4000, stiffness_scale: float = 10.0,
                 quadrature_samples: int = 3, k_samples: int = 101, workers: int = 1,
                 unitarity_tol: float = 1e-8, condition_tol: float = 1e-9, degeneracy_tol: float = 1e-8,
                 density_tol: float = 1e-9):
        """
        Initialize the simulator.

        Args:
            default_steps: Time steps for a scheduled generator at moderate E_p
            max_steps: Cap on the stiffness-scaled step count
            stiffness_scale: Steps grow as default_steps * max(1, E_p T / stiffness_scale)
            quadrature_samples: Times at which K(t) is cross-checked by numeric quadrature
            k_samples: Grid samples for the sup over t in the bounds
            workers: Threads used by penalty sweeps
            unitarity_tol: Allowed |U^dag U - I|
            condition_tol: Tolerance of the dephasing precondition of K(t)
            degeneracy_tol: Eigenvalue merge tolerance of the penalty spectrum
            density_tol: Tolerance of density-operator validation
        """
        self.default_steps = default_steps
        self.max_steps = max_steps
        self.stiffness_scale = stiffness_scale
        self.quadrature_samples = quadrature_samples
        self.k_samples = k_samples
        self.workers = max(1, workers)
        self.unitarity_tol = unitarity_tol
        self.condition_tol = condition_tol
        self.degeneracy_tol = degeneracy_tol
        self.density_tol = density_tol
        self.logger = logging.getLogger(__name__)

    # -- evolution ------------------------------------------------------------

    def steps_for(self, penalty_strength: float, total_time: float, base_steps: Optional[int] = None) -> int:
        base_steps = self.default_steps if base_steps is None else base_steps
        wanted = int(math.ceil(base_steps * max(1.0, penalty_strength * total_time / self.stiffness_scale)))
        if wanted > self.max_steps:
            self.logger.warning(f"E_p={penalty_strength:g}: {wanted} steps requested, capped at {self.max_steps}")
            return self.max_steps
        return wanted

    def grid_for(self, model: SystemBathModel, base: Optional[TimeGrid] = None) -> TimeGrid:
        if model.is_static():
            return TimeGrid(model.total_time, 1, base.schedule if base else linear_schedule)
        if base is not None:
            steps = self.steps_for(model.penalty_strength, model.total_time, base.num_steps)
            return replace(base, total_time=model.total_time, num_steps=steps)
        steps = self.steps_for(model.penalty_strength, model.total_time)
        return TimeGrid(model.total_time, steps)

    def evolve(self, h_of_t: Callable[[float], np.ndarray], grid: TimeGrid,
               initial: Optional[np.ndarray] = None) -> np.ndarray:
        """
        Time-ordered exponential as a product of midpoint step exponentials.

        Args:
            h_of_t: Hermitian generator as a function of time
            grid: Time grid; one step means the generator is exponentiated exactly
            initial: Optional state vector(s) to propagate instead of the identity

        Returns:
            U(T) or U(T) @ initial
        """
        result = None if initial is None else np.asarray(initial, dtype=complex)
        for t in grid.midpoints():
            h = np.asarray(h_of_t(float(t)))
            scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
            if np.max(np.abs(h - h.conj().T), initial=0.0) > 1e-10 * scale:
                raise NotHermitianError(f"generator is not Hermitian at t={t:g}")
            step = _exp_hermitian(h, grid.dt)
            result = step if result is None else step @ result
        if result is None:
            return np.eye(1)
        if initial is None:
            unitarity = float(np.max(np.abs(result.conj().T @ result - np.eye(result.shape[0]))))
            if unitarity > self.unitarity_tol:
                self.logger.warning(f"evolution drifted from unitarity by {unitarity:.3e}")
        return result

    def penalty_unitary(self, model: SystemBathModel, time: Optional[float] = None) -> np.ndarray:
        """
        U_p(t) = exp(-i E_p H_p t) on the full register.
        """
        t = model.total_time if time is None else time
        return model.lift_system(_exp_hermitian(model.penalty_system_matrix(), model.penalty_strength * t))

    def full_unitary(self, model: SystemBathModel, grid: TimeGrid) -> np.ndarray:
        static = model.penalty_strength * model.penalty_matrix() + model.v_matrix()
        return self.evolve(lambda t: model.h0(grid.s_at(t)) + static, grid)

    def decoupled_unitary(self, model: SystemBathModel, grid: TimeGrid) -> np.ndarray:
        return self.evolve(lambda t: model.h0(grid.s_at(t)), grid)

    def target_unitary_theorem1(self, model: SystemBathModel, grid: TimeGrid, c: float = 0.0,
                                u_0: Optional[np.ndarray] = None) -> np.ndarray:
        """
        U_W(T) = exp(-icT) U_0(T) U_p(T).
        """
        if u_0 is None:
            u_0 = self.decoupled_unitary(model, grid)
        return np.exp(-1j * c * grid.total_time) * (u_0 @ self.penalty_unitary(model, grid.total_time))

    def dephased_interaction(self, model: SystemBathModel, index_set: Sequence[int]) -> np.ndarray:
        decomposition = model.penalty_decomposition(self.degeneracy_tol)
        v = model.v_matrix()
        w = np.zeros_like(v)
        for a in index_set:
            block = decomposition.vectors[a]
            w += block @ (block.conj().T @ v @ block) @ block.conj().T
        return w

    def target_unitary_theorem2(self, model: SystemBathModel, grid: TimeGrid, index_set: Sequence[int],
                                p: Optional[np.ndarray] = None) -> np.ndarray:
        """
        Evolve H_0 + E_p H_p + W with W = sum over the index set of Pi_a V Pi_a.

        Args:
            model: System-bath model
            grid: Time grid
            index_set: Penalty eigenspace indices (0 = ground)
            p: Projector that the index set must reproduce; the sector sum itself when omitted

        Returns:
            U_W(T)
        """
        decomposition = model.penalty_decomposition(self.degeneracy_tol)
        if any(a < 0 or a >= decomposition.num_sectors for a in index_set):
            raise ConditionPreconditionError(f"index set {list(index_set)} outside 0..{decomposition.num_sectors - 1}")
        if p is not None:
            spanned = sum(decomposition.projector(a) for a in index_set)
            mismatch = spectral_norm(spanned - p)
            if mismatch > 1e-8:
                raise ConditionPreconditionError(f"index set does not reproduce P (residual {mismatch:.3e})")
        self.logger.info(f"Dephased-sector target over sectors {list(index_set)} "
                         f"(eigenvalues {[round(float(decomposition.eigenvalues[a]), 6) for a in index_set]})")
        w = self.dephased_interaction(model, index_set)
        static = model.penalty_strength * model.penalty_matrix() + w
        return self.evolve(lambda t: model.h0(grid.s_at(t)) + static, grid)

    @staticmethod
    def deviation(u_v: np.ndarray, u_w: np.ndarray, p: np.ndarray) -> float:
        if u_v.shape != u_w.shape or u_v.shape != p.shape:
            raise SizeMismatchError(f"shapes {u_v.shape}, {u_w.shape}, {p.shape} differ")
        return spectral_norm((u_v - u_w) @ p)

    # -- K(t) and bounds ------------------------------------------------------

    def _k_blocks(self, decomposition: SpectralDecomposition, d: np.ndarray, p: np.ndarray,
                  what: str) -> List[Tuple[float, np.ndarray]]:
        diagonal = np.zeros_like(d, dtype=complex)
        for block in decomposition.vectors:
            diagonal += block @ (block.conj().T @ d @ block) @ block.conj().T
        residual = spectral_norm(diagonal @ p)
        if residual > self.condition_tol * max(1.0, spectral_norm(d)):
            raise ConditionPreconditionError(f"{what}: surviving diagonal blocks, |sum Pi_a (V-W) Pi_a P| = {residual:.3e}")
        blocks = []
        for a, left in enumerate(decomposition.vectors):
            for b, right in enumerate(decomposition.vectors):
                if a == b:
                    continue
                term = left @ (left.conj().T @ d @ right) @ (right.conj().T @ p)
                if np.max(np.abs(term)) > 0.0:
                    blocks.append((float(decomposition.eigenvalues[a] - decomposition.eigenvalues[b]), term))
        return blocks

    @staticmethod
    def _k_at(blocks: List[Tuple[float, np.ndarray]], e_p: float, t: float, dim: int) -> np.ndarray:
        k = np.zeros((dim, dim), dtype=complex)
        for delta, term in blocks:
            omega = delta * e_p
            factor = t if omega == 0.0 else (np.exp(1j * omega * t) - 1.0) / (1j * omega)
            k += factor * term
        return k

    def compute_K(self, model: SystemBathModel, grid: TimeGrid, w: Optional[np.ndarray] = None,
                  p: Optional[np.ndarray] = None, quadrature: bool = True) -> KData:
        """
        K(t) = int_0^t U_p^dag (V - W) U_p dtau P from the penalty spectral sum.

        Args:
            model: System-bath model
            grid: Time grid (sup over its sample times)
            w: W on the full register (zero when omitted)
            p: Projector (the codespace when omitted)
            quadrature: Cross-check against adaptive quadrature at a few times

        Returns:
            KData with norms at the sample times and the commutator sup with H_0
        """
        p = model.codespace_projector() if p is None else p
        v = model.v_matrix()
        d = v - (np.zeros_like(v) if w is None else w)
        decomposition = model.penalty_decomposition(self.degeneracy_tol)
        blocks = self._k_blocks(decomposition, d, p, "K(t)")
        e_p = model.penalty_strength
        times = grid.sample_times(self.k_samples)
        norms, commutators = [], []
        for t in times:
            k = self._k_at(blocks, e_p, float(t), model.dim)
            h0 = model.h0(grid.s_at(float(t)))
            norms.append(spectral_norm(k))
            commutators.append(spectral_norm(k @ h0 - h0 @ k))
        norms = np.array(norms)
        data = KData(times, norms, float(norms.max()), float(norms[-1]), float(max(commutators)))
        if quadrature and self.quadrature_samples > 0 and grid.total_time > 0:
            data.quadrature_error = self._quadrature_check(model, blocks, d, p, grid.total_time)
        return data

    def _quadrature_check(self, model: SystemBathModel, blocks, d: np.ndarray, p: np.ndarray,
                          total_time: float) -> float:
        values, vectors = scipy.linalg.eigh(model.penalty_system_matrix())
        vectors = model.lift_system(vectors)
        values = np.repeat(values, model.bath_dim).reshape(-1)
        # lifted eigenvectors are kron(vectors, I); the matching eigenvalues repeat per bath state
        rotated = vectors.conj().T @ d @ vectors
        p_rotated = vectors.conj().T @ p
        e_p = model.penalty_strength
        dim = model.dim

        def integrand(tau: float) -> np.ndarray:
            phases = np.exp(1j * e_p * values * tau)
            inner = (phases[:, None] * rotated * phases.conj()[None, :]) @ p_rotated
            full = vectors @ inner
            return np.concatenate([full.real.ravel(), full.imag.ravel()])

        worst = 0.0
        for q in range(1, self.quadrature_samples + 1):
            t = total_time * q / self.quadrature_samples
            integral, _ = quad_vec(integrand, 0.0, t, epsabs=1e-12, epsrel=1e-10, limit=20000)
            numeric = (integral[:dim * dim] + 1j * integral[dim * dim:]).reshape(dim, dim)
            worst = max(worst, float(np.max(np.abs(numeric - self._k_at(blocks, e_p, t, dim)))))
        self.logger.debug(f"K(t) quadrature cross-check: max deviation {worst:.3e}")
        return worst

    @staticmethod
    def bound_eq5a(model: SystemBathModel, grid: TimeGrid, k_data: KData, w: Optional[np.ndarray] = None) -> float:
        """
        |K(T)| + T sup|[K, H_0]| + T (|V| + |W|) sup|K|.
        """
        w_norm = 0.0 if w is None else spectral_norm(w)
        return (k_data.final_norm + grid.total_time * k_data.commutator_sup
                + grid.total_time * (model.interaction_norm() + w_norm) * k_data.sup_norm)

    @staticmethod
    def global_envelope_bound(model: SystemBathModel, grid: TimeGrid, k_data: KData,
                              w: Optional[np.ndarray] = None) -> float:
        """
        The deviation bound with the commutator replaced by 2 |K| |H_0| using the global sup of |H_0|.
        """
        w_norm = 0.0 if w is None else spectral_norm(w)
        h0_sup = max(spectral_norm(model.h0(grid.s_at(float(t)))) for t in grid.sample_times(11))
        return (k_data.final_norm + 2.0 * grid.total_time * k_data.sup_norm * h0_sup
                + grid.total_time * (model.interaction_norm() + w_norm) * k_data.sup_norm)

    @staticmethod
    def bound_eq5b(v: np.ndarray, w: Optional[np.ndarray], spectrum: SpectralDecomposition, e_p: float) -> float:
        """
        (2 / E_p) sum over ordered pairs a != a' of |V - W| / |lambda_a - lambda_a'|.
        """
        if e_p <= 0:
            raise ConditionPreconditionError(f"E_p must be positive, got {e_p}")
        difference = np.asarray(v) - (0.0 if w is None else np.asarray(w))
        norm = spectral_norm(difference)
        values = np.asarray(spectrum.eigenvalues, dtype=float)
        gaps = np.abs(values[:, None] - values[None, :])
        inverse = np.sum(1.0 / gaps[~np.eye(values.size, dtype=bool)]) if values.size > 1 else 0.0
        return 2.0 / e_p * norm * float(inverse)

    def block_bounds(self, blocks: Sequence[PenaltyBlock], grid: TimeGrid, penalty_strength: float,
                     interaction_norm: Optional[float] = None) -> float:
        """
        Sum over blocks and couplings of the local K_j bound.

        Each coupling contributes |K_j(T)| + T |V_total| sup|K_j| + 2T sup|K_j| (sup|h_S,j| + |h_B,j|),
        all evaluated on the block register and the bath qubit the coupling touches.

        Args:
            blocks: Blocks with disjoint qubits
            grid: Time grid
            penalty_strength: E_p
            interaction_norm: |V| + |W| of the whole model; the sum of local norms when omitted

        Returns:
            The bound
        """
        seen = set()
        for block in blocks:
            if seen.intersection(block.qubits):
                raise BlockOverlapError(f"block on qubits {block.qubits} overlaps an earlier block")
            seen.update(block.qubits)
        if interaction_norm is None:
            interaction_norm = sum(
                spectral_norm(c.v) + (spectral_norm(c.w) if c.w is not None else 0.0)
                for block in blocks for c in block.couplings
            )
        times = grid.sample_times(self.k_samples)
        s_values = [grid.s_at(float(t)) for t in times]
        total = 0.0
        for index, block in enumerate(blocks):
            penalty = np.asarray(operator_matrix(block.penalty), dtype=complex)
            values, vectors = scipy.linalg.eigh(penalty)
            block_sum = 0.0
            for coupling in block.couplings:
                ratio = coupling.v.shape[0] // penalty.shape[0]
                eye = np.eye(ratio)
                tol = self.degeneracy_tol * max(1.0, float(values[-1] - values[0]))
                means, sizes = cluster_values(values, tol)
                sectors, start = [], 0
                for size in sizes:
                    sectors.append(np.kron(vectors[:, start:start + size], eye))
                    start += size
                decomposition = SpectralDecomposition(means, [m * ratio for m in sizes], self.degeneracy_tol, sectors)
                d = coupling.v - (0.0 if coupling.w is None else coupling.w)
                p = np.kron(block.projector, eye)
                k_blocks = self._k_blocks(decomposition, d, p, f"block {index + 1}")
                norms = np.array([spectral_norm(self._k_at(k_blocks, penalty_strength, float(t), d.shape[0]))
                                  for t in times])
                system_sup = 0.0
                if coupling.local_system is not None and coupling.local_system.terms:
                    system_sup = max(spectral_norm(coupling.local_system.to_matrix(s)) for s in s_values)
                bath_norm = spectral_norm(coupling.local_bath) if coupling.local_bath is not None else 0.0
                sup_k = float(norms.max())
                block_sum += (float(norms[-1]) + grid.total_time * interaction_norm * sup_k
                              + 2.0 * grid.total_time * sup_k * (system_sup + bath_norm))
            self.logger.debug(f"Block {index + 1}: local bound {block_sum:.6e}")
            total += block_sum
        return total

    # -- states ---------------------------------------------------------------

    def _validate_density(self, rho: np.ndarray, what: str) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        if rho.ndim == 1:
            rho = np.outer(rho, rho.conj())
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise InvalidDensityOperatorError(f"{what} is not a square matrix")
        if np.max(np.abs(rho - rho.conj().T)) > self.density_tol:
            raise InvalidDensityOperatorError(f"{what} is not Hermitian")
        if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] < -self.density_tol:
            raise InvalidDensityOperatorError(f"{what} is not positive semidefinite")
        if np.real(np.trace(rho)) > 1.0 + self.density_tol:
            raise InvalidDensityOperatorError(f"{what} has trace above 1")
        return rho

    def semi_distance(self, rho: np.ndarray, sigma: np.ndarray, code: SubsystemCode, u_enc: np.ndarray,
                      num_bath_qubits: int = 0) -> float:
        """
        Trace distance after projecting on the codespace, unencoding and tracing out the gauge slots.

        Args:
            rho: Density operator (or state vector) on system (x) bath
            sigma: Second state
            code: The code
            u_enc: Encoding unitary of the code
            num_bath_qubits: Trailing bath qubits, kept in the comparison

        Returns:
            d(rho, sigma) in [0, 1]
        """
        rho = self._validate_density(rho, "rho")
        sigma = self._validate_density(sigma, "sigma")
        layout = slot_layout(code)
        eye = np.eye(1 << num_bath_qubits)
        p = np.kron(codespace_projector(code), eye)
        u = np.kron(u_enc, eye)
        if rho.shape != p.shape or sigma.shape != p.shape:
            raise SizeMismatchError(f"states of shape {rho.shape} do not match the {p.shape} register")

        def reduce(state: np.ndarray) -> np.ndarray:
            unencoded = u.conj().T @ p @ state @ p @ u
            return _partial_trace_middle(unencoded, layout.num_ancilla, layout.num_gauge,
                                         layout.num_logical + num_bath_qubits)

        return 0.5 * trace_norm(reduce(rho) - reduce(sigma))

    def state_distance_bound(self, u_v: np.ndarray, u_w: np.ndarray, p: np.ndarray,
                             rho: np.ndarray) -> Dict[str, Any]:
        """
        Compare 1/2 |U_V rho U_V^dag - U_W rho U_W^dag|_1 with |U_V P - U_W P| for rho supported on P.
        """
        rho = self._validate_density(rho, "rho")
        leakage = spectral_norm(p @ rho @ p - rho)
        if leakage > 1e-8:
            raise ConditionPreconditionError(f"state is not supported on P (leakage {leakage:.3e})")
        distance = 0.5 * trace_norm(u_v @ rho @ u_v.conj().T - u_w @ rho @ u_w.conj().T)
        bound = self.deviation(u_v, u_w, p)
        return {'trace_distance': distance, 'bound': bound, 'holds': distance <= bound + 1e-12}

    def measurement_invariance(self, code: SubsystemCode, u_p: np.ndarray, rho: np.ndarray,
                               num_bath_qubits: int = 0) -> float:
        """
        Largest change of a bare logical expectation value under U_p.
        """
        rho = self._validate_density(rho, "rho")
        eye = np.eye(1 << num_bath_qubits)
        evolved = u_p @ rho @ u_p.conj().T
        worst = 0.0
        for logical in range(1, code.k + 1):
            for op in (code.logical_x(logical), code.logical_y(logical), code.logical_z(logical)):
                full = np.kron(op.to_dense(), eye)
                change = abs(np.trace(full @ evolved) - np.trace(full @ rho))
                worst = max(worst, float(change))
        return worst

    @staticmethod
    def logical_fidelity(bloch: Sequence[float], target: Sequence[float]) -> float:
        """
        Fidelity (1 + r.t)/2 of a logical qubit with Bloch vector r against the pure target t.
        """
        target = np.asarray(target, dtype=float)
        target = target / np.linalg.norm(target)
        return 0.5 * (1.0 + float(np.dot(np.asarray(bloch, dtype=float), target)))

    # -- sweeps ---------------------------------------------------------------

    def run_point(self, model: SystemBathModel, grid: Optional[TimeGrid] = None, theorem: str = '1',
                  c: float = 0.0, index_set: Optional[Sequence[int]] = None, p: Optional[np.ndarray] = None,
                  initial_state: Optional[np.ndarray] = None, u_enc: Optional[np.ndarray] = None,
                  blocks: Optional[Sequence[PenaltyBlock]] = None,
                  block_interaction_norm: Optional[float] = None,
                  keep_unitaries: bool = False) -> EvolutionResult:
        """
        Evolve one penalty strength and evaluate the deviation with every bound.
        """
        grid = self.grid_for(model, grid)
        e_p = model.penalty_strength
        p = model.codespace_projector() if p is None else p
        u_v = self.full_unitary(model, grid)
        u_0 = self.decoupled_unitary(model, grid)
        u_p = self.penalty_unitary(model, grid.total_time)
        theorem1_target = np.exp(-1j * c * grid.total_time) * (u_0 @ u_p)
        if theorem == '1':
            w = c * np.eye(model.dim)
            u_w = theorem1_target
        elif theorem == '2':
            if index_set is None:
                index_set = [0]
            u_w = self.target_unitary_theorem2(model, grid, index_set, p)
            w = self.dephased_interaction(model, index_set)
        else:
            raise ValueError(f"theorem must be '1' or '2', got {theorem!r}")

        deviation = self.deviation(u_v, u_w, p)
        k_data = self.compute_K(model, grid, w, p)
        bound_5a = self.bound_eq5a(model, grid, k_data, w)
        envelope = self.global_envelope_bound(model, grid, k_data, w)
        spectrum = model.penalty_decomposition(self.degeneracy_tol)
        bound_5b = self.bound_eq5b(model.v_matrix(), w, spectrum, e_p) if e_p > 0 else math.inf
        block_bound = None
        if blocks is not None:
            block_bound = self.block_bounds(blocks, grid, e_p, block_interaction_norm)

        result = EvolutionResult(
            penalty_strength=e_p, theorem=theorem, num_steps=grid.num_steps, deviation=deviation,
            bound_5a=bound_5a, bound_5b=bound_5b, block_bound=block_bound, global_envelope=envelope,
            k_norm_sup=k_data.sup_norm, k_norm_final=k_data.final_norm, commutator_sup=k_data.commutator_sup,
            quadrature_error=k_data.quadrature_error,
            theorem1_deviation=self.deviation(u_v, theorem1_target, p),
            metadata={'total_time': grid.total_time, 'c': c,
                      'index_set': list(index_set) if index_set is not None else None},
        )
        if initial_state is not None:
            rho = self._validate_density(initial_state, "initial state")
            rho_full = u_v @ rho @ u_v.conj().T
            rho_ideal = u_0 @ rho @ u_0.conj().T
            if u_enc is not None:
                result.semi_distance = self.semi_distance(rho_full, rho_ideal, model.code, u_enc,
                                                          model.num_bath_qubits)
            result.measurement_change = self.measurement_invariance(model.code, u_p, rho, model.num_bath_qubits)
        if keep_unitaries:
            result.u_v, result.u_w, result.u_0, result.u_p = u_v, u_w, u_0, u_p
        self.logger.info(f"E_p={e_p:g}: deviation {deviation:.4e}, bound5a {bound_5a:.4e}, "
                         f"bound5b {bound_5b:.4e}, sup|K| {k_data.sup_norm:.4e}")
        return result

    def penalty_sweep(self, model: SystemBathModel, e_p_values: Sequence[float],
                      grid: Optional[TimeGrid] = None, **point_options) -> SweepResult:
        """
        Run every penalty strength and fit the log-log slope of deviation against E_p.

        Args:
            model: Model whose penalty_strength is replaced per point
            e_p_values: Penalty strengths (0 gives the unprotected baseline)
            grid: Base grid; step counts still scale with E_p
            **point_options: Forwarded to run_point

        Returns:
            SweepResult ordered as e_p_values
        """
        model.prepare()
        strengths = [float(e) for e in e_p_values]
        self.logger.info(f"Penalty sweep over {len(strengths)} strengths with {self.workers} worker(s)")
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            results = list(pool.map(
                lambda e: self.run_point(model.with_strength(e), grid, **point_options), strengths))
        sweep = SweepResult(results)
        fit_points = [(r.penalty_strength, r.deviation) for r in results if r.penalty_strength > 0 and r.deviation > 0]
        if len(fit_points) >= 2:
            x = np.log([e for e, _ in fit_points])
            y = np.log([dev for _, dev in fit_points])
            slope, intercept = np.polyfit(x, y, 1)
            sweep.slope, sweep.intercept = float(slope), float(intercept)
            self.logger.info(f"Log-log slope of deviation vs E_p: {sweep.slope:.4f}")
        return sweep

    def step_halving_check(self, model: SystemBathModel, grid: Optional[TimeGrid] = None,
                           c: float = 0.0) -> Dict[str, float]:
        """
        Change of the constant-shift deviation when the step count doubles.
        """
        coarse = self.grid_for(model, grid)
        fine = coarse.with_steps(min(2 * coarse.num_steps, 2 * self.max_steps)) if coarse.num_steps > 1 else coarse
        p = model.codespace_projector()
        values = []
        for g in (coarse, fine):
            u_v = self.full_unitary(model, g)
            values.append(self.deviation(u_v, self.target_unitary_theorem1(model, g, c), p))
        change = abs(values[1] - values[0])
        relative = change / values[1] if values[1] > 0 else 0.0
        return {'coarse_steps': coarse.num_steps, 'fine_steps': fine.num_steps,
                'coarse_deviation': values[0], 'fine_deviation': values[1], 'relative_change': relative}
