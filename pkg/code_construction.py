"""
Module for building subsystem codes and the operators derived from them.

Codes come from binary A-matrices (one physical qubit per nonzero entry,
XX gauge terms along rows, ZZ gauge terms along columns) or from the three
builtin codes with fixed generator and logical choices.

Builtin qubit numbering follows the cycle through the nonzero entries of the
two-band matrix: qubit 2i-1 sits at (i, i) and qubit 2i at (i, i+1), with the
last column wrapping to column 1. Generic A-matrix codes number their qubits
row-major over the nonzero entries.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import norm as sparse_norm

from hamiltonian import Hamiltonian
from ods_reader import ODSReader
from pauli_algebra import (
    DEFAULT_DENSE_LIMIT,
    DEFAULT_ROW_LIMIT,
    BinaryMatrix,
    CodeConstructionError,
    DenseLimitError,
    EncodingError,
    NotProjectorError,
    ParseError,
    PauliOperator,
    SynthesisError,
    f2_rank,
    group_elements,
    product,
    symplectic_matrix,
    symplectic_product,
)

logger = logging.getLogger(__name__)

DEFAULT_MIN_WEIGHT_STABILIZERS = 10
REPRESENTATIVE_POLICIES = ('canonical', 'min_weight')
# registers above 8 qubits fall back to the Frobenius norm, an upper bound on the spectral norm
_DENSE_NORM_QUBITS = 8


@dataclass(frozen=True)
class SubsystemCode:
    """
    Stabilizer, gauge and bare logical structure of a subsystem code.
    """

    num_physical: int
    stabilizer_gens: Tuple[PauliOperator, ...]
    gauge_gens: Tuple[PauliOperator, ...]
    bare_logical_pairs: Tuple[Tuple[PauliOperator, PauliOperator], ...]
    gauge_pairs: Tuple[Tuple[PauliOperator, PauliOperator], ...]
    params: Tuple[int, int, int]
    geometry: Optional[Dict[int, Tuple[int, int]]] = field(default=None, compare=False, hash=False)
    name: str = ''

    @property
    def n(self) -> int:
        return self.num_physical

    @property
    def k(self) -> int:
        return len(self.bare_logical_pairs)

    @property
    def r(self) -> int:
        return len(self.gauge_pairs)

    @property
    def s(self) -> int:
        return len(self.stabilizer_gens)

    def logical_x(self, logical: int) -> PauliOperator:
        return self.bare_logical_pairs[logical - 1][0]

    def logical_z(self, logical: int) -> PauliOperator:
        return self.bare_logical_pairs[logical - 1][1]

    def logical_y(self, logical: int) -> PauliOperator:
        # Y = iXZ holds for any anticommuting Hermitian pair
        x_bar, z_bar = self.bare_logical_pairs[logical - 1]
        return (x_bar * z_bar).with_phase((x_bar * z_bar).phase_exponent + 1)

    def bare_logicals(self) -> List[PauliOperator]:
        return [op for pair in self.bare_logical_pairs for op in pair]

    def validate(self) -> None:
        """
        Check the commutation structure; raises CodeConstructionError on the first violation.
        """
        n = self.num_physical
        everything = list(self.stabilizer_gens) + list(self.gauge_gens) + self.bare_logicals()
        for op in everything:
            if op.num_qubits != n:
                raise CodeConstructionError(f"{op.label()} does not act on {n} qubits")
            if not op.is_hermitian():
                raise CodeConstructionError(f"{op.label()} is not Hermitian")
        for stab in self.stabilizer_gens:
            for op in everything:
                if not stab.commutes(op):
                    raise CodeConstructionError(
                        f"stabilizer {stab.sparse_label()} anticommutes with {op.sparse_label()}"
                    )
        _check_no_minus_identity(self.stabilizer_gens, n)
        for logical in self.bare_logicals():
            for gauge in self.gauge_gens:
                if not logical.commutes(gauge):
                    raise CodeConstructionError(
                        f"bare logical {logical.sparse_label()} anticommutes with gauge {gauge.sparse_label()}"
                    )
        gauge_space = symplectic_matrix(list(self.stabilizer_gens) + list(self.gauge_gens), n)
        for logical in self.bare_logicals():
            if gauge_space.in_rowspace(logical.symplectic_vector()):
                raise CodeConstructionError(f"bare logical {logical.sparse_label()} lies in the gauge group")
        _check_canonical_pairs(self.bare_logical_pairs, 'logical')
        _check_canonical_pairs(self.gauge_pairs, 'gauge')
        for logical in self.bare_logicals():
            for gauge in (op for pair in self.gauge_pairs for op in pair):
                if not logical.commutes(gauge):
                    raise CodeConstructionError(
                        f"bare logical {logical.sparse_label()} anticommutes with gauge pair {gauge.sparse_label()}"
                    )
        if self.s + self.r + self.k != n:
            raise CodeConstructionError(f"s + r + k = {self.s + self.r + self.k} != n = {n}")

    def to_dict(self) -> Dict[str, object]:
        n, k, d = self.params
        return {
            'name': self.name,
            'params': {'n': n, 'k': k, 'd': d},
            'stabilizers': [p.sparse_label() for p in self.stabilizer_gens],
            'gauge_generators': [p.sparse_label() for p in self.gauge_gens],
            'gauge_pairs': [{'x': x.sparse_label(), 'z': z.sparse_label()} for x, z in self.gauge_pairs],
            'logical_pairs': [{'x': x.sparse_label(), 'z': z.sparse_label()} for x, z in self.bare_logical_pairs],
            'geometry': {str(q): list(pos) for q, pos in sorted(self.geometry.items())} if self.geometry else None,
        }


@dataclass(frozen=True)
class DetectabilityReport:
    error: PauliOperator
    detectable: bool
    mode: Optional[str]
    residual_norm: float
    anticommuting_stabilizers: Tuple[int, ...] = ()

    @property
    def subsystem_condition(self) -> bool:
        """True when P_C E P_C vanishes or acts on the gauge subsystem alone."""
        return self.mode in ('annihilated', 'gauge_only')

    def to_dict(self) -> Dict[str, object]:
        return {
            'error': self.error.sparse_label(),
            'detectable': self.detectable,
            'mode': self.mode,
            'residual_norm': self.residual_norm,
            'anticommuting_stabilizers': list(self.anticommuting_stabilizers),
        }


@dataclass(frozen=True)
class SlotLayout:
    """
    Slot order of the unencoded register: ancillas, then gauge qubits, then logical qubits.
    """

    num_ancilla: int
    num_gauge: int
    num_logical: int

    @property
    def ancilla(self) -> range:
        return range(0, self.num_ancilla)

    @property
    def gauge(self) -> range:
        return range(self.num_ancilla, self.num_ancilla + self.num_gauge)

    @property
    def logical(self) -> range:
        start = self.num_ancilla + self.num_gauge
        return range(start, start + self.num_logical)


# -- symplectic helpers -------------------------------------------------------

def _check_no_minus_identity(stabilizers: Sequence[PauliOperator], num_qubits: int) -> None:
    if not stabilizers:
        return
    relations = symplectic_matrix(stabilizers, num_qubits).transpose().nullspace()
    for combo in relations.entries:
        chosen = [s for s, bit in zip(stabilizers, combo) if bit]
        if product(chosen, num_qubits).phase_exponent != 0:
            labels = ', '.join(s.sparse_label() for s in chosen)
            raise CodeConstructionError(f"-I lies in the stabilizer group: product of {labels}")


def _check_canonical_pairs(pairs: Sequence[Tuple[PauliOperator, PauliOperator]], kind: str) -> None:
    for i, (x_i, z_i) in enumerate(pairs):
        if x_i.commutes(z_i):
            raise CodeConstructionError(f"{kind} pair {i + 1} ({x_i.sparse_label()}, {z_i.sparse_label()}) commutes")
        for j, (x_j, z_j) in enumerate(pairs):
            if j <= i:
                continue
            for a in (x_i, z_i):
                for b in (x_j, z_j):
                    if not a.commutes(b):
                        raise CodeConstructionError(
                            f"{kind} pairs {i + 1} and {j + 1} do not commute: {a.sparse_label()}, {b.sparse_label()}"
                        )


def _support_weight(vector: np.ndarray) -> int:
    n = vector.size // 2
    return int(np.count_nonzero(vector[:n] | vector[n:]))


def _lex_key(vector: np.ndarray) -> Tuple[int, Tuple[int, ...]]:
    return _support_weight(vector), tuple(int(1 - b) for b in vector)


def symplectic_gram_schmidt(vectors: Sequence[np.ndarray]) -> Tuple[List[Tuple[np.ndarray, np.ndarray]], BinaryMatrix]:
    """
    Split a set of 2n-bit vectors into canonical anticommuting pairs plus a radical.

    Vectors are processed in the given order; each pair takes the first remaining
    vector and the first later vector that anticommutes with it.

    Args:
        vectors: Symplectic [x | z] vectors spanning the space

    Returns:
        Tuple of (list of (a, b) pairs with Omega(a, b) = 1, basis of the radical)
    """
    pending = [np.asarray(v, dtype=np.uint8).copy() for v in vectors]
    width = pending[0].size if pending else 0
    pairs = []
    radical = []
    while pending:
        a = pending.pop(0)
        if not a.any():
            continue
        partner = next((i for i, v in enumerate(pending) if symplectic_product(a, v)), None)
        if partner is None:
            radical.append(a)
            continue
        b = pending.pop(partner)
        pairs.append((a, b))
        updated = []
        for v in pending:
            w = v.copy()
            if symplectic_product(v, b):
                w ^= a
            if symplectic_product(v, a):
                w ^= b
            updated.append(w)
        pending = updated
    basis = BinaryMatrix(np.array(radical)).row_basis() if radical else BinaryMatrix(np.zeros((0, width)))
    return pairs, basis


def _orient(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    n = a.size // 2
    if not a[:n].any() and b[:n].any():
        return b, a
    return a, b


def _is_css(paulis: Sequence[PauliOperator]) -> bool:
    return all(p.x_mask == 0 or p.z_mask == 0 for p in paulis)


def _commutant_basis(generators: Sequence[PauliOperator], num_qubits: int) -> List[np.ndarray]:
    """
    Basis of the Paulis commuting with every generator, CSS-split when the generators are CSS.
    """
    n = num_qubits
    if not generators:
        return [np.eye(2 * n, dtype=np.uint8)[i] for i in range(2 * n)]
    if _is_css(generators):
        x_type = [g.symplectic_vector()[:n] for g in generators if g.x_mask]
        z_type = [g.symplectic_vector()[n:] for g in generators if g.z_mask]
        x_candidates = BinaryMatrix(np.array(z_type)).nullspace() if z_type else BinaryMatrix.identity(n)
        z_candidates = BinaryMatrix(np.array(x_type)).nullspace() if x_type else BinaryMatrix.identity(n)
        zeros = np.zeros(n, dtype=np.uint8)
        xs = sorted((np.concatenate([row, zeros]) for row in x_candidates.entries), key=_lex_key)
        zs = sorted((np.concatenate([zeros, row]) for row in z_candidates.entries), key=_lex_key)
        return xs + zs
    m = symplectic_matrix(generators, n).entries
    swapped = np.hstack([m[:, n:], m[:, :n]])
    return sorted(BinaryMatrix(swapped).nullspace().entries, key=_lex_key)


def _min_weight_representative(op: PauliOperator, stabilizers: Sequence[PauliOperator],
                               max_stabilizers: int = DEFAULT_MIN_WEIGHT_STABILIZERS) -> PauliOperator:
    best = op
    for _, element in group_elements(stabilizers, op.num_qubits, limit=max_stabilizers):
        candidate = op * element
        if candidate.weight() < best.weight():
            best = candidate
    return best


def _cycle_geometry(a: int) -> Dict[int, Tuple[int, int]]:
    geometry = {}
    for i in range(1, a + 1):
        geometry[2 * i - 1] = (i, i)
        geometry[2 * i] = (i, i % a + 1)
    return geometry


def _cycle_a_matrix(a: int) -> BinaryMatrix:
    entries = np.zeros((a, a), dtype=np.uint8)
    for i in range(a):
        entries[i, i] = 1
        entries[i, (i + 1) % a] = 1
    return BinaryMatrix(entries)


def _pauli(n: int, letter: str, qubits: Sequence[int]) -> PauliOperator:
    return product((PauliOperator.single(n, q, letter) for q in qubits), n)


class CodeBuilder:
    """
    Builds and inspects subsystem codes.
    """

    def __init__(self, dense_limit: int = DEFAULT_DENSE_LIMIT,
                 min_weight_max_stabilizers: int = DEFAULT_MIN_WEIGHT_STABILIZERS,
                 row_limit: int = DEFAULT_ROW_LIMIT):
        """
        Initialize the code builder.

        Args:
            dense_limit: Largest qubit count realized as a dense matrix
            min_weight_max_stabilizers: Largest stabilizer count enumerated for min-weight searches
            row_limit: Largest row count enumerated for F2 minimum weights
        """
        self.dense_limit = dense_limit
        self.min_weight_max_stabilizers = min_weight_max_stabilizers
        self.row_limit = row_limit
        self.logger = logging.getLogger(__name__)

    # -- construction ---------------------------------------------------------

    def code_from_a_matrix(self, a: BinaryMatrix, name: str = '') -> SubsystemCode:
        """
        Build the subsystem code of a binary A-matrix.

        Args:
            a: Binary matrix with at least one nonzero entry
            name: Optional label carried into exports

        Returns:
            Code with parameters [[|A|, rank(A), min(d_row, d_col)]]
        """
        entries = a.entries
        if not entries.any():
            raise CodeConstructionError("A-matrix has no nonzero entries")
        positions = [(r, c) for r in range(a.rows) for c in range(a.cols) if entries[r, c]]
        index = {pos: q + 1 for q, pos in enumerate(positions)}
        n = len(positions)
        self.logger.info(f"Building code from {a.rows}x{a.cols} A-matrix with {n} qubits")

        gauge = []
        for r in range(a.rows):
            row_qubits = [index[(r, c)] for c in range(a.cols) if entries[r, c]]
            gauge.extend(_pauli(n, 'X', pair) for pair in zip(row_qubits, row_qubits[1:]))
        for c in range(a.cols):
            col_qubits = [index[(r, c)] for r in range(a.rows) if entries[r, c]]
            gauge.extend(_pauli(n, 'Z', pair) for pair in zip(col_qubits, col_qubits[1:]))

        stabilizers = self._center(gauge, n)
        logical_pairs = self._extract_logicals(gauge, stabilizers, n)
        gauge_pairs = self._extract_gauge_pairs(gauge, n)

        k = f2_rank(a)
        if len(logical_pairs) != k:
            raise CodeConstructionError(f"extracted {len(logical_pairs)} logical pairs but rank(A) = {k}")
        d_row = a.min_nonzero_weight_rowspace(self.row_limit)
        d_col = a.transpose().min_nonzero_weight_rowspace(self.row_limit)
        d = min(d_row, d_col)

        code = SubsystemCode(
            num_physical=n,
            stabilizer_gens=tuple(stabilizers),
            gauge_gens=tuple(gauge),
            bare_logical_pairs=tuple(logical_pairs),
            gauge_pairs=tuple(gauge_pairs),
            params=(n, k, d),
            geometry={q: pos for pos, q in index.items()},
            name=name or f"[[{n},{k},{d}]]",
        )
        code.validate()
        self.logger.info(f"Built {code.name}: s={code.s}, r={code.r}, k={code.k}, d_row={d_row}, d_col={d_col}")
        return code

    def code_from_generators(self, num_physical: int, stabilizers: Sequence[PauliOperator],
                             gauge_gens: Sequence[PauliOperator],
                             logical_pairs: Sequence[Tuple[PauliOperator, PauliOperator]],
                             distance: Optional[int] = None, name: str = '',
                             geometry: Optional[Dict[int, Tuple[int, int]]] = None) -> SubsystemCode:
        """
        Build a code from explicit generator lists; gauge pairs are derived from gauge_gens.

        Args:
            num_physical: Number of physical qubits
            stabilizers: Stabilizer generators
            gauge_gens: Gauge generators (may include stabilizers, may be overcomplete)
            logical_pairs: Bare logical (X, Z) pairs
            distance: Known distance; computed by enumeration when omitted
            name: Optional label
            geometry: Optional qubit to (row, col) map

        Returns:
            Validated code
        """
        gauge_pairs = self._extract_gauge_pairs(list(gauge_gens), num_physical)
        draft = SubsystemCode(
            num_physical=num_physical,
            stabilizer_gens=tuple(stabilizers),
            gauge_gens=tuple(gauge_gens),
            bare_logical_pairs=tuple((x, z) for x, z in logical_pairs),
            gauge_pairs=tuple(gauge_pairs),
            params=(num_physical, len(logical_pairs), distance or 0),
            geometry=geometry,
            name=name,
        )
        draft.validate()
        if distance is None:
            distance = self.brute_force_distance(draft)
        return SubsystemCode(
            num_physical=num_physical,
            stabilizer_gens=draft.stabilizer_gens,
            gauge_gens=draft.gauge_gens,
            bare_logical_pairs=draft.bare_logical_pairs,
            gauge_pairs=draft.gauge_pairs,
            params=(num_physical, len(logical_pairs), distance),
            geometry=geometry,
            name=name or f"[[{num_physical},{len(logical_pairs)},{distance}]]",
        )

    def _center(self, gauge: Sequence[PauliOperator], n: int) -> List[PauliOperator]:
        if not gauge:
            return []
        m = symplectic_matrix(gauge, n)
        table = np.array([[0 if g.commutes(h) else 1 for h in gauge] for g in gauge], dtype=np.uint8)
        combos = BinaryMatrix(table).nullspace()
        if combos.rows == 0:
            return []
        center = BinaryMatrix((combos.entries.astype(np.int64) @ m.entries.astype(np.int64)) % 2).row_basis()
        stabilizers = [PauliOperator.from_symplectic(row) for row in center.entries]
        self.logger.debug(f"Center of gauge group: {[s.sparse_label() for s in stabilizers]}")
        return stabilizers

    def _extract_logicals(self, gauge: Sequence[PauliOperator], stabilizers: Sequence[PauliOperator],
                          n: int) -> List[Tuple[PauliOperator, PauliOperator]]:
        candidates = _commutant_basis(gauge, n)
        pairs, radical = symplectic_gram_schmidt(candidates)
        if radical.rows != len(stabilizers):
            raise CodeConstructionError(
                f"radical of the gauge commutant has dimension {radical.rows}, expected {len(stabilizers)}"
            )
        logicals = []
        for a, b in pairs:
            x_vec, z_vec = _orient(a, b)
            x_bar = PauliOperator.from_symplectic(x_vec)
            z_bar = PauliOperator.from_symplectic(z_vec)
            if len(stabilizers) <= self.min_weight_max_stabilizers:
                x_bar = _min_weight_representative(x_bar, stabilizers, self.min_weight_max_stabilizers)
                z_bar = _min_weight_representative(z_bar, stabilizers, self.min_weight_max_stabilizers)
            logicals.append((x_bar, z_bar))
        return logicals

    def _extract_gauge_pairs(self, gauge: Sequence[PauliOperator], n: int) -> List[Tuple[PauliOperator, PauliOperator]]:
        vectors = sorted((g.symplectic_vector() for g in gauge), key=_lex_key)
        pairs, _ = symplectic_gram_schmidt(vectors)
        return [
            tuple(PauliOperator.from_symplectic(v) for v in _orient(a, b))
            for a, b in pairs
        ]

    def builtin_412(self) -> SubsystemCode:
        n = 4
        stabilizers = [PauliOperator.from_label('XXXX'), PauliOperator.from_label('ZZZZ')]
        gauge = [_pauli(n, 'X', (3, 4)), _pauli(n, 'Z', (2, 4)), _pauli(n, 'X', (1, 2)), _pauli(n, 'Z', (1, 3))]
        logical = [(_pauli(n, 'X', (1, 3)), _pauli(n, 'Z', (1, 2)))]
        geometry = {1: (1, 1), 2: (1, 2), 3: (2, 1), 4: (2, 2)}
        return self.code_from_generators(n, stabilizers, gauge, logical, distance=2, name='[[4,1,2]]',
                                         geometry=geometry)

    def builtin_832(self) -> SubsystemCode:
        n = 8
        stabilizers = [_pauli(n, 'X', range(1, 9)), _pauli(n, 'Z', range(1, 9))]
        gauge = [_pauli(n, 'X', (2 * i - 1, 2 * i)) for i in range(1, 5)]
        gauge += [_pauli(n, 'Z', (2, 3)), _pauli(n, 'Z', (4, 5)), _pauli(n, 'Z', (6, 7)), _pauli(n, 'Z', (8, 1))]
        logical = [
            (_pauli(n, 'X', (1, 8)), _pauli(n, 'Z', (1, 2))),
            (_pauli(n, 'X', (1, 2, 3, 8)), _pauli(n, 'Z', (3, 4, 5, 6))),
            (_pauli(n, 'X', (4, 5)), _pauli(n, 'Z', (5, 6))),
        ]
        return self.code_from_generators(n, stabilizers, gauge, logical, distance=2, name='[[8,3,2]]',
                                         geometry=_cycle_geometry(4))

    def builtin_chain(self, num_logical: int) -> SubsystemCode:
        """
        The [[2N+2, N, 2]] chain code with logicals X_{2i}X_{2i+1} and Z_1...Z_{2i}.

        Args:
            num_logical: N >= 2

        Returns:
            Chain code on 2N+2 qubits
        """
        if num_logical < 2:
            raise CodeConstructionError(f"chain code needs N >= 2, got {num_logical}")
        a = num_logical + 1
        n = 2 * a
        stabilizers = [_pauli(n, 'X', range(1, n + 1)), _pauli(n, 'Z', range(1, n + 1))]
        gauge = [_pauli(n, 'X', (2 * i - 1, 2 * i)) for i in range(1, a + 1)]
        gauge += [_pauli(n, 'Z', (2 * i, 2 * i + 1)) for i in range(1, a)]
        gauge.append(_pauli(n, 'Z', (1, n)))
        logical = [
            (_pauli(n, 'X', (2 * i, 2 * i + 1)), _pauli(n, 'Z', range(1, 2 * i + 1)))
            for i in range(1, num_logical + 1)
        ]
        return self.code_from_generators(n, stabilizers, gauge, logical, distance=2,
                                         name=f"chain[[{n},{num_logical},2]]", geometry=_cycle_geometry(a))

    def builtin(self, name: str, num_logical: Optional[int] = None) -> SubsystemCode:
        if name == '412':
            return self.builtin_412()
        if name == '832':
            return self.builtin_832()
        if name == 'chain':
            if num_logical is None:
                raise CodeConstructionError("chain code needs the number of logical qubits N")
            return self.builtin_chain(num_logical)
        raise CodeConstructionError(f"unknown builtin code {name!r}")

    def chain_a_matrix(self, num_logical: int) -> BinaryMatrix:
        return _cycle_a_matrix(num_logical + 1)

    def block_encoding(self, code: SubsystemCode, blocks: int) -> SubsystemCode:
        """
        Encode each of `blocks` copies independently, as the block-diagonal A-matrix does.

        Args:
            code: Single-block code
            blocks: Number of copies

        Returns:
            Code on blocks * n qubits; block b occupies qubits b*n+1 .. (b+1)*n
        """
        if blocks < 1:
            raise CodeConstructionError(f"block count must be positive, got {blocks}")
        n = code.num_physical
        total = blocks * n

        def lift(op: PauliOperator, b: int) -> PauliOperator:
            return op.embed(total, b * n)

        geometry = None
        if code.geometry:
            height = max(r for r, _ in code.geometry.values())
            width = max(c for _, c in code.geometry.values())
            geometry = {
                b * n + q: (r + b * height, c + b * width)
                for b in range(blocks) for q, (r, c) in code.geometry.items()
            }
        n0, k0, d0 = code.params
        return SubsystemCode(
            num_physical=total,
            stabilizer_gens=tuple(lift(s, b) for b in range(blocks) for s in code.stabilizer_gens),
            gauge_gens=tuple(lift(g, b) for b in range(blocks) for g in code.gauge_gens),
            bare_logical_pairs=tuple(
                (lift(x, b), lift(z, b)) for b in range(blocks) for x, z in code.bare_logical_pairs
            ),
            gauge_pairs=tuple((lift(x, b), lift(z, b)) for b in range(blocks) for x, z in code.gauge_pairs),
            params=(blocks * n0, blocks * k0, d0),
            geometry=geometry,
            name=f"{blocks}x{code.name}",
        )

    def load_a_matrix(self, path: str) -> BinaryMatrix:
        """
        Read an A-matrix from a .txt file of 0/1 rows or the first sheet of an .ods workbook.
        """
        file_path = Path(path)
        if not file_path.exists():
            raise ParseError(f"A-matrix file not found: {path}")
        if file_path.suffix.lower() == '.ods':
            return ODSReader(str(file_path)).read_binary_matrix()
        self.logger.info(f"Loading A-matrix from {file_path}")
        return BinaryMatrix.from_text(file_path.read_text(encoding='utf-8'))

    def brute_force_distance(self, code: SubsystemCode, max_qubits: int = 8) -> int:
        """
        Minimum weight over C(S) \\ G by exhaustive enumeration.

        Args:
            code: Code with at most max_qubits qubits
            max_qubits: Enumeration guard

        Returns:
            Dressed distance (0 when C(S) = G, i.e. k = 0)
        """
        n = code.num_physical
        if n > max_qubits:
            raise DenseLimitError(f"brute-force distance limited to {max_qubits} qubits, code has {n}")

        def pack(vector: np.ndarray) -> int:
            return int(''.join(str(int(b)) for b in vector), 2)

        centralizer = [pack(v) for v in _commutant_basis(list(code.stabilizer_gens), n)]
        gauge_vectors = list(code.gauge_gens) + list(code.stabilizer_gens)
        reduced, pivots = symplectic_matrix(gauge_vectors, n).rref()
        width = 2 * n
        reducers = [(1 << (width - 1 - c), pack(reduced.entries[i])) for i, c in enumerate(pivots)]
        full = (1 << n) - 1

        best = 0
        current = 0
        for step in range(1, 1 << len(centralizer)):
            flip = (step & -step).bit_length() - 1
            current ^= centralizer[flip]
            residue = current
            for pivot_bit, row in reducers:
                if residue & pivot_bit:
                    residue ^= row
            if residue == 0:
                continue
            w = bin(((current >> n) | current) & full).count('1')
            if best == 0 or w < best:
                best = w
        self.logger.debug(f"Brute-force distance of {code.name}: {best}")
        return best


# -- operators on the physical register ---------------------------------------

def _codespace_projector_sparse(code: SubsystemCode) -> sp.csr_matrix:
    dim = 1 << code.num_physical
    projector = sp.identity(dim, dtype=complex, format='csr')
    identity = sp.identity(dim, dtype=complex, format='csr')
    for stab in code.stabilizer_gens:
        projector = projector @ ((identity + stab.to_sparse()) * 0.5)
    return projector.tocsr()


def codespace_projector(code: SubsystemCode, dense_limit: int = DEFAULT_DENSE_LIMIT) -> np.ndarray:
    """
    Dense P_C = prod_i (I + S_i)/2.
    """
    if code.num_physical > dense_limit:
        raise DenseLimitError(f"{code.num_physical} qubits exceeds the dense limit of {dense_limit}")
    matrix = _codespace_projector_sparse(code).toarray()
    return matrix.real if not np.any(matrix.imag) else matrix


def _norm_bound(matrix: sp.spmatrix, num_qubits: int) -> float:
    matrix = sp.csr_matrix(matrix)
    matrix.eliminate_zeros()
    if matrix.nnz == 0:
        return 0.0
    if num_qubits <= _DENSE_NORM_QUBITS:
        return float(np.linalg.norm(matrix.toarray(), 2))
    return float(sparse_norm(matrix))


def is_detectable(code: SubsystemCode, e: PauliOperator, tol: float = 1e-9,
                  dense_limit: int = DEFAULT_DENSE_LIMIT) -> DetectabilityReport:
    """
    Classify a Pauli error against the codespace.

    Args:
        code: The code
        e: Pauli error on the physical register
        tol: Residual tolerance
        dense_limit: Largest register accepted

    Returns:
        Report with mode 'annihilated' (P_C e P_C = 0), 'gauge_only' (trivial on the
        logical subsystem) or None (acts on the logical subsystem)
    """
    n = code.num_physical
    if n > dense_limit:
        raise DenseLimitError(f"{n} qubits exceeds the dense limit of {dense_limit}")
    anticommuting = tuple(i for i, s in enumerate(code.stabilizer_gens) if not e.commutes(s))
    projector = _codespace_projector_sparse(code)
    compressed = projector @ e.to_sparse() @ projector
    if anticommuting:
        residual = _norm_bound(compressed, n)
        if residual > tol:
            logger.warning(f"{e.sparse_label()} anticommutes with a stabilizer but |P_C e P_C| = {residual:.3e}")
        return DetectabilityReport(e, residual <= tol, 'annihilated', residual, anticommuting)
    residual = 0.0
    for logical in code.bare_logicals():
        restricted = projector @ logical.to_sparse() @ projector
        residual = max(residual, _norm_bound(compressed @ restricted - restricted @ compressed, n))
    mode = 'gauge_only' if residual <= tol else None
    return DetectabilityReport(e, False, mode, residual, ())


def logical_operator(code: SubsystemCode, pauli: PauliOperator) -> PauliOperator:
    """
    Replace every logical-register letter by the matching bare logical.

    Args:
        code: The code
        pauli: Pauli on the k logical qubits

    Returns:
        Physical bare-logical representative carrying the same phase
    """
    if pauli.num_qubits != code.k:
        raise EncodingError(f"term {pauli.sparse_label()} acts on {pauli.num_qubits} qubits but the code has k = {code.k}")
    result = PauliOperator.identity(code.num_physical).with_phase(pauli.phase_exponent)
    for j, letter in enumerate(pauli.letters(), 1):
        if letter == 'X':
            result = result * code.logical_x(j)
        elif letter == 'Z':
            result = result * code.logical_z(j)
        elif letter == 'Y':
            result = result * code.logical_y(j)
    return result


def encode_hamiltonian(h: Hamiltonian, code: SubsystemCode, representative_policy: str = 'canonical',
                       max_stabilizers: int = DEFAULT_MIN_WEIGHT_STABILIZERS) -> Hamiltonian:
    """
    Encode a logical Hamiltonian term by term.

    Args:
        h: Hamiltonian on the k logical qubits
        code: Target code
        representative_policy: 'canonical' or 'min_weight'
        max_stabilizers: Largest stabilizer count enumerated by min_weight

    Returns:
        Hamiltonian on the physical register with the same schedule groups
    """
    if representative_policy not in REPRESENTATIVE_POLICIES:
        raise EncodingError(f"unknown representative policy {representative_policy!r}")
    if h.num_qubits != code.k:
        raise EncodingError(f"Hamiltonian on {h.num_qubits} qubits cannot be encoded into k = {code.k}")
    use_min_weight = representative_policy == 'min_weight'
    if use_min_weight and code.s > max_stabilizers:
        logger.warning(f"{code.s} stabilizers exceed the min-weight limit {max_stabilizers}; using canonical representatives")
        use_min_weight = False
    encoded = Hamiltonian(code.num_physical)
    for term in h.terms:
        physical = logical_operator(code, term.pauli)
        if use_min_weight:
            physical = _min_weight_representative(physical, code.stabilizer_gens, max_stabilizers)
        logger.debug(f"Encoded {term.pauli.sparse_label()} -> {physical.sparse_label()}")
        encoded.add_term(term.coefficient, physical, term.group)
    return encoded


def slot_layout(code: SubsystemCode) -> SlotLayout:
    return SlotLayout(code.s, code.r, code.k)


def _destabilizers(code: SubsystemCode) -> List[PauliOperator]:
    n = code.num_physical
    constraints = list(code.stabilizer_gens)
    constraints += [op for pair in code.gauge_pairs for op in pair]
    constraints += code.bare_logicals()
    if not code.stabilizer_gens:
        return []
    m = symplectic_matrix(constraints, n).entries
    system = BinaryMatrix(np.hstack([m[:, n:], m[:, :n]]))
    destabilizers = []
    for i in range(code.s):
        rhs = np.zeros(len(constraints), dtype=np.uint8)
        rhs[i] = 1
        solution = system.solve(rhs)
        if solution is None:
            raise SynthesisError(f"no destabilizer for {code.stabilizer_gens[i].sparse_label()}")
        destabilizers.append(PauliOperator.from_symplectic(solution))
    for i in range(len(destabilizers)):
        for j in range(i + 1, len(destabilizers)):
            if not destabilizers[i].commutes(destabilizers[j]):
                destabilizers[j] = (destabilizers[j] * code.stabilizer_gens[i]).unsigned()
    return destabilizers


def _check_slot_images(x_images: Sequence[PauliOperator], z_images: Sequence[PauliOperator]) -> None:
    for i, x_i in enumerate(x_images):
        for j, z_j in enumerate(z_images):
            if x_i.commutes(z_j) == (i == j):
                raise SynthesisError(
                    f"slot images not canonical: X-image {x_i.sparse_label()} (slot {i}) "
                    f"vs Z-image {z_j.sparse_label()} (slot {j})"
                )
    for images, kind in ((x_images, 'X'), (z_images, 'Z')):
        for i, a in enumerate(images):
            for b in images[i + 1:]:
                if not a.commutes(b):
                    raise SynthesisError(f"{kind}-images {a.sparse_label()} and {b.sparse_label()} anticommute")


def encoding_unitary(code: SubsystemCode, dense_limit: int = DEFAULT_DENSE_LIMIT, tol: float = 1e-9) -> np.ndarray:
    """
    Clifford U with U Z_slot U^dag and U X_slot U^dag equal to the code's generators.

    Slot images: ancilla i -> (destabilizer D_i, S_i), gauge j -> (X'_j, Z'_j),
    logical l -> (Xbar_l, Zbar_l). Column x of U is prod_i Ximage_i^{x_i} applied to
    the joint +1 eigenvector of the Z images.

    Args:
        code: Code to encode
        dense_limit: Largest register realized densely
        tol: Conjugation check tolerance

    Returns:
        2^n x 2^n unitary
    """
    n = code.num_physical
    if n > dense_limit:
        raise DenseLimitError(f"{n} qubits exceeds the dense limit of {dense_limit}")
    destabilizers = _destabilizers(code)
    x_images = destabilizers + [x for x, _ in code.gauge_pairs] + [x for x, _ in code.bare_logical_pairs]
    z_images = list(code.stabilizer_gens) + [z for _, z in code.gauge_pairs] + [z for _, z in code.bare_logical_pairs]
    if len(x_images) != n:
        raise SynthesisError(f"{len(x_images)} slot images for {n} qubits")
    _check_slot_images(x_images, z_images)

    dim = 1 << n
    rng = np.random.default_rng(0)
    state = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    for z in z_images:
        state = 0.5 * (state + z.to_sparse() @ state)
    norm = np.linalg.norm(state)
    if norm < 1e-8:
        raise SynthesisError("Z images admit no common +1 eigenvector")
    state = state / norm
    lead = int(np.flatnonzero(np.abs(state) > 1e-9)[0])
    state = state * (abs(state[lead]) / state[lead])

    x_sparse = [x.to_sparse() for x in x_images]
    unitary = np.zeros((dim, dim), dtype=complex)
    unitary[:, 0] = state
    for column in range(1, dim):
        top = column.bit_length() - 1
        unitary[:, column] = x_sparse[n - 1 - top] @ unitary[:, column ^ (1 << top)]

    columns = np.arange(dim)
    for slot in range(n):
        bit = 1 << (n - 1 - slot)
        signs = 1 - 2 * ((columns & bit) != 0)
        z_error = np.max(np.abs(z_images[slot].to_sparse() @ unitary - unitary * signs))
        x_error = np.max(np.abs(x_sparse[slot] @ unitary - unitary[:, columns ^ bit]))
        if max(z_error, x_error) > tol:
            raise SynthesisError(f"conjugation check failed on slot {slot}: residual {max(z_error, x_error):.3e}")
    unitarity = np.max(np.abs(unitary.conj().T @ unitary - np.eye(dim)))
    if unitarity > tol:
        raise SynthesisError(f"encoding map is not unitary: residual {unitarity:.3e}")
    logger.info(f"Encoding unitary for {code.name}: slots ancilla={code.s} gauge={code.r} logical={code.k}")
    return unitary


# -- penalties ----------------------------------------------------------------

def gauge_sum_penalty(code: SubsystemCode, coefficients: Optional[Sequence[float]] = None) -> Hamiltonian:
    """
    H_p = sum_i c_i g_i over the gauge generators (all c_i = 1 by default).
    """
    coefficients = [1.0] * len(code.gauge_gens) if coefficients is None else list(coefficients)
    if len(coefficients) != len(code.gauge_gens):
        raise CodeConstructionError(f"{len(coefficients)} coefficients for {len(code.gauge_gens)} gauge generators")
    return Hamiltonian.from_terms(code.num_physical, zip(coefficients, code.gauge_gens))


def stabilizer_penalty(code: SubsystemCode, alphas: Optional[Sequence[float]] = None) -> Hamiltonian:
    """
    H_p = -sum_i alpha_i S_i, lowest on the codespace when every alpha_i > 0.
    """
    alphas = [1.0] * code.s if alphas is None else list(alphas)
    if len(alphas) != code.s:
        raise CodeConstructionError(f"{len(alphas)} alphas for {code.s} stabilizers")
    return Hamiltonian.from_terms(code.num_physical, ((-alpha, s) for alpha, s in zip(alphas, code.stabilizer_gens)))


def projector_penalty(code: SubsystemCode) -> Hamiltonian:
    """
    H_p = I - P_C, expanded as a Pauli sum over the stabilizer group.
    """
    n = code.num_physical
    h = Hamiltonian.identity(n)
    scale = 0.5 ** code.s
    for _, element in group_elements(code.stabilizer_gens, n, limit=max(DEFAULT_ROW_LIMIT, code.s)):
        h.add_term(-scale, element)
    return h


def nonadditive_penalty(p: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """
    H_p = -P for an arbitrary orthogonal projector P.
    """
    p = np.asarray(p)
    if np.max(np.abs(p @ p - p)) > tol or np.max(np.abs(p - p.conj().T)) > tol:
        raise NotProjectorError("nonadditive penalty needs an orthogonal projector")
    return -p


def chain_penalty(num_logical: int, zz_sign: int = -1) -> Hamiltonian:
    """
    Chain-code penalty -sum X_{2i-1}X_{2i} + zz_sign*(sum Z_{2i}Z_{2i+1} + Z_1 Z_{2N+2}).

    Args:
        num_logical: N >= 1
        zz_sign: -1 keeps the ground space inside the codespace; +1 is the unitarily
            equivalent form obtained by conjugating with X on the odd qubits

    Returns:
        Penalty on 2N+2 qubits
    """
    if zz_sign not in (-1, 1):
        raise CodeConstructionError(f"zz_sign must be +1 or -1, got {zz_sign}")
    if num_logical < 1:
        raise CodeConstructionError(f"chain penalty needs N >= 1, got {num_logical}")
    a = num_logical + 1
    n = 2 * a
    h = Hamiltonian(n)
    for i in range(1, a + 1):
        h.add_term(-1.0, _pauli(n, 'X', (2 * i - 1, 2 * i)))
    for i in range(1, a):
        h.add_term(float(zz_sign), _pauli(n, 'Z', (2 * i, 2 * i + 1)))
    h.add_term(float(zz_sign), _pauli(n, 'Z', (1, n)))
    return h


# -- logical states -----------------------------------------------------------

def logical_bloch_operator(code: SubsystemCode, logical: int, direction: Sequence[float],
                           dense_limit: int = DEFAULT_DENSE_LIMIT) -> np.ndarray:
    x, y, z = (float(c) for c in direction)
    return (x * code.logical_x(logical).to_dense(dense_limit)
            + y * code.logical_y(logical).to_dense(dense_limit)
            + z * code.logical_z(logical).to_dense(dense_limit))


def _restrict(basis: np.ndarray, operator: np.ndarray, target: Optional[float], tol: float) -> np.ndarray:
    reduced = basis.conj().T @ operator @ basis
    reduced = 0.5 * (reduced + reduced.conj().T)
    values, vectors = np.linalg.eigh(reduced)
    if target is None:
        keep = values <= values[0] + tol
    else:
        keep = np.abs(values - target) <= tol
    return basis @ vectors[:, keep]


def logical_state(code: SubsystemCode, bloch_by_logical: Optional[Dict[int, Sequence[float]]] = None,
                  penalty=None, correlations: Sequence[Tuple[PauliOperator, float]] = (),
                  dense_limit: int = DEFAULT_DENSE_LIMIT, tol: float = 1e-8) -> np.ndarray:
    """
    Pure codespace state with prescribed logical Bloch directions and logical correlations,
    gauge subsystem in the lowest-energy configuration of the penalty.

    Args:
        code: The code
        bloch_by_logical: 1-based logical index -> unit Bloch vector (x, y, z)
        penalty: Hamiltonian or dense matrix whose codespace ground space fixes the gauge subsystem
        correlations: (Pauli on the logical register, eigenvalue +-1) constraints, e.g. (X2 X3, -1)
        dense_limit: Largest register realized densely
        tol: Eigenvalue matching tolerance

    Returns:
        Normalized state vector on the physical register
    """
    projector = codespace_projector(code, dense_limit)
    values, vectors = np.linalg.eigh(projector)
    basis = vectors[:, values > 0.5].astype(complex)
    for logical, direction in sorted((bloch_by_logical or {}).items()):
        if np.linalg.norm(direction) < 1e-12:
            raise EncodingError(f"logical {logical}: Bloch vector must be nonzero")
        unit = np.asarray(direction, dtype=float) / np.linalg.norm(direction)
        basis = _restrict(basis, logical_bloch_operator(code, logical, unit, dense_limit), 1.0, tol)
    for pauli, eigenvalue in correlations:
        physical = logical_operator(code, pauli).to_dense(dense_limit)
        basis = _restrict(basis, physical, float(eigenvalue), tol)
    if basis.shape[1] == 0:
        raise EncodingError("logical constraints admit no codespace state")
    if penalty is not None:
        matrix = penalty.to_matrix(dense_limit=dense_limit) if isinstance(penalty, Hamiltonian) else np.asarray(penalty)
        basis = _restrict(basis, matrix, None, tol)
    if basis.shape[1] > 1:
        logger.debug(f"Logical state underdetermined ({basis.shape[1]} dims); taking the first basis vector")
    state = basis[:, 0]
    return state / np.linalg.norm(state)


def logical_bloch_vector(code: SubsystemCode, rho: np.ndarray, logical: int, num_bath_qubits: int = 0,
                         dense_limit: int = DEFAULT_DENSE_LIMIT) -> np.ndarray:
    """
    Expectations (<Xbar>, <Ybar>, <Zbar>) of one logical qubit on a system(+bath) state.

    Args:
        code: The code
        rho: Density matrix or state vector on system (x) bath
        logical: 1-based logical index
        num_bath_qubits: Trailing bath qubits
        dense_limit: Largest register realized densely

    Returns:
        Real 3-vector, normalized by the state's trace
    """
    rho = np.asarray(rho)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    if code.num_physical + num_bath_qubits > dense_limit:
        raise DenseLimitError("register exceeds the dense limit")
    bath_identity = np.eye(1 << num_bath_qubits)
    trace = float(np.real(np.trace(rho)))
    vector = []
    for op in (code.logical_x(logical), code.logical_y(logical), code.logical_z(logical)):
        full = np.kron(op.to_dense(dense_limit), bath_identity)
        vector.append(float(np.real(np.trace(full @ rho))) / trace)
    return np.array(vector)
