"""
Module for exact n-qubit Pauli group arithmetic and linear algebra over F2.

Pauli operators are stored in symplectic form: two integer bitmasks (bit j is
qubit j+1) and a phase exponent k, with

    P = i^k * sigma(x_1, z_1) (x) ... (x) sigma(x_n, z_n)

where sigma(0,0)=I, sigma(1,0)=X, sigma(0,1)=Z and sigma(1,1)=Y. The phase is
measured against the Hermitian letters, so P is Hermitian iff k is 0 or 2.
Qubit 1 is the leftmost Kronecker factor of the dense realization.
"""

import logging
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

DEFAULT_DENSE_LIMIT = 14
DEFAULT_ROW_LIMIT = 20

_LETTER_BITS = {'I': (0, 0), 'X': (1, 0), 'Z': (0, 1), 'Y': (1, 1)}
_BITS_LETTER = {bits: letter for letter, bits in _LETTER_BITS.items()}
_SIGN_PHASE = {'+': 0, '': 0, '+i': 1, 'i': 1, '-': 2, '-i': 3}
_PHASE_SIGN = {0: '+', 1: '+i', 2: '-', 3: '-i'}
_SPARSE_TOKEN = re.compile(r'^([IXYZ])(\d+)$')


class SubpenError(Exception):
    """Base class for every error raised by this package."""


class SizeMismatchError(SubpenError):
    """Operands act on different numbers of qubits or have incompatible shapes."""


class DenseLimitError(SubpenError):
    """A dense realization was requested above the configured qubit limit."""


class ParseError(SubpenError):
    """Text could not be parsed as a Pauli, a binary matrix or a Hamiltonian."""


class CodeConstructionError(SubpenError):
    """A code could not be built from the supplied matrix or generators."""


class EncodingError(SubpenError):
    """An operator could not be mapped onto the logical operators of a code."""


class SynthesisError(SubpenError):
    """The encoding unitary could not be synthesized from the generator sets."""


class NotHermitianError(SubpenError):
    """An operator that must be Hermitian is not."""


class NotProjectorError(SubpenError):
    """An operator that must be an orthogonal projector is not."""


class ConditionPreconditionError(SubpenError):
    """The inputs of a condition check violate its stated precondition."""


class BlockOverlapError(SubpenError):
    """Blocks that must act on disjoint qubits overlap."""


class InvalidDensityOperatorError(SubpenError):
    """A matrix is not a valid (possibly subnormalized) density operator."""


class ConfigError(SubpenError):
    """An experiment or application configuration is unusable."""


def _popcount(value: int) -> int:
    return bin(value).count('1')


@dataclass(frozen=True)
class PauliOperator:
    """
    An n-qubit Pauli operator with an exact i^k phase.
    """

    num_qubits: int
    x_mask: int = 0
    z_mask: int = 0
    phase_exponent: int = 0

    def __post_init__(self):
        if self.num_qubits < 1:
            raise ValueError(f"num_qubits must be positive, got {self.num_qubits}")
        full = (1 << self.num_qubits) - 1
        if self.x_mask & ~full or self.z_mask & ~full:
            raise ValueError(f"masks exceed {self.num_qubits} qubits")
        object.__setattr__(self, 'phase_exponent', self.phase_exponent % 4)

    # -- construction -------------------------------------------------------

    @classmethod
    def identity(cls, num_qubits: int) -> 'PauliOperator':
        return cls(num_qubits)

    @classmethod
    def single(cls, num_qubits: int, qubit: int, letter: str) -> 'PauliOperator':
        """
        Build a single-qubit Pauli embedded in n qubits.

        Args:
            num_qubits: Total number of qubits
            qubit: 1-based qubit index
            letter: One of I, X, Y, Z

        Returns:
            The embedded Pauli operator with phase +1
        """
        if not 1 <= qubit <= num_qubits:
            raise ParseError(f"qubit {qubit} outside 1..{num_qubits}")
        x_bit, z_bit = _LETTER_BITS[letter.upper()]
        bit = 1 << (qubit - 1)
        return cls(num_qubits, bit if x_bit else 0, bit if z_bit else 0)

    @classmethod
    def from_label(cls, label: str) -> 'PauliOperator':
        """
        Parse a dense label such as "+XIZY" or "-iYY".

        Args:
            label: Optional sign (+, -, +i, -i, i) followed by one letter per qubit

        Returns:
            Parsed Pauli operator
        """
        text = label.strip()
        match = re.match(r'^([+-]?i?)([IXYZ]+)$', text)
        if not match:
            raise ParseError(f"Not a Pauli label: {label!r}")
        sign, letters = match.groups()
        x_mask = z_mask = 0
        for j, letter in enumerate(letters):
            x_bit, z_bit = _LETTER_BITS[letter]
            x_mask |= x_bit << j
            z_mask |= z_bit << j
        return cls(len(letters), x_mask, z_mask, _SIGN_PHASE[sign])

    @classmethod
    def from_sparse(cls, text: str, num_qubits: int) -> 'PauliOperator':
        """
        Parse the sparse 1-indexed form "X1 Z3 Y4" (optionally signed, "-X1 X2").

        Args:
            text: Sparse Pauli text; "I" or an empty string is the identity
            num_qubits: Total number of qubits

        Returns:
            Parsed Pauli operator
        """
        body = text.strip()
        phase = 0
        sign_match = re.match(r'^([+-]i?|i)\s*', body)
        if sign_match:
            phase = _SIGN_PHASE[sign_match.group(1)]
            body = body[sign_match.end():]
        result = cls(num_qubits, phase_exponent=phase)
        if body in ('', 'I'):
            return result
        seen = set()
        for token in body.split():
            token_match = _SPARSE_TOKEN.match(token)
            if not token_match:
                raise ParseError(f"Bad sparse Pauli token {token!r} in {text!r}")
            letter, index = token_match.group(1), int(token_match.group(2))
            if index in seen:
                raise ParseError(f"Qubit {index} repeated in {text!r}")
            seen.add(index)
            if letter != 'I':
                result = result * cls.single(num_qubits, index, letter)
        return result

    @classmethod
    def from_symplectic(cls, vector: Sequence[int], phase_exponent: int = 0) -> 'PauliOperator':
        """
        Build a Pauli from a 2n-bit [x | z] vector.
        """
        bits = np.asarray(vector, dtype=np.uint8) & 1
        if bits.size % 2:
            raise SizeMismatchError(f"symplectic vector of odd length {bits.size}")
        n = bits.size // 2
        x_mask = sum(1 << j for j in range(n) if bits[j])
        z_mask = sum(1 << j for j in range(n) if bits[n + j])
        return cls(n, x_mask, z_mask, phase_exponent)

    # -- printing -----------------------------------------------------------

    def letters(self) -> str:
        return ''.join(
            _BITS_LETTER[((self.x_mask >> j) & 1, (self.z_mask >> j) & 1)]
            for j in range(self.num_qubits)
        )

    def label(self) -> str:
        return _PHASE_SIGN[self.phase_exponent] + self.letters()

    def sparse_label(self) -> str:
        """
        Sparse 1-indexed text, e.g. "X1 Z3 Y4" or "-X1 X2"; identity prints as "I".
        """
        tokens = [f"{letter}{j + 1}" for j, letter in enumerate(self.letters()) if letter != 'I']
        body = ' '.join(tokens) if tokens else 'I'
        sign = '' if self.phase_exponent == 0 else _PHASE_SIGN[self.phase_exponent]
        return f"{sign}{body}"

    def __str__(self) -> str:
        return self.label()

    # -- algebra ------------------------------------------------------------

    def _check_size(self, other: 'PauliOperator') -> None:
        if self.num_qubits != other.num_qubits:
            raise SizeMismatchError(
                f"Pauli operators act on {self.num_qubits} and {other.num_qubits} qubits"
            )

    def __mul__(self, other: 'PauliOperator') -> 'PauliOperator':
        self._check_size(other)
        full = (1 << self.num_qubits) - 1
        x1, z1, x2, z2 = self.x_mask, self.z_mask, other.x_mask, other.z_mask
        y1, xo1, zo1 = x1 & z1, x1 & ~z1 & full, z1 & ~x1 & full
        y2, xo2, zo2 = x2 & z2, x2 & ~z2 & full, z2 & ~x2 & full
        # letter products: XY=iZ, YZ=iX, ZX=iY and the reversed orders give -i
        cyclic = _popcount(xo1 & y2) + _popcount(y1 & zo2) + _popcount(zo1 & xo2)
        anticyclic = _popcount(y1 & xo2) + _popcount(zo1 & y2) + _popcount(xo1 & zo2)
        phase = self.phase_exponent + other.phase_exponent + cyclic - anticyclic
        return PauliOperator(self.num_qubits, x1 ^ x2, z1 ^ z2, phase)

    def commutes(self, other: 'PauliOperator') -> bool:
        self._check_size(other)
        overlap = (self.x_mask & other.z_mask) ^ (self.z_mask & other.x_mask)
        return _popcount(overlap) % 2 == 0

    def weight(self) -> int:
        return _popcount(self.x_mask | self.z_mask)

    def support(self) -> Tuple[int, ...]:
        """
        1-based qubit indices where the operator acts nontrivially.
        """
        mask = self.x_mask | self.z_mask
        return tuple(j + 1 for j in range(self.num_qubits) if (mask >> j) & 1)

    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    def is_hermitian(self) -> bool:
        return self.phase_exponent in (0, 2)

    def with_phase(self, phase_exponent: int) -> 'PauliOperator':
        return PauliOperator(self.num_qubits, self.x_mask, self.z_mask, phase_exponent)

    def unsigned(self) -> 'PauliOperator':
        return self.with_phase(0)

    @property
    def sign(self) -> complex:
        return 1j ** self.phase_exponent

    def symplectic_vector(self) -> np.ndarray:
        n = self.num_qubits
        vec = np.zeros(2 * n, dtype=np.uint8)
        for j in range(n):
            vec[j] = (self.x_mask >> j) & 1
            vec[n + j] = (self.z_mask >> j) & 1
        return vec

    def embed(self, num_qubits: int, offset: int = 0) -> 'PauliOperator':
        """
        Place this operator on qubits offset+1..offset+n of a larger register.
        """
        if offset + self.num_qubits > num_qubits:
            raise SizeMismatchError(f"cannot embed {self.num_qubits} qubits at offset {offset} into {num_qubits}")
        return PauliOperator(num_qubits, self.x_mask << offset, self.z_mask << offset, self.phase_exponent)

    # -- matrices -----------------------------------------------------------

    def to_sparse(self) -> sp.csr_matrix:
        """
        Sparse CSR realization; one nonzero per column.

        Returns:
            2^n x 2^n complex CSR matrix
        """
        n = self.num_qubits
        dim = 1 << n
        x_flip = sum(1 << (n - 1 - j) for j in range(n) if (self.x_mask >> j) & 1)
        z_bits = [n - 1 - j for j in range(n) if (self.z_mask >> j) & 1]
        cols = np.arange(dim, dtype=np.int64)
        parity = np.zeros(dim, dtype=np.int64)
        for bit in z_bits:
            parity ^= (cols >> bit) & 1
        num_y = _popcount(self.x_mask & self.z_mask)
        scalar = 1j ** ((self.phase_exponent + num_y) % 4)
        values = scalar * (1 - 2 * parity).astype(complex)
        rows = cols ^ x_flip
        return sp.csr_matrix((values, (rows, cols)), shape=(dim, dim))

    def to_dense(self, dense_limit: int = DEFAULT_DENSE_LIMIT) -> np.ndarray:
        if self.num_qubits > dense_limit:
            raise DenseLimitError(
                f"{self.num_qubits} qubits exceeds the dense limit of {dense_limit}"
            )
        return self.to_sparse().toarray()


def multiply(p: PauliOperator, q: PauliOperator) -> PauliOperator:
    return p * q


def commutes(p: PauliOperator, q: PauliOperator) -> bool:
    return p.commutes(q)


def weight(p: PauliOperator) -> int:
    return p.weight()


def to_dense(p: PauliOperator, dense_limit: int = DEFAULT_DENSE_LIMIT) -> np.ndarray:
    return p.to_dense(dense_limit)


def product(paulis: Iterable[PauliOperator], num_qubits: int) -> PauliOperator:
    """
    Ordered product of a sequence of Paulis (left to right).
    """
    result = PauliOperator.identity(num_qubits)
    for pauli in paulis:
        result = multiply(result, pauli)
    return result


def group_elements(generators: Sequence[PauliOperator], num_qubits: int,
                   limit: int = DEFAULT_ROW_LIMIT) -> Iterator[Tuple[int, PauliOperator]]:
    """
    Enumerate all 2^m products of m generators, yielding (subset mask, product).

    Products are formed in generator order, so phases are deterministic.

    Args:
        generators: Generators to combine
        num_qubits: Register size
        limit: Maximum number of generators accepted

    Returns:
        Iterator over (bitmask of included generators, product)
    """
    if len(generators) > limit:
        raise SubpenError(f"{len(generators)} generators exceeds enumeration limit {limit}")
    for subset in range(1 << len(generators)):
        chosen = (g for i, g in enumerate(generators) if (subset >> i) & 1)
        yield subset, product(chosen, num_qubits)


def symplectic_product(u: np.ndarray, v: np.ndarray) -> int:
    """
    Symplectic form x_u.z_v + z_u.x_v (mod 2) on 2n-bit vectors.
    """
    n = u.size // 2
    return int((u[:n] @ v[n:] + u[n:] @ v[:n]) % 2)


@dataclass(frozen=True, eq=False)
class BinaryMatrix:
    """
    A matrix over F2 backed by a uint8 numpy array.
    """

    entries: np.ndarray

    def __post_init__(self):
        array = np.atleast_2d(np.asarray(self.entries, dtype=np.int64)) & 1
        object.__setattr__(self, 'entries', array.astype(np.uint8))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> 'BinaryMatrix':
        return cls(np.array(rows, dtype=np.int64))

    @classmethod
    def identity(cls, size: int) -> 'BinaryMatrix':
        return cls(np.eye(size, dtype=np.int64))

    @classmethod
    def from_text(cls, text: str) -> 'BinaryMatrix':
        """
        Parse one row per line of characters {0,1}; blank lines and '#' comments are skipped.

        Args:
            text: File contents

        Returns:
            Parsed binary matrix
        """
        rows = []
        for number, raw in enumerate(text.splitlines(), 1):
            line = raw.split('#', 1)[0].strip().replace(' ', '')
            if not line:
                continue
            if set(line) - {'0', '1'}:
                raise ParseError(f"line {number}: only 0 and 1 allowed, got {raw!r}")
            rows.append([int(ch) for ch in line])
        if not rows:
            raise ParseError("matrix text contains no rows")
        if len({len(r) for r in rows}) != 1:
            raise ParseError("matrix rows have different lengths")
        return cls.from_rows(rows)

    def to_text(self) -> str:
        return '\n'.join(''.join(str(int(b)) for b in row) for row in self.entries) + '\n'

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    def __eq__(self, other) -> bool:
        return isinstance(other, BinaryMatrix) and np.array_equal(self.entries, other.entries)

    def __hash__(self) -> int:
        return hash((self.entries.shape, self.entries.tobytes()))

    def transpose(self) -> 'BinaryMatrix':
        return BinaryMatrix(self.entries.T)

    def rref(self) -> Tuple['BinaryMatrix', List[int]]:
        """
        Reduced row echelon form over F2.

        Returns:
            Tuple of (reduced matrix, pivot column indices)
        """
        a = self.entries.copy()
        m, n = a.shape
        pivots = []
        r = 0
        for c in range(n):
            if r >= m:
                break
            candidates = np.nonzero(a[r:, c])[0]
            if candidates.size == 0:
                continue
            p = r + int(candidates[0])
            if p != r:
                a[[r, p], :] = a[[p, r], :]
            ones = np.nonzero(a[:, c])[0]
            ones = ones[ones != r]
            if ones.size:
                a[ones, :] ^= a[r, :]
            pivots.append(c)
            r += 1
        return BinaryMatrix(a), pivots

    def rank(self) -> int:
        return len(self.rref()[1])

    def row_basis(self) -> 'BinaryMatrix':
        reduced, pivots = self.rref()
        return BinaryMatrix(reduced.entries[:len(pivots)]) if pivots else BinaryMatrix(np.zeros((0, self.cols)))

    def nullspace(self) -> 'BinaryMatrix':
        """
        Basis of {x : M x = 0} as the rows of a binary matrix.
        """
        reduced, pivots = self.rref()
        n = self.cols
        free = [c for c in range(n) if c not in pivots]
        basis = np.zeros((len(free), n), dtype=np.uint8)
        for t, f in enumerate(free):
            basis[t, f] = 1
            for r, pc in enumerate(pivots):
                basis[t, pc] = reduced.entries[r, f]
        return BinaryMatrix(basis) if free else BinaryMatrix(np.zeros((0, n)))

    def solve(self, b: Sequence[int]) -> Optional[np.ndarray]:
        """
        Find x with M x = b over F2.

        Args:
            b: Right-hand side of length rows

        Returns:
            One solution vector, or None if the system is inconsistent
        """
        rhs = np.asarray(b, dtype=np.uint8).reshape(-1, 1) & 1
        if rhs.shape[0] != self.rows:
            raise SizeMismatchError(f"rhs length {rhs.shape[0]} != rows {self.rows}")
        augmented, pivots = BinaryMatrix(np.hstack([self.entries, rhs])).rref()
        if self.cols in pivots:
            return None
        x = np.zeros(self.cols, dtype=np.uint8)
        for r, pc in enumerate(pivots):
            x[pc] = augmented.entries[r, -1]
        return x

    def in_rowspace(self, v: Sequence[int]) -> bool:
        return self.transpose().solve(v) is not None

    def min_nonzero_weight_rowspace(self, row_limit: int = DEFAULT_ROW_LIMIT) -> int:
        """
        Minimum Hamming weight over all nonzero F2 combinations of rows.

        Args:
            row_limit: Largest number of rows accepted for enumeration

        Returns:
            Minimum weight, or 0 when the row space is trivial
        """
        if self.rows > row_limit:
            raise SubpenError(f"{self.rows} rows exceeds the enumeration limit of {row_limit}")
        basis = self.row_basis()
        packed = [int(''.join(str(int(b)) for b in row), 2) for row in basis.entries]
        if not packed:
            return 0
        best = self.cols + 1
        current = 0
        # Gray-code walk: each step toggles one basis row
        for step in range(1, 1 << len(packed)):
            flip = (step & -step).bit_length() - 1
            current ^= packed[flip]
            best = min(best, _popcount(current))
        return best


def f2_rank(m: BinaryMatrix) -> int:
    return m.rank()


def min_nonzero_weight_rowspace(m: BinaryMatrix, row_limit: int = DEFAULT_ROW_LIMIT) -> int:
    return m.min_nonzero_weight_rowspace(row_limit)


def symplectic_matrix(paulis: Sequence[PauliOperator], num_qubits: int) -> BinaryMatrix:
    """
    Stack Paulis as rows of a [x | z] binary matrix.
    """
    if not paulis:
        return BinaryMatrix(np.zeros((0, 2 * num_qubits)))
    for p in paulis:
        if p.num_qubits != num_qubits:
            raise SizeMismatchError(f"Pauli on {p.num_qubits} qubits in a {num_qubits}-qubit set")
    return BinaryMatrix(np.array([p.symplectic_vector() for p in paulis]))


def commutation_matrix(rows: Sequence[PauliOperator], cols: Sequence[PauliOperator]) -> BinaryMatrix:
    """
    a_ij = 1 iff rows[i] anticommutes with cols[j].
    """
    table = [[0 if r.commutes(c) else 1 for c in cols] for r in rows]
    if not rows or not cols:
        return BinaryMatrix(np.zeros((len(rows), len(cols))))
    return BinaryMatrix.from_rows(table)
