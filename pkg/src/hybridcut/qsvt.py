"""Block-encodings and ideal singular value transformations.

A block-encoding is a unitary ``U`` with projectors ``left`` and ``right`` such
that ``A = left @ U @ right``.  The transformation of a polynomial ``P`` is done
at the spectral level: we take the SVD of ``A`` restricted to the projector
images, apply ``P`` to the singular values, and charge ``degree(P)`` calls to
``U`` per application.  A unitary completion of the transformed block is only
materialized on request.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.linalg import hadamard, null_space

from .errors import InvalidOperator, InvalidSize
from .ledger import QueryLedger
from .polynomials import BoundedPolynomial

MAX_DIMENSION = 2**14
TOL = 1e-10


@dataclass(frozen=True)
class OracleInput:
    """Input bits x_1..x_N, N a power of two, accessed only through queries."""

    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise InvalidSize("input bits must be 0 or 1")
        n = len(bits)
        if n < 1 or n & (n - 1):
            raise InvalidSize(f"input size {n} is not a power of two")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_weight(cls, n: int, weight: int, rng=None) -> OracleInput:
        bits = np.zeros(n, dtype=int)
        if rng is None:
            bits[:weight] = 1
        else:
            bits[np.random.default_rng(rng).choice(n, size=weight, replace=False)] = 1
        return cls(tuple(bits))

    @property
    def size(self) -> int:
        return len(self.bits)

    @property
    def num_qubits(self) -> int:
        return self.size.bit_length() - 1

    @property
    def weight(self) -> int:
        return sum(self.bits)

    def negated(self) -> OracleInput:
        return OracleInput(tuple(1 - b for b in self.bits))


def _basis_of(projector: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the image of a projector."""
    diag = np.diagonal(projector)
    if np.count_nonzero(projector) == np.count_nonzero(diag):
        return np.eye(projector.shape[0])[:, diag.real > 0.5]
    w, v = np.linalg.eigh((projector + projector.conj().T) / 2)
    return v[:, w > 0.5]


class BlockEncoding:
    """Unitary ``U`` with projectors so that ``left @ U @ right`` is the encoded block.

    Either ``unitary`` is given, or ``block`` is given and a unitary completion
    with the same projectors is built lazily (the transformed encodings
    returned by :func:`apply_qsvt`).
    """

    def __init__(
        self,
        left_projector: np.ndarray,
        right_projector: np.ndarray,
        queries_per_call: int,
        unitary: np.ndarray | None = None,
        block: np.ndarray | None = None,
    ):
        if unitary is None and block is None:
            raise ValueError("need a unitary or a block")
        self.left_projector = np.asarray(left_projector)
        self.right_projector = np.asarray(right_projector)
        self.queries_per_call = int(queries_per_call)
        if unitary is not None:
            self.__dict__["unitary"] = np.asarray(unitary)
        if block is not None:
            self.__dict__["block"] = np.asarray(block)
        if self.dimension > MAX_DIMENSION:
            raise InvalidSize(f"dimension {self.dimension} exceeds cap {MAX_DIMENSION}")

    @property
    def dimension(self) -> int:
        return self.left_projector.shape[0]

    @cached_property
    def block(self) -> np.ndarray:
        return self.left_projector @ self.unitary @ self.right_projector

    @cached_property
    def _bases(self) -> tuple[np.ndarray, np.ndarray]:
        return _basis_of(self.left_projector), _basis_of(self.right_projector)

    @cached_property
    def compressed(self) -> np.ndarray:
        """The block as a matrix from image(right) to image(left)."""
        left, right = self._bases
        return left.conj().T @ self.block @ right

    @cached_property
    def svd(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Full-space singular triples (W, s, V) with block = W diag(s) V^dagger.

        Zero singular values of the compressed block are kept: a polynomial
        with P(0) != 0 acts on them.
        """
        left, right = self._bases
        w, s, vh = np.linalg.svd(self.compressed, full_matrices=False)
        return left @ w, s, right @ vh.conj().T

    @property
    def singular_values(self) -> np.ndarray:
        return self.svd[1]

    @cached_property
    def unitary(self) -> np.ndarray:
        return _unitary_completion(self.block, self.left_projector, self.right_projector)


def _unitary_completion(block, left_projector, right_projector) -> np.ndarray:
    """A unitary U with left @ U @ right == block for a contraction ``block``.

    The image of ``right`` is sent to block + C where C maps into the kernel
    of ``left`` with C^dagger C = I - block^dagger block; the remaining
    columns are any orthonormal completion.
    """
    dim = block.shape[0]
    left_basis = _basis_of(left_projector)
    right_basis = _basis_of(right_projector)
    ker_left = null_space(left_basis.conj().T) if left_basis.shape[1] < dim else np.zeros((dim, 0))
    ker_right = null_space(right_basis.conj().T) if right_basis.shape[1] < dim else np.zeros((dim, 0))
    b = block @ right_basis  # dim x r
    gram = np.eye(right_basis.shape[1]) - b.conj().T @ b
    ev, evec = np.linalg.eigh((gram + gram.conj().T) / 2)
    root = evec @ np.diag(np.sqrt(np.clip(ev, 0, None))) @ evec.conj().T
    if ker_left.shape[1] < root.shape[0]:
        raise InvalidOperator("not enough room outside the left projector to complete the block")
    cols = b + ker_left[:, : root.shape[0]] @ root
    rest = null_space(cols.conj().T) if cols.shape[1] < dim else np.zeros((dim, 0))
    return cols @ right_basis.conj().T + rest @ ker_right.conj().T


def _basis_projector(dim: int, indices) -> np.ndarray:
    p = np.zeros((dim, dim))
    p[indices, indices] = 1.0
    return p


@lru_cache(maxsize=32)
def _spread(n: int) -> np.ndarray:
    """H^{(x)n} (x) I, shared by every input of size n."""
    u = np.kron(hadamard(n) / np.sqrt(n), np.eye(2))
    u.setflags(write=False)
    return u


def _oracle_unitary(inp: OracleInput) -> np.ndarray:
    """U = O_x (H^{(x)n} (x) I): query register index i, answer qubit last."""
    n = inp.size
    u = _spread(n)
    # O_x |i>|b> = |i>|b xor x_i>: swap the two rows of every marked index.
    perm = np.arange(2 * n)
    for i, b in enumerate(inp.bits):
        if b:
            perm[2 * i], perm[2 * i + 1] = 2 * i + 1, 2 * i
    return u[perm]


def _scalar_encoding(inp: OracleInput, flag: int) -> BlockEncoding:
    dim = 2 * inp.size
    if dim > MAX_DIMENSION:
        raise InvalidSize(f"dimension {dim} exceeds cap {MAX_DIMENSION}")
    right = _basis_projector(dim, [0])
    left = _basis_projector(dim, np.arange(flag, dim, 2))
    return BlockEncoding(left, right, 1, unitary=_oracle_unitary(inp))


def threshold_block_encoding(inp: OracleInput) -> BlockEncoding:
    """Encodes sqrt(|x|/N): right = |0^{n+1}><0^{n+1}|, left = I (x) |1><1|."""
    return _scalar_encoding(inp, 1)


def complement_block_encoding(inp: OracleInput) -> BlockEncoding:
    """Same unitary, left projector I (x) |0><0|: encodes sqrt((N-|x|)/N)."""
    return _scalar_encoding(inp, 0)


def scalar_value(be: BlockEncoding) -> float:
    """The single singular value of a rank-one scalar encoding."""
    return float(be.singular_values[0])


def nand_block_encoding(H: np.ndarray, tree_size: int | None = None) -> BlockEncoding:
    """Encodes H/3 with one ancilla qubit: U = [[A, S], [S, -A]], S = sqrt(I - A^2).

    Both projectors are |0><0| on the ancilla (x) identity on the graph register.
    One application of U is charged as a single oracle query.
    """
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise InvalidOperator("H must be square")
    if not np.allclose(H, H.T, atol=1e-12):
        raise InvalidOperator("H must be symmetric")
    if np.max(np.abs(H), initial=0.0) > 1 + 1e-12:
        raise InvalidOperator("entries of H must be bounded by 1")
    if np.max(np.count_nonzero(H, axis=1), initial=0) > 3:
        raise InvalidOperator("H must have row degree at most 3")
    n = H.shape[0]
    if 2 * n > MAX_DIMENSION:
        raise InvalidSize(f"dimension {2 * n} exceeds cap {MAX_DIMENSION}")
    a = H / 3
    w, v = np.linalg.eigh(a)
    s = v @ np.diag(np.sqrt(np.clip(1 - w**2, 0, None))) @ v.T
    u = np.block([[a, s], [s, -a]])
    proj = np.zeros((2 * n, 2 * n))
    proj[:n, :n] = np.eye(n)
    return BlockEncoding(proj, proj, 1, unitary=u)


def apply_qsvt(be: BlockEncoding, p: BoundedPolynomial, cost_multiplier: int = 1) -> BlockEncoding:
    """Block-encoding of P^(SV)(A) = sum_i P(s_i) |w_i><v_i| with the same projectors.

    Charged ``cost_multiplier * degree(P)`` calls to ``U`` per application
    (at least one call, so constants are still a single query to build).
    """
    w, s, v = be.svd
    block = (w * p(s)) @ v.conj().T
    calls = max(1, cost_multiplier * p.degree)
    out = BlockEncoding(
        be.left_projector,
        be.right_projector,
        calls * be.queries_per_call,
        block=block,
    )
    out.__dict__["svd"] = (w, p(s), v)
    return out


def flag_probability(be: BlockEncoding, state: np.ndarray) -> float:
    """Probability of landing in image(left) after applying U to ``state``."""
    amp = be.block @ np.asarray(state)
    return float(min(1.0, np.vdot(amp, amp).real))


def sample_flag(
    be: BlockEncoding,
    initial_state: np.ndarray,
    shots: int,
    ledger: QueryLedger,
    rng,
) -> tuple[int, QueryLedger]:
    """Measure the flag ``shots`` times; each shot is one circuit on the ledger."""
    state = np.asarray(initial_state)
    if np.linalg.norm(be.right_projector @ state - state) > TOL:
        raise ValueError("initial state must lie in the image of the right projector")
    ledger = ledger.record(be.queries_per_call, shots)
    prob = flag_probability(be, state)
    ones = int(np.random.default_rng(rng).binomial(shots, prob))
    return ones, ledger


def zero_state(be: BlockEncoding) -> np.ndarray:
    """|0...0>, the standard input for scalar encodings."""
    e = np.zeros(be.dimension)
    e[0] = 1.0
    return e
