"""
Spin Hilbert space - Zeeman product basis and spin-1/2 operators.

Basis convention: index b is a bit pattern, bit i set means spin i is up.
Operators use the spin-1/2 normalisation (eigenvalues ±1/2).
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import reduce
from typing import Optional, Tuple, Union

import numpy as np
from scipy import sparse

from src.utils.errors import OperatorKindError, ShapeError, SiteIndexError, SizeError

DEFAULT_MAX_SPINS = 14

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10

Matrix = Union[np.ndarray, sparse.spmatrix]


class OperatorKind(Enum):
    """Tag describing what an OperatorMatrix is expected to satisfy."""
    HERMITIAN = "hermitian"
    UNITARY = "unitary"
    GENERAL = "general"


class Axis(Enum):
    X = "x"
    Y = "y"
    Z = "z"


# 1スピン演算子 (b=0: down, b=1: up)
SINGLE_SPIN_MATRICES = {
    Axis.X: np.array([[0.0, 0.5], [0.5, 0.0]], dtype=complex),
    Axis.Y: np.array([[0.0, 0.5j], [-0.5j, 0.0]], dtype=complex),
    Axis.Z: np.array([[-0.5, 0.0], [0.0, 0.5]], dtype=complex),
}


@dataclass(frozen=True, eq=False)
class SpinSystem:
    """
    N spin-1/2 nuclei with a symmetric dipolar coupling matrix.

    Args:
        n_spins: number of spins (>= 1)
        couplings: symmetric real N x N matrix d_ij in rad/s, zero diagonal
        label: free-form run identifier
    """
    n_spins: int
    couplings: np.ndarray
    label: str = ""

    def __post_init__(self):
        if self.n_spins < 1:
            raise SizeError(f"n_spins must be >= 1, got {self.n_spins}")
        d = np.asarray(self.couplings, dtype=float)
        if d.shape != (self.n_spins, self.n_spins):
            raise ShapeError(
                f"couplings must be {self.n_spins}x{self.n_spins}, got {d.shape}"
            )
        if not np.array_equal(d, d.T):
            raise ShapeError("couplings must be symmetric")
        if np.any(np.diag(d) != 0.0):
            raise ShapeError("couplings must have a zero diagonal")
        d.setflags(write=False)
        object.__setattr__(self, "couplings", d)

    def pairs(self):
        """Yield (i, j, d_ij) for i < j with nonzero coupling."""
        for i in range(self.n_spins):
            for j in range(i + 1, self.n_spins):
                if self.couplings[i, j] != 0.0:
                    yield i, j, float(self.couplings[i, j])

    def rms_coupling(self) -> float:
        """RMS coupling per spin, sqrt((1/N) sum_i sum_{j!=i} d_ij^2)."""
        return float(np.sqrt(np.sum(self.couplings ** 2) / self.n_spins))


@dataclass(frozen=True, eq=False)
class ZeemanBasis:
    """Computational basis with total magnetic quantum number per index."""
    n_spins: int
    m_of: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return 1 << self.n_spins

    def parity_sectors(self) -> Tuple[np.ndarray, np.ndarray]:
        """Indices with an even / odd number of up spins."""
        ups = np.rint(self.m_of + self.n_spins / 2.0).astype(int)
        return np.flatnonzero(ups % 2 == 0), np.flatnonzero(ups % 2 == 1)

    def coherence_orders(self) -> np.ndarray:
        """Integer matrix M[r, c] = m_of[r] - m_of[c]."""
        return np.rint(self.m_of[:, None] - self.m_of[None, :]).astype(int)


@dataclass(frozen=True, eq=False)
class PairTerm:
    """Two-site piece d_ij * local(4x4) of a pair-decomposed Hamiltonian."""
    i: int
    j: int
    local: np.ndarray


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """
    Operator on the 2^N Hilbert space.

    entries may be a dense ndarray or a scipy sparse matrix. Hamiltonians built
    by the hamiltonian module also carry their pair decomposition in `terms`,
    which the Trotter backend consumes.
    """
    entries: Matrix = field(repr=False)
    kind: OperatorKind = OperatorKind.GENERAL
    n_spins: int = 0
    terms: Optional[Tuple[PairTerm, ...]] = field(default=None, repr=False)

    def __post_init__(self):
        rows, cols = self.entries.shape
        if rows != cols:
            raise ShapeError(f"operator must be square, got {self.entries.shape}")
        if self.n_spins and rows != (1 << self.n_spins):
            raise ShapeError(f"dimension {rows} does not match {self.n_spins} spins")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self.entries)

    def dense(self) -> np.ndarray:
        if self.is_sparse:
            return self.entries.toarray()
        return np.asarray(self.entries)

    def scaled(self, factor: float) -> "OperatorMatrix":
        terms = None
        if self.terms is not None:
            terms = tuple(PairTerm(t.i, t.j, factor * t.local) for t in self.terms)
        return OperatorMatrix(factor * self.entries, self.kind, self.n_spins, terms)

    def adjoint(self) -> "OperatorMatrix":
        return OperatorMatrix(self.entries.conj().T, self.kind, self.n_spins)

    def check_kind(self) -> None:
        """Verify the tag against the entries; raise OperatorKindError if violated."""
        if self.kind is OperatorKind.HERMITIAN:
            if not is_hermitian(self.entries):
                raise OperatorKindError("operator tagged hermitian is not hermitian")
        elif self.kind is OperatorKind.UNITARY:
            m = self.dense()
            err = np.max(np.abs(m.conj().T @ m - np.eye(self.dim)))
            if err > UNITARY_TOL:
                raise OperatorKindError(f"operator tagged unitary deviates by {err:.3e}")


def is_hermitian(m: Matrix, tol: float = HERMITIAN_TOL) -> bool:
    """Relative max-norm check of m == m^dagger."""
    diff = m - m.conj().T
    if sparse.issparse(diff):
        dev = abs(diff).max() if diff.nnz else 0.0
        scale = abs(m).max() if m.nnz else 0.0
    else:
        dev = np.max(np.abs(diff)) if diff.size else 0.0
        scale = np.max(np.abs(m)) if m.size else 0.0
    return dev <= tol * max(scale, 1.0)


def build_basis(n_spins: int, max_spins: int = DEFAULT_MAX_SPINS) -> ZeemanBasis:
    """
    Build the Zeeman product basis.

    Args:
        n_spins: number of spins
        max_spins: configured cap (memory grows as 4^N)

    Returns:
        ZeemanBasis with m_of[b] = popcount(b) - N/2
    """
    if not 1 <= n_spins <= max_spins:
        raise SizeError(f"n_spins must be in [1, {max_spins}], got {n_spins}")
    b = np.arange(1 << n_spins, dtype=np.int64)
    ups = np.zeros_like(b)
    for i in range(n_spins):
        ups += (b >> i) & 1
    m_of = ups.astype(float) - n_spins / 2.0
    m_of.setflags(write=False)
    logging.debug(f"[HILBERT] Zeeman basis N={n_spins} dim={b.size}")
    return ZeemanBasis(n_spins=n_spins, m_of=m_of)


def single_spin_op(basis: ZeemanBasis, site: int, axis: Union[Axis, str]) -> OperatorMatrix:
    """
    I_axis acting on one site, identity elsewhere (sparse CSR).

    Kron order puts site N-1 leftmost so that bit i of the index is site i.
    """
    axis = Axis(axis)
    n = basis.n_spins
    if not 0 <= site < n:
        raise SiteIndexError(f"site {site} out of range for {n} spins")
    factors = [
        sparse.csr_matrix(SINGLE_SPIN_MATRICES[axis]) if s == site else sparse.identity(2, format="csr")
        for s in range(n - 1, -1, -1)
    ]
    entries = reduce(lambda a, b: sparse.kron(a, b, format="csr"), factors)
    return OperatorMatrix(entries.tocsr(), OperatorKind.HERMITIAN, n)


def collective_iz(basis: ZeemanBasis) -> OperatorMatrix:
    """Collective Iz = sum_i Iz^i, diagonal with m_of on the diagonal."""
    entries = sparse.diags(basis.m_of.astype(float), format="csr")
    return OperatorMatrix(entries, OperatorKind.HERMITIAN, basis.n_spins)


def coherence_order(basis: ZeemanBasis, row: int, col: int) -> int:
    """Coherence order M = m(row) - m(col) of a density-operator element."""
    if not (0 <= row < basis.dim and 0 <= col < basis.dim):
        raise SiteIndexError(f"basis index out of range: ({row}, {col})")
    return int(round(basis.m_of[row] - basis.m_of[col]))


def commutator(a: OperatorMatrix, b: OperatorMatrix) -> Matrix:
    """[a, b] on the raw entries."""
    return a.entries @ b.entries - b.entries @ a.entries
