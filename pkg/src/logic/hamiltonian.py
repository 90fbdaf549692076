"""
Hamiltonian construction - dipolar H_dd, double-quantum H_0 and the mixed
effective Hamiltonian H_eff = (1-p) H_0 + p Sigma.

All Hamiltonians are real symmetric sparse matrices in rad/s. Each one also
carries its pair decomposition (PairTerm) for the Trotter backend.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from src.logic.spin_hilbert import (
    Axis,
    OperatorKind,
    OperatorMatrix,
    PairTerm,
    SpinSystem,
    ZeemanBasis,
    SINGLE_SPIN_MATRICES,
    build_basis,
    single_spin_op,
)
from src.utils.errors import DegenerateInputError, DomainError, GeometryError, SizeError


class CouplingVariant(Enum):
    GEOMETRIC = "geometric"
    RANDOM_ALL_TO_ALL = "random_all_to_all"
    CHAIN = "chain"


class SigmaKind(Enum):
    """Perturbation operator Sigma. Only the dipolar choice Sigma = H_dd exists."""
    DIPOLAR = "dipolar"


@dataclass(frozen=True)
class CouplingModel:
    """
    Recipe for the coupling matrix d_ij.

    Use the factory classmethods instead of filling fields by hand.
    target_second_moment is in rad/s (RMS coupling per spin).
    """
    variant: CouplingVariant
    positions: Optional[Tuple[Tuple[float, float, float], ...]] = None
    prefactor: float = 1.0
    seed: Optional[int] = None
    scale: float = 1.0
    nearest_neighbor_strength: float = 1.0
    target_second_moment: Optional[float] = None

    @classmethod
    def geometric(cls, positions: Sequence[Sequence[float]], prefactor: float,
                  target_second_moment: Optional[float] = None) -> "CouplingModel":
        pos = tuple(tuple(float(c) for c in p) for p in positions)
        return cls(CouplingVariant.GEOMETRIC, positions=pos, prefactor=prefactor,
                   target_second_moment=target_second_moment)

    @classmethod
    def random_all_to_all(cls, seed: int, scale: float = 1.0,
                          target_second_moment: Optional[float] = None) -> "CouplingModel":
        return cls(CouplingVariant.RANDOM_ALL_TO_ALL, seed=seed, scale=scale,
                   target_second_moment=target_second_moment)

    @classmethod
    def chain(cls, nearest_neighbor_strength: float,
              target_second_moment: Optional[float] = None) -> "CouplingModel":
        return cls(CouplingVariant.CHAIN, nearest_neighbor_strength=nearest_neighbor_strength,
                   target_second_moment=target_second_moment)


@dataclass(frozen=True)
class PerturbationSpec:
    """Relative perturbation strength p = tau_sigma / tau_c and the Sigma operator."""
    p: float
    sigma_kind: SigmaKind = SigmaKind.DIPOLAR

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise DomainError(f"perturbation strength p must be in [0, 1], got {self.p}")


def _geometric_couplings(model: CouplingModel, n_spins: int) -> np.ndarray:
    if model.positions is None or len(model.positions) != n_spins:
        raise GeometryError(f"geometric coupling needs {n_spins} positions")
    pos = np.asarray(model.positions, dtype=float)
    d = np.zeros((n_spins, n_spins))
    for i in range(n_spins):
        for j in range(i + 1, n_spins):
            r_vec = pos[j] - pos[i]
            r = float(np.linalg.norm(r_vec))
            if r <= 0.0:
                raise GeometryError(f"spins {i} and {j} are at the same position")
            cos_theta = r_vec[2] / r
            d[i, j] = d[j, i] = model.prefactor * (1.0 - 3.0 * cos_theta ** 2) / r ** 3
    return d


def _random_couplings(model: CouplingModel, n_spins: int) -> np.ndarray:
    if model.seed is None:
        raise DomainError("random_all_to_all couplings need an explicit seed")
    rng = np.random.default_rng(model.seed)
    iu = np.triu_indices(n_spins, k=1)
    d = np.zeros((n_spins, n_spins))
    d[iu] = model.scale * rng.uniform(-1.0, 1.0, size=len(iu[0]))
    return d + d.T


def _chain_couplings(model: CouplingModel, n_spins: int) -> np.ndarray:
    d = np.zeros((n_spins, n_spins))
    for i in range(n_spins - 1):
        d[i, i + 1] = d[i + 1, i] = model.nearest_neighbor_strength
    return d


def couplings_from_model(model: CouplingModel, n_spins: int, label: str = "") -> SpinSystem:
    """
    Generate the SpinSystem for a coupling model.

    If target_second_moment is set, every d_ij is rescaled by one global
    factor so that the RMS coupling per spin equals the target.
    """
    if n_spins < 1:
        raise SizeError(f"n_spins must be >= 1, got {n_spins}")
    if model.variant in (CouplingVariant.GEOMETRIC, CouplingVariant.CHAIN) and n_spins < 2:
        raise SizeError(f"{model.variant.value} coupling needs at least 2 spins")

    if model.variant is CouplingVariant.GEOMETRIC:
        d = _geometric_couplings(model, n_spins)
    elif model.variant is CouplingVariant.RANDOM_ALL_TO_ALL:
        d = _random_couplings(model, n_spins)
    else:
        d = _chain_couplings(model, n_spins)

    if model.target_second_moment is not None:
        rms = float(np.sqrt(np.sum(d ** 2) / n_spins))
        if rms == 0.0:
            raise DegenerateInputError("cannot normalise an all-zero coupling matrix")
        d = d * (model.target_second_moment / rms)
        # 丸め誤差で対称性が崩れないよう上三角から再構成
        d = np.triu(d, k=1)
        d = d + d.T

    system = SpinSystem(n_spins=n_spins, couplings=d, label=label)
    logging.info(
        f"[HAMILTONIAN] {model.variant.value} couplings for N={n_spins}, "
        f"RMS per spin {system.rms_coupling():.6g} rad/s"
    )
    return system


def _local(a: Axis, b: Axis) -> np.ndarray:
    return np.kron(SINGLE_SPIN_MATRICES[a], SINGLE_SPIN_MATRICES[b])


# 2サイト局所項 (kron順: サイトi, サイトj)
DIPOLAR_LOCAL = np.real(
    2.0 * _local(Axis.Z, Axis.Z) - _local(Axis.X, Axis.X) - _local(Axis.Y, Axis.Y)
)
DOUBLE_QUANTUM_LOCAL = np.real(-(_local(Axis.X, Axis.X) - _local(Axis.Y, Axis.Y)))


def _site_operators(basis: ZeemanBasis) -> Dict[Axis, List[sparse.csr_matrix]]:
    return {
        axis: [single_spin_op(basis, i, axis).entries for i in range(basis.n_spins)]
        for axis in Axis
    }


def _assemble(sys: SpinSystem, coeffs: Dict[Tuple[Axis, Axis], float],
              local: np.ndarray) -> OperatorMatrix:
    basis = build_basis(sys.n_spins, max_spins=max(sys.n_spins, 1))
    ops = _site_operators(basis)
    dim = basis.dim
    h = sparse.csr_matrix((dim, dim), dtype=complex)
    terms = []
    for i, j, d_ij in sys.pairs():
        for (a, b), c in coeffs.items():
            h = h + (d_ij * c) * (ops[a][i] @ ops[b][j])
        terms.append(PairTerm(i, j, d_ij * local))
    # 虚部は厳密にゼロ (Iy Iy は実行列)
    h = sparse.csr_matrix(h.real)
    h.eliminate_zeros()
    return OperatorMatrix(h, OperatorKind.HERMITIAN, sys.n_spins, tuple(terms))


def build_h_dd(sys: SpinSystem) -> OperatorMatrix:
    """H_dd = sum_{i<j} d_ij [2 Iz^i Iz^j - (Ix^i Ix^j + Iy^i Iy^j)]."""
    coeffs = {(Axis.Z, Axis.Z): 2.0, (Axis.X, Axis.X): -1.0, (Axis.Y, Axis.Y): -1.0}
    return _assemble(sys, coeffs, DIPOLAR_LOCAL)


def build_h0(sys: SpinSystem) -> OperatorMatrix:
    """H_0 = -sum_{i<j} d_ij [Ix^i Ix^j - Iy^i Iy^j]; changes m by +-2 only."""
    coeffs = {(Axis.X, Axis.X): -1.0, (Axis.Y, Axis.Y): 1.0}
    return _assemble(sys, coeffs, DOUBLE_QUANTUM_LOCAL)


def build_sigma(sys: SpinSystem, sigma_kind: SigmaKind = SigmaKind.DIPOLAR) -> OperatorMatrix:
    if sigma_kind is SigmaKind.DIPOLAR:
        return build_h_dd(sys)
    raise DomainError(f"unsupported perturbation operator: {sigma_kind}")


def combine(a: OperatorMatrix, wa: float, b: OperatorMatrix, wb: float) -> OperatorMatrix:
    """wa*a + wb*b, pair terms merged site-pair by site-pair."""
    entries = wa * a.entries + wb * b.entries
    terms = None
    if a.terms is not None and b.terms is not None:
        merged: Dict[Tuple[int, int], np.ndarray] = {}
        for t in a.terms:
            merged[(t.i, t.j)] = wa * t.local
        for t in b.terms:
            key = (t.i, t.j)
            merged[key] = merged.get(key, 0.0) + wb * t.local
        terms = tuple(PairTerm(i, j, loc) for (i, j), loc in sorted(merged.items()))
    kind = OperatorKind.HERMITIAN if (
        a.kind is OperatorKind.HERMITIAN and b.kind is OperatorKind.HERMITIAN
    ) else OperatorKind.GENERAL
    return OperatorMatrix(entries, kind, a.n_spins, terms)


def build_h_eff(sys: SpinSystem, pert: PerturbationSpec,
                h0: Optional[OperatorMatrix] = None,
                sigma: Optional[OperatorMatrix] = None) -> OperatorMatrix:
    """
    H_eff = (1-p) H_0 + p Sigma.

    h0 / sigma may be passed in when the caller already built them.
    """
    if not 0.0 <= pert.p <= 1.0:
        raise DomainError(f"perturbation strength p must be in [0, 1], got {pert.p}")
    h0 = h0 if h0 is not None else build_h0(sys)
    if pert.p == 0.0:
        return h0
    sigma = sigma if sigma is not None else build_sigma(sys, pert.sigma_kind)
    if pert.p == 1.0:
        return sigma
    return combine(h0, 1.0 - pert.p, sigma, pert.p)
