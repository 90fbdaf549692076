"""
Multiple-quantum coherence encoding and extraction.

The density operator is rotated about z by phi (entry (r, c) picks up
exp(-i phi (m_r - m_c))), the overlap with the decoding observable gives
S(phi), and a discrete Fourier transform over phi gives the amplitudes A_M.
spectrum_direct computes the same A_M by partitioning both operators into
coherence blocks; it serves as the oracle for the FFT path.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from src.logic.spin_hilbert import OperatorMatrix, ZeemanBasis, build_basis
from src.utils.errors import AliasingError, ShapeError, SpectrumDiagnosticError

IMAG_TOL = 1e-9
SYMMETRY_TOL = 1e-9
ODD_ORDER_TOL = 1e-10


class SpectrumSource(Enum):
    FFT = "fft"
    DIRECT = "direct"


@dataclass(frozen=True)
class CoherenceSpectrum:
    """
    A_M for M in [-N, N], normalised by Tr(Iz^2).

    normalization holds sum_M A_M, i.e. the echo S(phi=0).
    """
    n_spins: int
    amplitudes: Dict[int, float] = field(repr=False)
    normalization: float
    source: SpectrumSource = SpectrumSource.DIRECT

    @classmethod
    def from_amplitudes(cls, amplitudes: Dict[int, float], n_spins: Optional[int] = None,
                        source: SpectrumSource = SpectrumSource.DIRECT) -> "CoherenceSpectrum":
        if n_spins is None:
            n_spins = max((abs(int(m)) for m in amplitudes), default=0)
        full = {m: float(amplitudes.get(m, 0.0)) for m in range(-n_spins, n_spins + 1)}
        return cls(n_spins, full, float(sum(full.values())), source)

    def orders(self) -> np.ndarray:
        return np.arange(-self.n_spins, self.n_spins + 1)

    def as_array(self) -> np.ndarray:
        return np.array([self.amplitudes[m] for m in range(-self.n_spins, self.n_spins + 1)])

    def total(self) -> float:
        return float(sum(self.amplitudes.values()))

    def max_asymmetry(self) -> float:
        return max((abs(self.amplitudes[m] - self.amplitudes[-m]) for m in self.amplitudes),
                   default=0.0)

    def odd_weight(self) -> float:
        """sum |A_M| over odd M divided by sum |A_M|."""
        values = self.as_array()
        scale = float(np.sum(np.abs(values)))
        if scale == 0.0:
            return 0.0
        odd = np.abs(self.orders()) % 2 == 1
        return float(np.sum(np.abs(values[odd])) / scale)

    def check_invariants(self) -> List[str]:
        """Return human-readable violations of the symmetry and selection rules."""
        problems = []
        if self.max_asymmetry() > SYMMETRY_TOL:
            problems.append(f"A_M asymmetric by {self.max_asymmetry():.3e}")
        if self.odd_weight() > ODD_ORDER_TOL:
            problems.append(f"odd orders carry {self.odd_weight():.3e} of the weight")
        return problems


def default_n_phi(n_spins: int) -> int:
    """Smallest power of two >= 2N + 2."""
    return 1 << math.ceil(math.log2(2 * n_spins + 2))


def _basis_for(op: OperatorMatrix, basis: Optional[ZeemanBasis] = None) -> ZeemanBasis:
    if basis is not None:
        return basis
    n = op.n_spins or int(round(math.log2(op.dim)))
    return build_basis(n, max_spins=n)


def _iz_norm(basis: ZeemanBasis) -> float:
    """Tr(Iz^2) = N 2^N / 4."""
    return basis.n_spins * basis.dim / 4.0


def _check_shapes(rho: OperatorMatrix, observable: OperatorMatrix, basis: ZeemanBasis) -> None:
    if rho.dim != observable.dim or rho.dim != basis.dim:
        raise ShapeError(
            f"dimension mismatch: rho {rho.dim}, observable {observable.dim}, basis {basis.dim}"
        )


def phase_rotate(a: OperatorMatrix, basis: ZeemanBasis, phi: float) -> OperatorMatrix:
    """exp(-i phi Iz) a exp(+i phi Iz); entry (r, c) times exp(-i phi (m_r - m_c))."""
    if a.dim != basis.dim:
        raise ShapeError(f"dimension mismatch: operator {a.dim}, basis {basis.dim}")
    d = np.exp(-1j * phi * basis.m_of)
    rotated = d[:, None] * a.dense() * d.conj()[None, :]
    return OperatorMatrix(rotated, a.kind, basis.n_spins)


def _overlap_weights(rho: OperatorMatrix, observable: OperatorMatrix) -> np.ndarray:
    """W[r, c] = observable[c, r] * rho[r, c], so Tr(obs rho) = sum W."""
    return observable.dense().T * rho.dense()


def _rotated_signal(w: np.ndarray, basis: ZeemanBasis, phi: float) -> complex:
    d = np.exp(-1j * phi * basis.m_of)
    return complex(d @ (w @ d.conj()))


def signal(rho: OperatorMatrix, observable: OperatorMatrix, phi: float,
           basis: Optional[ZeemanBasis] = None) -> complex:
    """S(phi) = Tr{observable . phase_rotate(rho, phi)} / Tr{Iz^2}."""
    basis = _basis_for(rho, basis)
    _check_shapes(rho, observable, basis)
    w = _overlap_weights(rho, observable)
    return _rotated_signal(w, basis, phi) / _iz_norm(basis)


def spectrum_fft(rho: OperatorMatrix, observable: OperatorMatrix, basis: ZeemanBasis,
                 n_phi: Optional[int] = None) -> CoherenceSpectrum:
    """
    Sample S(phi_k) on phi_k = 2 pi k / n_phi and Fourier-transform to A_M.

    Raises:
        AliasingError: n_phi below 2N + 2 or odd
        SpectrumDiagnosticError: imaginary residue of A_M above 1e-9
    """
    n = basis.n_spins
    n_phi = n_phi if n_phi is not None else default_n_phi(n)
    if n_phi < 2 * n + 2 or n_phi % 2:
        raise AliasingError(f"n_phi={n_phi} cannot resolve M in [-{n}, {n}]; need even >= {2 * n + 2}")
    _check_shapes(rho, observable, basis)
    logging.debug(f"[MQC] sampling S(phi) at n_phi={n_phi} for N={n}")

    w = _overlap_weights(rho, observable)
    norm = _iz_norm(basis)
    phis = 2.0 * np.pi * np.arange(n_phi) / n_phi
    samples = np.array([_rotated_signal(w, basis, phi) for phi in phis]) / norm

    # S(phi) = sum_M A_M exp(-i M phi)  ->  A_M = ifft(S)[M mod n_phi]
    coeffs = np.fft.ifft(samples)
    orders = np.arange(-n, n + 1)
    values = coeffs[orders % n_phi]
    scale = max(1.0, float(np.sum(np.abs(values))))
    residue = float(np.max(np.abs(values.imag)))
    if residue > IMAG_TOL * scale:
        raise SpectrumDiagnosticError(f"imaginary residue {residue:.3e} in A_M")
    amplitudes = {int(m): float(v) for m, v in zip(orders, values.real)}
    return CoherenceSpectrum(n, amplitudes, float(np.sum(values.real)), SpectrumSource.FFT)


def _sector_indicator(basis: ZeemanBasis) -> np.ndarray:
    """H[b, k] = 1 when basis state b has k up spins."""
    ups = np.rint(basis.m_of + basis.n_spins / 2.0).astype(int)
    h = np.zeros((basis.dim, basis.n_spins + 1))
    h[np.arange(basis.dim), ups] = 1.0
    return h


def spectrum_direct(rho: OperatorMatrix, observable: OperatorMatrix,
                    basis: ZeemanBasis) -> CoherenceSpectrum:
    """A_M = Re Tr{observable_M^dagger rho_M} / Tr{Iz^2} from the block partition."""
    _check_shapes(rho, observable, basis)
    n = basis.n_spins
    p = observable.dense().conj() * rho.dense()
    h = _sector_indicator(basis)
    # S[k, l] = 上向きスピン数 k 行 / l 列ブロックの総和
    sector_sums = h.T @ p.real @ h
    norm = _iz_norm(basis)
    amplitudes = {
        m: float(np.trace(sector_sums, offset=-m)) / norm for m in range(-n, n + 1)
    }
    total = float(sum(amplitudes.values()))
    return CoherenceSpectrum(n, amplitudes, total, SpectrumSource.DIRECT)


def compute_spectrum(rho: OperatorMatrix, observable: OperatorMatrix, basis: ZeemanBasis,
                     source: SpectrumSource = SpectrumSource.FFT,
                     n_phi: Optional[int] = None) -> CoherenceSpectrum:
    if source is SpectrumSource.FFT:
        spec = spectrum_fft(rho, observable, basis, n_phi)
    else:
        spec = spectrum_direct(rho, observable, basis)
    logging.debug(
        f"[MQC] echo={spec.normalization:.6g} odd_weight={spec.odd_weight():.3e} "
        f"asymmetry={spec.max_asymmetry():.3e}"
    )
    return spec


def two_spin_amplitudes(d12: float, t: float) -> Dict[int, float]:
    """Closed form for two spins under H_0 at p = 0: A_0 = cos^2(d t), A_{+-2} = sin^2(d t) / 2."""
    c2 = math.cos(d12 * t) ** 2
    s2 = math.sin(d12 * t) ** 2
    return {-2: s2 / 2.0, -1: 0.0, 0: c2, 1: 0.0, 2: s2 / 2.0}


def spectra_matrix(spectra: Iterable[CoherenceSpectrum]) -> Tuple[np.ndarray, np.ndarray]:
    """Stack spectra into (orders, amplitudes[M, n]) for heatmaps."""
    spectra = list(spectra)
    if not spectra:
        return np.arange(0), np.zeros((0, 0))
    n = max(s.n_spins for s in spectra)
    orders = np.arange(-n, n + 1)
    grid = np.array([[s.amplitudes.get(int(m), 0.0) for s in spectra] for m in orders])
    return orders, grid
