"""
Unitary propagation - exact (eigendecomposition) and Trotterized propagators,
forward perturbed cycles U_N and the time-reversed decoding V_N.

Units: hbar = 1, Hamiltonians in rad/s, times in seconds.
"""

import logging
import math
import threading
import time
import weakref
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, List, Optional, Tuple

import numpy as np
from scipy import linalg

from src.logic.hamiltonian import PerturbationSpec, build_h0, build_h_dd, build_h_eff
from src.logic.spin_hilbert import (
    OperatorKind,
    OperatorMatrix,
    SpinSystem,
    build_basis,
    collective_iz,
    is_hermitian,
)
from src.utils.errors import DomainError, OperatorKindError, ShapeError
from src.utils.progress_notifier import ProgressNotifier, ProgressStage


class PropagationMode(Enum):
    """STATIC: one H_eff per cycle. SEGMENTED: tau0 under H_0, then tau_sigma under Sigma."""
    STATIC = "static"
    SEGMENTED = "segmented"


@dataclass(frozen=True)
class CycleSchedule:
    """
    Timing of a simulated experiment.

    Args:
        tau0: duration of the H_0 period per cycle (s)
        tau_sigma: duration of the perturbation period per cycle (s)
        n_cycles: number of perturbed cycles N
        n_prep_cycles: unperturbed preparation cycles N0 (evolution N0 * tau0)
    """
    tau0: float
    tau_sigma: float = 0.0
    n_cycles: int = 0
    n_prep_cycles: int = 0

    def __post_init__(self):
        if not self.tau0 > 0.0:
            raise DomainError(f"tau0 must be positive, got {self.tau0}")
        if self.tau_sigma < 0.0:
            raise DomainError(f"tau_sigma must be >= 0, got {self.tau_sigma}")
        if self.n_cycles < 0 or self.n_prep_cycles < 0:
            raise DomainError("cycle counts must be >= 0")

    @property
    def tau_c(self) -> float:
        return self.tau0 + self.tau_sigma

    @property
    def p(self) -> float:
        return self.tau_sigma / self.tau_c

    @classmethod
    def for_strength(cls, tau0: float, p: float, n_cycles: int,
                     n_prep_cycles: int = 0) -> "CycleSchedule":
        """
        Schedule with tau_sigma chosen so that tau_sigma / tau_c = p.

        p = 1 has no finite split; it falls back to tau_c = tau0 as the time
        base and the strength is carried by the PerturbationSpec alone.
        """
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"perturbation strength p must be in [0, 1], got {p}")
        tau_sigma = 0.0 if p >= 1.0 else p * tau0 / (1.0 - p)
        return cls(tau0=tau0, tau_sigma=tau_sigma, n_cycles=n_cycles,
                   n_prep_cycles=n_prep_cycles)

    def with_cycles(self, n_cycles: int) -> "CycleSchedule":
        return CycleSchedule(self.tau0, self.tau_sigma, n_cycles, self.n_prep_cycles)


@dataclass(frozen=True, eq=False)
class Propagator:
    """u = exp(-i h t) for a fixed generator h."""
    u: OperatorMatrix
    generator: Optional[OperatorMatrix]
    duration: float

    def adjoint(self) -> "Propagator":
        return Propagator(self.u.adjoint(), self.generator, -self.duration)

    def then(self, later: "Propagator") -> "Propagator":
        """Propagator for evolving with self first, then `later`."""
        u = later.u.dense() @ self.u.dense()
        return Propagator(OperatorMatrix(u, OperatorKind.UNITARY, self.u.n_spins),
                          None, self.duration + later.duration)


def _identity(dim: int, n_spins: int) -> Propagator:
    return Propagator(OperatorMatrix(np.eye(dim, dtype=complex), OperatorKind.UNITARY, n_spins),
                      None, 0.0)


def _require_hermitian(h: OperatorMatrix) -> None:
    if h.kind is not OperatorKind.HERMITIAN or not is_hermitian(h.entries):
        raise OperatorKindError("propagators need a hermitian generator")


def _sandwich(left: np.ndarray, x: np.ndarray, right_h: np.ndarray) -> np.ndarray:
    """left @ x @ right_h, splitting real/imag parts when the outer factors are real."""
    if np.isrealobj(left) and np.isrealobj(right_h):
        re = left @ np.ascontiguousarray(x.real) @ right_h
        im = left @ np.ascontiguousarray(x.imag) @ right_h
        return re + 1j * im
    return left @ x @ right_h


@dataclass(frozen=True, eq=False)
class EigenBlock:
    indices: np.ndarray
    evals: np.ndarray
    evecs: np.ndarray


@dataclass(frozen=True, eq=False)
class Eigensystem:
    """Eigendecomposition of a Hermitian generator, per conserved sector."""
    dim: int
    blocks: Tuple[EigenBlock, ...]


class PropagationBackend(ABC):
    """Strategy for building propagators and operator trajectories."""

    name = "abstract"

    @abstractmethod
    def propagator(self, h: OperatorMatrix, t: float) -> Propagator:
        pass

    def trajectory(self, h: OperatorMatrix, a: OperatorMatrix, dt: float, n_steps: int,
                   decode: bool = False) -> Iterator[np.ndarray]:
        """
        Yield a(n*dt) for n = 0..n_steps.

        decode=False gives u^dagger a u (evolve_observable); decode=True gives
        u a u^dagger, the decoding convention of backward_observable.
        """
        step = self.propagator(h, dt)
        yield from iterate_cycles(step.u.dense(), a.dense(), n_steps, decode)


def iterate_cycles(u: np.ndarray, a: np.ndarray, n_steps: int,
                   decode: bool = False) -> Iterator[np.ndarray]:
    """Repeated conjugation of a by one cycle propagator u."""
    x = np.array(a, dtype=complex)
    u_h = u.conj().T
    yield x
    for _ in range(n_steps):
        x = u @ x @ u_h if decode else u_h @ x @ u
        yield x


class EigenBackend(PropagationBackend):
    """
    Reference backend: Hermitian eigendecomposition (scipy.linalg.eigh).

    Generators that conserve the parity of the number of up spins (H_0, H_dd
    and any mix of them) are diagonalised block by block.
    """

    name = "eigen"

    def __init__(self, notifier: Optional[ProgressNotifier] = None):
        # エントリは生成子 h が破棄されると消える
        self._cache: "weakref.WeakKeyDictionary[OperatorMatrix, Eigensystem]" = weakref.WeakKeyDictionary()
        self._lock = threading.Lock()
        self.notifier = notifier

    @property
    def cache_size(self) -> int:
        with self._lock:
            return len(self._cache)

    def diagonalize(self, h: OperatorMatrix) -> Eigensystem:
        _require_hermitian(h)
        with self._lock:
            hit = self._cache.get(h)
        if hit is not None:
            return hit

        if self.notifier is not None:
            self.notifier.notify(ProgressStage.DIAGONALIZING, f"diagonalising dim {h.dim}")
        start = time.time()
        dense = h.dense()
        if np.iscomplexobj(dense) and not np.any(dense.imag):
            dense = dense.real
        sectors = self._sectors(h)
        blocks = []
        for idx in sectors:
            sub = dense[np.ix_(idx, idx)]
            evals, evecs = linalg.eigh(sub)
            blocks.append(EigenBlock(idx, evals, evecs))
        eig = Eigensystem(dim=h.dim, blocks=tuple(blocks))
        logging.info(
            f"[PERFORMANCE] eigh of dim {h.dim} in {len(blocks)} block(s) took "
            f"{time.time() - start:.2f}s"
        )
        with self._lock:
            self._cache[h] = eig
        return eig

    @staticmethod
    def _sectors(h: OperatorMatrix) -> List[np.ndarray]:
        everything = [np.arange(h.dim)]
        if not h.n_spins or h.n_spins < 2:
            return everything
        even, odd = build_basis(h.n_spins, max_spins=h.n_spins).parity_sectors()
        if h.is_sparse:
            rows, cols = h.entries.nonzero()
        else:
            rows, cols = np.nonzero(h.entries)
        parity = np.zeros(h.dim, dtype=int)
        parity[odd] = 1
        if np.any(parity[rows] != parity[cols]):
            return everything
        return [even, odd]

    def propagator(self, h: OperatorMatrix, t: float) -> Propagator:
        _require_hermitian(h)
        if t == 0.0:
            p = _identity(h.dim, h.n_spins)
            return Propagator(p.u, h, 0.0)
        eig = self.diagonalize(h)
        u = np.zeros((h.dim, h.dim), dtype=complex)
        for blk in eig.blocks:
            phases = np.exp(-1j * blk.evals * t)
            u[np.ix_(blk.indices, blk.indices)] = (blk.evecs * phases) @ blk.evecs.conj().T
        return Propagator(OperatorMatrix(u, OperatorKind.UNITARY, h.n_spins), h, t)

    def trajectory(self, h: OperatorMatrix, a: OperatorMatrix, dt: float, n_steps: int,
                   decode: bool = False) -> Iterator[np.ndarray]:
        eig = self.diagonalize(h)
        a_dense = a.dense()
        sign = -1.0 if decode else 1.0
        pieces = []
        for bi in eig.blocks:
            for bj in eig.blocks:
                sub = a_dense[np.ix_(bi.indices, bj.indices)]
                if not np.any(sub):
                    continue
                tilde = _sandwich(bi.evecs.conj().T, sub.astype(complex), bj.evecs)
                freq = bi.evals[:, None] - bj.evals[None, :]
                pieces.append((bi, bj, tilde, freq))

        for n in range(n_steps + 1):
            out = np.zeros((eig.dim, eig.dim), dtype=complex)
            t = sign * n * dt
            for bi, bj, tilde, freq in pieces:
                x = tilde * np.exp(1j * freq * t)
                out[np.ix_(bi.indices, bj.indices)] = _sandwich(bi.evecs, x, bj.evecs.conj().T)
            yield out


class TrotterBackend(PropagationBackend):
    """
    Fast backend: symmetric (Strang) product of two-site gates.

    Each step of length dt applies exp(-i h_ij dt/2) over the pairs in order,
    then again in reverse order. Error per unit time is O(step^2). Needs the
    pair decomposition carried by Hamiltonians from the hamiltonian module.
    """

    name = "trotter"

    def __init__(self, step: float):
        if not step > 0.0:
            raise DomainError(f"Trotter step must be positive, got {step}")
        self.step = step

    def propagator(self, h: OperatorMatrix, t: float) -> Propagator:
        _require_hermitian(h)
        if h.terms is None:
            raise OperatorKindError("Trotter backend needs a pair-decomposed Hamiltonian")
        n = h.n_spins
        if t == 0.0:
            p = _identity(h.dim, n)
            return Propagator(p.u, h, 0.0)
        n_steps = max(1, math.ceil(abs(t) / self.step))
        half = 0.5 * t / n_steps
        gates = [(term.i, term.j, linalg.expm(-1j * term.local * half)) for term in h.terms]
        sweep = gates + gates[::-1]

        y = np.eye(h.dim, dtype=complex).reshape((2,) * n + (h.dim,))
        for _ in range(n_steps):
            for i, j, g in sweep:
                y = _apply_two_site(y, g, n, i, j)
        u = y.reshape(h.dim, h.dim)
        return Propagator(OperatorMatrix(u, OperatorKind.UNITARY, n), h, t)


def _apply_two_site(tensor: np.ndarray, gate: np.ndarray, n_spins: int, i: int, j: int) -> np.ndarray:
    """Left-multiply a (2,)*N x rest tensor by a gate on sites (i, j)."""
    # サイトiはC順の軸 N-1-i (上位ビットが先頭)
    ai, aj = n_spins - 1 - i, n_spins - 1 - j
    g = gate.reshape(2, 2, 2, 2)
    out = np.tensordot(g, tensor, axes=([2, 3], [ai, aj]))
    return np.moveaxis(out, [0, 1], [ai, aj])


_default_backend = EigenBackend()


def default_backend() -> EigenBackend:
    return _default_backend


def reverse_hamiltonian(h: OperatorMatrix) -> OperatorMatrix:
    """Time reversal H -> -H (the phase shift of all RF pulses)."""
    return h.scaled(-1.0)


def propagator_of(h: OperatorMatrix, t: float,
                  backend: Optional[PropagationBackend] = None) -> Propagator:
    """u = exp(-i h t); eigendecomposition unless another backend is given."""
    return (backend or _default_backend).propagator(h, t)


def evolve_observable(a: OperatorMatrix, u: Propagator) -> OperatorMatrix:
    """u^dagger a u; keeps the kind tag of a."""
    if a.dim != u.u.dim:
        raise ShapeError(f"dimension mismatch: operator {a.dim}, propagator {u.u.dim}")
    um = u.u.dense()
    out = um.conj().T @ (a.entries @ um)
    return OperatorMatrix(np.asarray(out), a.kind, a.n_spins or u.u.n_spins)


def observable_trajectory(h: OperatorMatrix, a: OperatorMatrix, dt: float, n_steps: int,
                          backend: Optional[PropagationBackend] = None) -> Iterator[np.ndarray]:
    """a(n dt) = u_n^dagger a u_n for n = 0..n_steps without re-diagonalising."""
    if a.dim != h.dim:
        raise ShapeError(f"dimension mismatch: operator {a.dim}, generator {h.dim}")
    return (backend or _default_backend).trajectory(h, a, dt, n_steps)


def _cycle_propagator(sys: SpinSystem, schedule: CycleSchedule, pert: PerturbationSpec,
                      backend: PropagationBackend, mode: PropagationMode,
                      h0: OperatorMatrix, h_eff: Optional[OperatorMatrix]) -> Propagator:
    if mode is PropagationMode.STATIC:
        h_eff = h_eff if h_eff is not None else build_h_eff(sys, pert, h0=h0)
        return backend.propagator(h_eff, schedule.tau_c)
    # 区分モード: tau0 の H_0 期間のあと tau_sigma の摂動期間
    if abs(schedule.p - pert.p) > 1e-12:
        raise DomainError(
            f"segmented mode takes p from the schedule ({schedule.p:.6g}), got {pert.p:.6g}"
        )
    u0 = backend.propagator(h0, schedule.tau0)
    if schedule.tau_sigma == 0.0:
        return u0
    u_sigma = backend.propagator(build_h_dd(sys), schedule.tau_sigma)
    return u0.then(u_sigma)


def prepared_state(sys: SpinSystem, schedule: CycleSchedule,
                   backend: Optional[PropagationBackend] = None,
                   h0: Optional[OperatorMatrix] = None) -> OperatorMatrix:
    """Iz after the N0 * tau0 unperturbed preparation stage."""
    backend = backend or _default_backend
    iz = collective_iz(build_basis(sys.n_spins, max_spins=sys.n_spins))
    if schedule.n_prep_cycles == 0:
        return iz
    h0 = h0 if h0 is not None else build_h0(sys)
    return evolve_observable(iz, backend.propagator(h0, schedule.n_prep_cycles * schedule.tau0))


def forward_state(sys: SpinSystem, schedule: CycleSchedule, pert: PerturbationSpec,
                  backend: Optional[PropagationBackend] = None,
                  mode: PropagationMode = PropagationMode.STATIC,
                  h0: Optional[OperatorMatrix] = None,
                  h_eff: Optional[OperatorMatrix] = None) -> OperatorMatrix:
    """
    rho(N tau_c) = U_N^dagger rho_prep U_N with U_N generated by H_eff.

    rho_prep is Iz, or Iz after N0 * tau0 under H_0 when n_prep_cycles > 0.
    """
    backend = backend or _default_backend
    h0 = h0 if h0 is not None else build_h0(sys)
    start = prepared_state(sys, schedule, backend, h0)
    if schedule.n_cycles == 0:
        return start
    if mode is PropagationMode.STATIC:
        h_eff = h_eff if h_eff is not None else build_h_eff(sys, pert, h0=h0)
        u = backend.propagator(h_eff, schedule.n_cycles * schedule.tau_c)
    else:
        cycle = _cycle_propagator(sys, schedule, pert, backend, mode, h0, h_eff)
        u_n = np.linalg.matrix_power(cycle.u.dense(), schedule.n_cycles)
        u = Propagator(OperatorMatrix(u_n, OperatorKind.UNITARY, sys.n_spins), None,
                       schedule.n_cycles * schedule.tau_c)
    return evolve_observable(start, u)


def backward_observable(sys: SpinSystem, schedule: CycleSchedule,
                        backend: Optional[PropagationBackend] = None,
                        h0: Optional[OperatorMatrix] = None) -> OperatorMatrix:
    """
    Decoding observable A = V Iz V^dagger with V = exp(+i H_0 T).

    T = (N0 + N) * tau0, i.e. the reversal also undoes the preparation stage.
    V is built explicitly as the propagator of the sign-reversed H_0.
    """
    backend = backend or _default_backend
    iz = collective_iz(build_basis(sys.n_spins, max_spins=sys.n_spins))
    total = (schedule.n_prep_cycles + schedule.n_cycles) * schedule.tau0
    if total == 0.0:
        return iz
    h0 = h0 if h0 is not None else build_h0(sys)
    v = backend.propagator(reverse_hamiltonian(h0), total)
    return evolve_observable(iz, v.adjoint())


def forward_trajectory(sys: SpinSystem, schedule: CycleSchedule, pert: PerturbationSpec,
                       backend: Optional[PropagationBackend] = None,
                       mode: PropagationMode = PropagationMode.STATIC,
                       h0: Optional[OperatorMatrix] = None,
                       h_eff: Optional[OperatorMatrix] = None) -> Iterator[np.ndarray]:
    """forward_state for n = 0..schedule.n_cycles, one dense matrix per cycle."""
    backend = backend or _default_backend
    h0 = h0 if h0 is not None else build_h0(sys)
    start = prepared_state(sys, schedule, backend, h0)
    if mode is PropagationMode.STATIC:
        h_eff = h_eff if h_eff is not None else build_h_eff(sys, pert, h0=h0)
        yield from backend.trajectory(h_eff, start, schedule.tau_c, schedule.n_cycles)
    else:
        cycle = _cycle_propagator(sys, schedule, pert, backend, mode, h0, h_eff)
        yield from iterate_cycles(cycle.u.dense(), start.dense(), schedule.n_cycles)


def backward_trajectory(sys: SpinSystem, schedule: CycleSchedule,
                        backend: Optional[PropagationBackend] = None,
                        h0_reversed: Optional[OperatorMatrix] = None) -> Iterator[np.ndarray]:
    """backward_observable for n = 0..schedule.n_cycles."""
    backend = backend or _default_backend
    if h0_reversed is None:
        h0_reversed = reverse_hamiltonian(build_h0(sys))
    iz = collective_iz(build_basis(sys.n_spins, max_spins=sys.n_spins))
    total = schedule.n_prep_cycles + schedule.n_cycles
    for k, a in enumerate(backend.trajectory(h0_reversed, iz, schedule.tau0, total, decode=True)):
        if k >= schedule.n_prep_cycles:
            yield a
