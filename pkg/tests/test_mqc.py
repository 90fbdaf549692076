"""
Tests for MQC encoding and the coherence spectrum.
"""

import logging
import math
import unittest

import numpy as np
import pytest

from src.logic.hamiltonian import PerturbationSpec
from src.logic.mqc import (
    CoherenceSpectrum,
    SpectrumSource,
    compute_spectrum,
    default_n_phi,
    phase_rotate,
    signal,
    spectra_matrix,
    spectrum_direct,
    spectrum_fft,
    two_spin_amplitudes,
)
from src.logic.propagate import CycleSchedule, backward_observable, forward_state
from src.logic.spin_hilbert import OperatorKind, OperatorMatrix, build_basis, collective_iz
from src.utils.errors import AliasingError, ShapeError
from tests.helpers import TAU0, pair_system, random_system


def _encoded(sys_, p, n_cycles, n_prep=0):
    sched = CycleSchedule.for_strength(TAU0, p, n_cycles, n_prep)
    rho = forward_state(sys_, sched, PerturbationSpec(p))
    obs = backward_observable(sys_, sched)
    return rho, obs, build_basis(sys_.n_spins)


class TestTwoSpinClosedForm(unittest.TestCase):

    def test_matches_closed_form(self):
        d = 2.0 * math.pi * 3000.0
        sys_ = pair_system(d)
        for k in range(20):
            t = 0.013 * TAU0 * (k + 1)
            with self.subTest(t=t):
                sched = CycleSchedule(tau0=t, n_cycles=1)
                rho = forward_state(sys_, sched, PerturbationSpec(0.0))
                obs = backward_observable(sys_, sched)
                spec = spectrum_fft(rho, obs, build_basis(2))
                expected = two_spin_amplitudes(d, t)
                for m, value in expected.items():
                    self.assertAlmostEqual(spec.amplitudes[m], value, places=12)

    def test_quarter_period_is_full_double_quantum(self):
        d = 2.0 * math.pi * 3000.0
        t = math.pi / (2.0 * d)
        sys_ = pair_system(d)
        sched = CycleSchedule(tau0=t, n_cycles=1)
        spec = spectrum_fft(forward_state(sys_, sched, PerturbationSpec(0.0)),
                            backward_observable(sys_, sched), build_basis(2))
        self.assertAlmostEqual(spec.amplitudes[0], 0.0, places=12)
        self.assertAlmostEqual(spec.amplitudes[2], 0.5, places=12)
        self.assertAlmostEqual(spec.amplitudes[-2], 0.5, places=12)

    def test_closed_form_sums_to_one(self):
        amps = two_spin_amplitudes(1.3, 0.7)
        self.assertAlmostEqual(sum(amps.values()), 1.0)
        self.assertEqual(amps[2], amps[-2])


class TestSpectrumProperties(unittest.TestCase):

    def setUp(self):
        self.sys = random_system(5, seed=9)

    def test_perfect_echo_and_selection_rule(self):
        for n in (5, 20):
            with self.subTest(n=n):
                rho, obs, basis = _encoded(self.sys, 0.0, n)
                spec = spectrum_fft(rho, obs, basis)
                self.assertAlmostEqual(spec.normalization, 1.0, delta=1e-9)
                self.assertLess(spec.odd_weight(), 1e-10)
                self.assertEqual(spec.check_invariants(), [])

    def test_symmetric_under_perturbation(self):
        rho, obs, basis = _encoded(self.sys, 0.4, 6)
        spec = spectrum_fft(rho, obs, basis)
        self.assertLess(spec.max_asymmetry(), 1e-9)
        self.assertLess(spec.normalization, 1.0 + 1e-9)

    def test_signal_at_zero_is_echo(self):
        rho, obs, basis = _encoded(self.sys, 0.2, 4)
        spec = spectrum_direct(rho, obs, basis)
        s0 = signal(rho, obs, 0.0, basis)
        self.assertAlmostEqual(s0.real, spec.normalization, places=10)
        self.assertAlmostEqual(s0.imag, 0.0, places=10)

    def test_initial_state_is_pure_zero_quantum(self):
        rho, obs, basis = _encoded(self.sys, 0.3, 0)
        spec = compute_spectrum(rho, obs, basis, SpectrumSource.DIRECT)
        self.assertAlmostEqual(spec.amplitudes[0], 1.0, places=12)
        self.assertAlmostEqual(spec.total(), 1.0, places=12)


def test_fft_matches_direct_on_random_instances():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        n = int(rng.integers(2, 7))
        p = float(rng.uniform(0.0, 1.0))
        cycles = int(rng.integers(0, 6))
        prep = int(rng.integers(0, 3))
        sys_ = random_system(n, seed=int(rng.integers(0, 2 ** 32)))
        rho, obs, basis = _encoded(sys_, p, cycles, prep)
        fft = spectrum_fft(rho, obs, basis)
        direct = spectrum_direct(rho, obs, basis)
        np.testing.assert_allclose(fft.as_array(), direct.as_array(), atol=1e-10)
        assert fft.source is SpectrumSource.FFT and direct.source is SpectrumSource.DIRECT


def test_aliasing_guard():
    rho, obs, basis = _encoded(random_system(4), 0.0, 1)
    with pytest.raises(AliasingError):
        spectrum_fft(rho, obs, basis, n_phi=8)
    with pytest.raises(AliasingError):
        spectrum_fft(rho, obs, basis, n_phi=11)
    spectrum_fft(rho, obs, basis, n_phi=10)


def test_default_n_phi():
    assert default_n_phi(2) == 8
    assert default_n_phi(12) == 32
    assert default_n_phi(3) == 8


def test_phase_rotation():
    basis = build_basis(3)
    iz = collective_iz(basis)
    np.testing.assert_allclose(phase_rotate(iz, basis, 0.9).dense(), iz.dense())
    a = OperatorMatrix(np.zeros((8, 8), dtype=complex), OperatorKind.GENERAL, 3)
    a.entries[7, 0] = 1.0  # M = +3
    rotated = phase_rotate(a, basis, 0.5).dense()
    assert rotated[7, 0] == pytest.approx(np.exp(-1.5j))


def test_full_turn_is_identity():
    basis = build_basis(3)
    rng = np.random.default_rng(2)
    a = OperatorMatrix(rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8)), OperatorKind.GENERAL, 3)
    np.testing.assert_allclose(phase_rotate(a, basis, 2.0 * np.pi).dense(), a.dense(), atol=1e-12)


def test_shape_mismatch():
    rho, obs, _ = _encoded(random_system(3), 0.0, 1)
    with pytest.raises(ShapeError):
        spectrum_direct(rho, obs, build_basis(4))


def test_spectrum_helpers():
    spec = CoherenceSpectrum.from_amplitudes({0: 0.5, 2: 0.25, -2: 0.25}, n_spins=3)
    assert list(spec.orders()) == [-3, -2, -1, 0, 1, 2, 3]
    assert spec.normalization == pytest.approx(1.0)
    orders, grid = spectra_matrix([spec, spec])
    assert grid.shape == (7, 2)
    assert grid[3, 0] == 0.5
    orders, grid = spectra_matrix([])
    assert grid.shape == (0, 0)


@pytest.mark.parametrize("n_spins", [4, 8])
@pytest.mark.parametrize("n_cycles", [5, 20])
def test_unperturbed_echo_is_perfect(n_spins, n_cycles):
    rho, obs, basis = _encoded(random_system(n_spins, seed=20100913), 0.0, n_cycles)
    spec = spectrum_fft(rho, obs, basis)
    assert spec.normalization == pytest.approx(1.0, abs=1e-9)
    assert spec.odd_weight() <= 1e-10 * spec.total()


def test_spectrum_debug_records(caplog):
    rho, obs, basis = _encoded(random_system(3), 0.2, 2)
    with caplog.at_level(logging.DEBUG):
        compute_spectrum(rho, obs, basis)
        build_basis(3)
    text = caplog.text
    assert "[MQC] sampling S(phi) at n_phi=8 for N=3" in text
    assert "[MQC] echo=" in text
    assert "[HILBERT] Zeeman basis N=3 dim=8" in text
