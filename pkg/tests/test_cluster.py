"""
Tests for cluster-size estimation, plateau detection and the power-law fit.
"""

import logging
import math
import unittest

import numpy as np
import pytest

from src.logic.cluster import (
    ClusterTrace,
    Regime,
    SizeEstimator,
    TracePoint,
    classify_regime,
    cluster_size,
    cluster_size_gaussian_fit,
    estimate_cluster_size,
    plateau,
    powerlaw_fit,
    relative_spread,
)
from src.logic.mqc import CoherenceSpectrum, two_spin_amplitudes
from src.utils.errors import DegenerateInputError, DomainError, InsufficientDataError


def _trace(sizes, p=0.1, dt=1.0, n0=0):
    trace = ClusterTrace(p=p, tau0=dt, tau_sigma=0.0, n_prep_cycles=n0)
    for n, k in enumerate(sizes):
        trace.add_point(TracePoint(n, n * dt, float(k)))
    return trace


class TestClusterSize(unittest.TestCase):

    def test_single_spin_coherence(self):
        spec = CoherenceSpectrum.from_amplitudes({0: 1.0}, n_spins=4)
        self.assertEqual(cluster_size(spec), 1.0)

    def test_second_moment(self):
        spec = CoherenceSpectrum.from_amplitudes({0: 0.5, 2: 0.25, -2: 0.25}, n_spins=4)
        self.assertAlmostEqual(cluster_size(spec), 4.0)

    def test_two_spin_range(self):
        for k in range(1, 40):
            t = 0.05 * k
            with self.subTest(t=t):
                spec = CoherenceSpectrum.from_amplitudes(two_spin_amplitudes(1.0, t), n_spins=2)
                expected = max(1.0, 8.0 * math.sin(t) ** 2)
                self.assertAlmostEqual(cluster_size(spec), expected, places=12)
                self.assertLessEqual(cluster_size(spec), 8.0 + 1e-12)

    def test_degenerate(self):
        spec = CoherenceSpectrum.from_amplitudes({0: 0.0}, n_spins=2)
        with self.assertRaises(DegenerateInputError):
            cluster_size(spec)

    def test_negative_amplitudes_clipped(self):
        spec = CoherenceSpectrum.from_amplitudes({0: 1.0, 2: -0.01, -2: -0.01}, n_spins=2)
        with self.assertLogs(level=logging.WARNING) as logs:
            self.assertEqual(cluster_size(spec), 1.0)
        self.assertTrue(any("[CLUSTER]" in line for line in logs.output))

    def test_negative_echo_floors_at_one(self):
        spec = CoherenceSpectrum.from_amplitudes({0: -0.17}, n_spins=4)
        with self.assertLogs(level=logging.WARNING) as logs:
            self.assertEqual(cluster_size(spec), 1.0)
        self.assertTrue(any("no positive coherence weight" in line for line in logs.output))

    def test_moment_over_clipped_weights(self):
        spec = CoherenceSpectrum.from_amplitudes({0: -0.2, 2: 0.4, -2: 0.4}, n_spins=4)
        with self.assertLogs(level=logging.WARNING):
            self.assertAlmostEqual(cluster_size(spec), 8.0)

    def test_invariant_under_rescaling(self):
        amps = {0: 0.4, 2: 0.2, -2: 0.2, 4: 0.1, -4: 0.1}
        reference = cluster_size(CoherenceSpectrum.from_amplitudes(amps, n_spins=4))
        for scale in (1e-3, 0.37, 25.0):
            with self.subTest(scale=scale):
                spec = CoherenceSpectrum.from_amplitudes({m: scale * a for m, a in amps.items()}, n_spins=4)
                self.assertAlmostEqual(cluster_size(spec), reference, places=12)

    def test_estimator_dispatch(self):
        amps = {m: math.exp(-m * m / 6.0) for m in range(-8, 9, 2)}
        spec = CoherenceSpectrum.from_amplitudes(amps, n_spins=8)
        self.assertEqual(estimate_cluster_size(spec), cluster_size(spec))
        self.assertEqual(estimate_cluster_size(spec, SizeEstimator.GAUSSIAN), cluster_size_gaussian_fit(spec))
        self.assertEqual(estimate_cluster_size(spec, "gaussian"), cluster_size_gaussian_fit(spec))

    def test_gaussian_fit_recovers_width(self):
        k_true = 6.0
        amps = {m: math.exp(-m * m / k_true) for m in range(-8, 9, 2)}
        spec = CoherenceSpectrum.from_amplitudes(amps, n_spins=8)
        self.assertAlmostEqual(cluster_size_gaussian_fit(spec), k_true, places=4)

    def test_gaussian_fit_falls_back_to_moment(self):
        spec = CoherenceSpectrum.from_amplitudes({0: 1.0}, n_spins=3)
        self.assertEqual(cluster_size_gaussian_fit(spec), 1.0)


class TestTrace(unittest.TestCase):

    def test_times_must_increase(self):
        trace = _trace([1.0, 2.0])
        with self.assertRaises(DomainError):
            trace.add_point(TracePoint(2, 1.0, 3.0))

    def test_sizes_must_be_finite(self):
        trace = _trace([1.0])
        for bad in (-1.0, float("nan"), float("inf")):
            with self.subTest(k=bad):
                with self.assertRaises(DomainError):
                    trace.add_point(TracePoint(5, 5.0, bad))

    def test_arrays(self):
        trace = _trace([1.0, 2.0, 3.0], dt=0.5)
        np.testing.assert_array_equal(trace.times, [0.0, 0.5, 1.0])
        np.testing.assert_array_equal(trace.cycles, [0, 1, 2])


class TestPlateau(unittest.TestCase):

    def test_saturating_trace(self):
        trace = _trace([min(n + 1, 5) for n in range(20)])
        result = plateau(trace)
        self.assertTrue(result.localized)
        self.assertAlmostEqual(result.k_loc, 5.0)
        self.assertEqual(result.onset_index, 4)
        self.assertAlmostEqual(result.slope, 0.0, places=12)

    def test_growing_trace(self):
        trace = _trace([n + 1 for n in range(20)])
        result = plateau(trace)
        self.assertFalse(result.localized)
        self.assertEqual(result.onset_index, -1)
        self.assertGreater(result.slope, 0.5)

    def test_shrinking_trace_settles(self):
        sizes = [3.0 + 5.0 * math.exp(-n / 2.0) for n in range(30)]
        result = plateau(_trace(sizes))
        self.assertTrue(result.localized)
        self.assertAlmostEqual(result.k_loc, 3.0, delta=0.05)

    def test_constant_trace(self):
        result = plateau(_trace([7.0] * 15))
        self.assertTrue(result.localized)
        self.assertEqual(result.k_loc, 7.0)
        self.assertEqual(result.onset_index, 0)

    def test_exponential_growth_is_not_localized(self):
        result = plateau(_trace([math.exp(0.3 * n) for n in range(20)]))
        self.assertFalse(result.localized)
        self.assertGreater(result.slope, 1.0)

    def test_too_short(self):
        with self.assertRaises(InsufficientDataError):
            plateau(_trace([1, 2, 3, 4, 5]))

    def test_bad_window(self):
        with self.assertRaises(DomainError):
            plateau(_trace(range(1, 10)), window_fraction=0.0)


class TestPowerLaw(unittest.TestCase):

    def test_exact_data(self):
        ps = [0.034, 0.065, 0.108, 0.2, 0.5]
        fit = powerlaw_fit([(p, 3.0 * p ** -2.0) for p in ps])
        self.assertAlmostEqual(fit.exponent, -2.0, places=10)
        self.assertAlmostEqual(fit.prefactor, 3.0, places=8)
        self.assertAlmostEqual(fit.exponent_stderr, 0.0, places=8)
        self.assertIn("p^(-2.0000", fit.describe())

    def test_noisy_data(self):
        rng = np.random.default_rng(5)
        ps = np.geomspace(0.02, 0.6, 10)
        ks = 2.0 * ps ** -2.0 * (1.0 + 0.05 * rng.standard_normal(ps.size))
        fit = powerlaw_fit(list(zip(ps, ks)))
        self.assertLess(abs(fit.exponent + 2.0), 0.2)
        self.assertGreater(fit.exponent_stderr, 0.0)

    def test_errors(self):
        with self.assertRaises(InsufficientDataError):
            powerlaw_fit([(0.1, 5.0), (0.2, 3.0)])
        with self.assertRaises(DomainError):
            powerlaw_fit([(0.0, 5.0), (0.1, 3.0), (0.2, 2.0)])
        with self.assertRaises(DomainError):
            powerlaw_fit([(0.1, 5.0), (0.1, 3.0), (0.1, 2.0)])


def test_classify_regime():
    assert classify_regime(_trace([8.0, 6.0]), 4.0) is Regime.SHRINKING
    assert classify_regime(_trace([1.0, 2.0]), 4.0) is Regime.GROWING
    assert classify_regime(_trace([4.2, 4.0]), 4.0) is Regime.STATIONARY
    with pytest.raises(InsufficientDataError):
        classify_regime(ClusterTrace(p=0.1, tau0=1.0, tau_sigma=0.0), 4.0)


def test_relative_spread():
    assert relative_spread([4.0, 5.0]) == pytest.approx(1.0 / 4.5)
    assert relative_spread([3.0]) == 0.0


def test_discrete_gaussian_moment():
    amps = {m: math.exp(-m * m / 16.0) for m in range(-24, 25)}
    spec = CoherenceSpectrum.from_amplitudes(amps, n_spins=24)
    assert cluster_size(spec) == pytest.approx(16.0, rel=0.01)


def test_broadening_never_shrinks():
    base = {0: 0.6, 2: 0.2, -2: 0.2}
    moved = {0: 0.6, 2: 0.1, -2: 0.2, 4: 0.1}
    k_base = cluster_size(CoherenceSpectrum.from_amplitudes(base, n_spins=6))
    k_moved = cluster_size(CoherenceSpectrum.from_amplitudes(moved, n_spins=6))
    assert k_moved >= k_base


def test_saturating_exponential_plateau():
    trace = ClusterTrace(p=0.1, tau0=1.0, tau_sigma=0.0)
    for n in range(1, 51):
        trace.add_point(TracePoint(n, float(n), 20.0 * (1.0 - math.exp(-n / 5.0))))
    result = plateau(trace)
    assert result.localized
    assert result.k_loc == pytest.approx(20.0, rel=0.05)
