"""
Tests for the Zeeman basis and single-spin operators.
"""

import math
import unittest

import numpy as np
from scipy import sparse

from src.logic.spin_hilbert import (
    Axis,
    OperatorKind,
    OperatorMatrix,
    SpinSystem,
    build_basis,
    coherence_order,
    collective_iz,
    commutator,
    is_hermitian,
    single_spin_op,
)
from src.utils.errors import OperatorKindError, ShapeError, SiteIndexError, SizeError


class TestBasis(unittest.TestCase):

    def test_magnetic_numbers(self):
        basis = build_basis(3)
        self.assertEqual(basis.dim, 8)
        self.assertEqual(basis.m_of[0], -1.5)
        self.assertEqual(basis.m_of[7], 1.5)
        # b = 0b101: spins 0 and 2 up
        self.assertEqual(basis.m_of[5], 0.5)

    def test_size_limits(self):
        for n in (0, 15):
            with self.subTest(n=n):
                with self.assertRaises(SizeError):
                    build_basis(n)
        with self.assertRaises(ValueError):
            build_basis(5, max_spins=4)

    def test_parity_sectors_split_in_halves(self):
        basis = build_basis(4)
        even, odd = basis.parity_sectors()
        self.assertEqual(len(even), 8)
        self.assertEqual(len(odd), 8)
        self.assertIn(0, even)
        self.assertIn(1, odd)

    def test_coherence_order(self):
        basis = build_basis(2)
        self.assertEqual(coherence_order(basis, 3, 0), 2)
        self.assertEqual(coherence_order(basis, 1, 2), 0)
        with self.assertRaises(SiteIndexError):
            coherence_order(basis, 4, 0)

    def test_magnetic_numbers_are_binomial(self):
        basis = build_basis(6)
        values, counts = np.unique(basis.m_of, return_counts=True)
        np.testing.assert_array_equal(values, np.arange(-3.0, 3.5))
        self.assertEqual(list(counts), [math.comb(6, k) for k in range(7)])

    def test_coherence_order_antisymmetric(self):
        basis = build_basis(3)
        for r in range(basis.dim):
            for c in range(basis.dim):
                self.assertEqual(coherence_order(basis, r, c), -coherence_order(basis, c, r))


class TestOperators(unittest.TestCase):

    def setUp(self):
        self.basis = build_basis(2)

    def test_site_zero_is_lowest_bit(self):
        iz0 = single_spin_op(self.basis, 0, Axis.Z).dense()
        np.testing.assert_allclose(np.diag(iz0), [-0.5, 0.5, -0.5, 0.5])
        iz1 = single_spin_op(self.basis, 1, "z").dense()
        np.testing.assert_allclose(np.diag(iz1), [-0.5, -0.5, 0.5, 0.5])

    def test_operators_are_sparse_and_hermitian(self):
        for axis in Axis:
            with self.subTest(axis=axis):
                op = single_spin_op(self.basis, 1, axis)
                self.assertTrue(sparse.issparse(op.entries))
                self.assertIs(op.kind, OperatorKind.HERMITIAN)
                self.assertTrue(is_hermitian(op.entries))

    def test_site_out_of_range(self):
        with self.assertRaises(SiteIndexError):
            single_spin_op(self.basis, 2, Axis.X)
        with self.assertRaises(IndexError):
            single_spin_op(self.basis, -1, Axis.X)

    def test_angular_momentum_commutator(self):
        ix = single_spin_op(self.basis, 0, Axis.X)
        iy = single_spin_op(self.basis, 0, Axis.Y)
        iz = single_spin_op(self.basis, 0, Axis.Z)
        c = commutator(ix, iy).toarray()
        np.testing.assert_allclose(c, 1j * iz.dense(), atol=1e-14)

    def test_different_sites_commute(self):
        ix0 = single_spin_op(self.basis, 0, Axis.X)
        iy1 = single_spin_op(self.basis, 1, Axis.Y)
        self.assertEqual(abs(commutator(ix0, iy1)).max(), 0.0)

    def test_collective_iz(self):
        basis = build_basis(3)
        iz = collective_iz(basis)
        total = sum(single_spin_op(basis, i, Axis.Z).dense() for i in range(3))
        np.testing.assert_allclose(iz.dense(), total)
        # Tr(Iz^2) = N 2^N / 4
        self.assertAlmostEqual(float(np.trace(iz.dense() @ iz.dense()).real), 3 * 8 / 4)

    def test_operator_matrix_validation(self):
        with self.assertRaises(ShapeError):
            OperatorMatrix(np.zeros((2, 3)))
        with self.assertRaises(ShapeError):
            OperatorMatrix(np.zeros((4, 4)), n_spins=3)

    def test_check_kind(self):
        bad = OperatorMatrix(np.array([[0.0, 1.0], [0.0, 0.0]]), OperatorKind.HERMITIAN, 1)
        with self.assertRaises(OperatorKindError):
            bad.check_kind()
        not_unitary = OperatorMatrix(2.0 * np.eye(2), OperatorKind.UNITARY, 1)
        with self.assertRaises(OperatorKindError):
            not_unitary.check_kind()
        OperatorMatrix(np.eye(2), OperatorKind.UNITARY, 1).check_kind()


class TestSpinSystem(unittest.TestCase):

    def test_rejects_asymmetric(self):
        with self.assertRaises(ShapeError):
            SpinSystem(2, np.array([[0.0, 1.0], [2.0, 0.0]]))

    def test_rejects_diagonal(self):
        with self.assertRaises(ShapeError):
            SpinSystem(2, np.array([[1.0, 1.0], [1.0, 0.0]]))

    def test_pairs_and_rms(self):
        d = np.array([[0.0, 3.0, 0.0], [3.0, 0.0, 4.0], [0.0, 4.0, 0.0]])
        sys_ = SpinSystem(3, d)
        self.assertEqual(list(sys_.pairs()), [(0, 1, 3.0), (1, 2, 4.0)])
        self.assertAlmostEqual(sys_.rms_coupling(), np.sqrt(2 * (9 + 16) / 3))
        self.assertFalse(sys_.couplings.flags.writeable)


if __name__ == "__main__":
    unittest.main()
