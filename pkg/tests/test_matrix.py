"""matrix module: norms, predicates, eigenvalues, factorizations, text I/O."""

import math

import numpy as np
import pytest

from sparsecov import (
    InvalidParameterError,
    MatrixFormatError,
    NotPositiveDefiniteError,
    SparsityClass,
    SymMatrix,
    cholesky,
    class_membership,
    eigendecomposition,
    eigenvalues,
    frobenius_norm,
    frobenius_sq,
    is_diagonally_dominant,
    is_positive_definite,
    offdiag_l0,
    offdiag_lq_mass,
    offdiag_lq_norm,
    op_l1_norm,
    read_matrix_text,
    spectral_norm,
    write_matrix_text,
)
from sparsecov.matrix import max_offdiag_abs_diff, DimensionMismatchError


def random_sym(rng, p, scale=1.0):
    a = rng.standard_normal((p, p)) * scale
    return SymMatrix((a + a.T) / 2)


class TestSymMatrix:
    def test_mirror_makes_entries_exactly_equal(self):
        a = np.array([[1.0, 0.5 + 1e-12], [0.5, 2.0]])
        m = SymMatrix(a)
        assert m.array[0, 1] == m.array[1, 0]

    def test_rejects_asymmetric(self):
        with pytest.raises(InvalidParameterError):
            SymMatrix([[1.0, 0.5], [0.1, 1.0]])

    def test_rejects_nonsquare_and_nonfinite(self):
        with pytest.raises(DimensionMismatchError):
            SymMatrix([[1.0, 2.0, 3.0], [2.0, 1.0, 4.0]])
        with pytest.raises(InvalidParameterError):
            SymMatrix([[np.inf, 0.0], [0.0, 1.0]])

    def test_immutable(self):
        m = SymMatrix.identity(3)
        with pytest.raises(ValueError):
            m.array[0, 0] = 5.0


class TestFrobenius:
    def test_identity(self):
        assert frobenius_norm(SymMatrix.identity(3)) == pytest.approx(math.sqrt(3), abs=1e-15)

    def test_zero(self):
        assert frobenius_norm(SymMatrix(np.zeros((4, 4)))) == 0.0

    def test_offdiag_pair(self):
        # brute-force double loop over entries as the oracle
        m = SymMatrix([[1.0, -0.5], [-0.5, 1.0]])
        brute = sum(m.array[i, j] ** 2 for i in range(2) for j in range(2))
        assert brute == pytest.approx(2.5, abs=1e-15)
        assert frobenius_norm(m) == pytest.approx(math.sqrt(brute), rel=1e-15)


class TestOffdiagNorms:
    def test_identity_no_mass(self):
        assert offdiag_lq_norm(SymMatrix.identity(4), 1.0) == 0.0
        assert offdiag_l0(SymMatrix.identity(4)) == 0

    def test_pair_q1(self):
        m = SymMatrix([[1.0, 0.3], [0.3, 1.0]])
        assert offdiag_lq_norm(m, 1.0) == pytest.approx(0.6, abs=1e-15)

    def test_q_half_against_independent_sum(self):
        a = np.eye(3)
        a[0, 1] = a[1, 0] = 0.1
        a[0, 2] = a[2, 0] = 0.2
        m = SymMatrix(a)
        expected_mass = 2 * math.sqrt(0.1) + 2 * math.sqrt(0.2)
        assert offdiag_lq_mass(m, 0.5) == pytest.approx(expected_mass, rel=1e-14)
        assert offdiag_lq_norm(m, 0.5) == pytest.approx(expected_mass**2, rel=1e-14)

    def test_q_nonpositive_rejected(self):
        with pytest.raises(InvalidParameterError):
            offdiag_lq_norm(SymMatrix.identity(2), 0.0)

    def test_l0_counts_both_orientations(self):
        m = SymMatrix([[1.0, 0.3], [0.3, 1.0]])
        assert offdiag_l0(m, tol=0.0) == 2

    def test_l0_strict_at_tol(self):
        m = SymMatrix([[1.0, 0.5], [0.5, 1.0]])
        assert offdiag_l0(m, tol=0.5) == 0
        assert offdiag_l0(m, tol=0.4999) == 2

    def test_lq_mass_monotone_in_q_for_small_entries(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            p = int(rng.integers(2, 8))
            a = rng.uniform(-1.0, 1.0, size=(p, p))
            m = SymMatrix((a + a.T) / 2)
            qs = [0.25, 0.5, 1.0, 1.5, 2.0]
            masses = [offdiag_lq_mass(m, q) for q in qs]
            for lo, hi in zip(masses[1:], masses[:-1]):
                assert lo <= hi + 1e-12


class TestOperatorNorms:
    def test_op_l1_identity_and_ones(self):
        assert op_l1_norm(SymMatrix.identity(5)) == 1.0
        assert op_l1_norm(SymMatrix(np.ones((2, 2)))) == 2.0

    def test_op_l1_matches_unit_ball_vertices(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            m = random_sym(rng, 4)
            # the l1 -> l1 norm is attained at a basis vertex of the unit ball
            brute = max(float(np.sum(np.abs(m.array @ e))) for e in np.eye(4))
            assert op_l1_norm(m) == pytest.approx(brute, rel=1e-14)

    def test_spectral_trivia(self):
        assert spectral_norm(SymMatrix.identity(3)) == pytest.approx(1.0, abs=1e-12)
        assert spectral_norm(SymMatrix.diagonal([2.0, -3.0, 1.0])) == pytest.approx(3.0, abs=1e-12)
        a = 0.7
        assert spectral_norm(SymMatrix([[0.0, a], [a, 0.0]])) == pytest.approx(a, abs=1e-12)


class TestEigenvalues:
    def test_identity_and_rank_one(self):
        np.testing.assert_allclose(eigenvalues(SymMatrix.identity(2)), [1.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(
            eigenvalues(SymMatrix([[1.0, 1.0], [1.0, 1.0]])), [0.0, 2.0], atol=1e-12
        )

    def test_psd_factor_construction(self):
        rng = np.random.default_rng(7)
        low = rng.standard_normal((5, 5))
        m = SymMatrix(np.tril(low) @ np.tril(low).T)
        assert np.min(eigenvalues(m)) >= -1e-10

    def test_trace_and_frobenius_identities(self):
        rng = np.random.default_rng(19)
        for _ in range(30):
            p = int(rng.integers(2, 12))
            m = random_sym(rng, p, scale=rng.uniform(0.1, 5.0))
            lams = eigenvalues(m)
            tr = float(np.trace(m.array))
            assert np.sum(lams) == pytest.approx(tr, abs=1e-9 * p * max(1.0, abs(tr)))
            assert np.sum(lams**2) == pytest.approx(frobenius_sq(m), rel=1e-9)

    def test_against_lapack(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            m = random_sym(rng, 9)
            np.testing.assert_allclose(eigenvalues(m), np.linalg.eigvalsh(m.array), atol=1e-10)

    def test_eigenvectors_reconstruct(self):
        rng = np.random.default_rng(29)
        m = random_sym(rng, 6)
        lams, vecs = eigendecomposition(m)
        np.testing.assert_allclose(vecs @ np.diag(lams) @ vecs.T, m.array, atol=1e-11)

    def test_sorted_ascending(self):
        rng = np.random.default_rng(31)
        lams = eigenvalues(random_sym(rng, 8))
        assert np.all(np.diff(lams) >= 0)

    def test_spectral_frobenius_sandwich(self):
        rng = np.random.default_rng(37)
        for _ in range(30):
            p = int(rng.integers(2, 10))
            m = random_sym(rng, p)
            s, f = spectral_norm(m), frobenius_norm(m)
            assert s <= f + 1e-12
            assert f <= math.sqrt(p) * s + 1e-12


class TestNormAxioms:
    @pytest.mark.parametrize("norm", [frobenius_norm, op_l1_norm, spectral_norm])
    def test_axioms(self, norm):
        rng = np.random.default_rng(41)
        for _ in range(20):
            p = int(rng.integers(2, 7))
            m1, m2 = random_sym(rng, p), random_sym(rng, p)
            c = float(rng.uniform(-3.0, 3.0))
            assert norm(m1) >= 0.0
            assert norm(SymMatrix(c * m1.array)) == pytest.approx(abs(c) * norm(m1), rel=1e-10, abs=1e-12)
            assert norm(SymMatrix(m1.array + m2.array)) <= norm(m1) + norm(m2) + 1e-10


class TestDefiniteness:
    def test_pd_trivia(self):
        assert is_positive_definite(SymMatrix.identity(3))
        assert not is_positive_definite(SymMatrix.diagonal([1.0, -1.0]))

    def test_dominant_perturbation_is_pd(self):
        rng = np.random.default_rng(43)
        b = rng.uniform(-1.0, 1.0, size=(6, 6))
        b = (b + b.T) / 2
        np.fill_diagonal(b, 0.0)
        b /= np.max(np.sum(np.abs(b), axis=1)) + 1e-9
        m = SymMatrix(np.eye(6) + 0.5 * b)
        assert is_diagonally_dominant(m)
        assert is_positive_definite(m)
        assert np.min(eigenvalues(m)) > 0

    def test_dominance_strictness(self):
        assert is_diagonally_dominant(SymMatrix.identity(2))
        assert not is_diagonally_dominant(SymMatrix([[1.0, 1.0], [1.0, 1.0]]))

    def test_dominance_implies_pd_randomized(self):
        rng = np.random.default_rng(47)
        found = 0
        for _ in range(200):
            p = int(rng.integers(2, 8))
            a = rng.uniform(-0.3, 0.3, size=(p, p))
            a = (a + a.T) / 2
            np.fill_diagonal(a, 1.0)
            m = SymMatrix(a)
            if is_diagonally_dominant(m):
                found += 1
                assert is_positive_definite(m)
        assert found > 0

    def test_pivot_tolerance(self):
        m = SymMatrix.diagonal([1.0, 1e-8])
        assert is_positive_definite(m, tol=0.0)
        assert not is_positive_definite(m, tol=1e-3)


class TestCholesky:
    def test_trivia(self):
        np.testing.assert_array_equal(cholesky(SymMatrix.identity(3)), np.eye(3))
        np.testing.assert_allclose(
            cholesky(SymMatrix.diagonal([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-15
        )

    def test_reconstruction(self):
        rng = np.random.default_rng(53)
        low = np.tril(rng.standard_normal((6, 6))) + 6 * np.eye(6)
        m = SymMatrix(low @ low.T)
        factor = cholesky(m)
        err = np.linalg.norm(factor @ factor.T - m.array)
        assert err <= 1e-10 * frobenius_norm(m)

    def test_not_pd_raises(self):
        with pytest.raises(NotPositiveDefiniteError):
            cholesky(SymMatrix.diagonal([1.0, 0.0]))


class TestSparsityClass:
    def test_validation(self):
        with pytest.raises(InvalidParameterError):
            SparsityClass("other", 0.0, 2)
        with pytest.raises(InvalidParameterError):
            SparsityClass("global", 2.5, 2)
        with pytest.raises(InvalidParameterError):
            SparsityClass("column", 1.5, 2)  # column variant caps q at 1
        with pytest.raises(InvalidParameterError):
            SparsityClass("global", 0.0, 3)  # odd budget
        with pytest.raises(InvalidParameterError):
            SparsityClass("column", 0.0, 2.5)  # non-integer budget
        SparsityClass("global", 0.0, 0)  # zero budget is the identity-only class

    def test_dim_caps(self):
        SparsityClass("global", 0.0, 6).validate_for_dim(3)
        with pytest.raises(InvalidParameterError):
            SparsityClass("global", 0.0, 8).validate_for_dim(3)
        with pytest.raises(InvalidParameterError):
            SparsityClass("column", 0.0, 3).validate_for_dim(3)

    def test_membership_trivia(self):
        ident = SymMatrix.identity(4)
        assert class_membership(ident, SparsityClass("global", 0.0, 2))
        assert class_membership(ident, SparsityClass("column", 1.0, 0.5))

    def test_membership_budget(self):
        m = SymMatrix([[1.0, 0.5], [0.5, 1.0]])
        assert class_membership(m, SparsityClass("global", 0.0, 2))
        over = SparsityClass("global", 1.0, 2 * 0.5 - 0.01)
        assert not class_membership(m, over)

    def test_membership_needs_pd_and_unit_diag(self):
        assert not class_membership(
            SymMatrix([[1.0, 0.999], [0.999, 1.0]]), SparsityClass("global", 0.0, 2)
        ) or is_positive_definite(SymMatrix([[1.0, 0.999], [0.999, 1.0]]))
        off_diag = SymMatrix.diagonal([1.0, 1.1])
        assert not class_membership(off_diag, SparsityClass("global", 0.0, 2))

    def test_membership_column_variant(self):
        a = np.eye(4)
        a[0, 1] = a[1, 0] = 0.3
        a[0, 2] = a[2, 0] = 0.3
        m = SymMatrix(a)
        # column 0 holds two entries
        assert class_membership(m, SparsityClass("column", 0.0, 2))
        assert not class_membership(m, SparsityClass("column", 0.0, 1))


class TestOffdiagDeviation:
    def test_trivia(self):
        m = SymMatrix.identity(3)
        assert max_offdiag_abs_diff(m, m) == 0.0
        a = np.eye(3)
        a[0, 2] = a[2, 0] = 0.3
        assert max_offdiag_abs_diff(SymMatrix(a), m) == pytest.approx(0.3)

    def test_matches_double_loop(self):
        rng = np.random.default_rng(59)
        x, y = random_sym(rng, 5), random_sym(rng, 5)
        brute = max(
            abs(x.array[i, j] - y.array[i, j]) for i in range(5) for j in range(5) if i != j
        )
        assert max_offdiag_abs_diff(x, y) == pytest.approx(brute, rel=1e-15)

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            max_offdiag_abs_diff(SymMatrix.identity(2), SymMatrix.identity(3))


class TestTextFormat:
    def test_roundtrip_exact(self):
        rng = np.random.default_rng(61)
        m = random_sym(rng, 5)
        again = read_matrix_text(write_matrix_text(m))
        np.testing.assert_array_equal(again.array, m.array)

    def test_rejects_asymmetry(self):
        text = "2\n1.0 0.5\n0.4 1.0\n"
        with pytest.raises(MatrixFormatError):
            read_matrix_text(text)

    def test_rejects_bad_shape(self):
        with pytest.raises(MatrixFormatError):
            read_matrix_text("2\n1.0 0.0\n")
        with pytest.raises(MatrixFormatError):
            read_matrix_text("")
        with pytest.raises(MatrixFormatError):
            read_matrix_text("x\n1.0\n")
