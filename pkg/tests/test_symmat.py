import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_pd
from precis.datagen import appendix_example1_fixture
from precis.errors import DimensionTooSmall, MatrixFormatError, NotPositiveDefinite
from precis.symmat import (as_symmetric, block_reassemble, cholesky_pd, format_matrix,
                           inv_pd, is_pd, logdet_pd, max_abs_offdiag, min_eigenvalue, others,
                           read_matrix, schur_downdate, write_matrix)

seeds = st.integers(0, 2**32 - 1)


class TestLogdet:
    @pytest.mark.parametrize("p", [1, 3, 7])
    def test_identity(self, p):
        assert logdet_pd(np.eye(p)) == 0.0

    def test_diagonal(self):
        assert logdet_pd(np.diag([2.0, 3.0])) == pytest.approx(1.7917594692, abs=1e-10)

    def test_two_by_two(self):
        assert logdet_pd(np.array([[2.0, 1.0], [1.0, 2.0]])) == pytest.approx(1.0986122887,
                                                                                abs=1e-10)

    def test_indefinite_raises(self):
        with pytest.raises(NotPositiveDefinite):
            logdet_pd(np.diag([1.0, -1.0]))

    def test_tiny_pivot_raises(self):
        # pivot 1e-13 is below 1e-12 * max diagonal
        with pytest.raises(NotPositiveDefinite):
            logdet_pd(np.diag([1.0, 1e-13]))

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds, p=st.integers(1, 20))
    def test_matches_eigenvalues(self, seed, p):
        M = random_pd(np.random.default_rng(seed), p, cond=1e3)
        assert logdet_pd(M) == pytest.approx(np.sum(np.log(np.linalg.eigvalsh(M))), abs=1e-8)


class TestMinEigenvalue:
    def test_identity(self):
        assert min_eigenvalue(np.eye(4)) == pytest.approx(1.0)

    def test_negative(self):
        assert min_eigenvalue(np.diag([2.0, -3.0])) == pytest.approx(-3.0)

    def test_two_by_two(self):
        assert min_eigenvalue(np.array([[2.0, 1.0], [1.0, 2.0]])) == pytest.approx(1.0)

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds, p=st.integers(1, 20))
    def test_shift_is_singular(self, seed, p):
        B = np.random.default_rng(seed).standard_normal((p, p))
        M = 0.5 * (B + B.T)
        v = min_eigenvalue(M)
        smallest = np.min(np.abs(np.linalg.eigvalsh(M - v * np.eye(p))))
        assert smallest <= 1e-8 * np.linalg.norm(M)


class TestFactorizations:
    def test_cholesky_reconstructs(self):
        M = random_pd(np.random.default_rng(0), 6)
        L = cholesky_pd(M)
        np.testing.assert_allclose(L @ L.T, M, atol=1e-12)

    def test_inverse(self):
        M = random_pd(np.random.default_rng(1), 6)
        np.testing.assert_allclose(inv_pd(M) @ M, np.eye(6), atol=1e-10)

    def test_inverse_is_symmetric(self):
        M = random_pd(np.random.default_rng(2), 9)
        Minv = inv_pd(M)
        assert np.array_equal(Minv, Minv.T)

    def test_is_pd(self):
        assert is_pd(np.eye(3))
        assert not is_pd(np.array([[1.0, 2.0], [2.0, 1.0]]))


class TestSchurDowndate:
    def test_two_by_two(self):
        W = np.array([[2.0, 1.0], [1.0, 2.0]])
        np.testing.assert_allclose(schur_downdate(W, 1), [[1.5]])

    def test_identity(self):
        np.testing.assert_array_equal(schur_downdate(np.eye(3), 0), np.eye(2))

    def test_nonpositive_pivot(self):
        with pytest.raises(NotPositiveDefinite):
            schur_downdate(np.diag([1.0, 0.0]), 1)

    def test_bad_column(self):
        with pytest.raises(IndexError):
            schur_downdate(np.eye(3), 3)

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds, p=st.integers(2, 20), data=st.data())
    def test_inverse_of_deleted_block(self, seed, p, data):
        j = data.draw(st.integers(0, p - 1))
        W = random_pd(np.random.default_rng(seed), p, cond=100.0)
        idx = others(p, j)
        expected = np.linalg.inv(np.linalg.inv(W)[np.ix_(idx, idx)])
        got = schur_downdate(W, j)
        assert np.linalg.norm(got - expected) <= 1e-10 * np.linalg.norm(expected)


class TestBlockReassemble:
    def test_block_diagonal(self):
        W = block_reassemble(np.array([[1.0]]), np.array([0.0]), 2.0, 1)
        np.testing.assert_allclose(W, np.diag([1.0, 0.5]))

    def test_decoupled(self):
        M = random_pd(np.random.default_rng(3), 3)
        W = block_reassemble(M, np.zeros(3), 4.0, 3)
        np.testing.assert_allclose(W[:3, :3], M)
        assert W[3, 3] == pytest.approx(0.25)

    def test_nonpositive_schur(self):
        with pytest.raises(NotPositiveDefinite):
            block_reassemble(np.array([[1.0]]), np.array([2.0]), 1.0, 0)

    def test_random_theta_p4(self):
        Theta = random_pd(np.random.default_rng(4), 4)
        j = 2
        idx = others(4, j)
        W = block_reassemble(np.linalg.inv(Theta[np.ix_(idx, idx)]), Theta[idx, j],
                             Theta[j, j], j)
        assert np.linalg.norm(W @ Theta - np.eye(4)) <= 1e-10

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds, p=st.integers(2, 20), data=st.data())
    def test_roundtrip_property(self, seed, p, data):
        j = data.draw(st.integers(0, p - 1))
        Theta = random_pd(np.random.default_rng(seed), p, cond=100.0)
        idx = others(p, j)
        W = block_reassemble(np.linalg.inv(Theta[np.ix_(idx, idx)]), Theta[idx, j],
                             Theta[j, j], j)
        assert np.linalg.norm(W - np.linalg.inv(Theta)) <= 1e-9
        assert np.array_equal(W, W.T)


class TestMaxAbsOffdiag:
    def test_identity(self):
        assert max_abs_offdiag(np.eye(3)) == 0.0

    def test_appendix_fixture(self):
        assert max_abs_offdiag(appendix_example1_fixture()) == pytest.approx(0.4021497, abs=1e-12)

    def test_negative_entry(self):
        assert max_abs_offdiag(np.array([[1.0, -5.0], [-5.0, 1.0]])) == 5.0

    def test_too_small(self):
        with pytest.raises(DimensionTooSmall):
            max_abs_offdiag(np.eye(1))


class TestSymmetrize:
    def test_averages_triangles(self):
        M = as_symmetric([[1.0, 2.0], [4.0, 1.0]])
        np.testing.assert_array_equal(M, [[1.0, 3.0], [3.0, 1.0]])

    def test_tolerance(self):
        with pytest.raises(ValueError):
            as_symmetric([[1.0, 2.0], [4.0, 1.0]], tol=1e-3)

    def test_not_square(self):
        with pytest.raises(ValueError):
            as_symmetric(np.ones((2, 3)))


class TestMatrixText:
    @settings(max_examples=30, deadline=None)
    @given(seed=seeds, p=st.integers(1, 8))
    def test_roundtrip_bit_identical(self, tmp_path_factory, seed, p):
        B = np.random.default_rng(seed).standard_normal((p, p)) * 10.0 ** np.random.default_rng(
            seed).integers(-200, 200)
        M = 0.5 * (B + B.T)
        path = tmp_path_factory.mktemp("m") / "m.txt"
        write_matrix(path, M)
        assert np.array_equal(read_matrix(path), M)

    def test_format(self):
        assert format_matrix(np.eye(2)) == "2\n1 0\n0 1\n"

    def test_symmetrized_on_load(self, tmp_path):
        path = tmp_path / "m.txt"
        path.write_text("2\n1 0.5\n0.5000000000000001 1\n")
        M = read_matrix(path)
        assert M[0, 1] == M[1, 0]

    @pytest.mark.parametrize("text, line", [
        ("", 1),
        ("x\n", 1),
        ("0\n", 1),
        ("2\n1 0\n", 2),
        ("2\n1 0 0\n0 1\n", 2),
        ("2\n1 zz\n0 1\n", 2),
        ("2\n1 0\n0 1\n0 0\n", 4),
        ("2\n1 0.5\n0.4 1\n", 2),
    ])
    def test_errors_name_file_and_line(self, tmp_path, text, line):
        path = tmp_path / "bad.txt"
        path.write_text(text)
        with pytest.raises(MatrixFormatError) as exc:
            read_matrix(path)
        assert exc.value.line == line
        assert str(path) in str(exc.value)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MatrixFormatError):
            read_matrix(tmp_path / "nope.txt")

    def test_nonfinite_values_rejected(self, tmp_path):
        path = tmp_path / "m.txt"
        path.write_text("1\nnan\n")
        with pytest.raises(MatrixFormatError):
            read_matrix(path)


def test_others():
    np.testing.assert_array_equal(others(4, 1), [0, 2, 3])
    assert math.isclose(len(others(5, 4)), 4)
