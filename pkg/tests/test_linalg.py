import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ksminimax import linalg as la


def rand(rng, *shape):
    return rng.standard_normal(shape)


def kron_by_blocks(A, B):
    """Oracle: assemble the Kronecker product block by block."""
    m1, p1 = A.shape
    m2, p2 = B.shape
    out = np.zeros((m1 * m2, p1 * p2))
    for i in range(m1):
        for j in range(p1):
            out[i * m2:(i + 1) * m2, j * p2:(j + 1) * p2] = A[i, j] * B
    return out


class TestKron:
    def test_identity(self):
        assert np.array_equal(la.kron(np.eye(2), np.eye(2)), np.eye(4))

    def test_hand_expansion(self):
        got = la.kron([[1, 2], [3, 4]], [[0, 1], [1, 0]])
        expected = [[0, 1, 0, 2], [1, 0, 2, 0], [0, 3, 0, 4], [3, 0, 4, 0]]
        assert np.array_equal(got, expected)

    def test_matches_block_oracle(self):
        rng = np.random.default_rng(3)
        A, B = rand(rng, 3, 2), rand(rng, 2, 4)
        assert np.array_equal(la.kron(A, B), kron_by_blocks(A, B))

    def test_vec_identity(self):
        rng = np.random.default_rng(0)
        A, B, X = rand(rng, 2, 3), rand(rng, 3, 2), rand(rng, 2, 3)
        lhs = la.vec(B @ X @ A.T)
        rhs = la.kron(A, B) @ la.vec(X)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12

    def test_mixed_product(self):
        rng = np.random.default_rng(1)
        A, B, C, D = rand(rng, 2, 3), rand(rng, 4, 2), rand(rng, 3, 5), rand(rng, 2, 3)
        lhs = la.kron(A, B) @ la.kron(C, D)
        assert np.allclose(lhs, la.kron(A @ C, B @ D), atol=1e-12, rtol=0)

    @given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5), st.integers(1, 5),
           st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_frobenius_multiplicative(self, m1, p1, m2, p2, seed):
        rng = np.random.default_rng(seed)
        A, B = rand(rng, m1, p1), rand(rng, m2, p2)
        assert np.isclose(np.linalg.norm(la.kron(A, B)),
                          np.linalg.norm(A) * np.linalg.norm(B), rtol=1e-12)


class TestKhatriRao:
    def test_single_column_is_kron(self):
        a, b = np.array([[1.0], [-2.0]]), np.array([[3.0], [0.5], [2.0]])
        assert np.array_equal(la.khatri_rao(a, b), la.kron(a, b))

    def test_hand_expansion(self):
        assert np.array_equal(la.khatri_rao([[1], [2]], [[3], [4]]), [[3], [4], [6], [8]])

    def test_column_mismatch(self):
        with pytest.raises(ValueError):
            la.khatri_rao(np.ones((2, 3)), np.ones((2, 2)))

    def test_columns_of_kron(self):
        rng = np.random.default_rng(5)
        p1, p2 = 3, 6
        A, B = rand(rng, 2, p1), rand(rng, 4, p2)
        ia, ib = np.array([1, 2, 2, 3]), np.array([3, 1, 4, 5])
        K = la.kron(A, B)
        merged = la.merge_indices(ia, ib, p2, p1)
        kr = la.khatri_rao(la.select_columns(A, ia), la.select_columns(B, ib))
        assert np.array_equal(kr, K[:, merged - 1])


class TestHadamard:
    def test_ones_identity(self):
        A = np.arange(6.0).reshape(2, 3)
        assert np.array_equal(la.hadamard(A, np.ones((2, 3))), A)

    def test_pm_alpha_squares(self):
        alpha = 0.3
        rng = np.random.default_rng(2)
        S = alpha * rng.choice([-1.0, 1.0], size=(4, 5))
        assert np.isclose(la.sum_entries(la.hadamard(S, S)), alpha**2 * 20, rtol=1e-14)

    def test_hand_arithmetic(self):
        assert la.sum_entries(la.hadamard([[1, -1], [1, 1]], [[1, 1], [-1, 1]])) == 0

    def test_mismatch(self):
        with pytest.raises(ValueError):
            la.hadamard(np.ones((2, 2)), np.ones((2, 3)))


class TestVec:
    def test_round_trip(self):
        X = np.random.default_rng(4).standard_normal((3, 5))
        assert np.array_equal(la.unvec(la.vec(X), 3, 5), X)

    def test_scalar(self):
        assert la.vec([[7.0]]).tolist() == [[7.0]]

    def test_column_stacking(self):
        assert la.vec([[1, 2], [3, 4]]).ravel().tolist() == [1, 3, 2, 4]

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            la.unvec(np.ones(5), 2, 3)


class TestIndices:
    def test_figure_example(self):
        got = la.merge_indices([1, 2, 2, 3], [3, 1, 4, 5], p2=6, p1=3)
        assert got.tolist() == [3, 7, 10, 17]

    def test_first_index(self):
        assert la.merge_indices([1], [1], p2=5).tolist() == [1]

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            la.merge_indices([1], [7], p2=6)
        with pytest.raises(ValueError):
            la.merge_indices([4], [1], p2=6, p1=3)
        with pytest.raises(ValueError):
            la.merge_indices([0], [1], p2=6)

    @given(st.integers(1, 9), st.integers(1, 9), st.integers(1, 12), st.integers(0, 2**32 - 1))
    def test_round_trip(self, p1, p2, s, seed):
        rng = np.random.default_rng(seed)
        ia, ib = rng.integers(1, p1 + 1, s), rng.integers(1, p2 + 1, s)
        back_a, back_b = la.split_indices(la.merge_indices(ia, ib, p2, p1), p2, p1)
        assert np.array_equal(back_a, ia) and np.array_equal(back_b, ib)

    def test_bijection(self):
        p1, p2 = 4, 5
        grid = [(a, b) for a in range(1, p1 + 1) for b in range(1, p2 + 1)]
        merged = la.merge_indices([g[0] for g in grid], [g[1] for g in grid], p2, p1)
        assert sorted(merged.tolist()) == list(range(1, p1 * p2 + 1))


class TestNorms:
    def test_zero_distance(self):
        A = np.random.default_rng(0).standard_normal((3, 4))
        assert la.fro_distance(A, A) == 0

    def test_identity_spectral(self):
        assert la.spectral_norm(np.eye(7)) == 1

    def test_diagonal(self):
        M = np.array([[3.0, 0.0], [0.0, 4.0]])
        assert la.spectral_norm(M) == 4
        assert la.fro_distance(M, np.zeros((2, 2))) == 5

    @pytest.mark.parametrize("shape", [(5, 3), (3, 5), (6, 6), (1, 4), (4, 1)])
    def test_power_iteration_matches_svd(self, shape):
        A = np.random.default_rng(11).standard_normal(shape)
        assert np.isclose(la.spectral_norm(A), np.linalg.svd(A, compute_uv=False)[0], rtol=1e-9)

    def test_normalize(self):
        A = la.normalize_columns([[3.0, 0.0], [4.0, 2.0]])
        assert np.allclose(np.linalg.norm(A, axis=0), 1.0)

    def test_normalize_zero_column(self):
        with pytest.raises(ValueError):
            la.normalize_columns([[1.0, 0.0], [1.0, 0.0]])
