import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from factorcast import spectral

from oracles import gram_schmidt, subspace_gap, top_left_vectors_via_jacobi


def random_like(shape, seed):
    return np.random.default_rng(seed).standard_normal(shape)


class TestTopLeftSingularVectors:
    def test_diagonal_matrix(self):
        u = spectral.top_left_singular_vectors(np.diag([3.0, 2.0, 1.0]), 2)
        target = np.eye(3)[:, :2]
        assert spectral.sin_theta_distance(u, target) < 1e-12

    def test_against_jacobi_gram_oracle(self):
        m = random_like((20, 30), 0)
        for r in (1, 3, 5):
            u = spectral.top_left_singular_vectors(m, r)
            ref = top_left_vectors_via_jacobi(m, r)
            assert subspace_gap(u, ref) < 1e-8

    def test_rank_deficient_exact_recovery(self):
        basis = np.linalg.qr(random_like((10, 3), 1))[0]
        m = basis @ random_like((3, 7), 2)
        u = spectral.top_left_singular_vectors(m, 3)
        assert spectral.sin_theta_distance(u, basis) < 1e-10

    def test_orthonormal_columns(self):
        u = spectral.top_left_singular_vectors(random_like((8, 5), 3), 4)
        np.testing.assert_allclose(u.T @ u, np.eye(4), atol=1e-10)

    def test_deterministic(self):
        m = random_like((12, 9), 4)
        u1 = spectral.top_left_singular_vectors(m, 3)
        u2 = spectral.top_left_singular_vectors(m.copy(), 3)
        np.testing.assert_array_equal(u1, u2)

    def test_rotation_invariance_of_subspace(self):
        m = random_like((10, 8), 5)
        g = np.linalg.qr(random_like((8, 8), 6))[0]
        u1 = spectral.top_left_singular_vectors(m, 3)
        u2 = spectral.top_left_singular_vectors(m @ g, 3)
        assert spectral.sin_theta_distance(u1, u2) < 1e-8

    def test_rank_out_of_range(self):
        with pytest.raises(ValueError):
            spectral.top_left_singular_vectors(np.zeros((3, 4)), 4)
        with pytest.raises(ValueError):
            spectral.top_left_singular_vectors(np.zeros((3, 4)), 0)

    def test_projection_onto_top_subspace_is_best(self):
        m = random_like((9, 12), 7)
        r = 3
        u = spectral.top_left_singular_vectors(m, r)
        best = np.linalg.norm(m - u @ (u.T @ m))
        rng = np.random.default_rng(8)
        for _ in range(50):
            q = np.linalg.qr(rng.standard_normal((9, r)))[0]
            other = np.linalg.norm(m - q @ (q.T @ m))
            assert best <= other + 1e-12


class TestQrOrthonormalize:
    def test_preserves_orthonormal_input(self):
        q0 = np.linalg.qr(random_like((7, 3), 9))[0]
        q = spectral.qr_orthonormalize(q0)
        assert spectral.sin_theta_distance(q, q0) < 1e-12

    def test_small_case_matches_gram_schmidt(self):
        m = np.array([[1.0, 1.0], [0.0, 1.0], [0.0, 0.0]])
        q = spectral.qr_orthonormalize(m)
        ref = gram_schmidt(m)
        assert subspace_gap(q, ref) < 1e-12

    def test_orthonormality_over_many_draws(self):
        for trial in range(100):
            m = random_like((10, 4), 100 + trial)
            q = spectral.qr_orthonormalize(m)
            assert np.max(np.abs(q.T @ q - np.eye(4))) < 1e-12

    def test_span_is_preserved(self):
        m = random_like((8, 3), 10)
        q = spectral.qr_orthonormalize(m)
        # Every original column lies in span(q).
        residual = m - q @ (q.T @ m)
        assert np.max(np.abs(residual)) < 1e-10

    def test_rank_deficiency_detected(self):
        m = random_like((6, 2), 11)
        m = np.hstack([m, m[:, :1] - m[:, 1:]])
        with pytest.raises(ValueError):
            spectral.qr_orthonormalize(m)


class TestSinTheta:
    def test_identical_subspace(self):
        u = np.linalg.qr(random_like((6, 2), 12))[0]
        assert spectral.sin_theta_distance(u, u) < 1e-14

    def test_orthogonal_complements(self):
        e1 = np.array([[1.0], [0.0]])
        e2 = np.array([[0.0], [1.0]])
        assert spectral.sin_theta_distance(e1, e2) == pytest.approx(1.0, abs=1e-15)

    def test_planar_rotation(self):
        theta = 0.3
        u = np.array([[1.0], [0.0], [0.0]])
        v = np.array([[np.cos(theta)], [np.sin(theta)], [0.0]])
        assert spectral.sin_theta_distance(u, v) == pytest.approx(np.sin(theta), abs=1e-12)

    @settings(deadline=None, max_examples=25)
    @given(seed=st.integers(0, 2**31))
    def test_symmetry_and_rotation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        u = np.linalg.qr(rng.standard_normal((7, 3)))[0]
        v = np.linalg.qr(rng.standard_normal((7, 3)))[0]
        d = spectral.sin_theta_distance(u, v)
        assert spectral.sin_theta_distance(v, u) == pytest.approx(d, abs=1e-12)
        g = np.linalg.qr(rng.standard_normal((3, 3)))[0]
        assert spectral.sin_theta_distance(u @ g, v) == pytest.approx(d, abs=1e-10)
        assert abs(spectral.projector_distance(u, v) - d) < 1e-8

    def test_non_orthonormal_rejected(self):
        u = random_like((5, 2), 13)
        v = np.linalg.qr(random_like((5, 2), 14))[0]
        with pytest.raises(ValueError):
            spectral.sin_theta_distance(u, v)

    def test_shape_mismatch_rejected(self):
        u = np.linalg.qr(random_like((5, 2), 15))[0]
        v = np.linalg.qr(random_like((6, 2), 16))[0]
        with pytest.raises(ValueError):
            spectral.sin_theta_distance(u, v)


class TestEigenRatioRank:
    def test_worked_example(self):
        assert spectral.eigen_ratio_rank(np.array([10.0, 9.0, 0.1, 0.09]), 3) == 2

    def test_geometric_sequence_tie_breaks_to_one(self):
        values = 8.0 * 0.5 ** np.arange(6)
        assert spectral.eigen_ratio_rank(values, 5) == 1

    def test_noiseless_low_rank_spectrum(self):
        basis = np.linalg.qr(random_like((8, 3), 17))[0]
        m = basis @ random_like((3, 10), 18)
        s = spectral.singular_values(m @ m.T)
        assert spectral.eigen_ratio_rank(s, 7) == 3

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            spectral.eigen_ratio_rank(np.array([]), 1)

    def test_r_max_bounds(self):
        with pytest.raises(ValueError):
            spectral.eigen_ratio_rank(np.array([3.0, 2.0, 1.0]), 3)
        with pytest.raises(ValueError):
            spectral.eigen_ratio_rank(np.array([3.0, 2.0, 1.0]), 0)


class TestTruncatedSvd:
    def test_reconstruction(self):
        m = random_like((6, 4), 19)
        res = spectral.truncated_svd(m, 4)
        np.testing.assert_allclose(
            res.u @ np.diag(res.singular_values) @ res.v.T, m, atol=1e-10
        )
        assert np.all(np.diff(res.singular_values) <= 1e-12)

    def test_orthonormal_factors(self):
        res = spectral.truncated_svd(random_like((9, 5), 20), 3)
        np.testing.assert_allclose(res.u.T @ res.u, np.eye(3), atol=1e-10)
        np.testing.assert_allclose(res.v.T @ res.v, np.eye(3), atol=1e-10)
