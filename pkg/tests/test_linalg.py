import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mgproj.errors import RankDeficient, ShapeError, SingularSystem
from mgproj.linalg import qr_thin, solve_gram, solve_upper, spectral_norm

from oracles import gauss_solve, gram_schmidt_qr, jacobi_eigenvalues


class TestQrThin:
    def test_identity(self):
        q, r = qr_thin(np.eye(3))
        assert np.allclose(q, np.eye(3), atol=1e-14)
        assert np.allclose(r, np.eye(3), atol=1e-14)

    def test_single_column(self):
        q, r = qr_thin(np.array([[2.0], [0.0]]))
        assert np.allclose(q, [[1.0], [0.0]])
        assert np.allclose(r, [[2.0]])

    def test_against_gram_schmidt_oracle(self):
        w = np.random.default_rng(16).standard_normal((16, 4))
        q, r = qr_thin(w)
        q_gs, r_gs = gram_schmidt_qr(w)
        assert np.abs(q.T @ q - np.eye(4)).max() < 1e-10
        assert np.abs(q @ r - w).max() < 1e-10
        # positive-diagonal thin QR is unique for full-rank input
        assert np.abs(q - q_gs).max() < 1e-9
        assert np.abs(r - r_gs).max() < 1e-9

    def test_rank_deficient_names_column(self):
        w = np.ones((5, 3))
        with pytest.raises(RankDeficient) as exc:
            qr_thin(w)
        assert exc.value.column == 1

    def test_wide_matrix_rejected(self):
        with pytest.raises(ShapeError):
            qr_thin(np.ones((2, 4)))

    @settings(deadline=None, max_examples=40)
    @given(
        t=st.integers(2, 64),
        tc=st.integers(1, 16),
        seed=st.integers(0, 2**31 - 1),
    )
    def test_factorization_property(self, t, tc, seed):
        tc = min(tc, t)
        w = np.random.default_rng(seed).standard_normal((t, tc))
        q, r = qr_thin(w)
        assert np.linalg.norm(q.T @ q - np.eye(tc)) < 1e-10
        assert np.linalg.norm(q @ r - w) < 1e-10 * max(1.0, np.linalg.norm(w))
        assert np.allclose(r, np.triu(r))
        assert (np.diag(r) > 0).all()


class TestSolveGram:
    def test_identity_system(self):
        u = solve_gram(np.eye(2), 0.0, np.array([[3.0], [5.0]]))
        assert np.allclose(u, [[3.0], [5.0]])

    def test_regularized_scalar(self):
        u = solve_gram(np.array([[2.0]]), 1.0, np.array([[6.0]]))
        assert np.allclose(u, [[2.0]])

    def test_against_elimination_oracle(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((8, 8))
        spd = a @ a.T + 8.0 * np.eye(8)
        z = rng.standard_normal((8, 3))
        u = solve_gram(spd, 1e-4, z)
        reg = spd + 1e-4 * np.eye(8)
        for col in range(z.shape[1]):
            res = np.linalg.norm(reg @ u[:, col] - z[:, col]) / np.linalg.norm(z[:, col])
            assert res < 1e-9
        assert np.abs(u - gauss_solve(reg, z)).max() < 1e-9

    def test_eps_zero_spd_matches_oracle(self):
        rng = np.random.default_rng(9)
        a = rng.standard_normal((6, 6))
        spd = a @ a.T + 6.0 * np.eye(6)
        z = rng.standard_normal(6)
        assert np.abs(solve_gram(spd, 0.0, z) - gauss_solve(spd, z)).max() < 1e-9

    def test_nonsymmetric_system(self):
        rng = np.random.default_rng(10)
        a = rng.standard_normal((5, 5)) + 5.0 * np.eye(5)
        z = rng.standard_normal((5, 2))
        u = solve_gram(a, 0.0, z)
        assert np.linalg.norm(a @ u - z) / np.linalg.norm(z) < 1e-9

    def test_singular_raises(self):
        with pytest.raises(SingularSystem):
            solve_gram(np.zeros((3, 3)), 0.0, np.ones((3, 1)))

    @settings(deadline=None, max_examples=30)
    @given(n=st.integers(1, 12), seed=st.integers(0, 2**31 - 1))
    def test_residual_property(self, n, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((n, n))
        spd = a @ a.T + n * np.eye(n)
        z = rng.standard_normal((n, 2))
        u = solve_gram(spd, 1e-6, z)
        reg = spd + 1e-6 * np.eye(n)
        assert np.linalg.norm(reg @ u - z) / np.linalg.norm(z) < 1e-9


class TestSpectralNorm:
    def test_diagonal(self):
        assert abs(spectral_norm(np.diag([3.0, 1.0]), iters=200, seed=0) - 3.0) < 1e-6

    def test_zero_matrix(self):
        assert spectral_norm(np.zeros((4, 4)), iters=10, seed=0) == 0.0

    def test_against_jacobi_oracle(self):
        rng = np.random.default_rng(11)
        a = rng.standard_normal((10, 10))
        sym = 0.5 * (a + a.T)
        est = spectral_norm(sym, iters=500, seed=1)
        eigs = jacobi_eigenvalues(sym)
        truth = max(abs(eigs[0]), abs(eigs[-1]))
        assert abs(est - truth) / truth < 1e-4

    def test_underestimates(self):
        rng = np.random.default_rng(12)
        m = rng.standard_normal((7, 7))
        est = spectral_norm(m, iters=200, seed=2)
        truth = np.linalg.svd(m, compute_uv=False)[0]
        assert est <= truth * (1.0 + 1e-12)
        assert est >= 0.999 * truth


class TestSolveUpper:
    def test_round_trip(self):
        rng = np.random.default_rng(13)
        r = np.triu(rng.standard_normal((5, 5))) + 5.0 * np.eye(5)
        b = rng.standard_normal((5, 2))
        x = solve_upper(r, b)
        assert np.allclose(r @ x, b, atol=1e-12)
