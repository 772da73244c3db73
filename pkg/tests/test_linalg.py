import numpy as np
import pytest

from sparsecca import (
    DegenerateInputError,
    NotPsdError,
    load_matrix_csv,
    psd_pinv_sqrt,
    psd_sqrt,
    save_matrix_csv,
    subspace_dist_sq,
    svd,
)
from conftest import random_orthonormal, random_psd


class TestSvd:
    def test_diagonal(self):
        res = svd(np.diag([2.0, 1.0]))
        assert np.allclose(res.singular_values, [2.0, 1.0])
        assert np.allclose(res.left, np.eye(2))
        assert np.allclose(res.right, np.eye(2))

    def test_zero_matrix(self):
        res = svd(np.zeros((2, 3)))
        assert np.allclose(res.singular_values, 0.0)

    def test_reconstruction_and_orthonormality(self, rng):
        a = rng.standard_normal((5, 4))
        res = svd(a)
        recon = (res.left * res.singular_values) @ res.right.T
        assert np.linalg.norm(recon - a) <= 1e-8
        assert np.abs(res.left.T @ res.left - np.eye(4)).max() <= 1e-10
        assert np.abs(res.right.T @ res.right - np.eye(4)).max() <= 1e-10
        assert (np.diff(res.singular_values) <= 1e-15).all()

    def test_nonfinite_rejected(self):
        with pytest.raises(DegenerateInputError):
            svd(np.array([[1.0, np.nan], [0.0, 1.0]]))


class TestPsdSqrt:
    def test_identity(self):
        assert np.allclose(psd_sqrt(np.eye(3)), np.eye(3))

    def test_diagonal(self):
        assert np.allclose(psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))

    def test_toeplitz_squaring(self):
        idx = np.arange(3)
        a = 0.3 ** np.abs(idx[:, None] - idx[None, :])
        b = psd_sqrt(a)
        assert np.linalg.norm(b @ b - a) <= 1e-10
        assert np.allclose(b, b.T)

    def test_random_psd_property(self, rng):
        for _ in range(20):
            a = random_psd(rng, 6, ridge=0.0)
            b = psd_sqrt(a)
            assert np.linalg.norm(b @ b - a) <= 1e-8 * np.linalg.norm(a)
            assert np.allclose(b, b.T)
            assert np.linalg.eigvalsh(b)[0] >= -1e-10

    def test_not_psd(self):
        with pytest.raises(NotPsdError):
            psd_sqrt(np.diag([1.0, -1.0]))


class TestPsdPinvSqrt:
    def test_rank_deficient_diagonal(self):
        assert np.allclose(psd_pinv_sqrt(np.diag([4.0, 0.0])), np.diag([0.5, 0.0]))

    def test_identity(self):
        assert np.allclose(psd_pinv_sqrt(np.eye(4)), np.eye(4))

    def test_projection_identity(self, rng):
        u = np.array([0.0, 2.0, 0.0])
        a = np.outer(u, u)
        b = psd_pinv_sqrt(a)
        proj = np.outer(u, u) / (u @ u)
        assert np.abs(b @ a @ b - proj).max() <= 1e-8
        for _ in range(10):
            m = rng.standard_normal((5, 2))
            a = m @ m.T
            b = psd_pinv_sqrt(a)
            q, _ = np.linalg.qr(m)
            assert np.abs(b @ a @ b - q @ q.T).max() <= 1e-8


class TestSubspaceDist:
    def test_same_subspace(self, rng):
        u = random_orthonormal(rng, 6, 2)
        assert subspace_dist_sq(u, u) <= 1e-12
        assert subspace_dist_sq(u, 2.0 * u) <= 1e-12

    def test_orthogonal_lines(self):
        e1 = np.array([[1.0], [0.0]])
        e2 = np.array([[0.0], [1.0]])
        assert subspace_dist_sq(e1, e2) == pytest.approx(2.0)

    def test_invertible_invariance(self, rng):
        a = rng.standard_normal((7, 3))
        b = rng.standard_normal((7, 3))
        t = rng.standard_normal((3, 3)) + 3.0 * np.eye(3)
        base = subspace_dist_sq(a, b)
        assert subspace_dist_sq(a @ t, b) == pytest.approx(base, abs=1e-9)
        assert subspace_dist_sq(a, b @ t) == pytest.approx(base, abs=1e-9)

    def test_trace_identity(self, rng):
        # ||P_a - P_b||_F^2 = 2 r - 2 Tr(P_a P_b) for equal-rank inputs
        a = rng.standard_normal((8, 3))
        b = rng.standard_normal((8, 3))
        qa, _ = np.linalg.qr(a)
        qb, _ = np.linalg.qr(b)
        pa, pb = qa @ qa.T, qb @ qb.T
        expect = 2 * 3 - 2 * np.trace(pa @ pb)
        assert subspace_dist_sq(a, b) == pytest.approx(expect, abs=1e-9)

    def test_rank_deficient(self, rng):
        a = np.ones((5, 2))
        with pytest.raises(DegenerateInputError):
            subspace_dist_sq(a, rng.standard_normal((5, 2)))


def test_csv_round_trip(tmp_path, rng):
    a = rng.standard_normal((4, 7)) * np.exp(rng.uniform(-8, 8, size=(4, 7)))
    path = tmp_path / "mat.csv"
    save_matrix_csv(path, a)
    back = load_matrix_csv(path)
    assert back.shape == a.shape
    assert (back == a).all()
