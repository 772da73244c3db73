import numpy as np
import pytest
import scipy.linalg

from sparsecca import (
    CanonicalPairModel,
    DegenerateInputError,
    NotPsdError,
    SparsityProfile,
    add_canonical_pair,
    build_covariance,
    make_canonical_pair,
    prediction_loss,
    sample,
    sample_covariances,
    subspace_dist_sq,
)
from conftest import random_orthonormal


def five_support():
    return SparsityProfile.from_supports([0, 5, 10, 15, 20], [0, 5, 10, 15, 20])


class TestBuildCovariance:
    def test_identity(self):
        assert np.array_equal(build_covariance("identity", 3), np.eye(3))

    def test_toeplitz(self):
        expect = np.array([[1.0, 0.3, 0.09], [0.3, 1.0, 0.3], [0.09, 0.3, 1.0]])
        assert np.allclose(build_covariance("toeplitz", 3), expect)

    def test_sparse_inv_against_direct_inversion(self):
        p = 5
        sigma = build_covariance("sparse_inv", p)
        omega = np.eye(p) + 0.5 * (np.eye(p, k=1) + np.eye(p, k=-1))
        omega += 0.4 * (np.eye(p, k=2) + np.eye(p, k=-2))
        sigma0 = scipy.linalg.solve(omega, np.eye(p), assume_a="sym")
        d = np.sqrt(np.diag(sigma0))
        assert np.abs(sigma - sigma0 / np.outer(d, d)).max() <= 1e-12

    @pytest.mark.parametrize("kind", ["identity", "toeplitz", "sparse_inv"])
    def test_unit_diagonal_psd(self, kind):
        sigma = build_covariance(kind, 12)
        assert np.allclose(np.diag(sigma), 1.0)
        assert np.linalg.eigvalsh(sigma)[0] > 0

    def test_unknown_kind(self):
        with pytest.raises(DegenerateInputError):
            build_covariance("wishart", 4)


class TestMakeCanonicalPair:
    def test_default_setting(self, rng):
        sigma = build_covariance("identity", 300)
        model = make_canonical_pair(sigma, sigma, five_support(), [0.9, 0.8], rng)
        assert len(model.support_u()) <= 5
        assert set(model.support_u()) <= {0, 5, 10, 15, 20}
        model.validate()

    def test_rank_one_unit_support(self, rng):
        prof = SparsityProfile.from_supports([0], [0])
        model = make_canonical_pair(np.eye(4), np.eye(4), prof, [0.5], rng)
        assert np.allclose(np.abs(model.u[:, 0]), [1.0, 0.0, 0.0, 0.0])

    def test_toeplitz_normalization(self, rng):
        sigma = build_covariance("toeplitz", 40)
        model = make_canonical_pair(sigma, sigma, five_support(), [0.9, 0.8], rng)
        assert np.abs(model.u.T @ sigma @ model.u - np.eye(2)).max() <= 1e-8
        assert np.abs(model.v.T @ sigma @ model.v - np.eye(2)).max() <= 1e-8

    def test_rank_exceeds_budget(self, rng):
        prof = SparsityProfile.from_supports([0], [0])
        with pytest.raises(DegenerateInputError):
            make_canonical_pair(np.eye(4), np.eye(4), prof, [0.9, 0.8], rng)

    def test_degenerate_alphabet(self, rng):
        with pytest.raises(DegenerateInputError):
            make_canonical_pair(
                np.eye(30), np.eye(30), five_support(), [0.9, 0.8], rng, alphabet=(0.0,)
            )


class TestSampling:
    def test_leading_correlation(self, rng):
        sigma = np.eye(30)
        prof = SparsityProfile.from_supports(range(5), range(5))
        model = make_canonical_pair(sigma, sigma, prof, [0.9, 0.8], rng)
        s = sample(model, 10000, rng)
        a = s.x @ model.u[:, 0]
        b = s.y @ model.v[:, 0]
        corr = (a @ b) / np.sqrt((a @ a) * (b @ b))
        assert corr == pytest.approx(0.9, abs=0.02)

    def test_vanishing_correlation(self, rng):
        prof = SparsityProfile.from_supports(range(4), range(4))
        model = make_canonical_pair(np.eye(10), np.eye(10), prof, [1e-16], rng)
        assert np.abs(model.sigma_xy).max() <= 1e-15
        s = sample(model, 4000, rng)
        _, _, sxy = sample_covariances(s)
        assert np.abs(sxy).max() <= 4.0 / np.sqrt(s.n)

    def test_determinism(self, rng):
        prof = SparsityProfile.from_supports(range(3), range(3))
        model = make_canonical_pair(np.eye(8), np.eye(8), prof, [0.7], rng)
        s1 = sample(model, 50, np.random.default_rng(5))
        s2 = sample(model, 50, np.random.default_rng(5))
        assert (s1.x == s2.x).all() and (s1.y == s2.y).all()

    def test_indefinite_joint_rejected(self, rng):
        bad = CanonicalPairModel(
            sigma_x=np.eye(2),
            sigma_y=np.eye(2),
            u=2.0 * np.eye(2, 1),
            v=2.0 * np.eye(2, 1),
            lam=np.array([0.99]),
        )
        with pytest.raises(NotPsdError):
            sample(bad, 5, rng)


class TestSampleCovariances:
    def test_single_observation(self):
        from sparsecca import SampleSet

        s = SampleSet(np.array([[1.0, 0.0]]), np.array([[2.0]]))
        sx, sy, sxy = sample_covariances(s)
        assert np.array_equal(sx, [[1.0, 0.0], [0.0, 0.0]])
        assert np.array_equal(sy, [[4.0]])
        assert np.array_equal(sxy, [[2.0], [0.0]])

    def test_x_equals_y(self, rng):
        from sparsecca import SampleSet

        x = rng.standard_normal((20, 4))
        s = SampleSet(x, x.copy())
        sx, _, sxy = sample_covariances(s)
        assert np.allclose(sx, sxy)

    def test_concentration(self, rng):
        p = 15
        prof = SparsityProfile.from_supports(range(3), range(3))
        model = make_canonical_pair(np.eye(p), np.eye(p), prof, [0.8], rng)
        n = 10 * 2 * p
        s = sample(model, n, rng)
        sx, sy, sxy = sample_covariances(s)
        assert np.linalg.norm(sx - np.eye(p), 2) <= 3.0 * np.sqrt(p / n)
        joint_hat = np.block([[sx, sxy], [sxy.T, sy]])
        joint = model.joint_covariance()
        assert np.linalg.norm(joint_hat - joint, 2) <= 5.0 * np.sqrt(2 * p / n)


class TestPredictionLoss:
    def test_zero_at_truth(self, rng):
        sigma = build_covariance("toeplitz", 12)
        u = random_orthonormal(rng, 12, 3)
        assert prediction_loss(u, u, sigma) <= 1e-12

    def test_orthogonal_invariance(self, rng):
        sigma = build_covariance("sparse_inv", 10)
        u = random_orthonormal(rng, 10, 2)
        w0 = np.linalg.qr(rng.standard_normal((2, 2)))[0]
        assert prediction_loss(u @ w0, u, sigma) <= 1e-10
        u_hat = rng.standard_normal((10, 2))
        w1 = np.linalg.qr(rng.standard_normal((2, 2)))[0]
        base = prediction_loss(u_hat, u, sigma)
        assert prediction_loss(u_hat @ w1, u @ w0, sigma) == pytest.approx(base, abs=1e-9)

    def test_doubled_estimate(self, rng):
        for r in (1, 2, 3):
            u = random_orthonormal(rng, 9, r)
            assert prediction_loss(2.0 * u, u, np.eye(9)) == pytest.approx(r, abs=1e-9)

    def test_nonnegative_and_positive_off_truth(self, rng):
        sigma = build_covariance("toeplitz", 8)
        u = random_orthonormal(rng, 8, 2)
        smallest = np.inf
        for _ in range(20):
            u_hat = rng.standard_normal((8, 2))
            loss = prediction_loss(u_hat, u, sigma)
            assert loss >= 0.0
            smallest = min(smallest, loss)
        assert smallest > 1e-6

    def test_dominates_subspace_distance(self, rng):
        # ||P_uhat - P_u||_F^2 <= 2 (M2 / M1) L(uhat, u); the constant 2 is
        # what the Procrustes/projection argument yields and is tight in the
        # small-perturbation limit.
        for _ in range(25):
            p, r = 8, 2
            w = np.linalg.eigvalsh(np.eye(p))  # placeholder
            basis = random_orthonormal(rng, p, p)
            eigs = rng.uniform(0.5, 2.0, size=p)
            sigma = (basis * eigs) @ basis.T
            m1, m2 = eigs.min(), eigs.max()
            u_raw = rng.standard_normal((p, r))
            gram = u_raw.T @ sigma @ u_raw
            u = u_raw @ np.linalg.inv(np.linalg.cholesky(gram)).T
            u_hat = u + 0.1 * rng.standard_normal((p, r))
            lhs = subspace_dist_sq(u_hat, u)
            rhs = 2.0 * (m2 / m1) * prediction_loss(u_hat, u, sigma)
            assert lhs <= rhs + 1e-9


class TestModelExtension:
    def test_extra_pair_orthogonal(self, rng):
        sigma = build_covariance("identity", 40)
        model = make_canonical_pair(sigma, sigma, five_support(), [0.9, 0.8], rng)
        bigger = add_canonical_pair(model, np.arange(40), 0.3, rng)
        assert bigger.rank == 3
        bigger.validate()
        assert np.allclose(bigger.u[:, :2], model.u)

    def test_extra_pair_bad_lambda(self, rng):
        sigma = build_covariance("identity", 40)
        model = make_canonical_pair(sigma, sigma, five_support(), [0.9, 0.8], rng)
        with pytest.raises(DegenerateInputError):
            add_canonical_pair(model, np.arange(40), 0.85, rng)


def test_model_save_load_round_trip(tmp_path, rng):
    sigma = build_covariance("toeplitz", 25)
    model = make_canonical_pair(
        sigma, sigma, five_support(), [0.9, 0.8], rng
    )
    model.save(tmp_path / "model")
    back = CanonicalPairModel.load(tmp_path / "model")
    assert (back.u == model.u).all()
    assert (back.lam == model.lam).all()
    assert (back.sigma_x == model.sigma_x).all()
