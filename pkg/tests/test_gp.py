"""GP fit, prediction, scale MLE, and profile likelihood against dense oracles."""

import math

import numpy as np
import pytest

from gpood import (
    DimensionError,
    Lengthscales,
    fit_gp,
    predict,
    predict_many,
    profile_ll_gradient,
    profile_log_likelihood,
)
from gpood.gp import TAU2_FLOOR, VAR_FLOOR_FRAC, rebuild_gp
from gpood.kernel import Lengthscales as LS, weighted_sq_distances
from conftest import make_instance


def dense_kernel(X, theta, jitter):
    """Oracle kernel matrix assembled independently of the library path."""
    X = np.asarray(X, float)
    D = np.zeros((len(X), len(X)))
    for i in range(len(X)):
        for j in range(len(X)):
            D[i, j] = np.sum((X[i] - X[j]) ** 2 / theta)
    return np.exp(-D) + jitter * np.eye(len(X))


def dense_tau2(X, z, theta, jitter):
    K = dense_kernel(X, theta, jitter)
    return float(z @ np.linalg.solve(K, z)) / len(z)


def dense_profile_ll(X, z, theta, jitter):
    K = dense_kernel(X, theta, jitter)
    quad = float(z @ np.linalg.inv(K) @ z)
    _, logdet = np.linalg.slogdet(K)
    return -(len(z) / 2.0) * math.log(quad) - 0.5 * logdet


class TestFit:
    def test_rejects_single_point(self):
        with pytest.raises(DimensionError):
            fit_gp(0, np.array([[0.0]]), np.array([1.0]), Lengthscales([1.0]))

    def test_identity_kernel_tau2(self):
        # Two points far enough apart that the off-diagonal underflows:
        # tau2 = (4 + 0) / 2 up to the jitter on the diagonal.
        X = np.array([[0.0], [1e6]])
        z = np.array([2.0, 0.0])
        gp = fit_gp(0, X, z, Lengthscales([1.0]))
        assert gp.tau2 == pytest.approx(2.0, rel=1e-6)

    def test_zero_scores_floor(self):
        X = np.array([[0.0], [1.0], [2.0]])
        gp = fit_gp(0, X, np.zeros(3), Lengthscales([1.0]))
        assert gp.tau2 == TAU2_FLOOR
        pd = predict(gp, np.array([0.5]))
        assert math.isfinite(pd.mu) and pd.var > 0

    def test_cholesky_reconstructs(self, rng):
        X, z, theta = make_instance(rng, m=25, p=3)
        gp = fit_gp(0, X, z, Lengthscales(theta))
        K = gp.chol @ gp.chol.T
        ref = np.exp(-weighted_sq_distances(X, X, LS(theta)))
        ref += gp.jitter_applied * np.eye(25)
        assert np.abs(K - ref).max() / np.abs(ref).max() <= 1e-10

    def test_tau2_matches_dense_solve(self, rng):
        for _ in range(10):
            X, z, theta = make_instance(rng)
            gp = fit_gp(0, X, z, Lengthscales(theta))
            oracle = dense_tau2(X, z, theta, gp.jitter_applied)
            assert gp.tau2 == pytest.approx(oracle, rel=1e-12)


class TestPredict:
    def test_interpolates_training_points(self, rng):
        X, z, theta = make_instance(rng, m=30, p=2)
        gp = fit_gp(0, X, z, Lengthscales(theta))
        mu, var = predict_many(gp, X)
        scale = max(1.0, np.abs(z).max())
        assert np.abs(mu - z).max() <= 1e-6 * scale
        assert var.max() <= 1e-6 * gp.tau2

    def test_far_query_reverts_to_prior(self, rng):
        X, z, theta = make_instance(rng, m=12, p=2)
        gp = fit_gp(0, X, z, Lengthscales(theta))
        pd = predict(gp, np.full(2, 1e6))
        assert pd.mu == 0.0
        assert pd.var == gp.tau2

    def test_matches_dense_solve(self, rng):
        X, z, theta = make_instance(rng, m=5, p=2)
        gp = fit_gp(0, X, z, Lengthscales(theta))
        K = dense_kernel(X, theta, gp.jitter_applied)
        Kinv = np.linalg.inv(K)
        for _ in range(10):
            q = rng.uniform(-1, 7, size=2)
            kvec = np.exp(-np.sum((X - q) ** 2 / theta, axis=1))
            mu_oracle = float(kvec @ Kinv @ z)
            var_oracle = gp.tau2 * (1.0 - float(kvec @ Kinv @ kvec))
            var_oracle = min(max(var_oracle, VAR_FLOOR_FRAC * gp.tau2), gp.tau2)
            pd = predict(gp, q)
            assert pd.mu == pytest.approx(mu_oracle, abs=1e-10 * max(1, abs(mu_oracle)))
            assert pd.var == pytest.approx(var_oracle, abs=1e-10 * gp.tau2)

    def test_variance_clamped_into_range(self, rng):
        X, z, theta = make_instance(rng, m=20, p=2)
        gp = fit_gp(0, X, z, Lengthscales(theta))
        Q = np.vstack([X, rng.uniform(-10, 16, size=(50, 2))])
        _, var = predict_many(gp, Q)
        assert np.all(var >= VAR_FLOOR_FRAC * gp.tau2)
        assert np.all(var <= gp.tau2)

    def test_variance_ratio_shrinks_when_point_added(self, rng):
        # The posterior part 1 - k' Phi^{-1} k is monotone non-increasing in
        # the training set; the fitted tau2 rescales it, so compare ratios.
        for _ in range(5):
            X, z, theta = make_instance(rng, m=10, p=2)
            gp_small = fit_gp(0, X[:-1], z[:-1], Lengthscales(theta))
            gp_big = fit_gp(0, X, z, Lengthscales(theta))
            queries = rng.uniform(0, 6, size=(20, 2))
            _, v_small = predict_many(gp_small, queries)
            _, v_big = predict_many(gp_big, queries)
            assert np.all(
                v_big / gp_big.tau2 <= v_small / gp_small.tau2 + 1e-9
            )

    def test_rebuild_matches_fit(self, rng):
        X, z, theta = make_instance(rng, m=15, p=2)
        gp = fit_gp(0, X, z, Lengthscales(theta))
        again = rebuild_gp(0, X, z, gp.ls, gp.tau2, gp.jitter_applied)
        np.testing.assert_array_equal(gp.chol, again.chol)
        np.testing.assert_array_equal(gp.solve_z, again.solve_z)


class TestProfileLikelihood:
    def test_identity_kernel_value(self):
        # Far-apart points make Phi the identity: ll = -(2/2) log 2 - 0.
        X = np.array([[0.0], [1e6]])
        z = np.array([1.0, 1.0])
        ll = profile_log_likelihood(X, z, Lengthscales([1.0]))
        assert ll == pytest.approx(-math.log(2.0), rel=1e-6)

    def test_matches_dense_oracle(self, rng):
        for _ in range(10):
            X, z, theta = make_instance(rng)
            jitter = 1e-8
            ll = profile_log_likelihood(X, z, Lengthscales(theta))
            oracle = dense_profile_ll(X, z, theta, jitter)
            assert ll == pytest.approx(oracle, rel=1e-8)

    def test_gradient_matches_finite_differences(self, rng):
        h = 1e-5
        for _ in range(10):
            X, z, theta = make_instance(rng)
            grad = profile_ll_gradient(X, z, Lengthscales(theta))
            for j in range(len(theta)):
                up, dn = theta.copy(), theta.copy()
                up[j] *= math.exp(h)
                dn[j] *= math.exp(-h)
                fd = (
                    profile_log_likelihood(X, z, Lengthscales(up))
                    - profile_log_likelihood(X, z, Lengthscales(dn))
                ) / (2 * h)
                assert abs(grad[j] - fd) <= 1e-4 * max(abs(fd), 1e-6)

    def test_gradient_finite_for_near_coincident_points(self):
        X = np.array([[0.0], [1e-9], [1.0]])
        z = np.array([0.3, 0.3, -0.5])
        grad = profile_ll_gradient(X, z, Lengthscales([1.0]))
        assert np.all(np.isfinite(grad))

    def test_constant_shift_invariance_of_argmax(self, rng):
        # Dropping the constant cannot move the argmax: differences between
        # two candidate lengthscales are what the optimizer sees.
        X, z, theta = make_instance(rng, m=15, p=2)
        lls = [
            profile_log_likelihood(X, z, Lengthscales(theta * s))
            for s in (0.5, 1.0, 2.0)
        ]
        shifted = [v + 123.456 for v in lls]
        assert np.argmax(lls) == np.argmax(shifted)
