import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import integrate, stats
from scipy.special import digamma as sp_digamma

from active_sysid.distributions import (
    InverseWishartParams,
    MatrixNormalParams,
    MatrixTParams,
    entropy_inverse_wishart,
    entropy_joint_mniw,
    entropy_matrix_normal,
    entropy_predicted_product,
    f1,
    f2,
    f3,
    f4,
    inverse_wishart_logpdf,
    matrix_normal_logpdf,
    matrix_t_logpdf,
    normal_logpdf,
    sample_inverse_wishart,
    sample_matrix_normal,
    sample_matrix_t,
    sample_mniw,
    sample_wishart,
    wishart_logpdf,
)
from active_sysid.lemmas import iw_entropy_quadrature, mc_joint_entropy, mniw_logpdf_batch
from active_sysid.linalg import NotPositiveDefiniteError

from .conftest import make_pd


def rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


class TestParams:
    def test_matrix_normal_rejects_non_pd(self):
        with pytest.raises(NotPositiveDefiniteError):
            MatrixNormalParams(np.zeros((1, 2)), np.eye(1), np.diag([1.0, -1.0]))

    def test_matrix_normal_shape_mismatch(self):
        with pytest.raises(ValueError):
            MatrixNormalParams(np.zeros((2, 2)), np.eye(1), np.eye(2))

    def test_min_pivot_threshold(self):
        with pytest.raises(NotPositiveDefiniteError):
            InverseWishartParams(np.diag([1.0, 1e-12]), 3.0)

    def test_dof(self):
        with pytest.raises(ValueError):
            InverseWishartParams(np.eye(3), 2.0)
        InverseWishartParams(np.eye(3), 2.01)

    def test_symmetrizes_roundoff(self):
        Q = np.array([[2.0, 1.0 + 1e-14], [1.0, 2.0]])
        p = InverseWishartParams(Q, 4.0)
        assert_allclose(p.Q, p.Q.T, atol=0)

    def test_matrix_t_accepts_scalar_k(self):
        p = MatrixTParams(np.eye(2), 4.0, np.zeros(2), 0.5)
        assert p.K.shape == (1, 1)
        assert p.M.shape == (2, 1)


class TestMatrixNormalLogpdf:
    def test_standard_normal_at_zero(self):
        p = MatrixNormalParams(np.zeros((1, 1)), np.eye(1), np.eye(1))
        assert_allclose(matrix_normal_logpdf(np.zeros((1, 1)), p), -0.5 * math.log(2 * math.pi), atol=1e-14)
        assert_allclose(matrix_normal_logpdf(np.zeros((1, 1)), p), -0.9189, atol=5e-5)

    def test_maximum_at_mean(self, rng):
        d, m = 2, 3
        p = MatrixNormalParams(rng.standard_normal((d, m)), make_pd(d, rng), make_pd(m, rng))
        peak = matrix_normal_logpdf(p.M, p)
        for _ in range(50):
            assert matrix_normal_logpdf(p.M + 0.1 * rng.standard_normal((d, m)), p) < peak

    def test_normalizes_d1_m2(self):
        p = MatrixNormalParams(np.zeros((1, 2)), np.eye(1), np.eye(2))
        g = np.linspace(-8, 8, 201)
        dens = np.exp([[matrix_normal_logpdf(np.array([[a, b]]), p) for a in g] for b in g])
        total = integrate.simpson(integrate.simpson(dens, x=g), x=g)
        assert abs(total - 1) < 1e-3

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=40, deadline=None)
    def test_equals_gaussian_on_rowmajor_vec(self, seed):
        rng = np.random.default_rng(seed)
        d, m = 2, 3
        M = rng.standard_normal((d, m))
        V, K = make_pd(d, rng), make_pd(m, rng)
        A = rng.standard_normal((d, m))
        ref = stats.multivariate_normal(M.ravel(), np.kron(V, np.linalg.inv(K))).logpdf(A.ravel())
        assert_allclose(matrix_normal_logpdf(A, MatrixNormalParams(M, V, K)), ref, atol=1e-9)

    def test_normal_logpdf(self, rng):
        V = make_pd(3, rng)
        y, mu = rng.standard_normal(3), rng.standard_normal(3)
        assert_allclose(normal_logpdf(y, mu, V), stats.multivariate_normal(mu, V).logpdf(y), atol=1e-12)


class TestInverseWishartLogpdf:
    def test_inverse_gamma_reduction(self):
        # d=1, Q=2, n=3 is inverse-gamma(shape 1.5, scale 1): -ln Gamma(1.5) - 1 at V=1
        p = InverseWishartParams(np.array([[2.0]]), 3.0)
        val = inverse_wishart_logpdf(np.array([[1.0]]), p)
        assert_allclose(val, -math.lgamma(1.5) - 1.0, atol=1e-14)
        assert_allclose(val, -0.879218, atol=1e-6)
        assert_allclose(val, stats.invgamma(1.5, scale=1.0).logpdf(1.0), atol=1e-12)

    def test_quadrature(self):
        p = InverseWishartParams(np.array([[2.0]]), 3.0)

        def dens(v):
            return math.exp(inverse_wishart_logpdf(np.array([[v]]), p))

        head = integrate.quad(dens, 0, 200, limit=200, epsabs=1e-12)[0]
        # the (0, 200) window misses the 2.65e-4 tail of inverse-gamma(1.5, 1)
        assert_allclose(head, stats.invgamma(1.5, scale=1.0).cdf(200.0), atol=1e-8)
        full = head + integrate.quad(dens, 200, np.inf, epsabs=1e-12)[0]
        assert abs(full - 1) < 1e-4

    def test_rotation_invariance_identity_scale(self, rng):
        p = InverseWishartParams(np.eye(2), 5.0)
        for _ in range(10):
            V = make_pd(2, rng)
            R = rotation(rng.uniform(0, 2 * math.pi))
            assert_allclose(inverse_wishart_logpdf(R @ V @ R.T, p), inverse_wishart_logpdf(V, p), atol=1e-10)

    @pytest.mark.parametrize("d,n", [(2, 2.5), (2, 5.0), (3, 4.0), (3, 9.5)])
    def test_matches_scipy(self, rng, d, n):
        Q, V = make_pd(d, rng), make_pd(d, rng)
        ref = stats.invwishart(df=n, scale=Q).logpdf(V)
        assert_allclose(inverse_wishart_logpdf(V, InverseWishartParams(Q, n)), ref, atol=1e-10)

    def test_non_pd_argument(self):
        with pytest.raises(NotPositiveDefiniteError):
            inverse_wishart_logpdf(np.diag([1.0, -1.0]), InverseWishartParams(np.eye(2), 4.0))


def test_wishart_logpdf_matches_scipy(rng):
    Q, S = make_pd(3, rng), make_pd(3, rng)
    assert_allclose(wishart_logpdf(S, Q, 4.5), stats.wishart(df=4.5, scale=Q).logpdf(S), atol=1e-10)


class TestMatrixTLogpdf:
    def test_univariate_student_t(self):
        Q, n, mu, K = 1.7, 4.0, 0.3, 2.5
        p = MatrixTParams(np.array([[Q]]), n, np.array([[mu]]), np.array([[K]]))
        ref = stats.t(df=n, loc=mu, scale=math.sqrt(Q / (n * K)))
        for y in np.linspace(-4, 4, 17):
            assert_allclose(matrix_t_logpdf(np.array([[y]]), p), ref.logpdf(y), atol=1e-12)

    def test_univariate_normalizes(self):
        p = MatrixTParams(np.array([[1.7]]), 3.0, np.array([[0.3]]), np.array([[0.4]]))
        total = integrate.quad(lambda y: math.exp(matrix_t_logpdf(np.array([[y]]), p)), -np.inf, np.inf,
                               epsabs=1e-12, epsrel=1e-12)[0]
        assert abs(total - 1) < 1e-4

    @pytest.mark.parametrize("d,n", [(2, 2.0), (2, 4.5), (3, 6.0)])
    def test_multivariate_t_reduction(self, rng, d, n):
        Q = make_pd(d, rng)
        k = 0.7
        mu = rng.standard_normal(d)
        nu = n + 1 - d
        ref = stats.multivariate_t(loc=mu, shape=Q / (k * nu), df=nu)
        p = MatrixTParams(Q, n, mu, k)
        for _ in range(5):
            y = mu + rng.standard_normal(d)
            assert_allclose(matrix_t_logpdf(y, p), ref.logpdf(y), atol=1e-10)

    def test_maximum_at_location(self, rng):
        p = MatrixTParams(make_pd(2, rng), 4.0, rng.standard_normal((2, 3)), make_pd(3, rng))
        peak = matrix_t_logpdf(p.M, p)
        for _ in range(30):
            assert matrix_t_logpdf(p.M + 0.2 * rng.standard_normal((2, 3)), p) < peak

    def test_equals_mniw_marginal_mc(self, rng):
        # T_A(Q, n, M, K) is the V-marginal of N_A(M, V, K) IW_V(Q, n)
        Q, n = np.array([[1.3]]), 4.0
        p = MatrixTParams(Q, n, np.array([[0.2, -0.1]]), make_pd(2, rng))
        A = np.array([[0.5, 0.4]])
        V = sample_inverse_wishart(InverseWishartParams(Q, n), rng, 200_000)
        sd = np.sqrt(V[:, 0, 0])
        D = (A - p.M) @ p.K @ (A - p.M).T
        vals = np.exp(np.log(np.linalg.det(p.K)) / 2 - np.log(2 * math.pi * sd**2) - D[0, 0] / (2 * sd**2))
        est, se = vals.mean(), vals.std() / math.sqrt(vals.size)
        assert abs(est - math.exp(matrix_t_logpdf(A, p))) < 4 * se


class TestSamplers:
    def test_seed_determinism(self):
        p = MatrixNormalParams(np.zeros((2, 2)), np.eye(2), np.eye(2))
        a = sample_matrix_normal(p, np.random.default_rng(5), 10)
        b = sample_matrix_normal(p, np.random.default_rng(5), 10)
        assert np.array_equal(a, b)
        q = InverseWishartParams(np.eye(2), 4.0)
        assert np.array_equal(sample_inverse_wishart(q, np.random.default_rng(3), 7),
                              sample_inverse_wishart(q, np.random.default_rng(3), 7))

    def test_matrix_normal_mean(self, rng):
        d, m, N = 2, 3, 100_000
        p = MatrixNormalParams(rng.standard_normal((d, m)), make_pd(d, rng), make_pd(m, rng))
        A = sample_matrix_normal(p, rng, N)
        se = np.sqrt(np.outer(np.diag(p.V), np.diag(np.linalg.inv(p.K))) / N)
        assert np.all(np.abs(A.mean(axis=0) - p.M) < 4 * se)

    def test_standard_normal_ks(self, rng):
        p = MatrixNormalParams(np.zeros((1, 1)), np.eye(1), np.eye(1))
        x = sample_matrix_normal(p, rng, 20_000).ravel()
        assert stats.kstest(x, "norm").pvalue > 1e-3

    def test_vec_covariance_is_kronecker(self, rng):
        N = 200_000
        V, K = make_pd(2, rng), make_pd(2, rng)
        p = MatrixNormalParams(np.zeros((2, 2)), V, K)
        A = sample_matrix_normal(p, rng, N).reshape(N, 4)
        emp = A.T @ A / N
        target = np.kron(V, np.linalg.inv(K))
        # var of a product of jointly normal zero-mean variables: S_ii S_jj + S_ij^2
        se = np.sqrt((np.outer(np.diag(target), np.diag(target)) + target**2) / N)
        assert np.all(np.abs(emp - target) < 5 * se)

    def test_wishart_mean(self, rng):
        Q = make_pd(3, rng)
        S = sample_wishart(Q, 6.0, rng, 100_000)
        assert_allclose(S.mean(axis=0), 6.0 * Q, rtol=0, atol=0.05 * np.abs(6 * Q).max())

    def test_inverse_wishart_mean_1d(self, rng):
        V = sample_inverse_wishart(InverseWishartParams(np.array([[2.0]]), 5.0), rng, 200_000)[:, 0, 0]
        se = V.std() / math.sqrt(V.size)
        assert abs(V.mean() - 2.0 / 3.0) < 4 * se

    def test_inverse_wishart_mean_matches_scipy(self, rng):
        Q = make_pd(2, rng)
        V = sample_inverse_wishart(InverseWishartParams(Q, 7.0), rng, 100_000)
        assert_allclose(V.mean(axis=0), stats.invwishart(df=7.0, scale=Q).mean(), atol=0.02)

    def test_expected_log_det_precision(self, rng):
        d, n = 2, 5.0
        Q = make_pd(d, rng)
        V = sample_inverse_wishart(InverseWishartParams(Q, n), rng, 100_000)
        vals = -np.linalg.slogdet(V)[1]
        expected = -np.linalg.slogdet(Q)[1] + sum(sp_digamma((n + 1 - i) / 2) for i in (1, 2)) + d * math.log(2)
        assert abs(vals.mean() - expected) < 4 * vals.std() / math.sqrt(vals.size)

    def test_inverse_wishart_draws_are_spd(self, rng):
        V = sample_inverse_wishart(InverseWishartParams(make_pd(3, rng), 3.5), rng, 10_000)
        assert np.array_equal(V, np.swapaxes(V, 1, 2))
        assert np.all(np.linalg.eigvalsh(V) > 0)

    def test_matrix_t_sampler_scalar(self, rng):
        p = MatrixTParams(np.array([[1.7]]), 5.0, np.array([[0.3]]), np.array([[2.0]]))
        y = sample_matrix_t(p, rng, 50_000).ravel()
        ref = stats.t(df=5.0, loc=0.3, scale=math.sqrt(1.7 / (5.0 * 2.0)))
        assert stats.kstest(y, ref.cdf).pvalue > 1e-3


class TestEntropies:
    def test_standard_normal(self):
        p = MatrixNormalParams(np.zeros((1, 1)), np.eye(1), np.eye(1))
        assert_allclose(entropy_matrix_normal(p), 0.5 * math.log(2 * math.pi * math.e), atol=1e-14)
        assert_allclose(entropy_matrix_normal(p), 1.4189, atol=5e-5)

    def test_matrix_normal_scaling(self):
        m = 3
        a = entropy_matrix_normal(MatrixNormalParams(np.zeros((1, m)), np.eye(1), np.eye(m)))
        b = entropy_matrix_normal(MatrixNormalParams(np.zeros((1, m)), 4 * np.eye(1), np.eye(m)))
        assert_allclose(b - a, 0.5 * m * math.log(4), atol=1e-12)

    def test_matrix_normal_mc(self, rng):
        p = MatrixNormalParams(rng.standard_normal((2, 2)), make_pd(2, rng), make_pd(2, rng))
        A = sample_matrix_normal(p, rng, 20_000)
        est = -np.mean([matrix_normal_logpdf(a, p) for a in A])
        assert abs(est - entropy_matrix_normal(p)) < 0.02 * abs(entropy_matrix_normal(p))

    def test_kronecker_determinant(self, rng):
        for d, m in [(1, 1), (2, 3), (3, 2)]:
            V, K = make_pd(d, rng), make_pd(m, rng)
            lhs = np.linalg.slogdet(np.kron(V, np.linalg.inv(K)))[1]
            rhs = m * np.linalg.slogdet(V)[1] - d * np.linalg.slogdet(K)[1]
            assert_allclose(lhs, rhs, atol=1e-8)

    def test_inverse_wishart_identity_scale(self):
        for d, n in [(1, 3.0), (2, 4.5), (3, 7.0)]:
            assert_allclose(entropy_inverse_wishart(InverseWishartParams(np.eye(d), n)), f3(d, n), atol=1e-14)

    def test_inverse_wishart_quadrature(self):
        closed = entropy_inverse_wishart(InverseWishartParams(np.array([[2.0]]), 5.0))
        assert abs(closed - iw_entropy_quadrature(2.0, 5.0)) < 1e-3

    def test_inverse_wishart_matches_scipy_1d(self):
        p = InverseWishartParams(np.array([[2.0]]), 5.0)
        assert_allclose(entropy_inverse_wishart(p), stats.invwishart(df=5.0, scale=2.0).entropy(), atol=1e-9)

    @pytest.mark.parametrize("d,n", [(2, 4.0), (3, 8.0)])
    def test_inverse_wishart_mc_with_scipy_density(self, rng, d, n):
        # scipy's invwishart.entropy disagrees for d >= 2, so score draws with its logpdf instead
        Q = make_pd(d, rng)
        p = InverseWishartParams(Q, n)
        V = sample_inverse_wishart(p, rng, 40_000)
        lp = stats.invwishart(df=n, scale=Q).logpdf(np.moveaxis(V, 0, -1))
        assert abs(-lp.mean() - entropy_inverse_wishart(p)) < 4 * lp.std() / math.sqrt(lp.size)

    def test_inverse_wishart_scale_shift(self, rng):
        d, c = 3, 2.7
        Q = make_pd(d, rng)
        shift = entropy_inverse_wishart(InverseWishartParams(c * Q, 6.0)) - entropy_inverse_wishart(
            InverseWishartParams(Q, 6.0))
        assert_allclose(shift, 0.5 * d * (d + 1) * math.log(c), atol=1e-12)
        q1 = iw_entropy_quadrature(2.0 * c, 5.0) - iw_entropy_quadrature(2.0, 5.0)
        assert_allclose(q1, math.log(c), atol=1e-6)

    def test_joint_identity_parameters(self):
        for d, m, n in [(1, 1, 3.0), (2, 3, 5.0)]:
            assert_allclose(entropy_joint_mniw(np.eye(m), np.eye(d), d, m, n), f1(d, m, n), atol=1e-14)

    def test_joint_mc(self, rng):
        d, m, n = 1, 2, 4.0
        K, Q = make_pd(m, rng), make_pd(d, rng)
        est, se = mc_joint_entropy(np.zeros((d, m)), K, Q, n, 100_000, rng)
        closed = entropy_joint_mniw(K, Q, d, m, n)
        assert abs(est - closed) < 0.03 * abs(closed)
        assert abs(est - closed) < 4 * se

    def test_joint_chain_rule(self, rng):
        d, m, n = 2, 2, 5.0
        K, Q = make_pd(m, rng), make_pd(d, rng)
        V = sample_inverse_wishart(InverseWishartParams(Q, n), rng, 100_000)
        cond = 0.5 * m * np.linalg.slogdet(V)[1] - 0.5 * d * np.linalg.slogdet(K)[1] + 0.5 * d * m * math.log(
            2 * math.pi * math.e)
        est = entropy_inverse_wishart(InverseWishartParams(Q, n)) + cond.mean()
        se = cond.std() / math.sqrt(cond.size)
        assert abs(est - entropy_joint_mniw(K, Q, d, m, n)) < 4 * se

    def test_f2_is_expected_log_det(self):
        d, n = 3, 6.0
        assert_allclose(f2(d, n), -sum(sp_digamma((n + 1 - i) / 2) for i in range(1, 4)) - 3 * math.log(2),
                        atol=1e-10)

    def test_batch_logpdf_matches_scalar(self, rng):
        d, m, n = 2, 3, 4.5
        M, K, Q = rng.standard_normal((d, m)), make_pd(m, rng), make_pd(d, rng)
        A, V = sample_mniw(M, K, Q, n, rng, 20)
        batch = mniw_logpdf_batch(A, V, M, K, Q, n)
        scalar = [matrix_normal_logpdf(a, MatrixNormalParams(M, v, K)) + inverse_wishart_logpdf(
            v, InverseWishartParams(Q, n)) for a, v in zip(A, V)]
        assert_allclose(batch, scalar, atol=1e-10)


class TestPredictedProductEntropy:
    def test_k_scaling(self, rng):
        Q = make_pd(2, rng)
        a = entropy_predicted_product(0.3, Q, 2, 5.0)
        b = entropy_predicted_product(1.2, Q, 2, 5.0)
        assert_allclose(a - b, math.log(4), atol=1e-12)

    def test_univariate_t_entropy(self):
        # control form carries ln|Q| where the exact entropy carries ln|Q| / 2
        Q, n, k = 1.7, 5.0, 0.8
        ref = stats.t(df=n, scale=math.sqrt(Q / (n * k))).entropy()
        exact = entropy_predicted_product(k, np.array([[Q]]), 1, n, exact=True)
        control = entropy_predicted_product(k, np.array([[Q]]), 1, n)
        assert_allclose(exact, ref, atol=1e-9)
        assert_allclose(control - exact, 0.5 * math.log(Q), atol=1e-12)

    def test_multivariate_t_entropy(self, rng):
        d, n, k = 3, 6.0, 0.4
        Q = make_pd(d, rng)
        nu = n + 1 - d
        ref = stats.multivariate_t(shape=Q / (k * nu), df=nu).entropy()
        assert_allclose(entropy_predicted_product(k, Q, d, n, exact=True), ref, atol=1e-9)

    def test_u_dependence_only_through_k(self, rng):
        Q = make_pd(2, rng)
        ks = rng.uniform(0.1, 3.0, size=20)
        full = [entropy_predicted_product(k, Q, 2, 4.0) for k in ks]
        alone = [-math.log(k) for k in ks]
        assert np.argmin(full) == np.argmin(alone)

    def test_f4_value(self):
        d, n = 2, 5.0
        a, b = (n + 1) / 2, (n + 1 - d) / 2
        expected = -(math.lgamma(a) - d / 2 * math.log(math.pi) - math.lgamma(b)) + a * (sp_digamma(a) - sp_digamma(b))
        assert_allclose(f4(d, n), expected, atol=1e-10)

    def test_rejects_nonpositive_k(self):
        with pytest.raises(ValueError):
            entropy_predicted_product(0.0, np.eye(1), 1, 3.0)
