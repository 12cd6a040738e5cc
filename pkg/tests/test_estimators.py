import numpy as np
import pytest

from orthogp.designs import latin_hypercube
from orthogp.exceptions import ConfigurationError
from orthogp.estimators import (
    Dataset,
    blup_predict,
    build_predictor,
    fit_fixed,
    fit_mle,
    gls_beta,
    ls_beta,
    make_covariance,
    neg_log_profile_lik,
    predict_variance,
    rmspe,
)
from orthogp.experiments import SCHEME_1, SCHEME_2
from orthogp.geometry import Basis, beta_to_original, constant_basis, linear_basis, make_domain, model_matrix
from orthogp.kernels import KernelSpec

UNIT = make_domain([0], [1])
SE1 = KernelSpec("squared_exponential", 1.0, [1.0])  # exp{-4 (x - x')^2} on [0, 1]


def scheme(points):
    x = np.asarray(points, dtype=float)
    return Dataset((2 * x - 1)[:, None], np.sin(2 * x))


def sample_gp(kernel, U, seed):
    C = kernel.gram(U) + 1e-10 * np.eye(len(U))
    return np.linalg.cholesky(C) @ np.random.default_rng(seed).standard_normal(len(U))


class TestTrend:
    def test_identity_is_ols(self):
        rng = np.random.default_rng(0)
        G, Y = rng.normal(size=(10, 3)), rng.normal(size=10)
        np.testing.assert_allclose(gls_beta(G, np.eye(10), Y), np.linalg.lstsq(G, Y, rcond=None)[0])

    def test_scale_invariance(self):
        data = scheme(SCHEME_2)
        G = model_matrix(linear_basis(1), data.design)
        C = KernelSpec("matern32", 1.0, [0.3]).gram(data.design)
        np.testing.assert_allclose(gls_beta(G, 7.5 * C, data.y), gls_beta(G, C, data.y), rtol=1e-12)

    def test_uk_scheme2(self):
        data = scheme(SCHEME_2)
        G = model_matrix(linear_basis(1), data.design)
        beta = beta_to_original(linear_basis(1), UNIT, gls_beta(G, SE1.gram(data.design), data.y))
        np.testing.assert_allclose(beta, [-0.07, 0.70], atol=0.01)

    def test_ls_mean(self):
        y = np.array([1.0, 4.0, 2.5])
        assert ls_beta(np.ones((3, 1)), y)[0] == pytest.approx(y.mean())

    def test_ls_scheme2(self):
        data = scheme(SCHEME_2)
        beta = ls_beta(model_matrix(linear_basis(1), data.design), data.y)
        np.testing.assert_allclose(beta_to_original(linear_basis(1), UNIT, beta), [0.20, 0.95], atol=0.01)

    def test_exact_linear(self):
        G = np.column_stack([np.ones(6), np.linspace(-1, 1, 6)])
        np.testing.assert_allclose(ls_beta(G, G @ [0.3, -2.0]), [0.3, -2.0], rtol=1e-12)

    def test_rank_deficient_names_columns(self):
        G = np.column_stack([np.ones(5), np.arange(5.0), 2 * np.arange(5.0)])
        with pytest.raises(ConfigurationError, match="dependent columns"):
            ls_beta(G, np.ones(5))


class TestPrediction:
    @pytest.mark.parametrize("method", ["OGP", "UK", "LS"])
    def test_interpolates(self, method):
        data = scheme(SCHEME_1)
        cov = make_covariance(method, SE1, linear_basis(1))
        fit = fit_fixed(data, method, linear_basis(1), SE1)
        u = data.design[2]
        assert blup_predict(method, fit, data, cov, u, linear_basis(1)) == pytest.approx(data.y[2], abs=1e-8)
        assert abs(predict_variance(method, fit, data, cov, u, linear_basis(1))) <= 1e-8

    def test_reverts_to_trend(self):
        U = np.linspace(-1, -0.5, 6)[:, None]
        data = Dataset(U, np.cos(3 * U[:, 0]))
        k = KernelSpec("squared_exponential", 1.0, [0.05])
        pred = build_predictor("UK", data, linear_basis(1), k)
        mean, trend, stoch = pred.decompose(np.array([[1.0]]))
        assert abs(stoch[0]) < 1e-6
        assert mean[0] == pytest.approx(trend[0])

    def test_ogp_scheme2_rmspe(self):
        data = scheme(SCHEME_2)
        cov = make_covariance("OGP", SE1, linear_basis(1))
        pred = build_predictor("OGP", data, linear_basis(1), cov)
        grid = np.linspace(0, 1, 400)
        err = rmspe(pred, lambda U: np.sin(2 * (U[:, 0] + 1) / 2), (2 * grid - 1)[:, None])
        assert round(err * 1e5, 2) == 5.40

    def test_variance_dense_oracle(self):
        U = np.array([[-0.8], [0.8]])
        data = Dataset(U, np.array([0.3, -0.1]))
        k = KernelSpec("squared_exponential", 1.5, [0.4])
        b = linear_basis(1)
        u = np.array([[0.0]])
        for method in ("UK", "LS", "OGP"):
            cov = make_covariance(method, k, b)
            pred = build_predictor(method, data, b, cov)
            C = cov.gram(U)
            kv = cov.cross(U, u)[:, 0]
            G = model_matrix(b, U)
            g = model_matrix(b, u)[0]
            Ci = np.linalg.inv(C)
            if method == "LS":
                A = np.linalg.inv(G.T @ G) @ G.T
            else:
                A = np.linalg.inv(G.T @ Ci @ G) @ G.T @ Ci
            u_vec = g - G.T @ Ci @ kv
            oracle = cov.diag(u)[0] - kv @ Ci @ kv + u_vec @ (A @ C @ A.T) @ u_vec
            assert pred.variance(u)[0] == pytest.approx(oracle, rel=1e-10)
            assert 0 < pred.variance(u)[0]

    def test_variance_nonnegative_everywhere(self):
        data = scheme(SCHEME_2)
        cov = make_covariance("OGP", SE1, linear_basis(1))
        pred = build_predictor("OGP", data, linear_basis(1), cov)
        assert np.all(pred.variance(np.linspace(-1, 1, 201)[:, None]) >= 0)

    def test_empty_dataset_rejected(self):
        with pytest.raises(ConfigurationError):
            Dataset(np.zeros((0, 1)), np.zeros(0))

    def test_wrong_kernel_pairing(self):
        data = scheme(SCHEME_2)
        with pytest.raises(ConfigurationError):
            build_predictor("OGP", data, linear_basis(1), SE1)

    def test_rmspe_basics(self):
        grid = np.linspace(0, 1, 400)[:, None]
        f = lambda X: np.sin(2 * X[:, 0])  # noqa: E731
        assert rmspe(f, f, grid) == 0.0
        # direct oracle: sqrt(int_0^1 sin^2(2x) dx) = sqrt(1/2 - sin(4)/8)
        exact = np.sqrt(0.5 - np.sin(4.0) / 8.0)
        assert rmspe(lambda X: np.zeros(len(X)), f, grid) == pytest.approx(exact, abs=1e-3)


class TestLikelihood:
    def test_permutation_invariant(self):
        data = scheme(SCHEME_1)
        perm = np.random.default_rng(2).permutation(data.n)
        shuffled = Dataset(data.design[perm], data.y[perm])
        for method in ("OGP", "UK", "LS"):
            a, _ = neg_log_profile_lik([0.7], data, method, linear_basis(1), "matern32")
            b, _ = neg_log_profile_lik([0.7], shuffled, method, linear_basis(1), "matern32")
            assert a == pytest.approx(b, rel=1e-12)

    def test_ogp_differs_from_uk(self):
        data = scheme(SCHEME_1)
        a, _ = neg_log_profile_lik([1.0], data, "OGP", linear_basis(1), "squared_exponential")
        b, _ = neg_log_profile_lik([1.0], data, "UK", linear_basis(1), "squared_exponential")
        assert abs(a - b) > 1e-3

    def test_truth_preferred_on_average(self):
        U = np.linspace(-1, 1, 25)[:, None]
        k = KernelSpec("squared_exponential", 1.0, [1.0])
        vals = {0.1: [], 1.0: [], 5.0: []}
        for seed in range(20):
            data = Dataset(U, sample_gp(k, U, seed))
            for psi in vals:
                vals[psi].append(neg_log_profile_lik([psi], data, "UK", constant_basis(1),
                                                     "squared_exponential")[0])
        assert np.mean(vals[1.0]) <= np.mean(vals[0.1])
        assert np.mean(vals[1.0]) <= np.mean(vals[5.0])

    def test_mle_recovers_lengthscale(self):
        k = KernelSpec("squared_exponential", 1.0, [0.5])
        U = np.linspace(-1, 1, 40)[:, None]
        for seed in range(10):
            data = Dataset(U, sample_gp(k, U, 100 + seed))
            fit = fit_mle(data, "UK", constant_basis(1), "squared_exponential", starts=3, seed=seed)
            assert 0.25 <= fit.psi_hat[0] <= 1.0

    def test_degenerate_bounds(self):
        data = scheme(SCHEME_2)
        fit = fit_mle(data, "OGP", linear_basis(1), "squared_exponential", bounds=(1.0, 1.0))
        assert fit.psi_hat[0] == pytest.approx(1.0)
        assert fit.diagnostics["starts"][0]["nfev"] == 1

    def test_deterministic(self):
        U = latin_hypercube(15, 2, 4)
        data = Dataset(U, np.sin(U[:, 0]) + U[:, 1] ** 2)
        a = fit_mle(data, "OGP", linear_basis(2), "matern32", starts=3, seed=1)
        b = fit_mle(data, "OGP", linear_basis(2), "matern32", starts=3, seed=1)
        np.testing.assert_array_equal(a.psi_hat, b.psi_hat)
        np.testing.assert_array_equal(a.beta_hat, b.beta_hat)

    def test_borehole_fit_finite(self):
        from orthogp.experiments import BOREHOLE_DOMAIN, borehole
        from orthogp.geometry import from_canonical
        U = latin_hypercube(40, 8, 0)
        data = Dataset(U, borehole(from_canonical(BOREHOLE_DOMAIN, U)))
        fit = fit_mle(data, "OGP", linear_basis(8), "squared_exponential", starts=1, max_evals=150)
        assert np.all(np.isfinite(fit.beta_hat)) and np.isfinite(fit.neg_log_lik)
        assert all(r["nfev"] <= 150 + 9 for r in fit.diagnostics["starts"])
        assert np.all((fit.psi_hat >= 0.1 - 1e-12) & (fit.psi_hat <= 5 + 1e-12))
