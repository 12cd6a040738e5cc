import numpy as np
import pytest

from orthogp.exceptions import NumericalError, QuadratureBudgetError
from orthogp.linalg import cholesky
from orthogp.quadrature import (
    check_budget,
    default_order,
    gauss_legendre,
    kernel_weights,
    lagrange_matrix,
    tensor_grid,
)


class TestCholesky:
    def test_spd_no_jitter(self):
        A = np.array([[4.0, 1.0], [1.0, 3.0]])
        f = cholesky(A)
        assert f.jitter == 0.0
        np.testing.assert_allclose(f.solve([1.0, 2.0]), np.linalg.solve(A, [1.0, 2.0]))
        assert f.logdet() == pytest.approx(np.log(np.linalg.det(A)))

    def test_semidefinite_gets_jitter(self):
        v = np.array([1.0, 2.0, 3.0])
        f = cholesky(np.outer(v, v))
        assert 0 < f.jitter <= 1e-6 * 14 / 3

    def test_indefinite_fails(self):
        with pytest.raises(NumericalError, match="not positive definite"):
            cholesky(np.diag([2.0, -1.0]))

    def test_nonfinite(self):
        with pytest.raises(NumericalError):
            cholesky(np.array([[np.nan]]))


class TestRules:
    def test_polynomial_exactness(self):
        t, w = gauss_legendre(5, 0.0, 2.0)
        assert w @ t**9 == pytest.approx(2.0**10 / 10, rel=1e-14)

    def test_default_order(self):
        assert default_order(1) == 64
        assert default_order(2) == 64
        assert default_order(4) == 31
        assert default_order(8) == 8

    def test_budget(self):
        check_budget(100, 3)
        with pytest.raises(QuadratureBudgetError, match="budget"):
            check_budget(101, 3)

    def test_tensor_grid(self):
        nodes, weights = tensor_grid(6, 2)
        assert nodes.shape == (36, 2)
        assert weights.sum() == pytest.approx(4.0)
        assert weights @ (nodes[:, 0] ** 2 * nodes[:, 1] ** 4) == pytest.approx(2 / 3 * 2 / 5)

    def test_lagrange_partition_of_unity(self):
        x = np.linspace(-1, 1, 17)
        L = lagrange_matrix(12, x)
        np.testing.assert_allclose(L.sum(axis=1), 1.0, atol=1e-13)
        t, _ = gauss_legendre(12)
        np.testing.assert_allclose(lagrange_matrix(12, t), np.eye(12), atol=1e-15)

    @pytest.mark.parametrize("family", ["exponential", "matern32"])
    def test_product_weights_handle_kink(self, family):
        # integral of corr(x - xi) over [-1, 1]: the kink at xi = x is resolved
        from orthogp.ortho import CLOSED_FORMS
        M = CLOSED_FORMS[family](0.4)[0]
        x = np.linspace(-1, 1, 11)
        S = kernel_weights(family, 0.4, x, 32)
        np.testing.assert_allclose(S.sum(axis=1), M(x), rtol=1e-12)
