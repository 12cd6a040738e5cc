import numpy as np
import pytest

from orthogp.geometry import constant_basis, linear_basis, make_domain
from orthogp.kernels import KernelSpec
from orthogp.ortho import assemble_ortho
from orthogp.quadrature import gauss_legendre
from orthogp.spectra import eigenfunction_table, nystrom_eigensystem

SE = KernelSpec("squared_exponential", 1.0, [1.0])


def test_rank_one_kernel():
    phi = lambda X: 1.0 + X[:, 0] ** 2  # noqa: E731
    es = nystrom_eigensystem(lambda X, Z: np.outer(phi(X), phi(Z)), 1, 32, k=3)
    # int_{-1}^{1} (1 + x^2)^2 dx = 56 / 15
    assert es.eigenvalues[0] == pytest.approx(56 / 15, rel=1e-12)
    assert np.all(es.eigenvalues[1:] < 1e-12)
    x = np.linspace(-1, 1, 9)[:, None]
    f1 = es(x)[:, 0]
    np.testing.assert_allclose(f1 / phi(x), f1[0] / phi(x)[0], rtol=1e-10)


def test_se_spectrum():
    es = nystrom_eigensystem(SE, 1, 64, k=6)
    lam = es.eigenvalues
    assert np.all(lam > 0) and np.all(np.diff(lam) < 0)
    assert lam[4] / lam[0] < 1e-2
    np.testing.assert_allclose(nystrom_eigensystem(SE, 1, 128, k=6).eigenvalues, lam, atol=1e-6)


def test_orthonormal_at_nodes():
    es = nystrom_eigensystem(SE, 1, 64, k=5)
    F = es.node_values
    np.testing.assert_allclose(F.T @ (es.weights[:, None] * F), np.eye(5), atol=1e-8)


def test_orthonormal_on_grid_extension():
    es = nystrom_eigensystem(SE, 1, 64, k=3)
    t, w = gauss_legendre(80)
    F = eigenfunction_table(es, t)
    np.testing.assert_allclose(F.T @ (w[:, None] * F), np.eye(3), atol=1e-8)


def test_constant_like_leading_mode():
    es = nystrom_eigensystem(SE, 1, 64, k=3)
    F = eigenfunction_table(es, np.linspace(-1, 1, 201))
    assert np.all(F[:, 0] > 0)


def test_sign_convention():
    es = nystrom_eigensystem(SE, 1, 64, k=4)
    F = eigenfunction_table(es, np.linspace(-1, 1, 51))
    for c in range(4):
        first = F[np.flatnonzero(np.abs(F[:, c]) > 1e-8)[0], c]
        assert first > 0


def test_ortho_constant_zero_mean():
    ok = assemble_ortho(SE, constant_basis(1))
    es = nystrom_eigensystem(ok, 1, 64, k=3)
    assert abs(es.integrate()[0]) <= 1e-6


def test_ortho_linear_first_two():
    ok = assemble_ortho(SE, linear_basis(1))
    es = nystrom_eigensystem(ok, 1, 64, k=2)
    assert np.all(np.abs(es.integrate()) <= 1e-6)
    assert np.all(np.abs(es.integrate(lambda X: X[:, 0])) <= 1e-6)


def test_two_dimensional_domain():
    dom = make_domain([0, 0], [2, 1])
    k = KernelSpec("exponential", 1.0, [1.0, 1.0])
    es = nystrom_eigensystem(k, dom, 16, k=3)
    assert es.nodes.shape == (256, 2)
    assert es.weights.sum() == pytest.approx(2.0)
    assert np.all(np.diff(es.eigenvalues) <= 0)


def test_k_too_large():
    with pytest.raises(ValueError):
        nystrom_eigensystem(SE, 1, 8, k=9)


def test_not_psd_rejected():
    with pytest.raises(ValueError, match="negative eigenvalue"):
        nystrom_eigensystem(lambda X, Z: -np.ones((len(X), len(Z))), 1, 8, k=2)
