import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orthogp.exceptions import ConfigurationError
from orthogp.kernels import (
    FAMILIES,
    KernelSpec,
    SingularDesignWarning,
    canonical_family,
    corr_1d,
    cov_matrix,
    cross_cov,
    kernel_eval,
)


def test_aliases():
    assert canonical_family("Gaussian") == "squared_exponential"
    assert canonical_family("matern32") == "matern32"
    with pytest.raises(ConfigurationError):
        canonical_family("rbf-ish")


def test_validation():
    with pytest.raises(ConfigurationError):
        KernelSpec("squared_exponential", 0.0, [1.0])
    with pytest.raises(ConfigurationError):
        KernelSpec("squared_exponential", 1.0, [1.0, -1.0])


def test_diagonal_is_variance():
    k = KernelSpec("squared_exponential", 2.5, [0.7, 1.3])
    assert kernel_eval(k, [0.1, 0.2], [0.1, 0.2]) == 2.5


def test_exponential_value():
    k = KernelSpec("exponential", 1.0, [0.5])
    assert kernel_eval(k, [0.0], [1.0]) == pytest.approx(np.exp(-2), rel=1e-14)


def test_matern_value():
    k = KernelSpec("matern32", 1.0, [1.0])
    assert kernel_eval(k, [0.0], [1.0]) == pytest.approx(2 * np.exp(-1), rel=1e-14)


def test_single_point():
    k = KernelSpec("exponential", 3.0, [1.0])
    np.testing.assert_array_equal(cov_matrix(k, [[0.2]]), [[3.0]])


def test_coincident_points_warn():
    k = KernelSpec("squared_exponential", 2.0, [1.0])
    with pytest.warns(SingularDesignWarning):
        C = cov_matrix(k, [[0.3], [0.3]])
    np.testing.assert_array_equal(C, np.full((2, 2), 2.0))


def test_scheme1_elementwise():
    x = np.array([0.3725, 0.6225, 0.7475, 0.8100, 0.8725, 0.9350, 0.9975])
    u = 2 * x - 1
    C = cov_matrix(KernelSpec("squared_exponential", 1.0, [1.0]), u[:, None])
    direct = np.array([[np.exp(-4 * (a - b) ** 2) for b in x] for a in x])
    np.testing.assert_allclose(C, direct, rtol=1e-13)


def test_cross_first_entry():
    k = KernelSpec("matern32", 1.7, [0.4])
    design = np.array([[0.1], [0.5], [-0.3]])
    assert cross_cov(k, design[0], design)[0] == 1.7


def test_far_decay():
    k = KernelSpec("squared_exponential", 1.0, [0.1])
    design = np.linspace(-1, 0, 5)[:, None]
    assert np.all(cross_cov(k, [1.0 + 10 * 0.1], design) < np.exp(-100))


@pytest.mark.parametrize("family", FAMILIES)
def test_separable(family):
    k = KernelSpec(family, 1.3, [0.4, 2.0])
    u, v = np.array([0.1, -0.5]), np.array([0.7, 0.2])
    expected = 1.3 * corr_1d(family, u[0] - v[0], 0.4) * corr_1d(family, u[1] - v[1], 2.0)
    assert kernel_eval(k, u, v) == pytest.approx(float(expected), rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(FAMILIES), st.floats(0.05, 10), st.floats(0.1, 5),
       st.integers(0, 2**32 - 1))
def test_kernel_properties(family, psi, var, seed):
    rng = np.random.default_rng(seed)
    k = KernelSpec(family, var, [psi, 2 * psi])
    X = rng.uniform(-1, 1, (12, 2))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SingularDesignWarning)
        C = cov_matrix(k, X)
    np.testing.assert_array_equal(C, C.T)
    np.testing.assert_allclose(np.diag(C), var)
    assert np.all(np.abs(C) <= var * (1 + 1e-15))
    assert np.linalg.eigvalsh(C).min() > -1e-10 * var


def test_dict_round_trip_and_unknown_keys():
    k = KernelSpec("exponential", 2.0, [0.3, 0.4])
    back = KernelSpec.from_dict(k.to_dict())
    assert back.family == k.family and back.variance == k.variance
    np.testing.assert_array_equal(back.lengthscales, k.lengthscales)
    with pytest.raises(ConfigurationError):
        KernelSpec.from_dict({**k.to_dict(), "nugget": 1e-6})
