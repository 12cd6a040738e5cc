"""Separable stationary covariance families.

Parametrization per dimension, with ``r = |u - v| / psi``:

* ``squared_exponential``: ``exp(-r**2)``
* ``exponential``:         ``exp(-r)``
* ``matern32``:            ``(1 + r) exp(-r)``

Note the absence of the usual factor 2 (squared exponential) and ``sqrt(3)``
(Matern) scalings; the closed-form effect integrals in :mod:`orthogp.ortho`
depend on exactly these forms.  Lengthscales are in canonical units.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError

FAMILIES = ("squared_exponential", "exponential", "matern32")

_ALIASES = {
    "se": "squared_exponential",
    "gaussian": "squared_exponential",
    "rbf": "squared_exponential",
    "exp": "exponential",
    "matern": "matern32",
    "matern3/2": "matern32",
}


class SingularDesignWarning(UserWarning):
    """Duplicate design rows make the Gram matrix singular."""


def canonical_family(name: str) -> str:
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in FAMILIES:
        raise ConfigurationError(f"unknown kernel family {name!r}; choose from {FAMILIES}")
    return key


def corr_1d(family: str, delta, psi) -> np.ndarray:
    """One-dimensional unit-variance correlation at separation ``delta``."""
    r = np.abs(delta) / psi
    if family == "squared_exponential":
        return np.exp(-r * r)
    if family == "exponential":
        return np.exp(-r)
    if family == "matern32":
        return (1.0 + r) * np.exp(-r)
    raise ConfigurationError(f"unknown kernel family {family!r}")


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Covariance ``variance * prod_j corr(u_j - v_j; lengthscales[j])``."""

    family: str
    variance: float
    lengthscales: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "family", canonical_family(self.family))
        psi = np.array(np.atleast_1d(self.lengthscales), dtype=float)
        if psi.ndim != 1 or psi.size == 0:
            raise ConfigurationError("lengthscales must be a non-empty vector")
        if not np.all(psi > 0) or not np.all(np.isfinite(psi)):
            raise ConfigurationError(f"lengthscales must be positive and finite, got {psi}")
        if not (self.variance > 0 and np.isfinite(self.variance)):
            raise ConfigurationError(f"variance must be positive, got {self.variance}")
        psi.setflags(write=False)
        object.__setattr__(self, "lengthscales", psi)
        object.__setattr__(self, "variance", float(self.variance))

    @property
    def dim(self) -> int:
        return self.lengthscales.size

    def with_params(self, lengthscales=None, variance=None) -> "KernelSpec":
        return KernelSpec(
            self.family,
            self.variance if variance is None else variance,
            self.lengthscales if lengthscales is None else lengthscales,
        )

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "variance": self.variance,
            "lengthscales": self.lengthscales.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KernelSpec":
        extra = set(data) - {"family", "variance", "lengthscales"}
        if extra:
            raise ConfigurationError(f"unknown kernel keys: {sorted(extra)}")
        return cls(data["family"], data.get("variance", 1.0), data["lengthscales"])

    # -- evaluation --------------------------------------------------------

    def _points(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if self.dim == 1 else X.reshape(1, -1)
        if X.shape[1] != self.dim:
            raise ConfigurationError(f"points have dimension {X.shape[1]}, kernel expects {self.dim}")
        return X

    def cross(self, X, Z) -> np.ndarray:
        """``(n, m)`` matrix of covariances between rows of ``X`` and ``Z``."""
        X, Z = self._points(X), self._points(Z)
        K = np.full((X.shape[0], Z.shape[0]), self.variance)
        for j in range(self.dim):
            K *= corr_1d(self.family, X[:, j, None] - Z[None, :, j], self.lengthscales[j])
        return K

    def gram(self, X) -> np.ndarray:
        K = self.cross(X, X)
        # mirror the upper triangle so the result is exactly symmetric
        return np.triu(K) + np.triu(K, 1).T

    def diag(self, X) -> np.ndarray:
        return np.full(self._points(X).shape[0], self.variance)


def kernel_eval(k: KernelSpec, u, v) -> float:
    """Covariance between two single points."""
    u = np.asarray(u, dtype=float).reshape(1, -1)
    v = np.asarray(v, dtype=float).reshape(1, -1)
    return float(k.cross(u, v)[0, 0])


def _warn_duplicates(design: np.ndarray) -> bool:
    _, counts = np.unique(design, axis=0, return_counts=True)
    if np.any(counts > 1):
        warnings.warn(
            f"design has {int(np.sum(counts - 1))} duplicate row(s); "
            "covariance matrix is singular",
            SingularDesignWarning,
            stacklevel=3,
        )
        return True
    return False


def cov_matrix(k, design) -> np.ndarray:
    """Gram matrix of ``k`` over the rows of ``design``.

    ``k`` may be a :class:`KernelSpec` or any object with a ``gram`` method
    (e.g. an orthogonalized kernel).  Emits :class:`SingularDesignWarning`
    when the design contains duplicate rows.
    """
    design = k._points(design) if hasattr(k, "_points") else np.asarray(design, float)
    _warn_duplicates(design)
    return k.gram(design)


def cross_cov(k, u, design) -> np.ndarray:
    """Vector of covariances between point ``u`` and each design row."""
    u = np.asarray(u, dtype=float).reshape(1, -1)
    return k.cross(u, design)[0]
