"""Nystrom approximation of Karhunen-Loeve eigenpairs of a covariance.

The integral operator ``(K f)(x) = int c(x, xi) f(xi) dxi`` is discretized on
a Gauss-Legendre rule.  With quadrature weights ``W`` the symmetric matrix
``W^{1/2} K W^{1/2}`` has the same eigenvalues as the discretized operator;
eigenvectors are mapped back to function values and extended off-grid with
the Nystrom formula ``f_k(x) = sum_a w_a c(x, t_a) f_k(t_a) / lambda_k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Domain, from_canonical
from .quadrature import NODE_BUDGET, check_budget, gauss_legendre

EIG_CLAMP_RTOL = 1e-10


def _as_cross(evaluator):
    if hasattr(evaluator, "cross"):
        return evaluator.cross
    return evaluator


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Leading eigenpairs; call it on points to evaluate eigenfunctions."""

    eigenvalues: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    node_values: np.ndarray  # (N, k) eigenfunctions at the quadrature nodes
    evaluator: object

    @property
    def k(self) -> int:
        return self.eigenvalues.size

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if self.nodes.shape[1] == 1 else X.reshape(1, -1)
        K = _as_cross(self.evaluator)(X, self.nodes)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (K * self.weights) @ self.node_values / self.eigenvalues
        out[:, self.eigenvalues <= 0] = 0.0
        return out

    def integrate(self, f=None) -> np.ndarray:
        """Quadrature values of ``int f(xi) f_k(xi) dxi`` for every ``k``.

        ``f`` maps ``(N, d)`` nodes to ``(N,)`` values; ``None`` means 1.
        """
        fv = np.ones(self.nodes.shape[0]) if f is None else np.asarray(f(self.nodes), float)
        return (self.weights * fv) @ self.node_values


def nystrom_eigensystem(evaluator, domain: Domain | int = 1, quad_order: int = 64,
                        k: int = 10, budget: int = NODE_BUDGET) -> EigenSystem:
    """Leading ``k`` eigenpairs of the covariance operator of ``evaluator``.

    ``evaluator`` is a kernel object with a ``cross`` method or a callable
    ``(X, Z) -> (n, m)`` matrix.  ``domain`` is a :class:`Domain` or the
    dimension of the canonical box.
    """
    if isinstance(domain, int):
        domain = Domain.canonical(domain)
    d = domain.dim
    check_budget(quad_order, d, budget)
    if k > quad_order**d or k > quad_order:
        raise ValueError(f"k={k} exceeds quadrature order {quad_order}")
    t, w = gauss_legendre(quad_order)
    grids = np.meshgrid(*([t] * d), indexing="ij")
    U = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.ones(1)
    for _ in range(d):
        weights = np.multiply.outer(weights, w).ravel()
    nodes = from_canonical(domain, U) if d > 1 else from_canonical(domain, U[:, 0])[:, None]
    weights = weights * np.prod(domain.width / 2.0)

    K = _as_cross(evaluator)(nodes, nodes)
    K = 0.5 * (K + K.T)
    sw = np.sqrt(weights)
    vals, vecs = np.linalg.eigh(sw[:, None] * K * sw[None, :])
    scale = max(float(np.max(np.abs(np.diag(K)))), np.finfo(float).tiny)
    if vals[0] < -EIG_CLAMP_RTOL * scale * weights.sum():
        raise ValueError(f"operator has a negative eigenvalue {vals[0]:.3g}; evaluator not PSD")
    order = np.argsort(vals)[::-1][:k]
    vals, vecs = vals[order], vecs[:, order]
    vals = np.maximum(vals, 0.0)
    fvals = vecs / sw[:, None]
    fvals = fvals * _signs(fvals)
    return EigenSystem(vals, nodes, weights, fvals, evaluator)


def _signs(F: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    signs = np.ones(F.shape[1])
    for c in range(F.shape[1]):
        big = np.flatnonzero(np.abs(F[:, c]) > tol)
        if big.size and F[big[0], c] < 0:
            signs[c] = -1.0
    return signs


def eigenfunction_table(es: EigenSystem, grid) -> np.ndarray:
    """Eigenfunction values on ``grid`` as an ``(m, k)`` matrix.

    Each column is signed so that its first entry with magnitude above
    ``1e-8`` is positive.
    """
    F = es(grid)
    return F * _signs(F)
