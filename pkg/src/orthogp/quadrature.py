"""Gauss-Legendre rules on [-1, 1], tensor grids, and product integration.

The exponential and Matern kernels have a derivative jump at ``u = v``, so
integrating ``c(x, xi) f(xi)`` with a fixed Gauss-Legendre rule converges
only algebraically.  :func:`kernel_weights` instead integrates the kernel
exactly (to rounding) against the Lagrange interpolant of ``f`` on the
Gauss-Legendre nodes, splitting the integral at the kink.  For polynomial
``f`` of degree below the order this is exact; for smooth ``f`` it keeps
spectral accuracy.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .exceptions import QuadratureBudgetError
from .kernels import corr_1d

NODE_BUDGET = 10**6
MAX_ORDER = 64
_CHUNK = 256


@lru_cache(maxsize=64)
def _leggauss(order: int):
    t, w = np.polynomial.legendre.leggauss(order)
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


def gauss_legendre(order: int, a: float = -1.0, b: float = 1.0):
    """Nodes and weights of the ``order``-point rule on ``[a, b]``."""
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    t, w = _leggauss(int(order))
    half = 0.5 * (b - a)
    return half * t + 0.5 * (a + b), half * w


def default_order(d: int) -> int:
    """64 in one dimension; ``max(8, floor(1e6 ** (1/d)))`` capped at 64 otherwise."""
    if d == 1:
        return MAX_ORDER
    per_dim = int(math.floor(NODE_BUDGET ** (1.0 / d) + 1e-9))
    return min(MAX_ORDER, max(8, per_dim))


def check_budget(order: int, d: int, budget: int = NODE_BUDGET) -> None:
    if order < 2:
        raise QuadratureBudgetError(f"quadrature order must be >= 2, got {order}")
    if order**d > budget:
        raise QuadratureBudgetError(
            f"tensor rule of order {order} in d={d} needs {order**d} nodes, "
            f"budget is {budget}; use order <= {int(budget ** (1.0 / d))}"
        )


def tensor_grid(order: int, d: int, budget: int = NODE_BUDGET):
    """Tensor Gauss-Legendre nodes ``(order**d, d)`` and weights on ``[-1,1]^d``.

    Nodes are enumerated in C order, so the last coordinate varies fastest.
    """
    check_budget(order, d, budget)
    t, w = gauss_legendre(order)
    grids = np.meshgrid(*([t] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.ones(1)
    for _ in range(d):
        weights = np.multiply.outer(weights, w).ravel()
    return nodes, weights


def barycentric_weights(order: int) -> np.ndarray:
    t, w = _leggauss(order)
    lam = np.sqrt((1.0 - t * t) * w)
    lam[1::2] *= -1.0
    return lam


def lagrange_matrix(order: int, x) -> np.ndarray:
    """Values ``l_b(x_m)`` of the Lagrange basis on the Gauss-Legendre nodes."""
    t, _ = _leggauss(order)
    lam = barycentric_weights(order)
    x = np.asarray(x, dtype=float).reshape(-1)
    diff = x[:, None] - t[None, :]
    exact = diff == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = lam / diff
        out = terms / terms.sum(axis=1, keepdims=True)
    hit = exact.any(axis=1)
    if np.any(hit):
        out[hit] = exact[hit].astype(float)
    return out


def kernel_weights(family: str, psi: float, x, order: int, sub_order: int | None = None):
    """Matrix ``S[m, b] = int_{-1}^{1} corr(x_m - xi) l_b(xi) dxi``.

    ``corr`` is the unit-variance one-dimensional correlation and ``l_b`` the
    ``b``-th Lagrange polynomial on the ``order``-point Gauss-Legendre nodes.
    The integral is split at ``x_m`` and each half uses a
    ``sub_order``-point rule (default ``max(64, order + 40)``).
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    Q = sub_order or max(64, order + 40)
    tq, wq = _leggauss(Q)
    out = np.empty((x.size, order))
    for start in range(0, x.size, _CHUNK):
        xs = x[start:start + _CHUNK]
        m = xs.size
        # left piece [-1, x], right piece [x, 1]
        hl = 0.5 * (xs + 1.0)
        hr = 0.5 * (1.0 - xs)
        nodes = np.concatenate(
            [hl[:, None] * tq + (xs[:, None] - hl[:, None]),
             hr[:, None] * tq + (xs[:, None] + hr[:, None])], axis=1)
        wts = np.concatenate([hl[:, None] * wq, hr[:, None] * wq], axis=1)
        kv = corr_1d(family, xs[:, None] - nodes, psi) * wts
        lag = lagrange_matrix(order, nodes.ravel()).reshape(m, 2 * Q, order)
        out[start:start + m] = np.einsum("ms,msq->mq", kv, lag)
    return out
