"""Orthogonalized covariance ``c*(x, x') = c(x, x') - h(x)^T H^{-1} h(x')``.

``h(x) = int c(x, xi) g(xi) dxi`` and ``H = int int c(xi', xi) g(xi) g(xi')^T``
over the canonical box ``[-1, 1]^d``.  A Gaussian process with covariance
``c*`` has sample paths whose integral against every basis function is zero,
which removes the confounding between the trend and the stochastic term.

Two ways to obtain ``h`` and ``H``:

``closed_form``
    For separable kernels and monomial (or affine) bases both factor into
    one-dimensional *effects*: the mean effect ``M(x) = int c(x, xi)``, the
    linear effect ``L(x) = int xi c(x, xi)``, and their integrals ``IM``,
    ``IL`` and ``ILL``.  All three supported families have closed forms.

``quadrature``
    Tensor Gauss-Legendre nodes with kernel-aware product weights (see
    :mod:`orthogp.quadrature`).  Works for any basis, including opaque
    callables such as a low-fidelity simulator.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.linalg as sla
from scipy.special import erf

from .exceptions import ConfigurationError, NumericalError
from .geometry import Basis, linear_basis, model_matrix
from .kernels import KernelSpec, cov_matrix
from .linalg import Factor, cholesky
from .quadrature import (
    check_budget,
    default_order,
    gauss_legendre,
    kernel_weights,
    tensor_grid,
    NODE_BUDGET,
)

log = logging.getLogger(__name__)

MODES = ("closed_form", "quadrature")


class ClosedFormFallbackWarning(UserWarning):
    """A closed form failed its self-check; quadrature is used instead."""


# --------------------------------------------------------------------------
# One-dimensional effects (unit variance, canonical interval [-1, 1])
# --------------------------------------------------------------------------


def _se_effects(psi: float):
    sqpi = math.sqrt(math.pi)
    e4 = math.exp(-4.0 / psi**2)

    def M(x):
        return 0.5 * sqpi * psi * (erf((x + 1) / psi) - erf((x - 1) / psi))

    def L(x):
        return 0.5 * psi**2 * (np.exp(-((x + 1) / psi) ** 2) - np.exp(-((x - 1) / psi) ** 2)) + x * M(x)

    IM = 2 * sqpi * psi * math.erf(2 / psi) - psi**2 * (1 - e4)
    ILL = psi**4 / 6 * (1 - e4) - psi**2 / 3 * (3 - e4) + 2 * sqpi * psi / 3 * math.erf(2 / psi)
    return M, L, IM, ILL


def _exp_effects(psi: float):
    e2 = math.exp(-2.0 / psi)

    def M(x):
        return -psi * (np.exp((x - 1) / psi) + np.exp(-(x + 1) / psi) - 2)

    def L(x):
        return (psi * (psi + x) - psi * (psi - x)
                - psi * np.exp((x - 1) / psi) * (psi + 1)
                + psi * np.exp(-(x + 1) / psi) * (psi + 1))

    IM = 4 * psi + 2 * psi**2 * (e2 - 1)
    inner = psi * (psi - 1) - psi * e2 * (psi + 1)
    ILL = 4 * psi / 3 + 2 * psi * inner + 2 * psi**2 * inner
    return M, L, IM, ILL


def _matern32_effects(psi: float):
    e2 = math.exp(-2.0 / psi)

    def M(x):
        em = np.exp((x - 1) / psi)
        ep = np.exp(-(x + 1) / psi)
        return (2 * psi - psi * (em + ep - 2)
                - ep * (psi + x + 1) - em * (psi - x + 1))

    def L(x):
        em = np.exp((x - 1) / psi)
        ep = np.exp(-(x + 1) / psi)
        return (psi * (psi + x) + 2 * psi * x
                - em * (2 * psi - x - psi * x + 2 * psi**2 + 1)
                - psi * (psi - x)
                + ep * (2 * psi + x + psi * x + 2 * psi**2 + 1)
                - psi * em * (psi + 1) + psi * ep * (psi + 1))

    IM = 2 * psi * (2 * e2 - 3 * psi + 3 * psi * e2 + 4)
    ILL = (8 * psi / 3 - 4 * psi * e2 - 14 * psi**2 * e2 - 20 * psi**3 * e2
           - 10 * psi**4 * e2 - 6 * psi**2 + 10 * psi**4)
    return M, L, IM, ILL


CLOSED_FORMS: dict[str, Callable] = {
    "squared_exponential": _se_effects,
    "exponential": _exp_effects,
    "matern32": _matern32_effects,
}

# Above this canonical lengthscale the closed forms lose digits to
# cancellation (terms grow like psi**4 while the result stays O(1)); the
# integrand is then smooth and 1-D product quadrature is exact to rounding.
CLOSED_FORM_MAX_PSI = 5.0


def _quadrature_effects(family: str, psi: float):
    _, _, IM, _, ILL = _effects_1d_quadrature(family, psi, np.zeros(1))

    def M(x):
        x = np.asarray(x, dtype=float)
        return _effects_1d_quadrature(family, psi, x.ravel())[0].reshape(x.shape)

    def L(x):
        x = np.asarray(x, dtype=float)
        return _effects_1d_quadrature(family, psi, x.ravel())[1].reshape(x.shape)

    return M, L, float(IM), float(ILL)


@dataclass(frozen=True, eq=False)
class EffectTable:
    """Per-dimension effects of a separable kernel on ``[-1, 1]^d``.

    Functions and constants are for the unit-variance correlation of each
    dimension; multiply by :attr:`variance` once for the full kernel.
    """

    family: str
    variance: float
    lengthscales: np.ndarray
    M_funcs: tuple
    L_funcs: tuple
    IM: np.ndarray
    IL: np.ndarray
    ILL: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.M_funcs)

    def M(self, j: int, x) -> np.ndarray:
        return self.M_funcs[j](np.asarray(x, dtype=float))

    def L(self, j: int, x) -> np.ndarray:
        return self.L_funcs[j](np.asarray(x, dtype=float))


def _effects_1d_quadrature(family: str, psi: float, x, order: int = 64):
    """Effects computed by product-weight quadrature (self-check oracle)."""
    t, w = gauss_legendre(order)
    Sx = kernel_weights(family, psi, x, order)
    St = kernel_weights(family, psi, t, order)
    M = Sx.sum(axis=1)
    L = Sx @ t
    IM = w @ St.sum(axis=1)
    IL = w @ (St @ t)
    ILL = (w * t) @ (St @ t)
    return M, L, IM, IL, ILL


@lru_cache(maxsize=None)
def closed_form_verified(family: str) -> bool:
    """Compare the closed forms against quadrature at a few lengthscales."""
    probe = np.linspace(-1.0, 1.0, 9)
    for psi in (0.5, 1.0, 2.0):
        M, L, IM, ILL = CLOSED_FORMS[family](psi)
        qM, qL, qIM, _, qILL = _effects_1d_quadrature(family, psi, probe)
        errs = [
            np.max(np.abs(M(probe) - qM) / np.abs(qM)),
            np.max(np.abs(L(probe) - qL)) / np.max(np.abs(qL)),
            abs(IM - qIM) / qIM,
            abs(ILL - qILL) / qILL,
        ]
        if max(errs) > 1e-9:
            warnings.warn(
                f"closed-form effects for {family} disagree with quadrature "
                f"(max rel err {max(errs):.2e}); falling back to quadrature",
                ClosedFormFallbackWarning,
                stacklevel=2,
            )
            return False
    return True


def effects_closed_form(k) -> EffectTable:
    """Closed-form effect table for ``k`` on the canonical box.

    Lengthscales above ``CLOSED_FORM_MAX_PSI`` are served by 1-D product
    quadrature instead, where the closed forms suffer from cancellation.

    Raises
    ------
    ConfigurationError
        If the kernel family has no closed form (use the quadrature mode).
    """
    if k.family not in CLOSED_FORMS:
        raise ConfigurationError(
            f"no closed form for kernel family {k.family!r}; "
            "use orthogonalization mode 'quadrature'"
        )
    make = CLOSED_FORMS[k.family]
    Ms, Ls, IM, ILL = [], [], [], []
    for psi in k.lengthscales:
        if psi > CLOSED_FORM_MAX_PSI:
            m, l, im, ill = _quadrature_effects(k.family, float(psi))
        else:
            m, l, im, ill = make(float(psi))
        Ms.append(m)
        Ls.append(l)
        IM.append(im)
        ILL.append(ill)
    d = len(k.lengthscales)
    return EffectTable(
        k.family, float(k.variance), np.asarray(k.lengthscales, float),
        tuple(Ms), tuple(Ls), np.array(IM), np.zeros(d), np.array(ILL),
    )


# --------------------------------------------------------------------------
# h and H builders
# --------------------------------------------------------------------------


def _monomial_h(table: EffectTable, sets, U: np.ndarray) -> np.ndarray:
    d = table.dim
    Mv = np.column_stack([table.M(j, U[:, j]) for j in range(d)])
    Lv = np.column_stack([table.L(j, U[:, j]) for j in range(d)])
    out = np.empty((U.shape[0], len(sets)))
    for i, s in enumerate(sets):
        col = np.ones(U.shape[0])
        for j in range(d):
            col *= Lv[:, j] if j in s else Mv[:, j]
        out[:, i] = col
    return table.variance * out


def _monomial_H(table: EffectTable, sets) -> np.ndarray:
    p = len(sets)
    H = np.empty((p, p))
    for i in range(p):
        for k in range(p):
            v = 1.0
            for j in range(table.dim):
                a, b = j in sets[i], j in sets[k]
                if a and b:
                    v *= table.ILL[j]
                elif a or b:
                    v *= table.IL[j]
                else:
                    v *= table.IM[j]
            H[i, k] = v
    return table.variance * H


class _TensorQuadrature:
    """``h`` and ``H`` by tensor Gauss-Legendre with product kernel weights."""

    def __init__(self, k: KernelSpec, b: Basis, order: int, budget: int):
        d = k.dim
        check_budget(order, d, budget)
        self.k, self.order, self.d = k, order, d
        t, w = gauss_legendre(order)
        grids = np.meshgrid(*([t] * d), indexing="ij")
        nodes = np.stack([g.ravel() for g in grids], axis=1)
        G = model_matrix(b, nodes)
        if not np.all(np.isfinite(G)):
            raise ConfigurationError("basis is not finite at quadrature nodes")
        p = G.shape[1]
        self.tensor = G.reshape((order,) * d + (p,))
        # h at the nodes via mode products with S_j(t) (order x order)
        hn = self.tensor
        for j in range(d):
            S = kernel_weights(k.family, float(k.lengthscales[j]), t, order)
            hn = np.moveaxis(np.tensordot(S, hn, axes=([1], [j])), 0, j)
        hn = hn.reshape(-1, p)
        weights = np.ones(1)
        for _ in range(d):
            weights = np.multiply.outer(weights, w).ravel()
        H = k.variance * (G * weights[:, None]).T @ hn
        self.H = 0.5 * (H + H.T)

    def h(self, U: np.ndarray) -> np.ndarray:
        U = np.atleast_2d(U)
        q, d = self.order, self.d
        p = self.tensor.shape[-1]
        out = np.empty((U.shape[0], p))
        chunk = max(1, int(4e6 // max(1, q ** max(d - 1, 0) * p)))
        for s in range(0, U.shape[0], chunk):
            Us = U[s:s + chunk]
            m = Us.shape[0]
            S0 = kernel_weights(self.k.family, float(self.k.lengthscales[0]), Us[:, 0], q)
            acc = S0 @ self.tensor.reshape(q, -1)
            for j in range(1, d):
                Sj = kernel_weights(self.k.family, float(self.k.lengthscales[j]), Us[:, j], q)
                acc = np.einsum("mqr,mq->mr", acc.reshape(m, q, -1), Sj)
            out[s:s + m] = acc.reshape(m, p)
        return self.k.variance * out


def effects_quadrature(k: KernelSpec, b: Basis, order: int | None = None,
                       budget: int = NODE_BUDGET):
    """Quadrature route: returns ``(h, H)`` with ``h(U) -> (n, p)``.

    Raises
    ------
    QuadratureBudgetError
        If ``order ** d`` exceeds ``budget``.
    """
    if b.dim != k.dim:
        raise ConfigurationError(f"basis has d={b.dim}, kernel has d={k.dim}")
    order = default_order(k.dim) if order is None else int(order)
    tq = _TensorQuadrature(k, b, order, budget)
    return tq.h, tq.H


# --------------------------------------------------------------------------
# Orthogonal kernel
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OrthoKernel:
    """Covariance ``c*`` for a base kernel and a regression basis.

    Immutable after :func:`assemble_ortho`; ``H`` is factored once.  Exposes
    the same ``cross`` / ``gram`` / ``diag`` interface as :class:`KernelSpec`.
    """

    base: KernelSpec
    basis: Basis
    mode: str
    H: np.ndarray
    H_factor: Factor
    h_func: Callable = field(repr=False)
    effects: EffectTable | None = None
    order: int | None = None
    diagonal: bool = False

    # KernelSpec-compatible attributes
    @property
    def family(self) -> str:
        return self.base.family

    @property
    def variance(self) -> float:
        return self.base.variance

    @property
    def lengthscales(self) -> np.ndarray:
        return self.base.lengthscales

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def jitter(self) -> float:
        return self.H_factor.jitter

    def _points(self, X) -> np.ndarray:
        return self.base._points(X)

    def h(self, X) -> np.ndarray:
        """``(n, p)`` matrix with rows ``h(x_i)``."""
        return self.h_func(self._points(X))

    def whitened(self, X) -> np.ndarray:
        """Rows ``r(x)`` with ``r(x) . r(x') = h(x)^T H^{-1} h(x')``."""
        W = self.h(X)
        if self.diagonal:
            return W / np.sqrt(np.diag(self.H) + self.H_factor.jitter)
        return self.H_factor.half_solve(W.T).T

    def cross(self, X, Z) -> np.ndarray:
        X, Z = self._points(X), self._points(Z)
        return self.base.cross(X, Z) - self.whitened(X) @ self.whitened(Z).T

    def gram(self, X) -> np.ndarray:
        X = self._points(X)
        R = self.whitened(X)
        K = self.base.gram(X) - R @ R.T
        return np.triu(K) + np.triu(K, 1).T

    def diag(self, X) -> np.ndarray:
        X = self._points(X)
        R = self.whitened(X)
        return self.base.diag(X) - np.sum(R * R, axis=1)

    def with_params(self, lengthscales=None, variance=None) -> "OrthoKernel":
        return assemble_ortho(self.base.with_params(lengthscales, variance), self.basis,
                              self.mode, self.order)


BASIS_RANK_RTOL = 1e-10


def _check_basis_independent(b: Basis) -> None:
    """Reject bases whose functions are linearly dependent over the box.

    Jitter would otherwise quietly "repair" an exactly singular ``H``.  The
    test uses a weighted tensor Gauss-Legendre grid of at most ~1e4 nodes.
    """
    per_dim = max(2, min(16, int(10_000 ** (1.0 / b.dim))))
    nodes, weights = tensor_grid(per_dim, b.dim)
    G = model_matrix(b, nodes) * np.sqrt(weights)[:, None]
    _, R, piv = sla.qr(G, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > BASIS_RANK_RTOL * diag[0])) if diag.size and diag[0] > 0 else 0
    if rank < b.p:
        raise NumericalError(
            f"basis functions are linearly dependent over the domain (rank {rank} < p={b.p}; "
            f"dependent columns {sorted(int(c) for c in piv[rank:])}); reduce the basis"
        )


def assemble_ortho(k: KernelSpec, b: Basis, mode: str = "closed_form",
                   order: int | None = None, budget: int = NODE_BUDGET) -> OrthoKernel:
    """Build ``c*`` for kernel ``k`` and basis ``b``.

    ``closed_form`` needs a monomial or affine basis; ``quadrature`` accepts
    anything.  ``H`` is factored with the jitter ladder of
    :func:`orthogp.linalg.cholesky`.

    Raises
    ------
    ConfigurationError
        Unknown mode, dimension mismatch, or an opaque basis in
        ``closed_form`` mode.
    NumericalError
        ``H`` is singular even at maximum jitter (the basis is degenerate
        over the domain).
    """
    if mode not in MODES:
        raise ConfigurationError(f"unknown orthogonalization mode {mode!r}; choose from {MODES}")
    if b.dim != k.dim:
        raise ConfigurationError(f"basis has d={b.dim}, kernel has d={k.dim}")

    _check_basis_independent(b)
    effects = None
    diagonal = False
    if mode == "closed_form" and b.variant == "opaque":
        raise ConfigurationError(
            "closed-form orthogonalization needs a monomial or affine basis; "
            "use mode 'quadrature' for opaque basis functions"
        )
    if mode == "closed_form" and not closed_form_verified(k.family):
        mode = "quadrature"

    if mode == "closed_form":
        effects = effects_closed_form(k)
        if b.variant == "monomial":
            sets = b.index_sets
            H = _monomial_H(effects, sets)

            def h_func(U, _t=effects, _s=sets):
                return _monomial_h(_t, _s, U)

            diagonal = bool(np.all(effects.IL == 0.0))
        else:
            A = b.linear_coeffs()
            lin = linear_basis(k.dim).index_sets
            H = A @ _monomial_H(effects, lin) @ A.T

            def h_func(U, _t=effects, _s=lin, _A=A):
                return _monomial_h(_t, _s, U) @ _A.T
    else:
        order = default_order(k.dim) if order is None else int(order)
        h_func, H = effects_quadrature(k, b, order, budget)

    H = 0.5 * (H + H.T)
    try:
        factor = cholesky(H, what="H")
    except NumericalError as exc:
        raise NumericalError(
            f"{exc}; the basis is (nearly) linearly dependent over the domain, "
            "reduce the basis"
        ) from None
    if factor.jitter:
        log.warning("H required jitter %.3g", factor.jitter)
    return OrthoKernel(k, b, mode, H, factor, h_func, effects,
                       order if mode == "quadrature" else None, diagonal)


def ortho_eval(ok: OrthoKernel, u, v) -> float:
    """``c*(u, v)`` at single canonical points."""
    u = np.asarray(u, dtype=float).reshape(1, -1)
    v = np.asarray(v, dtype=float).reshape(1, -1)
    return float(ok.cross(u, v)[0, 0])


def ortho_gram(ok: OrthoKernel, design) -> np.ndarray:
    """``C* = C - W H^{-1} W^T`` over the design rows."""
    return cov_matrix(ok, design)


def cross_ortho(ok: OrthoKernel, u, design) -> np.ndarray:
    u = np.asarray(u, dtype=float).reshape(1, -1)
    return ok.cross(u, design)[0]
