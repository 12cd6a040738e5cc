"""Box domains, the canonical [-1, 1]^d map, and regression bases.

Everything downstream (kernels, orthogonalization, fitting) works in
canonical coordinates.  A :class:`Domain` converts to and from the original
units; a :class:`Basis` describes the regression functions ``g(u)``.

Index sets of monomial bases are stored 0-based internally and written
1-based in JSON, matching the usual ``{1, ..., d}`` labelling of inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exceptions import ConfigurationError, DomainError

INSIDE_RTOL = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Domain:
    """Axis-aligned box ``[lower_1, upper_1] x ... x [lower_d, upper_d]``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", _frozen(self.lower))
        object.__setattr__(self, "upper", _frozen(self.upper))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Domain":
        return make_domain(data["lower"], data["upper"])

    @classmethod
    def canonical(cls, d: int) -> "Domain":
        return make_domain(-np.ones(d), np.ones(d))


def make_domain(lower, upper) -> Domain:
    """Validate bounds and build a :class:`Domain`.

    Raises
    ------
    DomainError
        On length mismatch, empty input, non-finite values, or any
        ``lower[j] >= upper[j]``.
    """
    lo = np.atleast_1d(np.asarray(lower, dtype=float))
    hi = np.atleast_1d(np.asarray(upper, dtype=float))
    if lo.ndim != 1 or hi.ndim != 1:
        raise DomainError("bounds must be one-dimensional vectors")
    if lo.size != hi.size:
        raise DomainError(
            f"dimension mismatch: lower has {lo.size} entries, upper has {hi.size}"
        )
    if lo.size == 0:
        raise DomainError("domain must have at least one dimension")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise DomainError("bounds must be finite")
    for j in range(lo.size):
        if lo[j] == hi[j]:
            raise DomainError(f"degenerate bound at j={j}: lower == upper == {lo[j]}")
        if lo[j] > hi[j]:
            raise DomainError(f"inverted bound at j={j}: lower {lo[j]} > upper {hi[j]}")
    return Domain(lo, hi)


def _bounds_for(dom: Domain, x: np.ndarray):
    # d == 1 accepts scalars and arbitrary-shaped arrays of coordinates.
    if dom.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        return dom.lower[0], dom.upper[0]
    if x.ndim == 0 or x.shape[-1] != dom.dim:
        raise DomainError(f"expected points of dimension {dom.dim}, got shape {x.shape}")
    return dom.lower, dom.upper


def _check_inside(dom: Domain, x: np.ndarray, lo, hi) -> None:
    tol = INSIDE_RTOL * (hi - lo)
    bad = (x < lo - tol) | (x > hi + tol)
    if np.any(bad):
        idx = tuple(np.argwhere(bad)[0]) if x.ndim else ()
        j = idx[-1] if (idx and np.ndim(lo)) else 0
        raise DomainError(
            f"point outside domain at coordinate j={j}: value {float(x[idx])!r} "
            f"not in [{dom.lower[j]}, {dom.upper[j]}]"
        )


def map_to_canonical(dom: Domain, x) -> np.ndarray:
    """Map point(s) in ``dom`` onto ``[-1, 1]^d``.

    ``x`` is a length-``d`` point or an ``(n, d)`` array; for ``d == 1``
    scalars and flat arrays of coordinates are accepted too.  Points within
    ``1e-12`` of the box width outside the bounds are accepted and clipped.
    """
    x = np.asarray(x, dtype=float)
    lo, hi = _bounds_for(dom, x)
    _check_inside(dom, x, lo, hi)
    return np.clip((2.0 * x - lo - hi) / (hi - lo), -1.0, 1.0)


def from_canonical(dom: Domain, u) -> np.ndarray:
    """Inverse of :func:`map_to_canonical`."""
    u = np.asarray(u, dtype=float)
    lo, hi = _bounds_for(dom, u)
    return lo + 0.5 * (u + 1.0) * (hi - lo)


def rescale_lengthscales(dom: Domain, psi_original) -> np.ndarray:
    """Convert lengthscales in original units to canonical units."""
    return np.asarray(psi_original, dtype=float) * 2.0 / dom.width


# --------------------------------------------------------------------------
# Bases
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Basis:
    """Regression functions ``g(u)`` on canonical coordinates.

    Use the constructors :meth:`monomial`, :meth:`affine` and :meth:`opaque`
    rather than instantiating directly.
    """

    variant: str
    dim: int
    index_sets: tuple[frozenset, ...] = ()
    coeffs: np.ndarray | None = None
    funcs: tuple[Callable, ...] = field(default=(), compare=False)

    @property
    def p(self) -> int:
        if self.variant == "monomial":
            return len(self.index_sets)
        if self.variant == "affine":
            return self.coeffs.shape[0]
        return len(self.funcs)

    # -- constructors ------------------------------------------------------

    @classmethod
    def monomial(cls, index_sets: Sequence[Sequence[int]], dim: int) -> "Basis":
        """Products of canonical coordinates over 0-based index sets."""
        if dim < 1:
            raise ConfigurationError("basis dimension must be >= 1")
        sets = tuple(frozenset(int(j) for j in s) for s in index_sets)
        if not sets:
            raise ConfigurationError("basis needs at least one function")
        if len(set(sets)) != len(sets):
            raise ConfigurationError("monomial index sets must be distinct")
        for s in sets:
            if any(j < 0 or j >= dim for j in s):
                raise ConfigurationError(f"index set {sorted(s)} out of range for d={dim}")
        return cls("monomial", dim, index_sets=sets)

    @classmethod
    def affine(cls, coeffs) -> "Basis":
        """Rows ``(a_0, a_1, ..., a_d)`` giving ``a_0 + sum_j a_j u_j``."""
        a = _frozen(np.atleast_2d(coeffs))
        if a.shape[1] < 2:
            raise ConfigurationError("affine coefficient rows need length d + 1 >= 2")
        if not np.all(np.isfinite(a)):
            raise ConfigurationError("affine coefficients must be finite")
        return cls("affine", a.shape[1] - 1, coeffs=a)

    @classmethod
    def affine_from_original(cls, dom: Domain, coeffs) -> "Basis":
        """Affine basis given in original units, re-expressed canonically."""
        a = np.atleast_2d(np.asarray(coeffs, dtype=float))
        if a.shape[1] != dom.dim + 1:
            raise ConfigurationError("affine rows must have length d + 1")
        half = 0.5 * dom.width
        canon = np.empty_like(a)
        canon[:, 0] = a[:, 0] + a[:, 1:] @ (dom.lower + half)
        canon[:, 1:] = a[:, 1:] * half
        return cls.affine(canon)

    @classmethod
    def opaque(cls, funcs: Sequence[Callable], dim: int) -> "Basis":
        """Arbitrary callables ``f(U) -> (n,)`` on canonical ``(n, d)`` arrays."""
        funcs = tuple(funcs)
        if not funcs:
            raise ConfigurationError("basis needs at least one function")
        return cls("opaque", dim, funcs=funcs)

    # -- helpers -------------------------------------------------------------

    def linear_coeffs(self) -> np.ndarray | None:
        """Express the basis as ``A @ (1, u_1, ..., u_d)`` if it is affine.

        Returns the ``p x (d + 1)`` matrix ``A`` or ``None`` when the basis
        contains interactions or opaque functions.
        """
        if self.variant == "affine":
            return np.array(self.coeffs)
        if self.variant == "monomial" and all(len(s) <= 1 for s in self.index_sets):
            A = np.zeros((self.p, self.dim + 1))
            for i, s in enumerate(self.index_sets):
                A[i, 0 if not s else min(s) + 1] = 1.0
            return A
        return None

    def to_dict(self) -> dict:
        if self.variant == "monomial":
            return {
                "kind": "monomial",
                "index_sets": [sorted(j + 1 for j in s) for s in self.index_sets],
            }
        if self.variant == "affine":
            return {"kind": "affine", "coeffs": self.coeffs.tolist()}
        raise ConfigurationError("opaque bases cannot be serialized")

    @classmethod
    def from_dict(cls, data: dict, dim: int, dom: Domain | None = None) -> "Basis":
        kind = data.get("kind")
        if kind == "monomial":
            sets = [[int(j) - 1 for j in s] for s in data["index_sets"]]
            return cls.monomial(sets, dim)
        if kind == "affine":
            if data.get("space", "canonical") == "original":
                if dom is None:
                    raise ConfigurationError("original-space affine basis needs a domain")
                return cls.affine_from_original(dom, data["coeffs"])
            b = cls.affine(data["coeffs"])
            if b.dim != dim:
                raise ConfigurationError(f"affine basis has d={b.dim}, expected {dim}")
            return b
        if kind == "linear":
            return linear_basis(dim)
        if kind == "constant":
            return constant_basis(dim)
        raise ConfigurationError(f"unknown basis kind {kind!r}")


def constant_basis(dim: int) -> Basis:
    return Basis.monomial([()], dim)


def linear_basis(dim: int) -> Basis:
    """``(1, u_1, ..., u_d)``."""
    return Basis.monomial([()] + [(j,) for j in range(dim)], dim)


def eval_basis(b: Basis, u) -> np.ndarray:
    """Evaluate ``g(u)`` at one canonical point; returns a length-``p`` vector."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != b.dim:
        raise ConfigurationError(f"point has dimension {u.size}, basis expects {b.dim}")
    return model_matrix(b, u[None, :])[0]


def model_matrix(b: Basis, design) -> np.ndarray:
    """Stack ``g(u_i)`` row-wise for an ``(n, d)`` canonical design."""
    U = np.asarray(design, dtype=float)
    if U.ndim == 1:
        U = U.reshape(-1, 1) if b.dim == 1 else U.reshape(1, -1)
    if U.shape[1] != b.dim:
        raise ConfigurationError(f"design has dimension {U.shape[1]}, basis expects {b.dim}")
    if b.variant == "monomial":
        G = np.ones((U.shape[0], b.p))
        for i, s in enumerate(b.index_sets):
            for j in s:
                G[:, i] *= U[:, j]
        return G
    if b.variant == "affine":
        return b.coeffs[:, 0] + U @ b.coeffs[:, 1:].T
    cols = []
    for f in b.funcs:
        col = np.asarray(f(U), dtype=float).reshape(-1)
        if col.size != U.shape[0]:
            raise ConfigurationError("opaque basis function returned wrong length")
        cols.append(col)
    return np.column_stack(cols)


def beta_to_original(b: Basis, dom: Domain, beta) -> np.ndarray | None:
    """Back-transform canonical trend coefficients to original units.

    Only defined for monomial bases of degree <= 1 that include the
    constant; the result is aligned with the basis order (the constant's
    coefficient becomes the intercept in original units).  Returns ``None``
    otherwise.
    """
    if b.variant != "monomial" or any(len(s) > 1 for s in b.index_sets):
        return None
    if frozenset() not in b.index_sets:
        return None
    beta = np.asarray(beta, dtype=float)
    scale = 2.0 / dom.width
    shift = -(dom.lower + dom.upper) / dom.width
    out = np.array(beta, dtype=float)
    i0 = b.index_sets.index(frozenset())
    for i, s in enumerate(b.index_sets):
        if s:
            (j,) = s
            out[i] = beta[i] * scale[j]
            out[i0] += beta[i] * shift[j]
    return out
