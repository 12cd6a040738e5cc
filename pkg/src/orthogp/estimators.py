"""Trend estimation, kriging prediction and profile-likelihood fitting.

Three methods are supported and compared throughout:

``OGP``
    Generalized least squares and kriging under the orthogonal covariance
    ``c*`` (needs an :class:`~orthogp.ortho.OrthoKernel`).
``UK``
    Universal kriging: generalized least squares under the base kernel.
``LS``
    Ordinary least squares for the trend, kriging of the residual under the
    base kernel.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg as sla
from scipy.optimize import minimize

from .designs import latin_hypercube
from .exceptions import ConfigurationError, NumericalError, OptimizationError
from .geometry import Basis, model_matrix
from .kernels import KernelSpec
from .linalg import Factor, cholesky
from .ortho import OrthoKernel, assemble_ortho

log = logging.getLogger(__name__)

METHODS = ("OGP", "UK", "LS")


def canonical_method(name: str) -> str:
    m = name.strip().upper()
    if m not in METHODS:
        raise ConfigurationError(f"unknown method {name!r}; choose from {METHODS}")
    return m


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design in canonical coordinates and noiseless responses."""

    design: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.design, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.shape[0] != y.size:
            raise ConfigurationError(f"design has {X.shape[0]} rows but {y.size} responses")
        if X.shape[0] == 0:
            raise ConfigurationError("dataset is empty")
        if not np.all(np.isfinite(y)):
            raise ConfigurationError("responses must be finite")
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def dim(self) -> int:
        return self.design.shape[1]


@dataclass
class FitResult:
    method: str
    beta_hat: np.ndarray
    psi_hat: np.ndarray
    sigma2_hat: float
    neg_log_lik: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["beta_hat"] = np.asarray(self.beta_hat).tolist()
        out["psi_hat"] = np.asarray(self.psi_hat).tolist()
        return out


# --------------------------------------------------------------------------
# Trend estimators
# --------------------------------------------------------------------------


def _check_rank(G: np.ndarray) -> None:
    if G.shape[0] < G.shape[1]:
        raise ConfigurationError(f"need n >= p, got n={G.shape[0]}, p={G.shape[1]}")
    _, R, piv = sla.qr(G, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(G.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < G.shape[1]:
        raise ConfigurationError(
            f"model matrix is rank deficient (rank {rank} < p={G.shape[1]}); "
            f"dependent columns: {sorted(int(c) for c in piv[rank:])}"
        )


def _gls(G: np.ndarray, factor: Factor, Y: np.ndarray) -> np.ndarray:
    # whitened least squares: minimize |L^{-1}(Y - G b)|
    Gw = factor.half_solve(G)
    Yw = factor.half_solve(Y)
    Q, R = np.linalg.qr(Gw)
    return sla.solve_triangular(R, Q.T @ Yw)


def gls_beta(G, C, Y) -> np.ndarray:
    """``(G^T C^{-1} G)^{-1} G^T C^{-1} Y`` via Cholesky and QR."""
    G = np.asarray(G, dtype=float)
    Y = np.asarray(Y, dtype=float)
    _check_rank(G)
    factor = C if isinstance(C, Factor) else cholesky(C, what="covariance matrix")
    return _gls(G, factor, Y)


def ls_beta(G, Y) -> np.ndarray:
    """Ordinary least squares via QR."""
    G = np.asarray(G, dtype=float)
    _check_rank(G)
    Q, R = np.linalg.qr(G)
    return sla.solve_triangular(R, Q.T @ np.asarray(Y, dtype=float))


# --------------------------------------------------------------------------
# Prediction
# --------------------------------------------------------------------------


def make_covariance(method: str, kernel: KernelSpec, basis: Basis,
                    mode: str = "closed_form", order: int | None = None):
    """Kernel object appropriate for ``method``: ``c*`` for OGP, ``c`` otherwise."""
    if canonical_method(method) == "OGP":
        return assemble_ortho(kernel, basis, mode, order)
    return kernel


def _check_pairing(method: str, cov) -> None:
    if method == "OGP" and not isinstance(cov, OrthoKernel):
        raise ConfigurationError("method OGP needs an orthogonalized kernel (OrthoKernel)")
    if method in ("UK", "LS") and isinstance(cov, OrthoKernel):
        raise ConfigurationError(f"method {method} uses the base kernel, not an OrthoKernel")


@dataclass(frozen=True, eq=False)
class Predictor:
    """A conditioned kriging model ready for repeated prediction.

    Built by :func:`build_predictor`; caches the covariance factorization,
    the trend estimate and the kriging weights of the residual.
    """

    method: str
    cov: object
    basis: Basis
    data: Dataset
    G: np.ndarray
    factor: Factor
    beta: np.ndarray
    alpha: np.ndarray
    beta_cov: np.ndarray   # covariance of beta_hat under the model, A C A^T
    beta_map: np.ndarray   # A with beta_hat = A Y

    def decompose(self, U):
        """Return ``(mean, trend, stochastic)`` at canonical points ``U``."""
        U = np.asarray(U, dtype=float)
        if U.ndim == 1:
            U = U.reshape(-1, 1) if self.data.dim == 1 else U.reshape(1, -1)
        trend = model_matrix(self.basis, U) @ self.beta
        stoch = self.cov.cross(U, self.data.design) @ self.alpha
        return trend + stoch, trend, stoch

    def __call__(self, U) -> np.ndarray:
        return self.decompose(U)[0]

    def variance(self, U) -> np.ndarray:
        """Mean squared prediction error of the method's linear predictor.

        For OGP and UK this is the usual universal-kriging variance; for LS
        the trend term uses the covariance of the least-squares estimate.
        """
        U = np.asarray(U, dtype=float)
        if U.ndim == 1:
            U = U.reshape(-1, 1) if self.data.dim == 1 else U.reshape(1, -1)
        K = self.cov.cross(U, self.data.design)            # (m, n)
        Kw = self.factor.half_solve(K.T)                    # L^{-1} k
        g = model_matrix(self.basis, U)                     # (m, p)
        CinvK = self.factor.solve(K.T)                      # (n, m)
        u = g - CinvK.T @ self.G                            # (m, p)
        var = (self.cov.diag(U) - np.sum(Kw * Kw, axis=0)
               + np.einsum("mp,pq,mq->m", u, self.beta_cov, u))
        floor = -1e-10 * self.cov.variance
        if np.any(var < floor):
            raise NumericalError(
                f"prediction variance {var.min():.3g} below {floor:.3g}; "
                "covariance matrix is too ill-conditioned"
            )
        return np.maximum(var, 0.0)


def build_predictor(method: str, data: Dataset, basis: Basis, cov,
                    beta=None) -> Predictor:
    """Factor the covariance, estimate the trend (unless given) and cache weights."""
    method = canonical_method(method)
    _check_pairing(method, cov)
    G = model_matrix(basis, data.design)
    _check_rank(G)
    factor = cholesky(cov.gram(data.design), what="covariance matrix")
    Gw = factor.half_solve(G)
    if method == "LS":
        Q, R = np.linalg.qr(G)
        A = sla.solve_triangular(R, Q.T)
        # covariance of the LS estimate: A C A^T, with C = L L^T
        AL = A @ factor.L
        beta_cov = AL @ AL.T
    else:
        Q, R = np.linalg.qr(Gw)
        A = sla.solve_triangular(R, Q.T) @ sla.solve_triangular(factor.L, np.eye(data.n), lower=True)
        Rinv = sla.solve_triangular(R, np.eye(R.shape[0]))
        beta_cov = Rinv @ Rinv.T
    if beta is None:
        beta = ls_beta(G, data.y) if method == "LS" else _gls(G, factor, data.y)
    beta = np.asarray(beta, dtype=float)
    alpha = factor.solve(data.y - G @ beta)
    return Predictor(method, cov, basis, data, G, factor, beta, alpha, beta_cov, A)


def blup_predict(method: str, fit: FitResult, data: Dataset, cov, u,
                 basis: Basis | None = None) -> float:
    """Kriging prediction at one canonical point using a fitted trend."""
    basis = basis if basis is not None else getattr(cov, "basis", None)
    if basis is None:
        raise ConfigurationError("basis is required when the kernel is not orthogonalized")
    pred = build_predictor(method, data, basis, cov, beta=fit.beta_hat)
    return float(pred(np.asarray(u, dtype=float).reshape(1, -1))[0])


def predict_variance(method: str, fit: FitResult, data: Dataset, cov, u,
                     basis: Basis | None = None) -> float:
    if data.n < 1:
        raise ConfigurationError("prediction variance needs at least one observation")
    basis = basis if basis is not None else getattr(cov, "basis", None)
    if basis is None:
        raise ConfigurationError("basis is required when the kernel is not orthogonalized")
    pred = build_predictor(method, data, basis, cov, beta=fit.beta_hat)
    return float(pred.variance(np.asarray(u, dtype=float).reshape(1, -1))[0])


# --------------------------------------------------------------------------
# Likelihood
# --------------------------------------------------------------------------


def _profile(psi, data: Dataset, method: str, basis: Basis, family: str,
             mode: str, order):
    kernel = KernelSpec(family, 1.0, psi)
    cov = make_covariance(method, kernel, basis, mode, order)
    factor = cholesky(cov.gram(data.design), what="covariance matrix")
    G = model_matrix(basis, data.design)
    beta = ls_beta(G, data.y) if method == "LS" else _gls(G, factor, data.y)
    rw = factor.half_solve(data.y - G @ beta)
    sigma2 = float(rw @ rw) / data.n
    value = np.log(max(sigma2, 1e-300)) + factor.logdet() / data.n
    return value, sigma2, beta, factor


def neg_log_profile_lik(psi, data: Dataset, method: str, basis: Basis,
                        family: str, mode: str = "closed_form", order=None):
    """Concentrated objective ``log(sigma2_hat) + log det(C) / n``.

    ``C`` is the unit-variance Gram matrix (``C*`` for OGP) at lengthscales
    ``psi`` and ``sigma2_hat = r^T C^{-1} r / n`` with ``r = Y - G beta_hat``.
    Returns ``(value, sigma2_hat)``; a failed factorization yields
    ``(inf, nan)``.
    """
    method = canonical_method(method)
    psi = np.asarray(psi, dtype=float)
    if np.any(psi <= 0):
        raise ConfigurationError("lengthscales must be positive")
    try:
        value, sigma2, _, _ = _profile(psi, data, method, basis, family, mode, order)
    except NumericalError as exc:
        log.info("likelihood barrier at psi=%s: %s", psi, exc)
        return np.inf, np.nan
    return float(value), sigma2


def _initial_simplex(x0, lo, hi, frac=0.25):
    d = x0.size
    sim = np.tile(x0, (d + 1, 1))
    for i in range(d):
        step = frac * (hi[i] - lo[i])
        sim[i + 1, i] = x0[i] + step if x0[i] + step <= hi[i] else x0[i] - step
    return sim


def fit_fixed(data: Dataset, method: str, basis: Basis, kernel: KernelSpec,
              mode: str = "closed_form", order=None) -> FitResult:
    """Fit the trend at fixed lengthscales; the variance is profiled out."""
    method = canonical_method(method)
    value, sigma2, beta, factor = _profile(kernel.lengthscales, data, method, basis,
                                           kernel.family, mode, order)
    return FitResult(method, beta, np.array(kernel.lengthscales), sigma2, float(value),
                     {"jitter": factor.jitter, "mode": mode if method == "OGP" else None,
                      "optimized": False})


def fit_mle(data: Dataset, method: str, basis: Basis, family: str,
            bounds=(0.1, 5.0), starts: int = 5, seed: int = 0,
            max_evals: int = 500, mode: str = "closed_form", order=None,
            xatol: float = 1e-6) -> FitResult:
    """Multi-start bounded Nelder-Mead on log-lengthscales.

    Starts are the centre of the log box plus ``starts - 1`` Latin hypercube
    draws.  The best objective wins; ties go to the lowest start index.

    Raises
    ------
    OptimizationError
        When no start produces a finite objective.
    """
    method = canonical_method(method)
    d = data.dim
    lo = np.broadcast_to(np.asarray(bounds[0], dtype=float), (d,)).copy()
    hi = np.broadcast_to(np.asarray(bounds[1], dtype=float), (d,)).copy()
    if np.any(lo <= 0) or np.any(hi < lo):
        raise ConfigurationError(f"invalid lengthscale bounds {bounds}")
    if starts < 1:
        raise ConfigurationError("need at least one start")
    llo, lhi = np.log(lo), np.log(hi)
    free = lhi > llo

    def full(z):
        x = llo.copy()
        x[free] = np.clip(z, llo[free], lhi[free])
        return x

    def objective(z):
        val, _ = neg_log_profile_lik(np.exp(full(z)), data, method, basis, family, mode, order)
        return val if np.isfinite(val) else 1e300

    centre = 0.5 * (llo + lhi)
    x0s = [centre[free]]
    if starts > 1 and np.any(free):
        draws = (latin_hypercube(starts - 1, int(free.sum()), seed) + 1.0) / 2.0
        x0s += [llo[free] + draws[i] * (lhi[free] - llo[free]) for i in range(starts - 1)]

    runs = []
    for i, x0 in enumerate(x0s):
        if not np.any(free):
            runs.append({"start": i, "x": full(x0), "fun": objective(x0), "nfev": 1,
                         "success": True})
            break
        try:
            res = minimize(
                objective, x0, method="Nelder-Mead",
                bounds=list(zip(llo[free], lhi[free])),
                options={"maxfev": max_evals, "xatol": xatol, "fatol": np.inf,
                         "initial_simplex": _initial_simplex(x0, llo[free], lhi[free])},
            )
            runs.append({"start": i, "x": full(res.x), "fun": float(res.fun),
                         "nfev": int(res.nfev), "success": bool(res.success)})
        except (NumericalError, ConfigurationError, ValueError) as exc:
            runs.append({"start": i, "x": full(x0), "fun": np.inf, "nfev": 0,
                         "success": False, "error": str(exc)})

    finite = [r for r in runs if r["fun"] < 1e299]
    if not finite:
        raise OptimizationError(
            "all likelihood starts failed: "
            + "; ".join(f"start {r['start']}: {r.get('error', 'non-finite')}" for r in runs)
        )
    best = min(finite, key=lambda r: (r["fun"], r["start"]))
    psi = np.exp(best["x"])
    value, sigma2, beta, factor = _profile(psi, data, method, basis, family, mode, order)
    diag = {
        "jitter": factor.jitter,
        "mode": mode if method == "OGP" else None,
        "optimized": True,
        "best_start": best["start"],
        "starts": [{k: (v.tolist() if isinstance(v, np.ndarray) else v)
                    for k, v in r.items()} for r in runs],
    }
    return FitResult(method, beta, psi, sigma2, float(value), diag)


def rmspe(predictor: Callable, truth: Callable, grid) -> float:
    """Root mean squared difference between two callables over a grid."""
    grid = np.asarray(grid, dtype=float)
    if grid.shape[0] < 1:
        raise ValueError("grid must contain at least one point")
    diff = np.asarray(predictor(grid), float).reshape(-1) - np.asarray(truth(grid), float).reshape(-1)
    return float(np.sqrt(np.mean(diff * diff)))
