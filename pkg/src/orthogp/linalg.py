"""Cholesky factorization with a bounded jitter ladder.

Every solve against a covariance or ``H`` matrix in the package goes through
:class:`Factor`; explicit inverses are never formed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .exceptions import NumericalError

log = logging.getLogger(__name__)

JITTER_START = 1e-12
JITTER_STOP = 1e-6


@dataclass(frozen=True, eq=False)
class Factor:
    """Lower Cholesky factor of ``A + jitter * I``."""

    L: np.ndarray
    jitter: float

    @property
    def n(self) -> int:
        return self.L.shape[0]

    def solve(self, b) -> np.ndarray:
        return sla.cho_solve((self.L, True), b, check_finite=False)

    def half_solve(self, b) -> np.ndarray:
        """``L^{-1} b``; used to whiten cross-covariances."""
        return sla.solve_triangular(self.L, b, lower=True, check_finite=False)

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.L))))


def cholesky(A, what: str = "matrix") -> Factor:
    """Factor a symmetric matrix, adding jitter only if plain Cholesky fails.

    Jitter starts at ``1e-12 * trace(A) / n`` and grows tenfold up to
    ``1e-6 * trace(A) / n``.

    Raises
    ------
    NumericalError
        If the matrix is not finite or stays indefinite at maximum jitter.
    """
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise NumericalError(f"{what} contains non-finite entries")
    n = A.shape[0]
    scale = np.trace(A) / n
    if not scale > 0:
        raise NumericalError(f"{what} has non-positive trace")
    try:
        return Factor(np.linalg.cholesky(A), 0.0)
    except np.linalg.LinAlgError:
        pass
    rel = JITTER_START
    while rel <= JITTER_STOP * (1 + 1e-9):
        jitter = rel * scale
        try:
            L = np.linalg.cholesky(A + jitter * np.eye(n))
        except np.linalg.LinAlgError:
            rel *= 10.0
            continue
        log.debug("%s factorized with jitter %.3g", what, jitter)
        return Factor(L, jitter)
    raise NumericalError(
        f"{what} is not positive definite even with jitter {JITTER_STOP:g}*trace/n"
    )
