"""Gaussian process regression with orthogonalized covariance kernels.

The stochastic component of an orthogonal Gaussian process is constrained to
be L2-orthogonal to the span of the trend basis on a box domain, which makes
the trend coefficients identifiable.  Universal kriging and least-squares
detrending are provided for comparison.
"""

__version__ = "0.1.0"

from .exceptions import (  # noqa: E402
    ConfigurationError,
    DomainError,
    NumericalError,
    OptimizationError,
    OrthoGPError,
    QuadratureBudgetError,
)
from .geometry import (  # noqa: E402
    Basis,
    Domain,
    beta_to_original,
    constant_basis,
    eval_basis,
    from_canonical,
    linear_basis,
    make_domain,
    map_to_canonical,
    model_matrix,
)
from .kernels import KernelSpec, cov_matrix, cross_cov, kernel_eval  # noqa: E402
from .ortho import OrthoKernel, assemble_ortho, effects_closed_form, effects_quadrature  # noqa: E402
from .estimators import (  # noqa: E402
    Dataset,
    FitResult,
    Predictor,
    build_predictor,
    fit_fixed,
    fit_mle,
    gls_beta,
    ls_beta,
    make_covariance,
)
from .spectra import EigenSystem, eigenfunction_table, nystrom_eigensystem  # noqa: E402

__all__ = [name for name in dir() if not name.startswith("_")]
