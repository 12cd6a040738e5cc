"""Space-filling designs on the canonical box."""

import numpy as np


def latin_hypercube(n: int, d: int, seed=None) -> np.ndarray:
    """Random Latin hypercube on ``[-1, 1]^d``.

    Each column places exactly one point uniformly at random inside each of
    the ``n`` equal-width cells, in an independently permuted order.
    """
    if n < 1 or d < 1:
        raise ValueError("latin_hypercube needs n >= 1 and d >= 1")
    rng = np.random.default_rng(seed)
    cells = np.column_stack([rng.permutation(n) for _ in range(d)])
    u01 = (cells + rng.uniform(size=(n, d))) / n
    return 2.0 * u01 - 1.0


def is_latin(design: np.ndarray) -> bool:
    """True when every column has one point per stratum of ``[-1, 1]``."""
    design = np.atleast_2d(design)
    n = design.shape[0]
    cells = np.floor((design + 1.0) / 2.0 * n).astype(int)
    cells = np.clip(cells, 0, n - 1)
    return all(np.array_equal(np.sort(c), np.arange(n)) for c in cells.T)
