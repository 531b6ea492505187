"""Index arithmetic and validated stochastic matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonStochastic

ROW_SUM_TOL = 1e-12
EDGE_TOL = 1e-12


def floor_mod_T(k: int, T: int) -> int:
    """Return the unique ``r`` in ``{1, ..., T}`` with ``k - r`` divisible by ``T``."""
    if T < 1:
        raise ValueError(f"modulus must be a positive integer, got {T}")
    return (k - 1) % T + 1


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    """Row-stochastic square matrix. Use :func:`validate_stochastic` to build one."""

    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def cumulative(self) -> np.ndarray:
        """Row-wise CDF used for inverse-transform sampling.

        Entries from the last positive column onwards are pinned to exactly 1 so a
        uniform draw in [0, 1) can never select a zero-probability successor.
        """
        cum = np.cumsum(self.entries, axis=1)
        for i, row in enumerate(self.entries):
            last = np.flatnonzero(row > 0)[-1]
            cum[i, last:] = 1.0
        return cum

    def edges(self) -> np.ndarray:
        """Boolean adjacency of strictly positive transitions."""
        return self.entries > EDGE_TOL


def validate_stochastic(m, tol: float = ROW_SUM_TOL) -> StochasticMatrix:
    """Check that ``m`` is square and row-stochastic, renormalizing rows once.

    Raises :class:`NonStochastic` on a negative entry, an entry above 1, or a row
    sum further than ``tol`` from 1.
    """
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise NonStochastic(f"expected a nonempty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonStochastic("matrix has non-finite entries")
    if np.any(a < 0) or np.any(a > 1 + tol):
        raise NonStochastic("entries must lie in [0, 1]")
    sums = a.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if bad.size:
        i = int(bad[0])
        raise NonStochastic(f"row {i + 1} sums to {sums[i]!r}, not 1")
    a = a / sums[:, None]
    a.setflags(write=False)
    return StochasticMatrix(a)
