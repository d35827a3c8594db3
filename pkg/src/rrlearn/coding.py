"""Class-coding simplex and angle margins.

A k-class problem is coded by k unit vectors in R^(k-1) with equal pairwise
inner products -1/(k-1) that sum to the zero vector.  The angle margin of a
classification function value f for class j is the inner product <Y_j, f>;
the most plausible class is the one with the largest margin.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

UNIT_NORM_TOL = 1e-12
PAIRWISE_TOL = 1e-12
MARGIN_SUM_TOL = 1e-10


@lru_cache(maxsize=None)
def _vertices(k: int) -> np.ndarray:
    """Closed-form simplex vertices, one row per class, shape (k, k-1)."""
    v = np.zeros((k, k - 1))
    v[0] = (k - 1) ** -0.5
    base = -(1.0 + np.sqrt(k)) / (k - 1) ** 1.5
    bump = np.sqrt(k / (k - 1.0))
    for j in range(1, k):
        v[j] = base
        v[j, j - 1] += bump
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class CodingSimplex:
    """The k coding vertices, stored as a read-only (k, k-1) matrix."""

    k: int
    vertices: np.ndarray

    def margins_of(self, f_values: np.ndarray) -> np.ndarray:
        """Angle margins <Y_j, f> for each class j.

        Accepts a single value of shape (k-1,) or a batch (n, k-1);
        returns shape (k,) or (n, k) accordingly.
        """
        f = np.asarray(f_values, dtype=float)
        if f.shape[-1] != self.k - 1:
            raise ValueError(
                f"function value has dimension {f.shape[-1]}, expected {self.k - 1}"
            )
        return f @ self.vertices.T


def build_simplex(k: int) -> CodingSimplex:
    """Construct the coding simplex for k >= 2 classes."""
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
        raise ValueError(f"class count must be an integer, got {k!r}")
    if k < 2:
        raise ValueError(f"class count must be >= 2, got {k}")
    return CodingSimplex(k=int(k), vertices=_vertices(int(k)))


@dataclass(frozen=True)
class MarginVector:
    """Angle margins for all k classes of a single observation."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1:
            raise ValueError("margin vector must be one-dimensional")
        s = abs(float(vals.sum()))
        if s > MARGIN_SUM_TOL * max(1.0, float(np.abs(vals).max(initial=0.0))):
            raise ValueError(f"margins must sum to zero, got sum {vals.sum():.3e}")

    @property
    def k(self) -> int:
        return self.values.shape[0]


def angle_margins(f_value: np.ndarray, simplex: CodingSimplex) -> MarginVector:
    """Compute the margin vector <Y_j, f> for a single function value."""
    f = np.asarray(f_value, dtype=float)
    if f.ndim != 1 or f.shape[0] != simplex.k - 1:
        raise ValueError(
            f"function value must have shape ({simplex.k - 1},), got {f.shape}"
        )
    return MarginVector(simplex.margins_of(f))
