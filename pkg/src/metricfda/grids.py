"""Quadrature grids for the age and time axes.

Both axes use the trapezoid rule, which is exact for piecewise-linear
integrands and therefore matches the piecewise-linear discretization of
the CDFs and of t -> squared distance.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["trapezoid_weights", "quad_sum", "Grid", "AgeGrid", "TimeGrid"]


def trapezoid_weights(points: np.ndarray) -> np.ndarray:
    """Trapezoid-rule weights on a strictly increasing grid of >= 2 points."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 1 or pts.size < 2:
        raise ValueError("grid needs at least two points")
    gaps = np.diff(pts)
    if not np.all(gaps > 0):
        raise ValueError("grid points must be strictly increasing")
    w = np.empty_like(pts)
    w[0] = gaps[0] / 2.0
    w[-1] = gaps[-1] / 2.0
    w[1:-1] = (gaps[:-1] + gaps[1:]) / 2.0
    return w


def quad_sum(weights: np.ndarray, values: np.ndarray, compensated: bool = False) -> float:
    """Weighted quadrature sum sum_k w_k * v_k.

    Default uses numpy's pairwise reduction, which is deterministic for a
    fixed array; ``compensated=True`` switches to exact Shewchuk summation.
    """
    terms = weights * values
    if compensated:
        return math.fsum(terms.tolist())
    return float(np.add.reduce(terms))


class Grid:
    """Strictly increasing points with derived trapezoid weights.

    Immutable after construction; weights always sum to the span.
    """

    __slots__ = ("points", "weights")

    def __init__(self, points):
        pts = np.ascontiguousarray(points, dtype=float)
        w = trapezoid_weights(pts)
        span = pts[-1] - pts[0]
        if abs(float(w.sum()) - span) > 1e-12 * span:
            raise ValueError("quadrature weights do not sum to the grid span")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    @property
    def span(self) -> float:
        return float(self.points[-1] - self.points[0])

    def __len__(self) -> int:
        return self.points.size

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Grid)
            and self.points.shape == other.points.shape
            and bool(np.array_equal(self.points, other.points))
        )

    def __hash__(self):
        return hash((type(self).__name__, self.points.tobytes()))

    def __repr__(self) -> str:
        return (
            f"{type(self).__name__}(n={len(self)}, "
            f"lo={self.points[0]:g}, hi={self.points[-1]:g})"
        )


class AgeGrid(Grid):
    """Grid over the age axis on which CDFs are sampled."""


class TimeGrid(Grid):
    """Grid over the index set of the functional observations."""
