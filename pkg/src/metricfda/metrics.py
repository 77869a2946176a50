"""Point metric space: validated CDF objects and squared-distance functions.

The library never needs an explicit Hilbert-space embedding of the points;
everything downstream consumes squared distances only.  The metrics here
are of negative type, so the Gower-centered distance matrices they produce
are positive semidefinite up to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AsymmetricInputError,
    GridMismatchError,
    LengthMismatchError,
    NotMonotoneError,
    RangeViolationError,
    WrongMetricError,
)
from .grids import AgeGrid, quad_sum

__all__ = [
    "CdfBounds",
    "DiscretizedCdf",
    "validate_cdf",
    "PointMetric",
    "CdfL2Metric",
    "EuclideanMetric",
    "PrecomputedMetric",
    "sq_dist",
    "metric_from_dict",
]


@dataclass(frozen=True)
class CdfBounds:
    """Validation bounds for discretized CDFs.

    Real life tables truncate the support, so the endpoint bounds default
    to first value <= 0.05 and last value >= 0.95.  ``relaxed()`` disables
    the endpoint checks while keeping monotonicity and range.
    """

    first_max: float = 0.05
    last_min: float = 0.95
    monotone_tol: float = 1e-9
    range_tol: float = 1e-9

    @classmethod
    def relaxed(cls) -> "CdfBounds":
        return cls(first_max=1.0, last_min=0.0)


class DiscretizedCdf:
    """A monotone CDF sampled on a shared age grid; immutable."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: AgeGrid, values: np.ndarray):
        vals = np.ascontiguousarray(values, dtype=float)
        if vals.shape != (len(grid),):
            raise LengthMismatchError(
                f"expected {len(grid)} CDF values, got {vals.shape}"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", vals)

    def __setattr__(self, name, value):
        raise AttributeError("DiscretizedCdf is immutable")

    def __repr__(self) -> str:
        return f"DiscretizedCdf(n={len(self.values)}, grid={self.grid!r})"


def validate_cdf(values, grid: AgeGrid, bounds: CdfBounds = CdfBounds()) -> DiscretizedCdf:
    """Validate raw CDF samples and return a DiscretizedCdf.

    Monotonicity violations within ``bounds.monotone_tol`` are clamped to
    the running maximum; larger ones raise NotMonotoneError.  Values must
    lie in [-range_tol, 1 + range_tol] and satisfy the endpoint bounds.
    """
    vals = np.asarray(values, dtype=float)
    if vals.ndim != 1 or vals.size != len(grid):
        raise LengthMismatchError(
            f"expected {len(grid)} CDF values, got shape {vals.shape}"
        )
    if not np.all(np.isfinite(vals)):
        raise RangeViolationError("CDF values must be finite")
    lo, hi = vals.min(), vals.max()
    if lo < -bounds.range_tol or hi > 1.0 + bounds.range_tol:
        raise RangeViolationError(
            f"CDF values outside [0, 1] beyond tolerance (min={lo:g}, max={hi:g})"
        )
    clean = np.clip(vals, 0.0, 1.0)
    drops = np.maximum.accumulate(clean) - clean
    worst = drops.max()
    if worst > bounds.monotone_tol:
        idx = int(np.argmax(drops))
        raise NotMonotoneError(
            f"CDF decreases by {worst:g} at index {idx} (tolerance {bounds.monotone_tol:g})"
        )
    clean = np.maximum.accumulate(clean)
    if clean[0] > bounds.first_max:
        raise RangeViolationError(
            f"first CDF value {clean[0]:g} exceeds bound {bounds.first_max:g}"
        )
    if clean[-1] < bounds.last_min:
        raise RangeViolationError(
            f"last CDF value {clean[-1]:g} below bound {bounds.last_min:g}"
        )
    return DiscretizedCdf(grid, clean)


class PointMetric:
    """Squared-distance function on the point space.

    Produced squared distances are symmetric (bitwise, given the fixed
    summation order), nonnegative, and exactly zero on identical inputs.
    """

    kind = "abstract"

    def sq_dist(self, a, b) -> float:
        raise NotImplementedError

    def sq_dist_curves(self, curve_a, curve_b) -> np.ndarray:
        """Per-time squared distances between two curves (same metric)."""
        return np.array([self.sq_dist(p, q) for p, q in zip(curve_a, curve_b)])

    def check_point(self, p) -> None:
        """Raise if ``p`` is not a valid point for this metric."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


class CdfL2Metric(PointMetric):
    """L2 distance between CDFs: integral of (F - G)^2 over the age grid."""

    kind = "cdf-l2"

    def __init__(self, grid: AgeGrid, compensated: bool = False):
        self.grid = grid
        self.compensated = compensated

    def check_point(self, p) -> None:
        if not isinstance(p, DiscretizedCdf):
            raise WrongMetricError(f"expected DiscretizedCdf, got {type(p).__name__}")
        if p.grid != self.grid:
            raise GridMismatchError("CDF is sampled on a different age grid")

    def sq_dist(self, a: DiscretizedCdf, b: DiscretizedCdf) -> float:
        self.check_point(a)
        self.check_point(b)
        d = a.values - b.values
        return quad_sum(self.grid.weights, d * d, self.compensated)

    def sq_dist_curves(self, curve_a, curve_b) -> np.ndarray:
        va = np.stack([p.values for p in curve_a])
        vb = np.stack([p.values for p in curve_b])
        d = va - vb
        return (d * d) @ self.grid.weights

    def to_dict(self) -> dict:
        return {"kind": self.kind, "age_points": self.grid.points.tolist()}


class EuclideanMetric(PointMetric):
    """Plain squared Euclidean distance on vectors of a fixed dimension."""

    kind = "euclidean"

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        self.dim = int(dim)

    def check_point(self, p) -> None:
        arr = np.asarray(p, dtype=float)
        if arr.shape != (self.dim,):
            raise GridMismatchError(
                f"expected vector of dimension {self.dim}, got shape {arr.shape}"
            )

    def sq_dist(self, a, b) -> float:
        self.check_point(a)
        self.check_point(b)
        d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        return float(np.add.reduce(d * d))

    def sq_dist_curves(self, curve_a, curve_b) -> np.ndarray:
        va = np.asarray(curve_a, dtype=float)
        vb = np.asarray(curve_b, dtype=float)
        d = va - vb
        return np.add.reduce(d * d, axis=-1)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dim": self.dim}


class PrecomputedMetric(PointMetric):
    """Externally supplied squared distances; points are table indices."""

    kind = "precomputed"

    def __init__(self, table):
        t = np.asarray(table, dtype=float)
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise ValueError("distance table must be square")
        if np.abs(t - t.T).max() > 0:
            raise AsymmetricInputError("distance table must be symmetric")
        if t.min() < 0:
            raise ValueError("squared distances must be nonnegative")
        if np.abs(np.diagonal(t)).max() > 0:
            raise ValueError("self-distances must be zero")
        self.table = t

    def check_point(self, p) -> None:
        i = int(p)
        if not 0 <= i < self.table.shape[0]:
            raise GridMismatchError(f"point index {i} outside table of size {self.table.shape[0]}")

    def sq_dist(self, a, b) -> float:
        self.check_point(a)
        self.check_point(b)
        return float(self.table[int(a), int(b)])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "table": self.table.tolist()}


def sq_dist(metric: PointMetric, a, b) -> float:
    """Squared distance between two points under ``metric``."""
    return metric.sq_dist(a, b)


def metric_from_dict(d: dict) -> PointMetric:
    kind = d.get("kind")
    if kind == "cdf-l2":
        return CdfL2Metric(AgeGrid(d["age_points"]))
    if kind == "euclidean":
        return EuclideanMetric(d["dim"])
    if kind == "precomputed":
        return PrecomputedMetric(d["table"])
    raise ValueError(f"unknown metric kind {kind!r}")
