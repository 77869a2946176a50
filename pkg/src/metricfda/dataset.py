"""Metric-valued functions on a time grid and their integrated distances.

The integrated squared distance between two curves is the time-quadrature
sum of pointwise squared distances; stacking those values over all pairs
gives the symmetric zero-diagonal matrix everything downstream runs on.
"""

from __future__ import annotations

import csv
import io

import numpy as np

from .errors import (
    AsymmetricInputError,
    GridMismatchError,
    LengthMismatchError,
)
from .grids import TimeGrid, quad_sum
from .metrics import CdfL2Metric, DiscretizedCdf, EuclideanMetric, PointMetric

__all__ = [
    "MetricFunction",
    "FunctionalDataset",
    "SquaredDistanceMatrix",
    "integrated_sq_dist",
    "cross_time_sq_dist",
    "pairwise_sq_dist_matrix",
    "stacked_values",
    "write_sq_dist_csv",
    "read_sq_dist_csv",
]


class MetricFunction:
    """One observation: a point of the metric space per time-grid point."""

    __slots__ = ("id", "curve")

    def __init__(self, id: str, curve):
        object.__setattr__(self, "id", str(id))
        object.__setattr__(self, "curve", tuple(curve))

    def __setattr__(self, name, value):
        raise AttributeError("MetricFunction is immutable")

    def __len__(self) -> int:
        return len(self.curve)

    def __repr__(self) -> str:
        return f"MetricFunction(id={self.id!r}, T={len(self.curve)})"


class FunctionalDataset:
    """A sample of metric-valued functions on one time grid and metric."""

    __slots__ = ("time_grid", "metric", "observations")

    def __init__(self, time_grid: TimeGrid, metric: PointMetric, observations):
        obs = tuple(observations)
        if len(obs) < 2:
            raise ValueError("a dataset needs at least two observations")
        ids = [o.id for o in obs]
        if len(set(ids)) != len(ids):
            raise ValueError("observation ids must be unique")
        for o in obs:
            if len(o.curve) != len(time_grid):
                raise GridMismatchError(
                    f"observation {o.id!r} has {len(o.curve)} points, "
                    f"time grid has {len(time_grid)}"
                )
            for p in o.curve:
                metric.check_point(p)
        object.__setattr__(self, "time_grid", time_grid)
        object.__setattr__(self, "metric", metric)
        object.__setattr__(self, "observations", obs)

    def __setattr__(self, name, value):
        raise AttributeError("FunctionalDataset is immutable")

    def __len__(self) -> int:
        return len(self.observations)

    @property
    def ids(self) -> tuple:
        return tuple(o.id for o in self.observations)

    def __repr__(self) -> str:
        return (
            f"FunctionalDataset(n={len(self)}, T={len(self.time_grid)}, "
            f"metric={self.metric.kind})"
        )


class SquaredDistanceMatrix:
    """n x n integrated squared distances with provenance."""

    __slots__ = ("matrix", "ids", "provenance")

    def __init__(self, matrix, ids, provenance: str = "", validate: bool = True):
        m = np.ascontiguousarray(matrix, dtype=float)
        ids = tuple(str(i) for i in ids)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != len(ids):
            raise LengthMismatchError(
                f"matrix shape {m.shape} inconsistent with {len(ids)} ids"
            )
        if validate:
            if np.abs(m - m.T).max() > 1e-12:
                raise AsymmetricInputError("squared-distance matrix is not symmetric")
            if np.abs(np.diagonal(m)).max() > 0:
                raise ValueError("squared-distance matrix must have a zero diagonal")
            if m.min() < 0:
                raise ValueError("squared distances must be nonnegative")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "provenance", provenance)

    def __setattr__(self, name, value):
        raise AttributeError("SquaredDistanceMatrix is immutable")

    def __len__(self) -> int:
        return len(self.ids)


def integrated_sq_dist(
    x: MetricFunction, y: MetricFunction, tg: TimeGrid, metric: PointMetric
) -> float:
    """Time-integrated squared distance between two curves on ``tg``."""
    if len(x.curve) != len(tg) or len(y.curve) != len(tg):
        raise GridMismatchError("curve length does not match the time grid")
    per_time = metric.sq_dist_curves(x.curve, y.curve)
    return quad_sum(tg.weights, per_time, getattr(metric, "compensated", False))


def cross_time_sq_dist(
    x: MetricFunction, s_idx: int, y: MetricFunction, t_idx: int, metric: PointMetric
) -> float:
    """Squared distance between x at time index s and y at time index t."""
    if not 0 <= s_idx < len(x.curve):
        raise IndexError(f"time index {s_idx} out of range for {x.id!r}")
    if not 0 <= t_idx < len(y.curve):
        raise IndexError(f"time index {t_idx} out of range for {y.id!r}")
    return metric.sq_dist(x.curve[s_idx], y.curve[t_idx])


def pairwise_sq_dist_matrix(ds: FunctionalDataset) -> SquaredDistanceMatrix:
    """All pairwise integrated squared distances.

    Entries are computed once for i < j and mirrored, so the result is
    bitwise symmetric with an exactly zero diagonal regardless of any
    per-pair scheduling.
    """
    n = len(ds)
    obs = ds.observations
    d2 = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            q = integrated_sq_dist(obs[i], obs[j], ds.time_grid, ds.metric)
            d2[i, j] = q
            d2[j, i] = q
    return SquaredDistanceMatrix(
        d2,
        ds.ids,
        provenance=f"metric={ds.metric.kind} T={len(ds.time_grid)}",
        validate=False,
    )


def stacked_values(ds: FunctionalDataset) -> np.ndarray:
    """Dense (n, T, p) value tensor for CDF or Euclidean datasets.

    Used by the vectorized cross-time paths; other metrics fall back to
    per-point loops.
    """
    if isinstance(ds.metric, CdfL2Metric):
        return np.stack([np.stack([p.values for p in o.curve]) for o in ds.observations])
    if isinstance(ds.metric, EuclideanMetric):
        return np.asarray(
            [[np.asarray(p, dtype=float) for p in o.curve] for o in ds.observations]
        )
    raise TypeError(f"no dense representation for metric kind {ds.metric.kind!r}")


def write_sq_dist_csv(d2: SquaredDistanceMatrix, fh, float_fmt: str = ".17g") -> None:
    """Row-major CSV with an id header; lossless at 17 significant digits."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["id", *d2.ids])
    for i, row_id in enumerate(d2.ids):
        writer.writerow([row_id, *(format(v, float_fmt) for v in d2.matrix[i])])


def read_sq_dist_csv(fh, validate: bool = True) -> SquaredDistanceMatrix:
    """Read a matrix written by :func:`write_sq_dist_csv`.

    ``validate=False`` admits asymmetric or otherwise invalid matrices so
    diagnostic tooling can inspect them.
    """
    if isinstance(fh, (str, bytes)):
        fh = io.StringIO(fh)
    reader = csv.reader(fh)
    header = next(reader, None)
    if not header or header[0] != "id":
        raise ValueError("distance CSV must start with an 'id' header row")
    ids = header[1:]
    rows = []
    row_ids = []
    for row in reader:
        if not row:
            continue
        row_ids.append(row[0])
        rows.append([float(v) for v in row[1:]])
    if row_ids != ids:
        raise ValueError("distance CSV row ids do not match header ids")
    return SquaredDistanceMatrix(np.array(rows), ids, provenance="csv", validate=validate)
