"""Real-valued metric covariance kernel on the time grid.

C(s, t) averages, over observations, the inner products of centered
embeddings at times s and t.  Each inner product is recovered from squared
distances alone through the polarization identity, so no embedding is ever
computed.  Its trace against the quadrature weights equals tr(K)/n for the
centered kernel K of the same dataset; that identity is the bridge between
this time-domain view and the distance-based PC decomposition, and scalar
point spaces are exactly the case where the two carry the same information.
"""

from __future__ import annotations

import numpy as np

from .dataset import FunctionalDataset, stacked_values
from .errors import DimensionMismatchError, NonpositiveWeightsError
from .grids import TimeGrid
from .kernel import CenteredKernelMatrix, KpcaModel, _fix_signs
from .metrics import CdfL2Metric, EuclideanMetric

__all__ = [
    "MetricCovarianceGrid",
    "CovarianceEigenfunctions",
    "InformationLossReport",
    "metric_covariance",
    "covariance_eigenfunctions",
    "trace_identity_residual",
    "information_loss_report",
    "classical_cross_time_covariance",
]

DIAG_CLAMP = 1e-10


class MetricCovarianceGrid:
    """T x T covariance kernel values with their time grid."""

    __slots__ = ("matrix", "time_grid")

    def __init__(self, matrix, time_grid: TimeGrid):
        m = np.asarray(matrix, dtype=float)
        if m.shape != (len(time_grid), len(time_grid)):
            raise DimensionMismatchError(
                f"covariance shape {m.shape} does not match time grid of {len(time_grid)}"
            )
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "time_grid", time_grid)

    def __setattr__(self, name, value):
        raise AttributeError("MetricCovarianceGrid is immutable")

    @property
    def weights(self) -> np.ndarray:
        return self.time_grid.weights

    def weighted_trace(self) -> float:
        return float(np.add.reduce(self.weights * np.diagonal(self.matrix)))


class CovarianceEigenfunctions:
    """Eigenvalues and quadrature-orthonormal eigenfunctions of C."""

    __slots__ = ("eigenvalues", "functions", "time_grid")

    def __init__(self, eigenvalues, functions, time_grid: TimeGrid):
        object.__setattr__(self, "eigenvalues", np.asarray(eigenvalues, dtype=float))
        object.__setattr__(self, "functions", np.asarray(functions, dtype=float))
        object.__setattr__(self, "time_grid", time_grid)

    def __setattr__(self, name, value):
        raise AttributeError("CovarianceEigenfunctions is immutable")


def _cross_block(ds: FunctionalDataset, values: np.ndarray | None, s: int, t: int) -> np.ndarray:
    """n x n squared distances between time-s points and time-t points."""
    if values is not None:
        d = values[:, s, None, :] - values[None, :, t, :]
        if isinstance(ds.metric, CdfL2Metric):
            return (d * d) @ ds.metric.grid.weights
        return np.add.reduce(d * d, axis=-1)
    obs = ds.observations
    n = len(obs)
    g = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            g[a, b] = ds.metric.sq_dist(obs[a].curve[s], obs[b].curve[t])
    return g


def metric_covariance(ds: FunctionalDataset) -> MetricCovarianceGrid:
    """Covariance kernel on the time grid from cross-time distances.

    For each (s, t) the centered inner product of observation i is
    polarized out of the cross-time distance block G[a, b] = d2(X_a(s),
    X_b(t)) as (rowmean_i + colmean_i - G_ii - grandmean)/2, and C(s, t)
    is the average over i.  For the Euclidean metric this reduces to the
    classical cross-time sample covariance (normalized by n).
    """
    try:
        values = stacked_values(ds)
    except TypeError:
        values = None
    tcount = len(ds.time_grid)
    c = np.empty((tcount, tcount))
    for s in range(tcount):
        for t in range(s, tcount):
            g = _cross_block(ds, values, s, t)
            per_obs = 0.5 * (
                g.mean(axis=1) + g.mean(axis=0) - np.diagonal(g) - g.mean()
            )
            c[s, t] = per_obs.mean()
            c[t, s] = c[s, t]
    # Diagonal entries are means of squared norms; round-off may leave
    # them at -1e-12 scale, which is clamped.
    diag = np.diagonal(c).copy()
    tiny = (diag < 0) & (diag >= -DIAG_CLAMP)
    if np.any(tiny):
        diag[tiny] = 0.0
        np.fill_diagonal(c, diag)
    return MetricCovarianceGrid(c, ds.time_grid)


def covariance_eigenfunctions(
    c: MetricCovarianceGrid, n_components: int | None = None
) -> CovarianceEigenfunctions:
    """Solve the quadrature-weighted eigenproblem of the covariance kernel.

    Works on the symmetric similarity transform B = W^(1/2) C W^(1/2) and
    maps unit eigenvectors u back to eigenfunctions f = W^(-1/2) u, which
    are orthonormal under sum_t w_t f(t) g(t).  Eigenvalues descending;
    sign fixed by the largest-|value| point of each eigenfunction.
    """
    w = c.weights
    if np.any(w <= 0):
        raise NonpositiveWeightsError("quadrature weights must be positive")
    sqrt_w = np.sqrt(w)
    b = sqrt_w[:, None] * c.matrix * sqrt_w[None, :]
    evals, vecs = np.linalg.eigh(b)
    evals = evals[::-1].copy()
    vecs = vecs[:, ::-1]
    if n_components is not None:
        evals = evals[:n_components]
        vecs = vecs[:, :n_components]
    functions = _fix_signs(vecs / sqrt_w[:, None])
    return CovarianceEigenfunctions(evals, functions, c.time_grid)


def trace_identity_residual(c: MetricCovarianceGrid, k: CenteredKernelMatrix) -> float:
    """|sum_t w_t C(t,t) - tr(K)/n|.

    Both sides equal the mean integrated squared centered norm of the
    sample, so the residual is pure round-off whenever C and K come from
    the same dataset; a passing run stays below 1e-10 * max(1, tr(K)/n).
    """
    if c.matrix.shape[0] != len(c.time_grid):
        raise DimensionMismatchError("covariance grid inconsistent with its time grid")
    n = len(k)
    if n == 0:
        raise DimensionMismatchError("empty kernel matrix")
    lhs = c.weighted_trace()
    rhs = float(np.trace(k.matrix)) / n
    return abs(lhs - rhs)


def classical_cross_time_covariance(ds: FunctionalDataset) -> np.ndarray:
    """Cross-time sample covariance of raw Euclidean vectors (1/n normalized).

    Independent oracle for the Euclidean specialization of
    :func:`metric_covariance`; works from the explicit coordinates, never
    from distances.
    """
    if not isinstance(ds.metric, EuclideanMetric):
        raise TypeError("classical covariance is defined for Euclidean datasets")
    values = stacked_values(ds)
    centered = values - values.mean(axis=0)
    n = values.shape[0]
    return np.einsum("isk,itk->st", centered, centered) / n


class InformationLossReport:
    """Side-by-side spectra of the two decompositions of one dataset.

    The distance-based PC eigenvalues are reported in variance units
    (divided by n) so their total matches the weighted trace of the
    covariance kernel, per the trace identity.
    """

    __slots__ = (
        "kpca_eigenvalues",
        "covariance_eigenvalues",
        "kpca_cumulative",
        "covariance_cumulative",
        "kpca_total",
        "covariance_total",
    )

    def __init__(self, kpca_eigenvalues, covariance_eigenvalues):
        ke = np.asarray(kpca_eigenvalues, dtype=float)
        ce = np.asarray(covariance_eigenvalues, dtype=float)
        kt = float(ke.sum())
        ct = float(ce.sum())
        object.__setattr__(self, "kpca_eigenvalues", ke)
        object.__setattr__(self, "covariance_eigenvalues", ce)
        object.__setattr__(self, "kpca_cumulative", _cumulative_ratio(ke, kt))
        object.__setattr__(self, "covariance_cumulative", _cumulative_ratio(ce, ct))
        object.__setattr__(self, "kpca_total", kt)
        object.__setattr__(self, "covariance_total", ct)

    def __setattr__(self, name, value):
        raise AttributeError("InformationLossReport is immutable")

    def rows(self) -> list[tuple]:
        """Per-rank rows: (rank, kpca eigenvalue, kpca cum., cov eigenvalue, cov cum.)."""
        depth = max(self.kpca_eigenvalues.size, self.covariance_eigenvalues.size)
        out = []
        for r in range(depth):
            ke = self.kpca_eigenvalues[r] if r < self.kpca_eigenvalues.size else None
            kc = self.kpca_cumulative[r] if r < self.kpca_cumulative.size else None
            ce = self.covariance_eigenvalues[r] if r < self.covariance_eigenvalues.size else None
            cc = self.covariance_cumulative[r] if r < self.covariance_cumulative.size else None
            out.append((r + 1, ke, kc, ce, cc))
        return out

    def to_text(self) -> str:
        lines = [
            "rank  pc_eigenvalue  pc_cumulative  cov_eigenvalue  cov_cumulative",
        ]
        for rank, ke, kc, ce, cc in self.rows():
            cells = [f"{rank:>4d}"]
            for v in (ke, kc, ce, cc):
                cells.append("          ----" if v is None else f"{v:14.6e}")
            lines.append("  ".join(cells))
        lines.append(
            f"total variance: pc={self.kpca_total:.12e} cov={self.covariance_total:.12e}"
        )
        return "\n".join(lines) + "\n"


def _cumulative_ratio(eigenvalues: np.ndarray, total: float) -> np.ndarray:
    if total <= 0.0 or eigenvalues.size == 0:
        return np.zeros(eigenvalues.size)
    return np.cumsum(eigenvalues) / total


def information_loss_report(
    kpca: KpcaModel, cov_eig: CovarianceEigenfunctions
) -> InformationLossReport:
    """Compare the full PC spectrum (in variance units) with the covariance spectrum."""
    n = kpca.n_train
    return InformationLossReport(kpca.spectrum / n, cov_eig.eigenvalues)
