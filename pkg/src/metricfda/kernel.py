"""Centered kernel construction, eigendecomposition, and PC scores.

The n x n centered kernel is the Gram matrix of the implicitly embedded,
mean-centered observations; it is obtained from squared distances alone by
Gower double centering.  Principal component scores live in its dual:
no coordinates of the embedding space are ever materialized.
"""

from __future__ import annotations

import json
import warnings

import numpy as np

from .dataset import (
    FunctionalDataset,
    MetricFunction,
    SquaredDistanceMatrix,
    integrated_sq_dist,
    pairwise_sq_dist_matrix,
)
from .errors import (
    AsymmetricInputError,
    GridMismatchError,
    InsufficientRankError,
    LengthMismatchError,
    NotNegativeTypeError,
)
from .grids import TimeGrid
from .metrics import CdfL2Metric, DiscretizedCdf, EuclideanMetric, metric_from_dict

__all__ = [
    "CenteredKernelMatrix",
    "EigenSpectrum",
    "KpcaModel",
    "gower_center",
    "centered_kernel_by_double_sum",
    "center_new_point",
    "jacobi_eigh",
    "eig_sym",
    "fit_kpca",
    "transform",
    "explained_variance_ratio",
    "model_to_dict",
    "model_from_dict",
    "save_model_json",
    "load_model_json",
]

DEFAULT_PSD_TOL = 1e-8
DEFAULT_RANK_TOL = 1e-10

MODEL_FORMAT = "metricfda-model"
MODEL_VERSION = 1


class CenteredKernelMatrix:
    """Centered kernel with the distance statistics needed out of sample."""

    __slots__ = ("matrix", "row_means", "grand_mean", "ids")

    def __init__(self, matrix, row_means, grand_mean, ids=()):
        object.__setattr__(self, "matrix", np.asarray(matrix, dtype=float))
        object.__setattr__(self, "row_means", np.asarray(row_means, dtype=float))
        object.__setattr__(self, "grand_mean", float(grand_mean))
        object.__setattr__(self, "ids", tuple(ids))

    def __setattr__(self, name, value):
        raise AttributeError("CenteredKernelMatrix is immutable")

    def __len__(self) -> int:
        return self.matrix.shape[0]


class EigenSpectrum:
    """Descending eigenvalues and orthonormal, sign-fixed eigenvectors."""

    __slots__ = ("eigenvalues", "vectors", "clamped_count")

    def __init__(self, eigenvalues, vectors, clamped_count: int):
        object.__setattr__(self, "eigenvalues", np.asarray(eigenvalues, dtype=float))
        object.__setattr__(self, "vectors", np.asarray(vectors, dtype=float))
        object.__setattr__(self, "clamped_count", int(clamped_count))

    def __setattr__(self, name, value):
        raise AttributeError("EigenSpectrum is immutable")


def _as_matrix(d2) -> tuple[np.ndarray, tuple]:
    if isinstance(d2, SquaredDistanceMatrix):
        return d2.matrix, d2.ids
    m = np.asarray(d2, dtype=float)
    return m, tuple(str(i) for i in range(m.shape[0]))


def gower_center(d2) -> CenteredKernelMatrix:
    """Gower double centering: K = -1/2 * J D2 J.

    Entrywise, K[a, b] = -1/2 (D2[a, b] - rowmean_a - rowmean_b + grandmean),
    which equals the explicit double sum over the sample evaluated at
    training pairs (see :func:`centered_kernel_by_double_sum`).
    """
    m, ids = _as_matrix(d2)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise AsymmetricInputError(f"expected a square matrix, got shape {m.shape}")
    if np.abs(m - m.T).max() > 1e-12 * max(1.0, np.abs(m).max()):
        raise AsymmetricInputError("squared-distance matrix is not symmetric")
    row_means = m.mean(axis=1)
    grand_mean = float(m.mean())
    k = -0.5 * (m - row_means[:, None] - row_means[None, :] + grand_mean)
    return CenteredKernelMatrix(k, row_means, grand_mean, ids)


def centered_kernel_by_double_sum(d2) -> np.ndarray:
    """Centered kernel via the explicit average over all sample pairs.

    K[a, b] = 1/(2 n^2) * sum_i sum_j (D2[a,i] + D2[b,j] - D2[a,b] - D2[i,j]);
    the j-sum is reduced per row and the i-sum accumulated explicitly, so
    the evaluation order is independent of the double-centering route.
    Quadratic memory, cubic time: a cross-check, not the production path.
    """
    m, _ = _as_matrix(d2)
    n = m.shape[0]
    row_sums = m.sum(axis=1)
    acc = np.zeros_like(m)
    for i in range(n):
        acc += n * m[:, i][:, None] + row_sums[None, :] - n * m - row_sums[i]
    return acc / (2.0 * n * n)


def center_new_point(stats, d2_to_train, d2_self: float | None = None) -> np.ndarray:
    """Centered kernel row for an out-of-sample point.

    k_x[a] = 1/2 (mean_i d2(x, X_i) + rowmean_a - d2(x, X_a) - grandmean).
    ``stats`` is anything exposing ``row_means`` and ``grand_mean``;
    ``d2_self`` is accepted for signature symmetry but never enters the
    formula (the centered kernel against training points does not need it).
    For x equal to training point b this reproduces row b of K.
    """
    del d2_self
    row_means = np.asarray(stats.row_means, dtype=float)
    d2x = np.asarray(d2_to_train, dtype=float)
    if d2x.shape != row_means.shape:
        raise LengthMismatchError(
            f"expected {row_means.shape[0]} distances, got shape {d2x.shape}"
        )
    return 0.5 * (d2x.mean() + row_means - d2x - stats.grand_mean)


def jacobi_eigh(a: np.ndarray, tol_rel: float = 1e-12, max_sweeps: int = 100):
    """Cyclic Jacobi eigensolver for symmetric matrices.

    Sweeps row by row until the off-diagonal Frobenius norm drops below
    ``tol_rel`` times the Frobenius norm of the input.  Returns ascending
    eigenvalues and a matrix of column eigenvectors, like numpy's eigh.
    Fallback for environments without LAPACK; quadratic-size inputs only.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    norm = np.linalg.norm(a)
    if norm == 0.0:
        return np.zeros(n), v
    threshold = tol_rel * norm
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(a * a) - np.sum(np.diagonal(a) ** 2), 0.0))
        if off <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) <= 1e-18 * abs(diff):
                    # Rotation angle underflows to zero: the entry is
                    # already negligible against the diagonal gap.
                    a[p, q] = a[q, p] = 0.0
                    continue
                # Classic Givens rotation annihilating a[p, q].
                theta = diff / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = rot_p, rot_q
    eigenvalues = np.diagonal(a).copy()
    order = np.argsort(eigenvalues, kind="stable")
    return eigenvalues[order], v[:, order]


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-|entry| coordinate is positive.

    np.argmax resolves ties at the lowest index, which is the convention.
    """
    out = vectors.copy()
    for k in range(out.shape[1]):
        idx = int(np.argmax(np.abs(out[:, k])))
        if out[idx, k] < 0:
            out[:, k] = -out[:, k]
    return out


def eig_sym(k, psd_tol: float = DEFAULT_PSD_TOL, method: str = "lapack") -> EigenSpectrum:
    """Eigendecomposition of a centered kernel, clamped to the PSD cone.

    Eigenvalues come back descending.  Negatives within psd_tol * lambda_max
    of zero are round-off from a genuinely PSD matrix and are clamped (and
    counted); anything below that threshold raises NotNegativeTypeError,
    meaning the supplied metric is not of negative type at this sample.
    """
    matrix = k.matrix if isinstance(k, CenteredKernelMatrix) else np.asarray(k, dtype=float)
    if method == "jacobi":
        evals, vecs = jacobi_eigh(matrix)
    else:
        evals, vecs = np.linalg.eigh(matrix)
    evals = evals[::-1].copy()
    vecs = vecs[:, ::-1]
    lam_max = max(float(evals[0]), 0.0)
    floor = -psd_tol * lam_max
    lam_min = float(evals[-1])
    if lam_min < floor:
        raise NotNegativeTypeError(
            f"eigenvalue {lam_min:g} below -psd_tol*lambda_max = {floor:g}: "
            "input distances are not of negative type at this sample",
            min_eigenvalue=lam_min,
            max_eigenvalue=lam_max,
        )
    negative = evals < 0.0
    clamped = int(np.count_nonzero(negative))
    if clamped:
        evals = np.where(negative, 0.0, evals)
    return EigenSpectrum(evals, _fix_signs(vecs), clamped)


class KpcaModel:
    """Fitted kernel PCA model in dual form.

    ``eigenvalues`` are the retained top eigenvalues of the centered kernel;
    ``alpha`` columns are eigenvectors scaled by 1/sqrt(lambda) so that a
    centered kernel row against the training sample projects straight to
    scores; ``scores`` are sqrt(lambda) times the unit eigenvectors.
    """

    __slots__ = (
        "ids",
        "eigenvalues",
        "alpha",
        "scores",
        "spectrum",
        "clamped_count",
        "row_means",
        "grand_mean",
        "time_grid",
        "metric",
        "psd_tol",
        "rank_tol",
    )

    def __init__(
        self,
        ids,
        eigenvalues,
        alpha,
        scores,
        spectrum,
        clamped_count,
        row_means,
        grand_mean,
        time_grid,
        metric,
        psd_tol,
        rank_tol,
    ):
        object.__setattr__(self, "ids", tuple(ids))
        object.__setattr__(self, "eigenvalues", np.asarray(eigenvalues, dtype=float))
        object.__setattr__(self, "alpha", np.asarray(alpha, dtype=float))
        object.__setattr__(self, "scores", np.asarray(scores, dtype=float))
        object.__setattr__(self, "spectrum", np.asarray(spectrum, dtype=float))
        object.__setattr__(self, "clamped_count", int(clamped_count))
        object.__setattr__(self, "row_means", np.asarray(row_means, dtype=float))
        object.__setattr__(self, "grand_mean", float(grand_mean))
        object.__setattr__(self, "time_grid", time_grid)
        object.__setattr__(self, "metric", metric)
        object.__setattr__(self, "psd_tol", float(psd_tol))
        object.__setattr__(self, "rank_tol", float(rank_tol))

    def __setattr__(self, name, value):
        raise AttributeError("KpcaModel is immutable")

    @property
    def n_components(self) -> int:
        return self.eigenvalues.size

    @property
    def n_train(self) -> int:
        return len(self.ids)


def fit_kpca(
    ds: FunctionalDataset | None,
    n_components: int | None = None,
    psd_tol: float = DEFAULT_PSD_TOL,
    rank_tol: float = DEFAULT_RANK_TOL,
    eig_method: str = "lapack",
    d2: SquaredDistanceMatrix | None = None,
) -> KpcaModel:
    """Fit kernel PCA from pairwise distances only.

    Components with eigenvalues <= rank_tol * lambda_1 are excluded.  When
    every observation is identical the fit succeeds with zero components
    and a warning; otherwise asking for more components than the numerical
    rank raises InsufficientRankError.  ``d2`` short-circuits the distance
    computation when the matrix is already available; with ``ds=None`` the
    fit runs on externally supplied distances alone and the model cannot
    transform new observations or be serialized.
    """
    if d2 is None:
        if ds is None:
            raise ValueError("either a dataset or a distance matrix is required")
        d2 = pairwise_sq_dist_matrix(ds)
    elif ds is not None and d2.ids != ds.ids:
        raise LengthMismatchError("distance matrix ids do not match the dataset")
    kernel = gower_center(d2)
    spectrum = eig_sym(kernel, psd_tol=psd_tol, method=eig_method)
    evals = spectrum.eigenvalues
    lam1 = float(evals[0]) if evals.size else 0.0
    if lam1 <= 0.0:
        warnings.warn(
            "all observations are identical up to round-off; "
            "fitting zero components",
            stacklevel=2,
        )
        rank = 0
    else:
        rank = int(np.count_nonzero(evals > rank_tol * lam1))
    if n_components is None:
        keep = rank
    elif rank == 0:
        keep = 0
    elif n_components > rank:
        raise InsufficientRankError(
            f"requested {n_components} components but numerical rank is {rank}"
        )
    else:
        keep = int(n_components)
    lam = evals[:keep]
    vecs = spectrum.vectors[:, :keep]
    sqrt_lam = np.sqrt(lam)
    alpha = vecs / sqrt_lam[None, :] if keep else vecs
    scores = vecs * sqrt_lam[None, :] if keep else vecs
    return KpcaModel(
        ids=d2.ids,
        eigenvalues=lam,
        alpha=alpha,
        scores=scores,
        spectrum=evals,
        clamped_count=spectrum.clamped_count,
        row_means=kernel.row_means,
        grand_mean=kernel.grand_mean,
        time_grid=ds.time_grid if ds is not None else None,
        metric=ds.metric if ds is not None else None,
        psd_tol=psd_tol,
        rank_tol=rank_tol,
    )


def transform(model: KpcaModel, new, train: FunctionalDataset) -> np.ndarray:
    """PC scores for out-of-sample observations.

    ``new`` is a MetricFunction or an iterable of them on the training
    time grid and metric; returns an (m, K) score array.  Transforming a
    training observation reproduces its stored training score.
    """
    if train.ids != model.ids:
        raise LengthMismatchError("training dataset does not match the fitted model")
    if train.time_grid != model.time_grid:
        raise GridMismatchError("training dataset is on a different time grid")
    if isinstance(new, MetricFunction):
        new = [new]
    rows = []
    for obs in new:
        if len(obs.curve) != len(model.time_grid):
            raise GridMismatchError(
                f"observation {obs.id!r} has {len(obs.curve)} time points, "
                f"model expects {len(model.time_grid)}"
            )
        d2x = np.array(
            [
                integrated_sq_dist(obs, tr_obs, train.time_grid, train.metric)
                for tr_obs in train.observations
            ]
        )
        kx = center_new_point(model, d2x)
        rows.append(kx @ model.alpha)
    return np.asarray(rows).reshape(len(rows), model.n_components)


def explained_variance_ratio(model: KpcaModel) -> np.ndarray:
    """Retained eigenvalues divided by the sum of the full clamped spectrum."""
    total = float(model.spectrum.sum())
    if total <= 0.0:
        return np.zeros(model.n_components)
    return model.eigenvalues / total


def _dataset_to_dict(ds: FunctionalDataset) -> dict:
    from .dataset import stacked_values

    return {
        "metric": ds.metric.to_dict(),
        "time_points": ds.time_grid.points.tolist(),
        "ids": list(ds.ids),
        "values": stacked_values(ds).tolist(),
    }


def _dataset_from_dict(d: dict) -> FunctionalDataset:
    metric = metric_from_dict(d["metric"])
    tg = TimeGrid(d["time_points"])
    values = np.asarray(d["values"], dtype=float)
    obs = []
    for obs_id, curve_vals in zip(d["ids"], values):
        if isinstance(metric, CdfL2Metric):
            curve = [DiscretizedCdf(metric.grid, row) for row in curve_vals]
        elif isinstance(metric, EuclideanMetric):
            curve = [row for row in curve_vals]
        else:
            raise ValueError(f"cannot rebuild dataset for metric {metric.kind!r}")
        obs.append(MetricFunction(obs_id, curve))
    return FunctionalDataset(tg, metric, obs)


def model_to_dict(model: KpcaModel, train: FunctionalDataset) -> dict:
    """JSON-ready model document, training data included for projection."""
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "ids": list(model.ids),
        "eigenvalues": model.eigenvalues.tolist(),
        "alpha": model.alpha.tolist(),
        "scores": model.scores.tolist(),
        "spectrum": model.spectrum.tolist(),
        "clamped_count": model.clamped_count,
        "d2_row_means": model.row_means.tolist(),
        "d2_grand_mean": model.grand_mean,
        "psd_tol": model.psd_tol,
        "rank_tol": model.rank_tol,
        "metric": model.metric.to_dict(),
        "time_points": model.time_grid.points.tolist(),
        "training_data": _dataset_to_dict(train),
    }


def model_from_dict(doc: dict) -> tuple[KpcaModel, FunctionalDataset]:
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError("not a metricfda model document")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')!r}")
    train = _dataset_from_dict(doc["training_data"])
    n = len(doc["ids"])
    k = len(doc["eigenvalues"])
    model = KpcaModel(
        ids=doc["ids"],
        eigenvalues=doc["eigenvalues"],
        alpha=np.asarray(doc["alpha"], dtype=float).reshape(n, k),
        scores=np.asarray(doc["scores"], dtype=float).reshape(n, k),
        spectrum=doc["spectrum"],
        clamped_count=doc["clamped_count"],
        row_means=doc["d2_row_means"],
        grand_mean=doc["d2_grand_mean"],
        time_grid=train.time_grid,
        metric=train.metric,
        psd_tol=doc["psd_tol"],
        rank_tol=doc["rank_tol"],
    )
    return model, train


def save_model_json(model: KpcaModel, train: FunctionalDataset, fh) -> None:
    json.dump(model_to_dict(model, train), fh, sort_keys=True, indent=1)
    fh.write("\n")


def load_model_json(fh) -> tuple[KpcaModel, FunctionalDataset]:
    return model_from_dict(json.load(fh))
