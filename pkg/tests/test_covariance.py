"""Time-domain covariance kernel, its eigenproblem, and the trace identity."""

import numpy as np
import pytest

from metricfda import (
    EuclideanMetric,
    FunctionalDataset,
    MetricFunction,
    TimeGrid,
    covariance_eigenfunctions,
    fit_kpca,
    gower_center,
    information_loss_report,
    metric_covariance,
    pairwise_sq_dist_matrix,
    trace_identity_residual,
)
from metricfda.covariance import MetricCovarianceGrid, classical_cross_time_covariance
from metricfda.dataset import stacked_values
from metricfda.errors import NonpositiveWeightsError

from .conftest import make_cdf_dataset, make_euclidean_dataset


def euclid_curve(obs_id, values):
    return MetricFunction(obs_id, [np.array([float(v)]) for v in values])


def identical_dataset(n=4):
    tg = TimeGrid([0.0, 1.0, 2.0])
    obs = [euclid_curve(f"o{i}", [1.0, 2.0, 3.0]) for i in range(n)]
    return FunctionalDataset(tg, EuclideanMetric(1), obs)


def hand_dataset():
    """Two scalar curves: values (0, 0) and (2, 4) at times (0, 1)."""
    tg = TimeGrid([0.0, 1.0])
    return FunctionalDataset(
        tg,
        EuclideanMetric(1),
        [euclid_curve("1", [0.0, 0.0]), euclid_curve("2", [2.0, 4.0])],
    )


def embedded_covariance_oracle(ds):
    """Cross-time covariance from explicit quadrature-weighted CDF vectors."""
    values = stacked_values(ds)
    z = values * np.sqrt(ds.metric.grid.weights)
    zc = z - z.mean(axis=0)
    return np.einsum("isa,ita->st", zc, zc) / len(ds)


class TestMetricCovariance:
    def test_identical_observations_zero(self):
        cov = metric_covariance(identical_dataset())
        assert np.abs(cov.matrix).max() == 0.0

    def test_hand_classical_covariance(self):
        cov = metric_covariance(hand_dataset())
        assert np.allclose(cov.matrix, [[1.0, 2.0], [2.0, 4.0]], atol=1e-14)

    def test_matches_embedded_oracle_for_cdfs(self):
        ds = make_cdf_dataset(seed=31, n=9, times=(0.0, 1.0, 2.0, 3.0, 4.0))
        cov = metric_covariance(ds)
        oracle = embedded_covariance_oracle(ds)
        assert np.abs(cov.matrix - oracle).max() <= 1e-10

    def test_euclidean_specialization(self):
        ds = make_euclidean_dataset(seed=32, n=8, t_count=5, dim=3)
        cov = metric_covariance(ds)
        classical = classical_cross_time_covariance(ds)
        assert np.abs(cov.matrix - classical).max() <= 1e-10

    def test_symmetry_and_nonnegative_diagonal(self):
        ds = make_cdf_dataset(seed=33, n=7)
        cov = metric_covariance(ds)
        assert np.array_equal(cov.matrix, cov.matrix.T)
        assert np.diagonal(cov.matrix).min() >= 0.0

    def test_permutation_invariance(self):
        ds = make_cdf_dataset(seed=34, n=6)
        cov = metric_covariance(ds)
        perm = [5, 0, 3, 1, 4, 2]
        permuted = FunctionalDataset(
            ds.time_grid, ds.metric, [ds.observations[i] for i in perm]
        )
        cov_p = metric_covariance(permuted)
        assert np.abs(cov.matrix - cov_p.matrix).max() <= 1e-12


class TestCovarianceEigenfunctions:
    def test_diagonal_kernel_gives_coordinate_functions(self):
        tg = TimeGrid([0.0, 1.0, 2.0])
        # weights (1/2, 1, 1/2): similarity-transformed diagonal is
        # (2, 1, 3), so the order of the time points is (2, 0, 1).
        cov = MetricCovarianceGrid(np.diag([4.0, 1.0, 6.0]), tg)
        eig = covariance_eigenfunctions(cov)
        assert eig.eigenvalues == pytest.approx([3.0, 2.0, 1.0], abs=1e-14)
        w = tg.weights
        for col, t_idx in enumerate([2, 0, 1]):
            f = eig.functions[:, col]
            expected = np.zeros(3)
            expected[t_idx] = 1.0 / np.sqrt(w[t_idx])
            assert f == pytest.approx(expected, abs=1e-12)

    def test_zero_kernel(self):
        tg = TimeGrid([0.0, 1.0])
        eig = covariance_eigenfunctions(MetricCovarianceGrid(np.zeros((2, 2)), tg))
        assert np.array_equal(eig.eigenvalues, [0.0, 0.0])

    def test_hand_two_by_two(self):
        cov = metric_covariance(hand_dataset())
        eig = covariance_eigenfunctions(cov)
        # W^(1/2) C W^(1/2) = [[0.5, 1], [1, 2]] has eigenvalues (2.5, 0)
        assert eig.eigenvalues == pytest.approx([2.5, 0.0], abs=1e-14)

    def test_quadrature_orthonormality(self):
        ds = make_cdf_dataset(seed=35, n=8, times=tuple(np.linspace(0, 6, 7)))
        cov = metric_covariance(ds)
        eig = covariance_eigenfunctions(cov)
        gram = eig.functions.T @ np.diag(cov.weights) @ eig.functions
        assert np.abs(gram - np.eye(gram.shape[0])).max() <= 1e-8

    def test_eigenvalue_sum_preserves_weighted_trace(self):
        ds = make_cdf_dataset(seed=36, n=9)
        cov = metric_covariance(ds)
        eig = covariance_eigenfunctions(cov)
        assert eig.eigenvalues.sum() == pytest.approx(cov.weighted_trace(), rel=1e-8)

    def test_nonpositive_weights_rejected(self):
        class BadCov:
            matrix = np.eye(2)
            weights = np.array([1.0, -1.0])

        with pytest.raises(NonpositiveWeightsError):
            covariance_eigenfunctions(BadCov())


class TestTraceIdentity:
    def test_identical_dataset_zero_residual(self):
        ds = identical_dataset()
        cov = metric_covariance(ds)
        kernel = gower_center(pairwise_sq_dist_matrix(ds))
        assert trace_identity_residual(cov, kernel) == 0.0

    def test_hand_dataset_both_sides(self):
        ds = hand_dataset()
        cov = metric_covariance(ds)
        kernel = gower_center(pairwise_sq_dist_matrix(ds))
        # Both sides equal the mean integrated squared centered norm: 2.5.
        assert cov.weighted_trace() == pytest.approx(2.5, abs=1e-14)
        assert np.trace(kernel.matrix) / 2 == pytest.approx(2.5, abs=1e-14)
        assert trace_identity_residual(cov, kernel) <= 1e-12

    def test_random_cdf_dataset(self):
        ds = make_cdf_dataset(seed=37, n=20, times=tuple(np.linspace(0, 10, 11)))
        cov = metric_covariance(ds)
        kernel = gower_center(pairwise_sq_dist_matrix(ds))
        rhs = np.trace(kernel.matrix) / len(ds)
        assert trace_identity_residual(cov, kernel) <= 1e-10 * max(1.0, rhs)


class TestInformationLossReport:
    def test_identical_dataset_zero_totals(self):
        ds = identical_dataset()
        with pytest.warns(UserWarning):
            model = fit_kpca(ds)
        eig = covariance_eigenfunctions(metric_covariance(ds))
        report = information_loss_report(model, eig)
        assert report.kpca_total == 0.0
        assert report.covariance_total == 0.0

    def test_scalar_points_have_equal_totals(self):
        ds = make_euclidean_dataset(seed=38, n=9, t_count=5, dim=1)
        model = fit_kpca(ds)
        eig = covariance_eigenfunctions(metric_covariance(ds))
        report = information_loss_report(model, eig)
        # Scalar point space: the covariance kernel carries the full trace,
        # so the totals are equal up to round-off.
        assert report.kpca_total == pytest.approx(report.covariance_total, rel=1e-12)

    def test_cdf_dataset_report(self):
        ds = make_cdf_dataset(seed=39, n=8)
        model = fit_kpca(ds)
        eig = covariance_eigenfunctions(metric_covariance(ds))
        report = information_loss_report(model, eig)
        assert report.kpca_total == pytest.approx(report.covariance_total, rel=1e-10)
        text = report.to_text()
        assert text == information_loss_report(model, eig).to_text()
        assert "total variance" in text
        assert report.kpca_cumulative[-1] == pytest.approx(1.0, abs=1e-12)
