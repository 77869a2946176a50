"""Curves over the time grid and their integrated distance matrices."""

import io

import numpy as np
import pytest

from metricfda import (
    AgeGrid,
    CdfL2Metric,
    DiscretizedCdf,
    EuclideanMetric,
    FunctionalDataset,
    MetricFunction,
    TimeGrid,
    cross_time_sq_dist,
    integrated_sq_dist,
    pairwise_sq_dist_matrix,
    read_sq_dist_csv,
    write_sq_dist_csv,
)
from metricfda.errors import AsymmetricInputError, GridMismatchError

from .conftest import make_cdf_dataset


def euclid_curve(obs_id, values):
    return MetricFunction(obs_id, [np.array([float(v)]) for v in values])


class TestIntegratedSqDist:
    def setup_method(self):
        self.tg = TimeGrid([0.0, 1.0])
        self.metric = EuclideanMetric(1)

    def test_identity(self):
        x = euclid_curve("x", [1.0, 2.0])
        assert integrated_sq_dist(x, x, self.tg, self.metric) == 0.0

    def test_hand_trapezoid_sum(self):
        x = euclid_curve("x", [0.0, 0.0])
        y = euclid_curve("y", [2.0, 4.0])
        # 0.5*4 + 0.5*16 = 10
        assert integrated_sq_dist(x, y, self.tg, self.metric) == pytest.approx(10.0)

    def test_constant_curves_scale_with_span(self):
        tg = TimeGrid([0.0, 1.0, 2.0, 5.0])
        a = euclid_curve("a", [1.0] * 4)
        b = euclid_curve("b", [4.0] * 4)
        val = integrated_sq_dist(a, b, tg, self.metric)
        assert val == pytest.approx(tg.span * 9.0, rel=1e-14)

    def test_grid_mismatch(self):
        x = euclid_curve("x", [0.0, 0.0, 0.0])
        y = euclid_curve("y", [1.0, 1.0])
        with pytest.raises(GridMismatchError):
            integrated_sq_dist(x, y, self.tg, self.metric)


class TestCrossTimeSqDist:
    def setup_method(self):
        self.metric = EuclideanMetric(1)

    def test_same_index_same_curve_zero(self):
        x = euclid_curve("x", [3.0, 4.0])
        assert cross_time_sq_dist(x, 1, x, 1, self.metric) == 0.0

    def test_constant_curves_any_indices(self):
        a = euclid_curve("a", [2.0, 2.0, 2.0])
        b = euclid_curve("b", [5.0, 5.0, 5.0])
        for s in range(3):
            for t in range(3):
                assert cross_time_sq_dist(a, s, b, t, self.metric) == 9.0

    def test_direct_evaluation(self):
        x = euclid_curve("x", [0.0, 1.0])
        y = euclid_curve("y", [5.0, 7.0])
        assert cross_time_sq_dist(x, 0, y, 1, self.metric) == 49.0

    def test_index_out_of_range(self):
        x = euclid_curve("x", [0.0, 1.0])
        with pytest.raises(IndexError):
            cross_time_sq_dist(x, 2, x, 0, self.metric)


class TestPairwiseMatrix:
    def test_identical_observations_zero_matrix(self):
        tg = TimeGrid([0.0, 1.0])
        obs = [euclid_curve(f"o{i}", [1.0, 2.0]) for i in range(4)]
        ds = FunctionalDataset(tg, EuclideanMetric(1), obs)
        d2 = pairwise_sq_dist_matrix(ds)
        assert np.array_equal(d2.matrix, np.zeros((4, 4)))

    def test_two_point_structure(self):
        tg = TimeGrid([0.0, 1.0])
        ds = FunctionalDataset(
            tg,
            EuclideanMetric(1),
            [euclid_curve("a", [0.0, 0.0]), euclid_curve("b", [2.0, 4.0])],
        )
        d2 = pairwise_sq_dist_matrix(ds)
        assert np.array_equal(d2.matrix, [[0.0, 10.0], [10.0, 0.0]])

    def test_matches_naive_double_loop(self):
        ds = make_cdf_dataset(seed=3, n=6, times=(0.0, 1.0, 2.0), age_count=21)
        d2 = pairwise_sq_dist_matrix(ds)
        obs = ds.observations
        naive = np.array(
            [
                [
                    integrated_sq_dist(a, b, ds.time_grid, ds.metric)
                    for b in obs
                ]
                for a in obs
            ]
        )
        assert np.array_equal(d2.matrix, naive)

    def test_symmetry_and_zero_diagonal_exact(self):
        ds = make_cdf_dataset(seed=4, n=7)
        d2 = pairwise_sq_dist_matrix(ds)
        assert np.array_equal(d2.matrix, d2.matrix.T)
        assert np.all(np.diagonal(d2.matrix) == 0.0)
        assert d2.matrix.min() >= 0.0

    def test_permutation_equivariance(self):
        ds = make_cdf_dataset(seed=5, n=6)
        d2 = pairwise_sq_dist_matrix(ds)
        perm = [3, 0, 5, 1, 4, 2]
        permuted = FunctionalDataset(
            ds.time_grid, ds.metric, [ds.observations[i] for i in perm]
        )
        d2p = pairwise_sq_dist_matrix(permuted)
        assert np.array_equal(d2p.matrix, d2.matrix[np.ix_(perm, perm)])

    def test_time_weight_scaling_exact(self):
        # Doubling the time-grid points doubles the trapezoid weights
        # exactly (power-of-two scaling is exact in IEEE arithmetic).
        metric = EuclideanMetric(1)
        curves = [
            euclid_curve("a", [0.0, 1.0, 3.0]),
            euclid_curve("b", [2.0, 2.0, 0.0]),
        ]
        base = FunctionalDataset(TimeGrid([0.0, 1.0, 2.0]), metric, curves)
        scaled = FunctionalDataset(TimeGrid([0.0, 2.0, 4.0]), metric, curves)
        m_base = pairwise_sq_dist_matrix(base).matrix
        m_scaled = pairwise_sq_dist_matrix(scaled).matrix
        assert np.array_equal(m_scaled, 2.0 * m_base)


class TestCsvRoundTrip:
    def test_round_trip_lossless(self):
        ds = make_cdf_dataset(seed=6, n=5)
        d2 = pairwise_sq_dist_matrix(ds)
        buf = io.StringIO()
        write_sq_dist_csv(d2, buf)
        back = read_sq_dist_csv(io.StringIO(buf.getvalue()))
        assert back.ids == d2.ids
        assert np.array_equal(back.matrix, d2.matrix)

    def test_validation_rejects_asymmetric(self):
        text = "id,a,b\na,0,1\nb,2,0\n"
        with pytest.raises(AsymmetricInputError):
            read_sq_dist_csv(io.StringIO(text))
        loaded = read_sq_dist_csv(io.StringIO(text), validate=False)
        assert loaded.matrix[0, 1] == 1.0


class TestDatasetValidation:
    def test_duplicate_ids_rejected(self):
        tg = TimeGrid([0.0, 1.0])
        obs = [euclid_curve("same", [0.0, 1.0]), euclid_curve("same", [1.0, 2.0])]
        with pytest.raises(ValueError, match="unique"):
            FunctionalDataset(tg, EuclideanMetric(1), obs)

    def test_needs_two_observations(self):
        tg = TimeGrid([0.0, 1.0])
        with pytest.raises(ValueError):
            FunctionalDataset(tg, EuclideanMetric(1), [euclid_curve("a", [0.0, 1.0])])

    def test_curve_points_checked_against_metric(self):
        grid = AgeGrid([0.0, 1.0])
        other = AgeGrid([0.0, 2.0])
        tg = TimeGrid([0.0, 1.0])
        bad = MetricFunction(
            "x",
            [
                DiscretizedCdf(grid, [0.0, 1.0]),
                DiscretizedCdf(other, [0.0, 1.0]),
            ],
        )
        ok = MetricFunction(
            "y",
            [DiscretizedCdf(grid, [0.0, 1.0]), DiscretizedCdf(grid, [0.0, 1.0])],
        )
        with pytest.raises(GridMismatchError):
            FunctionalDataset(tg, CdfL2Metric(grid), [bad, ok])
