"""CSV ingestion, panel assembly, synthesis, and the embedding bridge."""

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import ndtr

from metricfda import (
    AgeGrid,
    CdfBounds,
    SynthesisConfig,
    embed_cdf_dataset,
    fit_kpca,
    integrated_sq_dist,
    pairwise_sq_dist_matrix,
    panel_to_dataset,
    parse_lifetable_csv,
    parse_vector_csv,
    records_to_cdf_panel,
    synth_gaussian_cdf_process,
    vector_records_to_dataset,
)
from metricfda.dataset import stacked_values
from metricfda.errors import (
    AgeGridMismatchError,
    CsvParseError,
    EmptyInputError,
    GridTooNarrowError,
    IncompletePanelError,
    MissingColumnError,
    NoCommonTimesError,
    RangeViolationError,
    WrongMetricError,
    ZeroTotalMassError,
)

RELAXED = CdfBounds.relaxed()


class TestParseLifetable:
    def test_well_formed_rows(self):
        text = "unit,time,age,mass\nA,2000,0,1\nA,2000,1,2\nA,2000,2,3\n"
        records = parse_lifetable_csv(text)
        assert len(records) == 3
        assert records[0].unit == "A"
        assert records[2].mass == 3.0

    def test_missing_column(self):
        with pytest.raises(MissingColumnError, match="age"):
            parse_lifetable_csv("unit,time,mass\nA,2000,1\n")

    def test_negative_mass_with_line_number(self):
        text = "unit,time,age,mass\nA,2000,0,1\nA,2000,1,-2\n"
        with pytest.raises(CsvParseError, match="line 3"):
            parse_lifetable_csv(text)

    def test_non_numeric_field(self):
        with pytest.raises(CsvParseError, match="line 2"):
            parse_lifetable_csv("unit,time,age,mass\nA,2000,zero,1\n")

    def test_duplicate_cell_age(self):
        text = "unit,time,age,mass\nA,2000,0,1\nA,2000,0,2\n"
        with pytest.raises(CsvParseError, match="duplicate"):
            parse_lifetable_csv(text)

    def test_empty_input(self):
        with pytest.raises(EmptyInputError):
            parse_lifetable_csv("unit,time,age,mass\n")

    def test_schema_mapping_and_group(self, toy_mortality_path):
        records = parse_lifetable_csv(
            toy_mortality_path,
            schema={"unit": "country", "time": "year", "mass": "deaths", "group": "region"},
        )
        assert {r.group for r in records} == {"east", "west"}
        assert len(records) == 5 * 8 * 21


class TestRecordsToCdfPanel:
    def test_cumulative_normalization(self):
        text = "unit,time,age,mass\nA,1,0,1\nA,1,1,1\nA,1,2,2\n"
        panel = records_to_cdf_panel(parse_lifetable_csv(text), bounds=RELAXED)
        cdf = panel.cells[("A", 1.0)]
        assert np.array_equal(cdf.values, [0.25, 0.5, 1.0])
        assert cdf.values[-1] == 1.0

    def test_endpoint_bound_violation_surfaces(self):
        # All mass at the first age: CDF is (1, 1, 1), far above the
        # default first-value bound of 0.05.
        text = "unit,time,age,mass\nA,1,0,4\nA,1,1,0\nA,1,2,0\n"
        with pytest.raises(RangeViolationError):
            records_to_cdf_panel(parse_lifetable_csv(text))
        panel = records_to_cdf_panel(parse_lifetable_csv(text), bounds=RELAXED)
        assert np.array_equal(panel.cells[("A", 1.0)].values, [1.0, 1.0, 1.0])

    def test_zero_total_mass(self):
        text = "unit,time,age,mass\nA,1,0,0\nA,1,1,0\nA,1,2,0\n"
        with pytest.raises(ZeroTotalMassError):
            records_to_cdf_panel(parse_lifetable_csv(text))

    def test_age_grid_must_match_exactly(self):
        text = "unit,time,age,mass\nA,1,0,1\nA,1,1,1\nA,1,2,2\n"
        with pytest.raises(AgeGridMismatchError):
            records_to_cdf_panel(
                parse_lifetable_csv(text), age_grid=AgeGrid([0.0, 0.5, 1.0, 2.0])
            )


class TestPanelToDataset:
    def make_panel(self, rows):
        header = "unit,time,age,mass\n"
        return records_to_cdf_panel(parse_lifetable_csv(header + rows), bounds=RELAXED)

    def cell(self, unit, time):
        return f"{unit},{time},0,1\n{unit},{time},1,1\n{unit},{time},2,2\n"

    def test_identical_years(self):
        panel = self.make_panel(
            self.cell("A", 1) + self.cell("A", 2) + self.cell("B", 1) + self.cell("B", 2)
        )
        ds = panel_to_dataset(panel)
        assert ds.ids == ("A", "B")
        assert np.array_equal(ds.time_grid.points, [1.0, 2.0])

    def test_intersect_policy(self):
        rows = (
            self.cell("A", 1) + self.cell("A", 2) + self.cell("A", 3)
            + self.cell("B", 2) + self.cell("B", 3) + self.cell("B", 4)
        )
        ds = panel_to_dataset(self.make_panel(rows), "intersect")
        assert np.array_equal(ds.time_grid.points, [2.0, 3.0])

    def test_require_complete_lists_missing_cells(self):
        rows = (
            self.cell("A", 1) + self.cell("A", 2) + self.cell("A", 3)
            + self.cell("B", 2) + self.cell("B", 3) + self.cell("B", 4)
        )
        with pytest.raises(IncompletePanelError) as err:
            panel_to_dataset(self.make_panel(rows), "require-complete")
        assert ("A", 4.0) in err.value.missing
        assert ("B", 1.0) in err.value.missing

    def test_no_common_times(self):
        rows = self.cell("A", 1) + self.cell("A", 2) + self.cell("B", 3) + self.cell("B", 4)
        with pytest.raises(NoCommonTimesError):
            panel_to_dataset(self.make_panel(rows), "intersect")

    def test_row_order_invariance(self, toy_mortality_path):
        schema = {"unit": "country", "time": "year", "mass": "deaths", "group": "region"}
        records = parse_lifetable_csv(toy_mortality_path, schema=schema)
        ds = panel_to_dataset(records_to_cdf_panel(records))
        rng = np.random.default_rng(0)
        shuffled = [records[i] for i in rng.permutation(len(records))]
        ds2 = panel_to_dataset(records_to_cdf_panel(shuffled))
        assert ds.ids == ds2.ids
        m1 = pairwise_sq_dist_matrix(ds).matrix
        m2 = pairwise_sq_dist_matrix(ds2).matrix
        assert np.array_equal(m1, m2)


class TestVectorRecords:
    def test_parse_and_assemble(self):
        text = "unit,time,x,y\nA,0,1,2\nA,1,3,4\nB,0,0,0\nB,1,1,1\n"
        records = parse_vector_csv(text)
        ds, groups = vector_records_to_dataset(records)
        assert ds.ids == ("A", "B")
        assert ds.metric.dim == 2
        assert groups == {}

    def test_duplicate_cell_rejected(self):
        text = "unit,time,x\nA,0,1\nA,0,2\nB,0,1\n"
        with pytest.raises(CsvParseError, match="duplicate"):
            parse_vector_csv(text)


class TestSynthesis:
    def test_identical_parameters_zero_distance(self):
        cfg = SynthesisConfig(
            n_units=2,
            time_points=(0.0, 1.0),
            explicit_params=((0.3, 0.0, 1.0), (0.3, 0.0, 1.0)),
        )
        ds = synth_gaussian_cdf_process(cfg)
        x, y = ds.observations
        assert integrated_sq_dist(x, y, ds.time_grid, ds.metric) == 0.0

    def test_unit_shift_matches_quadrature_reference(self):
        # Two standard-normal CDFs one unit apart, constant in time over a
        # span-1 grid: the integrated squared distance approaches
        # integral of (Phi(u) - Phi(u-1))^2 du, computed here by adaptive
        # quadrature, as the age grid gets dense.
        cfg = SynthesisConfig(
            n_units=2,
            time_points=(0.0, 1.0),
            age_min=-8.0,
            age_max=9.0,
            age_count=1701,
            explicit_params=((0.0, 0.0, 1.0), (1.0, 0.0, 1.0)),
        )
        ds = synth_gaussian_cdf_process(cfg)
        x, y = ds.observations
        got = integrated_sq_dist(x, y, ds.time_grid, ds.metric)
        reference, err = quad(lambda u: (ndtr(u) - ndtr(u - 1.0)) ** 2, -np.inf, np.inf)
        assert err < 1e-8
        assert got == pytest.approx(reference, rel=1e-6)

    def test_same_seed_bitwise_identical(self):
        cfg = SynthesisConfig(n_units=5, time_points=(0.0, 1.0, 2.0), seed=99)
        a = synth_gaussian_cdf_process(cfg)
        b = synth_gaussian_cdf_process(cfg)
        assert a.ids == b.ids
        assert np.array_equal(stacked_values(a), stacked_values(b))

    def test_different_seed_differs(self):
        base = SynthesisConfig(n_units=5, time_points=(0.0, 1.0), seed=1)
        other = SynthesisConfig(n_units=5, time_points=(0.0, 1.0), seed=2)
        va = stacked_values(synth_gaussian_cdf_process(base))
        vb = stacked_values(synth_gaussian_cdf_process(other))
        assert not np.array_equal(va, vb)

    def test_grid_too_narrow(self):
        cfg = SynthesisConfig(
            n_units=2,
            time_points=(0.0, 1.0),
            age_min=-6.0,
            age_max=6.0,
            explicit_params=((5.0, 0.0, 1.0), (0.0, 0.0, 1.0)),
        )
        with pytest.raises(GridTooNarrowError):
            synth_gaussian_cdf_process(cfg)


class TestEmbedding:
    def test_identical_observations_identical_rows(self):
        cfg = SynthesisConfig(
            n_units=2,
            time_points=(0.0, 1.0),
            explicit_params=((0.1, 0.0, 1.0), (0.1, 0.0, 1.0)),
        )
        rows = embed_cdf_dataset(synth_gaussian_cdf_process(cfg))
        assert np.array_equal(rows[0], rows[1])

    def test_row_distances_equal_integrated_distances(self):
        from .conftest import make_cdf_dataset

        ds = make_cdf_dataset(seed=41, n=8)
        rows = embed_cdf_dataset(ds)
        gram_d2 = ((rows[:, None, :] - rows[None, :, :]) ** 2).sum(axis=-1)
        d2 = pairwise_sq_dist_matrix(ds).matrix
        assert np.abs(gram_d2 - d2).max() <= 1e-10 * max(d2.max(), 1.0)

    def test_direct_pca_reproduces_eigenvalues(self):
        from .conftest import make_cdf_dataset

        ds = make_cdf_dataset(seed=42, n=9)
        model = fit_kpca(ds)
        rows = embed_cdf_dataset(ds)
        centered = rows - rows.mean(axis=0)
        cov_evals = np.linalg.svd(centered, compute_uv=False) ** 2 / len(ds)
        k = model.n_components
        assert model.eigenvalues / len(ds) == pytest.approx(cov_evals[:k], rel=1e-8)

    def test_wrong_metric(self):
        from .conftest import make_euclidean_dataset

        with pytest.raises(WrongMetricError):
            embed_cdf_dataset(make_euclidean_dataset())
