"""Life-table ingestion, synthetic data generation, and the embedding oracle.

Input is long-format CSV (unit, time, age, mass).  Masses accumulate over
ascending age and normalize to CDFs; units become curves over the common
time grid.  The explicit embedding of a CDF dataset — quadrature-weighted
CDF vectors — turns plain Euclidean geometry into the integrated metric,
which is what lets direct PCA cross-validate the distance-only pipeline.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .dataset import FunctionalDataset, MetricFunction, stacked_values
from .errors import (
    AgeGridMismatchError,
    CsvParseError,
    EmptyInputError,
    GridTooNarrowError,
    IncompletePanelError,
    MissingColumnError,
    NoCommonTimesError,
    WrongMetricError,
    ZeroTotalMassError,
)
from .grids import AgeGrid, TimeGrid
from .metrics import CdfBounds, CdfL2Metric, DiscretizedCdf, EuclideanMetric, validate_cdf

__all__ = [
    "LifetableRecord",
    "VectorRecord",
    "CdfPanel",
    "SynthesisConfig",
    "DEFAULT_SCHEMA",
    "parse_lifetable_csv",
    "parse_vector_csv",
    "records_to_cdf_panel",
    "panel_to_dataset",
    "vector_records_to_dataset",
    "synth_gaussian_cdf_process",
    "embed_cdf_dataset",
    "embed_euclidean_dataset",
    "write_lifetable_csv",
]

DEFAULT_SCHEMA = {"unit": "unit", "time": "time", "age": "age", "mass": "mass"}


@dataclass(frozen=True)
class LifetableRecord:
    """One long-format row: mass observed for (unit, time, age)."""

    unit: str
    time: float
    age: float
    mass: float
    group: str | None = None


@dataclass(frozen=True)
class VectorRecord:
    """One wide-format row: a Euclidean point for (unit, time)."""

    unit: str
    time: float
    values: tuple
    group: str | None = None


@dataclass(frozen=True)
class CdfPanel:
    """Validated CDFs per (unit, time) cell on a shared age grid."""

    grid: AgeGrid
    cells: dict
    groups: dict = field(default_factory=dict)

    def units(self) -> list:
        return sorted({u for u, _ in self.cells})

    def times_for(self, unit: str) -> set:
        return {t for u, t in self.cells if u == unit}


def _open_csv(source):
    if isinstance(source, str) and "\n" not in source:
        return open(source, newline="", encoding="utf-8"), True
    if isinstance(source, str):
        return io.StringIO(source), True
    return source, False


def _resolve_columns(header, schema, required):
    columns = {}
    for key in required:
        name = schema.get(key, DEFAULT_SCHEMA.get(key, key))
        if name not in header:
            raise MissingColumnError(f"required column {name!r} (for {key!r}) not found")
        columns[key] = header.index(name)
    group_name = schema.get("group", "group")
    columns["group"] = header.index(group_name) if group_name in header else None
    return columns


def parse_lifetable_csv(source, schema=None, delimiter: str = ",") -> list[LifetableRecord]:
    """Parse long-format life-table rows into typed records.

    ``schema`` maps the logical names unit/time/age/mass (and optionally
    group) to the file's column names.  Bad rows raise CsvParseError with
    their 1-based line number; (unit, time, age) must be unique.
    """
    schema = dict(schema or {})
    fh, close = _open_csv(source)
    try:
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader, None)
        if header is None:
            raise EmptyInputError("input has no header row")
        header = [h.strip() for h in header]
        cols = _resolve_columns(header, schema, ("unit", "time", "age", "mass"))
        records = []
        seen = set()
        unit_groups = {}
        for line, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise CsvParseError(f"expected {len(header)} fields, got {len(row)}", line)
            unit = row[cols["unit"]].strip()
            if not unit:
                raise CsvParseError("empty unit id", line)
            try:
                time = float(row[cols["time"]])
                age = float(row[cols["age"]])
                mass = float(row[cols["mass"]])
            except ValueError as exc:
                raise CsvParseError(f"non-numeric field ({exc})", line) from None
            if mass < 0:
                raise CsvParseError(f"negative mass {mass:g}", line)
            key = (unit, time, age)
            if key in seen:
                raise CsvParseError(f"duplicate (unit, time, age) = {key}", line)
            seen.add(key)
            group = None
            if cols["group"] is not None:
                group = row[cols["group"]].strip() or None
                if unit in unit_groups and unit_groups[unit] != group:
                    raise CsvParseError(
                        f"unit {unit!r} has conflicting group labels", line
                    )
                unit_groups[unit] = group
            records.append(LifetableRecord(unit, time, age, mass, group))
        if not records:
            raise EmptyInputError("input has no data rows")
        return records
    finally:
        if close:
            fh.close()


def parse_vector_csv(source, schema=None, delimiter: str = ",") -> list[VectorRecord]:
    """Parse wide-format Euclidean rows: unit, time, then coordinate columns.

    Every column not claimed by the schema is a coordinate, in header order.
    """
    schema = dict(schema or {})
    fh, close = _open_csv(source)
    try:
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader, None)
        if header is None:
            raise EmptyInputError("input has no header row")
        header = [h.strip() for h in header]
        cols = _resolve_columns(header, schema, ("unit", "time"))
        claimed = {cols["unit"], cols["time"]}
        if cols["group"] is not None:
            claimed.add(cols["group"])
        coord_idx = [i for i in range(len(header)) if i not in claimed]
        if not coord_idx:
            raise MissingColumnError("no coordinate columns found")
        records = []
        seen = set()
        for line, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < len(header):
                raise CsvParseError(f"expected {len(header)} fields, got {len(row)}", line)
            unit = row[cols["unit"]].strip()
            if not unit:
                raise CsvParseError("empty unit id", line)
            try:
                time = float(row[cols["time"]])
                values = tuple(float(row[i]) for i in coord_idx)
            except ValueError as exc:
                raise CsvParseError(f"non-numeric field ({exc})", line) from None
            if (unit, time) in seen:
                raise CsvParseError(f"duplicate (unit, time) = {(unit, time)}", line)
            seen.add((unit, time))
            group = row[cols["group"]].strip() or None if cols["group"] is not None else None
            records.append(VectorRecord(unit, time, values, group))
        if not records:
            raise EmptyInputError("input has no data rows")
        return records
    finally:
        if close:
            fh.close()


def records_to_cdf_panel(
    records, age_grid: AgeGrid | None = None, bounds: CdfBounds = CdfBounds()
) -> CdfPanel:
    """Accumulate masses over ascending age into validated CDFs per cell.

    Each (unit, time) cell must cover the age grid exactly — no
    interpolation; ``age_grid=None`` derives the grid from the ages present
    in the records.  The final CDF value is exactly 1 after normalization.
    """
    cells_raw = {}
    groups = {}
    for rec in records:
        cells_raw.setdefault((rec.unit, rec.time), []).append((rec.age, rec.mass))
        if rec.group is not None:
            groups[rec.unit] = rec.group
    if age_grid is None:
        ages = sorted({rec.age for rec in records})
        age_grid = AgeGrid(ages)
    cells = {}
    for key in sorted(cells_raw):
        pairs = sorted(cells_raw[key])
        ages = np.array([a for a, _ in pairs])
        if ages.shape != age_grid.points.shape or not np.array_equal(ages, age_grid.points):
            raise AgeGridMismatchError(
                f"cell {key} covers ages that differ from the configured grid; "
                "resample the input to the grid before ingestion"
            )
        masses = np.array([m for _, m in pairs])
        cum = np.cumsum(masses)
        total = cum[-1]
        if total <= 0:
            raise ZeroTotalMassError(f"cell {key} has zero total mass")
        cells[key] = validate_cdf(cum / total, age_grid, bounds)
    return CdfPanel(age_grid, cells, groups)


def panel_to_dataset(panel: CdfPanel, time_policy: str = "intersect") -> FunctionalDataset:
    """Assemble units into CDF-valued curves over a common time grid.

    ``intersect`` keeps the times present for every unit; ``require-complete``
    errs on any gap and lists the missing cells.  Units are ordered by id.
    """
    units = panel.units()
    if not units:
        raise EmptyInputError("panel has no cells")
    times_by_unit = {u: panel.times_for(u) for u in units}
    all_times = set().union(*times_by_unit.values())
    if time_policy == "intersect":
        common = set(all_times)
        for u in units:
            common &= times_by_unit[u]
        if len(common) < 2:
            raise NoCommonTimesError(
                f"only {len(common)} time point(s) shared by every unit; need >= 2"
            )
        times = sorted(common)
    elif time_policy == "require-complete":
        missing = [
            (u, t) for u in units for t in sorted(all_times) if t not in times_by_unit[u]
        ]
        if missing:
            cells = ", ".join(f"{u}@{t:g}" for u, t in missing)
            raise IncompletePanelError(f"missing cells: {cells}", missing)
        times = sorted(all_times)
        if len(times) < 2:
            raise NoCommonTimesError("need at least two time points")
    else:
        raise ValueError(f"unknown time policy {time_policy!r}")
    time_grid = TimeGrid(times)
    metric = CdfL2Metric(panel.grid)
    observations = [
        MetricFunction(u, [panel.cells[(u, t)] for t in times]) for u in units
    ]
    return FunctionalDataset(time_grid, metric, observations)


def vector_records_to_dataset(
    records, time_policy: str = "intersect"
) -> tuple[FunctionalDataset, dict]:
    """Euclidean analogue of panel assembly; returns (dataset, unit groups)."""
    by_unit = {}
    groups = {}
    dim = len(records[0].values)
    for rec in records:
        if len(rec.values) != dim:
            raise CsvParseError(f"inconsistent coordinate count for unit {rec.unit!r}")
        by_unit.setdefault(rec.unit, {})[rec.time] = np.asarray(rec.values, dtype=float)
        if rec.group is not None:
            groups[rec.unit] = rec.group
    units = sorted(by_unit)
    all_times = set().union(*(set(m) for m in by_unit.values()))
    if time_policy == "intersect":
        common = set(all_times)
        for u in units:
            common &= set(by_unit[u])
        if len(common) < 2:
            raise NoCommonTimesError(
                f"only {len(common)} time point(s) shared by every unit; need >= 2"
            )
        times = sorted(common)
    elif time_policy == "require-complete":
        missing = [(u, t) for u in units for t in sorted(all_times) if t not in by_unit[u]]
        if missing:
            cells = ", ".join(f"{u}@{t:g}" for u, t in missing)
            raise IncompletePanelError(f"missing cells: {cells}", missing)
        times = sorted(all_times)
        if len(times) < 2:
            raise NoCommonTimesError("need at least two time points")
    else:
        raise ValueError(f"unknown time policy {time_policy!r}")
    ds = FunctionalDataset(
        TimeGrid(times),
        EuclideanMetric(dim),
        [MetricFunction(u, [by_unit[u][t] for t in times]) for u in units],
    )
    return ds, groups


@dataclass(frozen=True)
class SynthesisConfig:
    """Generator settings for Gaussian-CDF-valued test processes.

    Unit i maps time t to the CDF of Normal(loc_i + drift_i * t, scale_i^2)
    sampled on the age grid.  Parameters are drawn uniformly from the
    ranges by a PCG64 generator seeded with ``seed`` (one (loc, drift,
    scale) triple per unit, in unit order), unless ``explicit_params``
    pins them.  Fixed seed means bitwise-identical output.
    """

    n_units: int
    time_points: tuple
    age_min: float = -6.0
    age_max: float = 6.0
    age_count: int = 61
    loc_range: tuple = (-1.0, 1.0)
    drift_range: tuple = (-0.02, 0.02)
    scale_range: tuple = (0.8, 1.25)
    seed: int = 0
    rng_algorithm: str = "pcg64"
    explicit_params: tuple | None = None

    def __post_init__(self):
        if self.n_units < 2:
            raise ValueError("need at least two units")
        if len(self.time_points) < 2:
            raise ValueError("need at least two time points")
        if self.age_count < 2 or self.age_max <= self.age_min:
            raise ValueError("invalid age grid spec")
        for lo, hi in (self.loc_range, self.drift_range, self.scale_range):
            if hi < lo:
                raise ValueError("parameter ranges must have lo <= hi")
        if self.scale_range[0] <= 0:
            raise ValueError("scale range must be positive")
        if self.rng_algorithm != "pcg64":
            raise ValueError("only the pcg64 generator is supported")
        if self.explicit_params is not None and len(self.explicit_params) != self.n_units:
            raise ValueError("explicit_params must supply one triple per unit")


def synth_gaussian_cdf_process(cfg: SynthesisConfig) -> FunctionalDataset:
    """Deterministic synthetic CDF-valued dataset for tests and fixtures."""
    grid = AgeGrid(np.linspace(cfg.age_min, cfg.age_max, cfg.age_count))
    times = np.asarray(cfg.time_points, dtype=float)
    if cfg.explicit_params is not None:
        params = [tuple(map(float, p)) for p in cfg.explicit_params]
    else:
        rng = np.random.Generator(np.random.PCG64(cfg.seed))
        params = [
            (
                float(rng.uniform(*cfg.loc_range)),
                float(rng.uniform(*cfg.drift_range)),
                float(rng.uniform(*cfg.scale_range)),
            )
            for _ in range(cfg.n_units)
        ]
    width = len(str(cfg.n_units))
    metric = CdfL2Metric(grid)
    observations = []
    for i, (loc, drift, scale) in enumerate(params):
        means = loc + drift * times
        if means.min() - 4 * scale < cfg.age_min or means.max() + 4 * scale > cfg.age_max:
            raise GridTooNarrowError(
                f"unit {i} needs the age grid to cover "
                f"[{means.min() - 4 * scale:g}, {means.max() + 4 * scale:g}]"
            )
        curve = [
            DiscretizedCdf(grid, ndtr((grid.points - m) / scale)) for m in means
        ]
        observations.append(MetricFunction(f"u{i + 1:0{width}d}", curve))
    return FunctionalDataset(TimeGrid(times), metric, observations)


def embed_cdf_dataset(ds: FunctionalDataset) -> np.ndarray:
    """Explicit embedding of a CDF dataset: quadrature-weighted CDF vectors.

    Row i fixes coordinate (t, a) to sqrt(w_t * w_a) * F_{i,t}(a), so plain
    squared Euclidean row distances equal the integrated squared distances
    of the curves: THE bridge that lets direct PCA validate the
    distance-only pipeline.
    """
    if not isinstance(ds.metric, CdfL2Metric):
        raise WrongMetricError("embedding is defined for the cdf-l2 metric")
    values = stacked_values(ds)
    scale = np.sqrt(np.outer(ds.time_grid.weights, ds.metric.grid.weights))
    rows = values * scale[None, :, :]
    return rows.reshape(len(ds), -1)


def embed_euclidean_dataset(ds: FunctionalDataset) -> np.ndarray:
    """Euclidean analogue of the embedding: sqrt(w_t)-scaled coordinates."""
    if not isinstance(ds.metric, EuclideanMetric):
        raise WrongMetricError("expected a Euclidean-metric dataset")
    values = stacked_values(ds)
    rows = values * np.sqrt(ds.time_grid.weights)[None, :, None]
    return rows.reshape(len(ds), -1)


def write_lifetable_csv(ds: FunctionalDataset, fh, groups: dict | None = None) -> None:
    """Serialize a CDF dataset back to long-format masses (CDF increments)."""
    if not isinstance(ds.metric, CdfL2Metric):
        raise WrongMetricError("only cdf-l2 datasets round-trip through masses")
    groups = groups or {}
    writer = csv.writer(fh, lineterminator="\n")
    with_group = bool(groups)
    header = ["unit", "time", "age", "mass"] + (["group"] if with_group else [])
    writer.writerow(header)
    ages = ds.metric.grid.points
    for obs in ds.observations:
        for t, point in zip(ds.time_grid.points, obs.curve):
            masses = np.diff(point.values, prepend=0.0)
            for age, mass in zip(ages, masses):
                row = [
                    obs.id,
                    format(t, ".17g"),
                    format(age, ".17g"),
                    format(mass, ".17g"),
                ]
                if with_group:
                    row.append(groups.get(obs.id, ""))
                writer.writerow(row)
