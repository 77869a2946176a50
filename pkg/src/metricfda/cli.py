"""Command-line front end: fit, transform, dm, synth, check.

Every run is reproducible: a single optional JSON config file, flags that
override it, no environment lookups, atomic output files, and 17-digit
decimal formatting so downstream comparisons are lossless.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .covariance import (
    classical_cross_time_covariance,
    covariance_eigenfunctions,
    information_loss_report,
    metric_covariance,
    trace_identity_residual,
)
from .dataset import (
    FunctionalDataset,
    MetricFunction,
    pairwise_sq_dist_matrix,
    read_sq_dist_csv,
)
from .errors import (
    GridMismatchError,
    MetricFdaError,
    NotNegativeTypeError,
)
from .fileio import atomic_write_text, fmt, write_csv_atomic
from .grids import TimeGrid
from .ingest import (
    SynthesisConfig,
    embed_cdf_dataset,
    embed_euclidean_dataset,
    panel_to_dataset,
    parse_lifetable_csv,
    parse_vector_csv,
    records_to_cdf_panel,
    synth_gaussian_cdf_process,
    vector_records_to_dataset,
    write_lifetable_csv,
)
from .kernel import (
    centered_kernel_by_double_sum,
    eig_sym,
    explained_variance_ratio,
    fit_kpca,
    gower_center,
    load_model_json,
    model_to_dict,
    transform,
)
from .metrics import CdfBounds, CdfL2Metric, EuclideanMetric

__all__ = ["main"]


class ConfigError(Exception):
    """Bad flags, bad config file, or unusable output directory."""


def _parse_schema(text: str) -> dict:
    schema = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise ConfigError(f"schema entry {item!r} is not key=value")
        key, value = item.split("=", 1)
        schema[key.strip()] = value.strip()
    return schema


def _parse_range(text: str) -> tuple:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"range {text!r} must be 'lo,hi'")
    try:
        return (float(parts[0]), float(parts[1]))
    except ValueError:
        raise ConfigError(f"range {text!r} must contain two numbers") from None


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    return doc


def _merge(args: argparse.Namespace, filecfg: dict, key: str, default=None):
    """Command-line flags override the config file, which overrides defaults."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in filecfg:
        return filecfg[key]
    return default


def _prepare_out_dir(path: str) -> str:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory: {exc}") from None
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {path!r} is not writable")
    return path


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not value > 0:
        raise ConfigError(f"{name} must be positive, got {value:g}")
    return value


def _normalize_time(ds: FunctionalDataset) -> FunctionalDataset:
    """Rescale the time grid to [0, 1]; curves are untouched."""
    pts = ds.time_grid.points
    scaled = (pts - pts[0]) / (pts[-1] - pts[0])
    return FunctionalDataset(TimeGrid(scaled), ds.metric, ds.observations)


def _load_dataset(args, filecfg) -> tuple[FunctionalDataset, dict]:
    """Read the input file per the configured metric; returns (dataset, groups)."""
    input_path = _merge(args, filecfg, "input")
    if not input_path:
        raise ConfigError("an --input file is required")
    metric_kind = _merge(args, filecfg, "metric", "cdf-l2")
    schema = _merge(args, filecfg, "schema", {})
    if isinstance(schema, str):
        schema = _parse_schema(schema)
    time_policy = _merge(args, filecfg, "time_policy", "intersect")
    if metric_kind == "cdf-l2":
        bounds = CdfBounds(
            first_max=float(_merge(args, filecfg, "cdf_first_max", 0.05)),
            last_min=float(_merge(args, filecfg, "cdf_last_min", 0.95)),
        )
        records = parse_lifetable_csv(input_path, schema)
        panel = records_to_cdf_panel(records, bounds=bounds)
        ds = panel_to_dataset(panel, time_policy)
        groups = panel.groups
    elif metric_kind == "euclidean":
        records = parse_vector_csv(input_path, schema)
        ds, groups = vector_records_to_dataset(records, time_policy)
    else:
        raise ConfigError(f"unknown metric {metric_kind!r}")
    if _merge(args, filecfg, "normalize_time", False):
        ds = _normalize_time(ds)
    return ds, groups


def _write_scores_csv(path, ids, groups, scores):
    k = scores.shape[1] if scores.size else 0
    header = ["unit_id", "group", *(f"pc{j + 1}" for j in range(k))]
    rows = [
        [obs_id, groups.get(obs_id, ""), *(fmt(v) for v in scores[i])]
        for i, obs_id in enumerate(ids)
    ]
    write_csv_atomic(path, header, rows)


def _write_component_csv(path, column: str, values):
    write_csv_atomic(
        path,
        ["component", column],
        [[str(i + 1), fmt(v)] for i, v in enumerate(values)],
    )


def cmd_fit(args) -> int:
    filecfg = _load_config_file(getattr(args, "config", None))
    out_dir = _prepare_out_dir(_merge(args, filecfg, "out", "."))
    n_components = _merge(args, filecfg, "components")
    if n_components is not None and int(n_components) < 1:
        raise ConfigError("--components must be >= 1")
    n_components = None if n_components is None else int(n_components)
    psd_tol = _positive("--psd-tol", _merge(args, filecfg, "psd_tol", 1e-8))
    rank_tol = _positive("--rank-tol", _merge(args, filecfg, "rank_tol", 1e-10))
    distances_path = _merge(args, filecfg, "distances")
    if distances_path:
        # Externally supplied distances: scores only, no model for
        # out-of-sample projection.
        with open(distances_path, newline="", encoding="utf-8") as fh:
            d2 = read_sq_dist_csv(fh)
        ds, groups = None, {}
        model = fit_kpca(
            None, n_components=n_components, psd_tol=psd_tol, rank_tol=rank_tol, d2=d2
        )
    else:
        ds, groups = _load_dataset(args, filecfg)
        model = fit_kpca(
            ds, n_components=n_components, psd_tol=psd_tol, rank_tol=rank_tol
        )
    _write_scores_csv(os.path.join(out_dir, "scores.csv"), model.ids, groups, model.scores)
    _write_component_csv(
        os.path.join(out_dir, "eigenvalues.csv"), "eigenvalue", model.eigenvalues
    )
    _write_component_csv(
        os.path.join(out_dir, "explained_variance.csv"),
        "ratio",
        explained_variance_ratio(model),
    )
    if ds is not None:
        doc = model_to_dict(model, ds)
        doc["groups"] = {u: g for u, g in sorted(groups.items())}
        atomic_write_text(
            os.path.join(out_dir, "model.json"),
            json.dumps(doc, sort_keys=True, indent=1) + "\n",
        )
    return 0


def _curves_on_model_grid(args, filecfg, model, train) -> tuple[list, dict]:
    """Parse new observations and align them to the model's grids."""
    input_path = _merge(args, filecfg, "input")
    if not input_path:
        raise ConfigError("an --input file is required")
    schema = _merge(args, filecfg, "schema", {})
    if isinstance(schema, str):
        schema = _parse_schema(schema)
    times = list(model.time_grid.points)
    if isinstance(model.metric, CdfL2Metric):
        records = parse_lifetable_csv(input_path, schema)
        panel = records_to_cdf_panel(records, age_grid=model.metric.grid)
        cells = panel.cells
        groups = panel.groups
        units = panel.units()
        missing = [(u, t) for u in units for t in times if (u, t) not in cells]
        if missing:
            listing = ", ".join(f"{u}@{t:g}" for u, t in missing)
            raise GridMismatchError(
                f"new data does not cover the model's time grid: missing {listing}"
            )
        curves = [MetricFunction(u, [cells[(u, t)] for t in times]) for u in units]
    elif isinstance(model.metric, EuclideanMetric):
        records = parse_vector_csv(input_path, schema)
        by_unit = {}
        groups = {}
        for rec in records:
            by_unit.setdefault(rec.unit, {})[rec.time] = np.asarray(rec.values)
            if rec.group is not None:
                groups[rec.unit] = rec.group
        units = sorted(by_unit)
        missing = [(u, t) for u in units for t in times if t not in by_unit[u]]
        if missing:
            listing = ", ".join(f"{u}@{t:g}" for u, t in missing)
            raise GridMismatchError(
                f"new data does not cover the model's time grid: missing {listing}"
            )
        curves = [MetricFunction(u, [by_unit[u][t] for t in times]) for u in units]
    else:
        raise ConfigError(f"cannot transform with metric {model.metric.kind!r}")
    return curves, groups


def cmd_transform(args) -> int:
    filecfg = _load_config_file(getattr(args, "config", None))
    out_dir = _prepare_out_dir(_merge(args, filecfg, "out", "."))
    model_path = _merge(args, filecfg, "model")
    if not model_path:
        raise ConfigError("a --model file is required")
    with open(model_path, encoding="utf-8") as fh:
        model, train = load_model_json(fh)
    curves, groups = _curves_on_model_grid(args, filecfg, model, train)
    scores = transform(model, curves, train)
    _write_scores_csv(
        os.path.join(out_dir, "scores.csv"),
        [c.id for c in curves],
        groups,
        scores,
    )
    return 0


def cmd_dm(args) -> int:
    filecfg = _load_config_file(getattr(args, "config", None))
    out_dir = _prepare_out_dir(_merge(args, filecfg, "out", "."))
    n_components = _merge(args, filecfg, "components")
    psd_tol = _positive("--psd-tol", _merge(args, filecfg, "psd_tol", 1e-8))
    ds, _ = _load_dataset(args, filecfg)
    cov = metric_covariance(ds)
    eig = covariance_eigenfunctions(
        cov, None if n_components is None else int(n_components)
    )
    d2 = pairwise_sq_dist_matrix(ds)
    kernel = gower_center(d2)
    residual = trace_identity_residual(cov, kernel)
    model = fit_kpca(ds, psd_tol=psd_tol, d2=d2)
    report = information_loss_report(model, eig)

    times = [fmt(t) for t in cov.time_grid.points]
    write_csv_atomic(
        os.path.join(out_dir, "cdm.csv"),
        ["time", *times],
        [[times[s], *(fmt(v) for v in cov.matrix[s])] for s in range(len(times))],
    )
    k = eig.functions.shape[1]
    write_csv_atomic(
        os.path.join(out_dir, "dm_eigenfunctions.csv"),
        ["time", *(f"ef{j + 1}" for j in range(k))],
        [
            [times[s], *(fmt(v) for v in eig.functions[s])]
            for s in range(len(times))
        ],
    )
    _write_component_csv(
        os.path.join(out_dir, "dm_eigenvalues.csv"), "eigenvalue", eig.eigenvalues
    )
    rhs = float(np.trace(kernel.matrix)) / len(kernel)
    tol = 1e-10 * max(1.0, rhs)
    atomic_write_text(
        os.path.join(out_dir, "trace_identity.txt"),
        "\n".join(
            [
                f"residual = {fmt(residual)}",
                f"tolerance = {fmt(tol)}",
                f"kpca_total_variance = {fmt(report.kpca_total)}",
                f"cov_total_variance = {fmt(report.covariance_total)}",
                f"status = {'PASS' if residual <= tol else 'FAIL'}",
            ]
        )
        + "\n",
    )
    write_csv_atomic(
        os.path.join(out_dir, "information_loss.csv"),
        ["rank", "pc_eigenvalue", "pc_cumulative", "cov_eigenvalue", "cov_cumulative"],
        [
            [str(rank)] + ["" if v is None else fmt(v) for v in row]
            for rank, *row in report.rows()
        ],
    )
    return 0


def cmd_synth(args) -> int:
    filecfg = _load_config_file(getattr(args, "config", None))
    out_dir = _prepare_out_dir(_merge(args, filecfg, "out", "."))
    t0 = float(_merge(args, filecfg, "time_start", 0.0))
    step = _positive("--time-step", _merge(args, filecfg, "time_step", 1.0))
    count = int(_merge(args, filecfg, "times", 8))
    loc = _merge(args, filecfg, "loc_range", (-1.0, 1.0))
    drift = _merge(args, filecfg, "drift_range", (-0.02, 0.02))
    scale = _merge(args, filecfg, "scale_range", (0.8, 1.25))
    try:
        cfg = SynthesisConfig(
            n_units=int(_merge(args, filecfg, "units", 12)),
            time_points=tuple(t0 + step * i for i in range(count)),
            age_min=float(_merge(args, filecfg, "age_min", -6.0)),
            age_max=float(_merge(args, filecfg, "age_max", 6.0)),
            age_count=int(_merge(args, filecfg, "age_count", 61)),
            loc_range=tuple(loc) if not isinstance(loc, str) else _parse_range(loc),
            drift_range=tuple(drift) if not isinstance(drift, str) else _parse_range(drift),
            scale_range=tuple(scale) if not isinstance(scale, str) else _parse_range(scale),
            seed=int(_merge(args, filecfg, "seed", 0)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    ds = synth_gaussian_cdf_process(cfg)
    import io as _io

    buf = _io.StringIO()
    write_lifetable_csv(ds, buf)
    atomic_write_text(os.path.join(out_dir, "dataset.csv"), buf.getvalue())
    return 0


def _check_properties(args, filecfg) -> list[tuple[str, str, str]]:
    psd_tol = _positive("--psd-tol", _merge(args, filecfg, "psd_tol", 1e-8))
    distances_path = _merge(args, filecfg, "distances")
    results = []

    if distances_path:
        d2 = read_sq_dist_csv(open(distances_path, newline="", encoding="utf-8"), validate=False)
        ds = None
    else:
        ds, _ = _load_dataset(args, filecfg)
        d2 = pairwise_sq_dist_matrix(ds)

    m = d2.matrix
    asym = float(np.abs(m - m.T).max())
    diag = float(np.abs(np.diagonal(m)).max())
    neg = float(m.min())
    ok = asym <= 1e-12 and diag == 0.0 and neg >= 0.0
    results.append(
        (
            "d2_symmetry",
            "PASS" if ok else "FAIL",
            f"max_asymmetry={asym:.3e} max_diag={diag:.3e} min_entry={neg:.3e}",
        )
    )
    if not ok:
        # Downstream properties assume a valid distance matrix.
        return results

    kernel = gower_center(m)
    k_direct = centered_kernel_by_double_sum(m)
    scale = max(np.abs(kernel.matrix).max(), 1e-300)
    cent_err = float(np.abs(kernel.matrix - k_direct).max()) / scale
    results.append(
        (
            "centering_equivalence",
            "PASS" if cent_err <= 1e-12 else "FAIL",
            f"relative_entrywise_error={cent_err:.3e}",
        )
    )

    try:
        spectrum = eig_sym(kernel, psd_tol=psd_tol)
        results.append(
            (
                "psd_spectrum",
                "PASS",
                f"lambda_max={spectrum.eigenvalues[0]:.6e} clamped={spectrum.clamped_count}",
            )
        )
    except NotNegativeTypeError as exc:
        results.append(
            (
                "psd_spectrum",
                "FAIL",
                f"min_eigenvalue={exc.min_eigenvalue:.6e} lambda_max={exc.max_eigenvalue:.6e}",
            )
        )
        return results

    if ds is None:
        return results

    model = fit_kpca(ds, psd_tol=psd_tol, d2=d2)
    if isinstance(ds.metric, CdfL2Metric):
        embedded = embed_cdf_dataset(ds)
    elif isinstance(ds.metric, EuclideanMetric):
        embedded = embed_euclidean_dataset(ds)
    else:
        embedded = None
    if embedded is None:
        results.append(("embedding_oracle", "SKIP", "no explicit embedding for this metric"))
    else:
        centered = embedded - embedded.mean(axis=0)
        svals = np.linalg.svd(centered, compute_uv=False)
        lam_direct = svals**2
        lam1 = model.spectrum[0] if model.spectrum.size else 0.0
        k = model.n_components
        lam_err = (
            float(np.abs(model.eigenvalues - lam_direct[:k]).max()) / max(lam1, 1e-300)
            if k
            else 0.0
        )
        ok = lam_err <= 1e-8
        results.append(
            ("embedding_oracle", "PASS" if ok else "FAIL", f"eigenvalue_error={lam_err:.3e}")
        )

    cov = metric_covariance(ds)
    residual = trace_identity_residual(cov, kernel)
    rhs = float(np.trace(kernel.matrix)) / len(kernel)
    tol = 1e-10 * max(1.0, rhs)
    results.append(
        (
            "trace_identity",
            "PASS" if residual <= tol else "FAIL",
            f"residual={residual:.3e} tolerance={tol:.3e}",
        )
    )

    if isinstance(ds.metric, EuclideanMetric):
        classical = classical_cross_time_covariance(ds)
        cov_err = float(np.abs(cov.matrix - classical).max())
        results.append(
            (
                "euclidean_covariance",
                "PASS" if cov_err <= 1e-10 else "FAIL",
                f"max_entry_error={cov_err:.3e}",
            )
        )
    else:
        results.append(("euclidean_covariance", "SKIP", "cdf metric input"))

    if model.n_components:
        re_scores = transform(model, list(ds.observations), ds)
        scale = float(np.abs(model.scores).max())
        tr_err = float(np.abs(re_scores - model.scores).max()) / max(scale, 1e-300)
        ok = tr_err <= 1e-8
        results.append(
            (
                "transform_consistency",
                "PASS" if ok else "FAIL",
                f"relative_error={tr_err:.3e}",
            )
        )
    else:
        results.append(("transform_consistency", "SKIP", "zero components"))
    return results


def cmd_check(args) -> int:
    filecfg = _load_config_file(getattr(args, "config", None))
    results = _check_properties(args, filecfg)
    failed = False
    for name, status, detail in results:
        print(f"CHECK {name} {status} {detail}")
        failed = failed or status == "FAIL"
    return 1 if failed else 0


def _add_common_io(p: argparse.ArgumentParser, with_input=True):
    if with_input:
        p.add_argument("--input", help="input CSV file")
        p.add_argument("--schema", help="column mapping, e.g. unit=country,time=year")
        p.add_argument(
            "--metric", choices=["cdf-l2", "euclidean"], help="point metric (default cdf-l2)"
        )
        p.add_argument(
            "--time-policy",
            dest="time_policy",
            choices=["intersect", "require-complete"],
            help="how to build the common time grid",
        )
        p.add_argument(
            "--normalize-time",
            dest="normalize_time",
            action="store_const",
            const=True,
            help="rescale the time grid to [0, 1]",
        )
        p.add_argument("--cdf-first-max", dest="cdf_first_max", type=float)
        p.add_argument("--cdf-last-min", dest="cdf_last_min", type=float)
    p.add_argument("--out", help="output directory (created if missing)")
    p.add_argument("--config", help="optional JSON config file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metricfda",
        description=(
            "Distance-based kernel PCA for metric-valued functional data, "
            "with a time-domain covariance comparison"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit kernel PCA and write scores/model")
    _add_common_io(p_fit)
    p_fit.add_argument("--components", type=int, help="number of components to keep")
    p_fit.add_argument("--psd-tol", dest="psd_tol", type=float)
    p_fit.add_argument("--rank-tol", dest="rank_tol", type=float)
    p_fit.set_defaults(func=cmd_fit)

    p_tr = sub.add_parser("transform", help="project new observations with a fitted model")
    p_tr.add_argument("--model", help="model.json written by fit")
    p_tr.add_argument("--input", help="new-data CSV file")
    p_tr.add_argument("--schema", help="column mapping for the new-data file")
    p_tr.add_argument("--out", help="output directory")
    p_tr.add_argument("--config", help="optional JSON config file")
    p_tr.set_defaults(func=cmd_transform)

    p_dm = sub.add_parser(
        "dm", help="time-domain metric covariance analysis and trace-identity check"
    )
    _add_common_io(p_dm)
    p_dm.add_argument("--components", type=int)
    p_dm.add_argument("--psd-tol", dest="psd_tol", type=float)
    p_dm.set_defaults(func=cmd_dm)

    p_sy = sub.add_parser("synth", help="generate a synthetic CDF-valued dataset CSV")
    p_sy.add_argument("--units", type=int)
    p_sy.add_argument("--times", type=int, help="number of time points")
    p_sy.add_argument("--time-start", dest="time_start", type=float)
    p_sy.add_argument("--time-step", dest="time_step", type=float)
    p_sy.add_argument("--age-min", dest="age_min", type=float)
    p_sy.add_argument("--age-max", dest="age_max", type=float)
    p_sy.add_argument("--age-count", dest="age_count", type=int)
    p_sy.add_argument("--loc-range", dest="loc_range", help="lo,hi")
    p_sy.add_argument("--drift-range", dest="drift_range", help="lo,hi")
    p_sy.add_argument("--scale-range", dest="scale_range", help="lo,hi")
    p_sy.add_argument("--seed", type=int)
    p_sy.add_argument("--out", help="output directory")
    p_sy.add_argument("--config", help="optional JSON config file")
    p_sy.set_defaults(func=cmd_synth)

    p_ck = sub.add_parser("check", help="run the invariant suite on an input")
    _add_common_io(p_ck)
    p_ck.add_argument(
        "--distances", help="precomputed squared-distance CSV instead of raw data"
    )
    p_ck.add_argument("--psd-tol", dest="psd_tol", type=float)
    p_ck.set_defaults(func=cmd_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NotNegativeTypeError as exc:
        metric = getattr(args, "metric", None) or "cdf-l2"
        print(
            f"error: metric {metric!r} is not of negative type on this input: {exc}",
            file=sys.stderr,
        )
        return 4
    except MetricFdaError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
