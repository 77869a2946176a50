"""Distance-based kernel PCA for metric-space-valued functional data.

Observations are functions from a time grid into a metric space of
negative type (CDFs under the L2 distance, Euclidean vectors, or
externally tabulated distances).  Principal components are computed
entirely from pairwise distances via the Gower-centered kernel matrix;
a real-valued covariance kernel on the time grid is provided for
comparison, together with the trace identity connecting the two.
"""

from .covariance import (
    CovarianceEigenfunctions,
    InformationLossReport,
    MetricCovarianceGrid,
    covariance_eigenfunctions,
    information_loss_report,
    metric_covariance,
    trace_identity_residual,
)
from .dataset import (
    FunctionalDataset,
    MetricFunction,
    SquaredDistanceMatrix,
    cross_time_sq_dist,
    integrated_sq_dist,
    pairwise_sq_dist_matrix,
    read_sq_dist_csv,
    write_sq_dist_csv,
)
from .errors import MetricFdaError
from .grids import AgeGrid, TimeGrid
from .ingest import (
    CdfPanel,
    LifetableRecord,
    SynthesisConfig,
    embed_cdf_dataset,
    embed_euclidean_dataset,
    panel_to_dataset,
    parse_lifetable_csv,
    parse_vector_csv,
    records_to_cdf_panel,
    synth_gaussian_cdf_process,
    vector_records_to_dataset,
)
from .kernel import (
    CenteredKernelMatrix,
    EigenSpectrum,
    KpcaModel,
    center_new_point,
    centered_kernel_by_double_sum,
    eig_sym,
    explained_variance_ratio,
    fit_kpca,
    gower_center,
    jacobi_eigh,
    load_model_json,
    save_model_json,
    transform,
)
from .metrics import (
    CdfBounds,
    CdfL2Metric,
    DiscretizedCdf,
    EuclideanMetric,
    PointMetric,
    PrecomputedMetric,
    sq_dist,
    validate_cdf,
)

__version__ = "0.1.0"

__all__ = [
    "AgeGrid",
    "TimeGrid",
    "CdfBounds",
    "DiscretizedCdf",
    "validate_cdf",
    "PointMetric",
    "CdfL2Metric",
    "EuclideanMetric",
    "PrecomputedMetric",
    "sq_dist",
    "MetricFunction",
    "FunctionalDataset",
    "SquaredDistanceMatrix",
    "integrated_sq_dist",
    "cross_time_sq_dist",
    "pairwise_sq_dist_matrix",
    "read_sq_dist_csv",
    "write_sq_dist_csv",
    "CenteredKernelMatrix",
    "EigenSpectrum",
    "KpcaModel",
    "gower_center",
    "centered_kernel_by_double_sum",
    "center_new_point",
    "eig_sym",
    "jacobi_eigh",
    "fit_kpca",
    "transform",
    "explained_variance_ratio",
    "save_model_json",
    "load_model_json",
    "MetricCovarianceGrid",
    "CovarianceEigenfunctions",
    "InformationLossReport",
    "metric_covariance",
    "covariance_eigenfunctions",
    "trace_identity_residual",
    "information_loss_report",
    "LifetableRecord",
    "CdfPanel",
    "SynthesisConfig",
    "parse_lifetable_csv",
    "parse_vector_csv",
    "records_to_cdf_panel",
    "panel_to_dataset",
    "vector_records_to_dataset",
    "synth_gaussian_cdf_process",
    "embed_cdf_dataset",
    "embed_euclidean_dataset",
    "MetricFdaError",
]
