"""Numerical laboratory for theta-function projective embeddings of
principally polarized abelian varieties and their Kummer quotients:
moment-map amoebas, pulled-back Fubini-Study metrics, and convergence
diagnostics for the induced metric and Gromov-Hausdorff limits."""

__version__ = "0.1.0"

from .errors import (
    BasePointError,
    ChartFailureError,
    ConfigError,
    DisconnectedError,
    DivisionUnderflowError,
    GridTooCoarseWarning,
    NonPositiveValueError,
    NotPositiveDefiniteError,
    NotSymmetricError,
    RadiusOverflowError,
    SchemeDisagreementWarning,
    ThetaLabError,
)
from .theta import (
    Characteristic,
    DEFAULT_POLICY,
    PeriodMatrix,
    TruncationPolicy,
    theta,
    theta_grad,
    truncation_radius,
    zero_characteristic,
)
from .abelian import (
    AbelianPoint,
    AbelianVariety,
    SectionBasis,
    asymptotic_residual,
    bergman_density,
    flat_distance,
    gaussian_decay_check,
    gram_matrix,
    section_basis,
    section_value,
    torsion_points,
)
from .kummer import (
    BasePoint,
    InvariantBasis,
    KummerPoint,
    KummerVariety,
    base_distance,
    base_rep,
    canonical_rep,
    fibration,
    invariant_basis,
    kummer_gram_matrix,
    quotient_distance,
    submersion_base_metric,
)
from .embedding import (
    AmoebaCloud,
    ProjectivePoint,
    SimplexPoint,
    amoeba_sample,
    cloud_from_csv,
    cloud_to_csv,
    embed,
    hausdorff_distance,
    moment_map,
    simplex_distance,
)
from .metrics import (
    MetricGraph,
    MetricValue,
    RegionDecomposition,
    graph_distance_dk,
    metric_error_field,
    metric_graph,
    metric_target,
    pullback_metric,
    region_decomposition,
    scheme_cross_check,
)
from .convergence import (
    HausdorffApproxReport,
    RateTable,
    distortion_report,
    fiber_collapse,
    fs_normalization_integral,
    map_deviation,
    phi_k,
    rate_fit,
    single_phase_model_pushforward,
    tangent_distortion,
)
from .estimator import ThetaEmbedding
