"""Sparse canonical correlation analysis: two-stage convex estimation, an
exhaustive combinatorial oracle, and planted-clique reduction samplers."""

from .errors import (
    BudgetExceededError,
    CvFailureError,
    DegenerateInputError,
    DegenerateRankError,
    DivergenceError,
    NotPsdError,
    NumericError,
    PreconditionError,
    SamplerFailureError,
    SolverFailureError,
    SparseCcaError,
)
from .linalg import (
    SvdResult,
    load_matrix_csv,
    psd_pinv_sqrt,
    psd_sqrt,
    save_matrix_csv,
    subspace_dist_sq,
    svd,
)
from .model import (
    CanonicalPairModel,
    SampleSet,
    SparsityProfile,
    add_canonical_pair,
    build_covariance,
    make_canonical_pair,
    prediction_loss,
    sample,
    sample_covariances,
)
from .oracle import (
    OracleBudget,
    classical_cca,
    exhaustive_stage1,
    exhaustive_stage2,
    oracle_estimate,
)
from .reduction import (
    CliqueInstance,
    GaussianizationDensity,
    ReductionParams,
    cca_to_pca_estimator,
    density_f,
    dyadic_constants,
    dyadic_sampler,
    dyadic_table,
    gaussianization_density,
    load_edge_list,
    pca_test,
    pca_to_cca,
    quantize,
    reduce_to_pca,
    sample_density,
    sample_graph,
    save_edge_list,
    tv_numeric,
)
from .stage1 import AdmmConfig, AdmmState, admm_solve, extract_pair, f_update, svcst
from .stage2 import (
    CvConfig,
    EstimatorOutput,
    GroupLassoConfig,
    colar_estimate,
    cross_validate,
    group_lasso_solve,
    normalize,
    penalty_level,
)
from .bench import (
    ExperimentConfig,
    ResultRow,
    run_experiment,
    run_misspec,
    run_reduction_checks,
)

__version__ = "0.1.0"
