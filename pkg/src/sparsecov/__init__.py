"""Sparse covariance estimation by thresholding, with the divergence and
packing machinery needed to check oracle inequalities and minimax rate
scaling by simulation."""

from .estimators import (
    ThresholdConfig,
    ThresholdValidityWarning,
    calibrate_gamma,
    hard_threshold,
    max_entrywise_deviation,
    sample_covariance,
    soft_threshold,
    threshold_value,
)
from .gaussian import (
    GaussianModel,
    kl_curvature,
    kl_exact,
    kl_exact_pair,
    kl_from_perturbation,
    kl_lower_bound,
    kl_upper_bound,
    mc_kl_estimate,
    sample,
)
from .harness import (
    ExperimentRecord,
    ExperimentSpec,
    RateFit,
    fit_rate,
    parse_spec,
    records_to_csv,
    run_sweep,
)
from .matrix import (
    DimensionMismatchError,
    InvalidParameterError,
    MatrixFormatError,
    NotPositiveDefiniteError,
    SparsityClass,
    SymMatrix,
    cholesky,
    class_membership,
    eigendecomposition,
    eigenvalues,
    frobenius_norm,
    frobenius_sq,
    is_diagonally_dominant,
    is_positive_definite,
    offdiag_l0,
    offdiag_lq_mass,
    offdiag_lq_norm,
    op_l1_norm,
    read_matrix_text,
    spectral_norm,
    write_matrix_text,
)
from .models import GenerationError, ModelGenerator, generate_model
from .oracle import (
    OracleBoundL0,
    PENALTY_MULTIPLIER,
    RateConditions,
    RateParams,
    cprime_constant,
    minimax_rate_frobenius,
    minimax_rate_l1,
    oracle_l0,
    oracle_lq,
    penalty_from_threshold,
    rate_feasibility,
)
from .packing import (
    CertificateReport,
    InfeasiblePackingError,
    PackingConfig,
    PackingFamily,
    amplitude,
    build_packing,
    certify,
    lower_bound_report,
    sample_binary_member,
)
from .rng import derive_seed, generator

__version__ = "0.1.0"
