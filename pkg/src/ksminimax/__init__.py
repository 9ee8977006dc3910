"""Minimax lower bounds for Kronecker-structured dictionary learning, as a
numerical laboratory: generative model, packing constructions, bound
formulas and Monte Carlo hypothesis tests."""

from .bounds import (
    BoundInputs,
    BoundResult,
    RipReport,
    conditional_covariance,
    cor1_bound,
    crossover_snr,
    fano_lower,
    kl_gaussian,
    mi_upper_general,
    mi_upper_sparse_gaussian,
    nats_to_bits,
    rip_constant,
    table1_scaling,
    thm1_bound,
    thm2_bound,
)
from .generative import (
    CoefficientModel,
    Dataset,
    KSDictionary,
    build_ks_dictionary,
    random_ks_dictionary,
    sample_coefficients,
    sample_support,
    snr,
    synthesize,
)
from .linalg import (
    fro_distance,
    hadamard,
    khatri_rao,
    kron,
    merge_indices,
    normalize_columns,
    spectral_norm,
    split_indices,
    sum_entries,
    unvec,
    vec,
)
from .packing import (
    DictionaryEnsemble,
    PackingParams,
    SignCodebook,
    build_ensemble,
    build_sign_codebook,
    max_codebook_size,
    verify_ensemble,
    verify_sign_codebook,
)
from .simulate import (
    ErrorCurve,
    ExperimentSpec,
    fano_consistency_check,
    gaussian_ml_detect,
    min_distance_detect,
    run_error_experiment,
    run_mse_experiment,
)

__version__ = "0.1.0"
