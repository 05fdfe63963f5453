"""Exact sampling from local comparison oracles by coupling from the past."""

from .cftp import (
    CftpOutcome,
    GrandCouplingMap,
    SampleBudget,
    acceptance_constant,
    cftp_extend_one_step,
    coalescence_time_samples,
    run_exact_sampler_with_learning,
    run_naive_cftp,
    run_parameterized_cftp,
)
from .hypergraph import KSetEngineConfig, run_kset_cftp, run_kset_sampler_with_learning
from .learning import (
    ComparisonCounts,
    LearnConfig,
    LearnResult,
    learn,
    learn_distribution,
    learn_from_data,
    negative_log_likelihood,
    nll_gradient,
    project_to_omega_phi,
    relative_error,
    shift_to_distribution,
)
from .model import (
    ComparisonDistribution,
    InstanceError,
    LssOracle,
    LssSample,
    OracleExhausted,
    TargetDistribution,
    make_bimodal_path_instance,
    make_clique_instance,
    make_path_instance,
    make_random_instance,
    validate_instance,
)
from .spectral import (
    absolute_spectral_gap,
    build_laplacian,
    build_rescaled_matrix,
    build_transition_matrix,
    fiedler_eigenvalue,
    spectral_report,
    stationary_distribution,
)
from .verify import chi_square_gof, coalescence_benchmark, three_state_closed_form_sampler

__version__ = "0.1.0"
