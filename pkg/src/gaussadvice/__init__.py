"""Learning multivariate Gaussians with imperfect advice.

Tolerant testers grade an advice vector or covariance in l1 via block
partitioning; l1-constrained estimators then exploit good advice to beat
the empirical estimators' sample complexity, with full per-phase sample
accounting and a reproducible experiment harness.
"""

__version__ = "0.1.0"

from .approxl1 import L1Outcome, L1Variant, approx_l1_mean, level_schedule, vectorized_approx_l1
from .estimators import (
    Branch,
    EstimatorReport,
    Preconditioner,
    constrained_mean_lasso,
    covariance_program,
    early_termination_check,
    precondition,
    test_and_optimize_covariance,
    test_and_optimize_mean,
)
from .gauss import (
    DistanceReport,
    GaussianModel,
    SampleStream,
    distance_report,
    empirical_cov_paired,
    empirical_mean,
    kl_gaussians,
    pair_to_zero_mean,
    substream,
    tv_upper_via_pinsker,
)
from .linalg import (
    ConvergenceError,
    EigenPair,
    Norms,
    dykstra_project,
    eigh_sym,
    norms,
    project_l1_ball,
    project_psd_floor,
    symmetrize,
)
from .partition import (
    PartitionScheme,
    SchemeConstructionError,
    VerifyResult,
    contiguous_blocks,
    dump_scheme,
    load_scheme,
    project_batch,
    random_pair_scheme,
    verify_scheme,
)
from .testers import (
    TesterConfig,
    TestResult,
    Verdict,
    chisq_tail_bounds,
    cov_sample_count,
    cov_stat,
    mean_sample_count,
    mean_stat,
    tolerant_cov_test,
    tolerant_mean_test,
)
