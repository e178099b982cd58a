"""Simultaneous false discovery proportion bounds for knockoff statistics.

The package ingests a signed statistic vector, calibrates joint k-FWER
allowance plans, and answers FDP upper-bound queries for arbitrary candidate
sets — via direct interpolation, a prefix sweep, or closed testing with a
polynomial shortcut — plus a simulation harness, CLI, and HTTP service.
"""

from .bounds import (
    JS,
    KCT,
    KJI,
    KR,
    BoundReport,
    general_interpolation,
    interpolation_bound,
    js_bound,
    kji_bound,
    kr_bound,
)
from .calibration import (
    Certificate,
    SignPathPool,
    VFamily,
    VKPlan,
    build_pool,
    c_alpha,
    estimate_joint_prob,
    js_plan,
    js_v,
    k_raw,
    k_raw_scan,
    nb_upper_tail,
    pool_from_signs,
    two_step_k,
    v_family,
)
from .closed_testing import (
    CUSTOM,
    INDICATOR,
    RANK,
    CTOutcome,
    LocalTestSpec,
    brute_force_ct,
    calibrate_critical_values,
    kct_bound,
    kr_spec,
    local_stat,
    locally_rejected,
    pi_permutation,
    rank_spec,
    shortcut_bound,
    spec_from_plan,
    uniformly_improved_spec,
)
from .errors import (
    DroppedZeroId,
    EmptyAfterPreprocessing,
    InfeasibleK,
    InvalidStepSize,
    KnockfdpError,
    OracleSizeExceeded,
    PlanMismatch,
    UnknownOriginalId,
)
from .sim_harness import (
    DirectWConfig,
    ExperimentResult,
    binom_ci,
    comparison_experiment,
    coverage_experiment,
    direct_w_generator,
    generate_direct_w,
    make_methods,
    stratified_queries,
    true_fdp,
)
from .stats_core import (
    PreparedStats,
    RawStats,
    as_index_set,
    fdp_hat,
    knockoff_filter_select,
    nested_set,
    nested_sets,
    originals_of,
    prepare,
    read_w_csv,
    read_w_json,
    reference_set,
    resolve_ids,
    threshold,
)

__version__ = "0.1.0"
