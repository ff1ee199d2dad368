"""Reduced-order identification of linear parameter varying systems.

The package pairs a parametric advection-diffusion test plant with
DMD-style identification: a DMDc baseline for frozen-parameter systems,
a global rank-limited regression on Kronecker scheduling features, and a
local per-parameter variant that can run entirely in the POD latent
space. An evaluation harness and CLI reproduce rank sweeps, one-step
prediction tables and free-run comparisons as CSV reports with rendered
figures.
"""

from .numerics import (
    RankClampWarning,
    TruncatedSvd,
    TruncationConfig,
    kron_vec,
    procrustes_solve,
    regularize_singular_values,
    truncated_svd,
)
from .features import (
    FeatureMatrices,
    SchedulingBasis,
    assemble_features,
    basis_exact_1p,
    basis_over_1p,
    basis_total_degree,
    basis_under_1p,
    eval_basis,
    eval_basis_trajectory,
)
from .plant import (
    DEFAULT_POLY_GAIN,
    DiffusionPlant,
    DivergedSimulation,
    GainFunction,
    Trajectory,
    build_plant,
    discrete_pair,
    eval_gain,
    polynomial_gain,
    probe_index,
    rational_gain,
    rhs,
    simulate,
)
from .excitation import (
    AprbsConfig,
    LocalDatasetBundle,
    SnapshotDataset,
    SplitMix64,
    aprbs,
    build_global_dataset,
    build_local_bundle,
    dataset_from_trajectory,
    derive_seeds,
)
from .dmdc import DynamicMode, ReducedLti, fit_dmdc, predict, recover_modes
from .global_lpv import (
    FullLpvModel,
    GlobalLpvFitter,
    ReducedLpvModel,
    fit_full_least_squares,
    fit_global,
    predict_lpv,
)
from .local_lpv import (
    LtiCollection,
    fit_local_full_order,
    fit_local_fullspace,
    fit_local_latent,
    identify_lti_collection,
    pod_from_bundle,
)
from .evaluation import (
    EvalReport,
    SweepPoint,
    SweepResult,
    free_run,
    one_step_mse,
    run_rank_sweep,
    write_probe_csv,
    write_report_csv,
    write_sweep_csv,
)

__version__ = "0.1.0"
