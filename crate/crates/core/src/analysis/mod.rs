//! Structural quantities, parameter settings, metrics and numerical checks
//! of the bounds used in the correctness argument.

mod checks;
mod hstar;
mod kappa;
mod metrics;
mod theorem;
mod zeta;

pub use checks::{
    check_block_bound, check_sin_theta, matrix_cs_check, BlockBoundReport, BoundReport,
    SinThetaReport,
};
pub use hstar::{
    h_constructive_partition, h_for_partition, h_star, h_window, HMode, H_BRUTE_MAX_BETA,
    H_BRUTE_MAX_UNION,
};
pub use kappa::{kappa_s, ric_delta_s, KappaMode, KappaResult, ENUMERATION_BUDGET};
pub use metrics::{
    compute_metrics, frame_metrics, subspace_error, FrameMetrics, MetricsLog, WindowMean,
};
pub use theorem::{
    proj_pca_steps, theorem_params, xi_for, zeta_bound, TheoremInputs, TheoremParams,
};
pub use zeta::{zeta_plus_sequence, ZetaSequence, H_PLUS, H_PLUS_DISJOINT, KAPPA_S_PLUS, PHI_PLUS};
