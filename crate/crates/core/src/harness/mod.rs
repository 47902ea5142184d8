//! Closed-loop ablation trials, failure detectors, reports, the
//! escape-probability Monte Carlo and compute-coverage timing.

mod ablation;
mod coverage;
mod detectors;
mod escape;
mod targets;
mod trial;

pub use ablation::{
    default_variants, is_differential, median, run_ablation, summarize, AblationConfig,
    AblationReport, AblationRow,
};
pub use coverage::{compute_coverage, CoverageReport};
pub use detectors::{detect_collision, detect_singularity, detect_stagnation};
pub use escape::{escape_mc, predicted_escape, EscapeMcConfig, EscapeRow};
pub use targets::{
    generate_targets, replay_targets, TargetGenerator, TargetTrajectory, BOUNDARY_BAND,
    MAX_TARGET_SPEED,
};
pub use trial::{
    certificate_violations, run_trial, run_trial_observed, Method, TrialConfig, TrialMetrics,
    Variant,
};
