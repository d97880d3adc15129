//! Held-out evaluation, sample dumps and augmentation experiments.

mod eval;
mod experiment;
mod samples;

pub use eval::{auc, held_out_eval, pr_csv, pr_curve, predict, PrPoint, Prediction};
pub use experiment::{
    classifier_auc, compare_augmentation, retain_subset, run_seed, ExperimentReport, SeedResult, REFERENCE_IMPROVEMENT,
};
pub use samples::{dump_samples, write_samples};
