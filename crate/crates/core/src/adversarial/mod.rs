//! Rollout rewards, REINFORCE updates, the joint training epoch and the
//! four-phase training pipeline.

mod epoch;
mod pipeline;
mod policy;
mod rollout;

pub use epoch::{adversarial_epoch, sample_fakes, AdversarialConfig, EpochMetrics};
pub use pipeline::{
    metrics_csv, run_pipeline, splice_metrics, Dataset, MetricsRow, Pipeline, PipelineOutput, CONFIG_FILE,
    DIS_FILE, DIS_PRETRAINED_FILE, GENERATED_FILE, GEN_FILE, GEN_PRETRAINED_FILE, METRICS_FILE, PHASES,
    SAMPLES_FILE, SCHEMA_FILE, VOCAB_FILE,
};
pub use policy::{policy_gradient_loss, policy_gradient_step, score_function_grad, PolicyOptions};
pub use rollout::{reward, rollout_rewards, RewardModel, RolloutConfig};

#[cfg(test)]
pub(crate) use pipeline::tests::tiny_config;
