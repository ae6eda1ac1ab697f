//! Evaluation harness: leave-one-out cross-testing, modality ablation,
//! classification metrics with bootstrap confidence intervals, and the
//! synthetic cohort generator.

mod ablation;
mod metrics;
mod report;
mod synth;

pub mod loo;

pub use ablation::{
    ablation, ablation_csv, parse_subset, subset_label, AblationOutcome, AblationSpec,
};
pub use loo::{loo_evaluate, training_manifest_hash, EvalConfig, FoldOutput, LooOutcome};
pub use metrics::{
    bootstrap_ci, confusion, metrics_from_confusion, roc_auc, youden_threshold, ConfusionCounts,
    ThresholdMetrics,
};
pub use report::{
    MetricReport, MetricValue, PooledMetrics, SubjectReport, REPORT_SCHEMA_VERSION,
};
pub use synth::{
    feature_oracle_auc, generate_synthetic_cohort, modality_feature, windows_for_cohort,
    EffectProfile, SynthConfig, ACC_RATE_HZ, EEG_RATE_HZ, EMG_RATE_HZ,
};



