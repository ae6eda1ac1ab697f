//! Metric report structure and its serialized forms (versioned TOML plus a
//! flat CSV for plotting).

use std::fmt::Write as _;

use crate::error::{Error, Result};

use super::metrics::ConfusionCounts;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricValue {
    pub value: Option<f64>,
    pub ci95_lo: Option<f64>,
    pub ci95_hi: Option<f64>,
}

impl MetricValue {
    pub fn point(value: Option<f64>) -> Self {
        MetricValue {
            value,
            ci95_lo: None,
            ci95_hi: None,
        }
    }

    pub fn with_ci(value: Option<f64>, ci: Option<(f64, f64)>) -> Self {
        MetricValue {
            value,
            ci95_lo: ci.map(|c| c.0),
            ci95_hi: ci.map(|c| c.1),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PooledMetrics {
    pub sensitivity: MetricValue,
    pub specificity: MetricValue,
    pub precision: MetricValue,
    pub f1: MetricValue,
    pub accuracy: MetricValue,
    pub auc: MetricValue,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SubjectReport {
    pub subject_id: String,
    /// Operating threshold frozen on that fold's training data.
    pub threshold: f64,
    pub windows: usize,
    pub positives: usize,
    /// Set when the subject's test windows contain only one class; the
    /// rank metrics below are then undefined.
    pub single_class: bool,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub auc: Option<f64>,
    /// FNV-1a hash of the fold's training-window manifest, for leakage
    /// auditing.
    pub train_manifest_hash: String,
}

/// Evaluation summary: pooled metrics over all folds plus the per-subject
/// breakdown.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricReport {
    pub schema_version: u32,
    /// Which inference path produced the scores: `float` or `int8`.
    pub model_kind: String,
    pub pooled: PooledMetrics,
    pub pooled_confusion: ConfusionCounts,
    /// Mean of the per-fold metrics, reported next to the pooled values.
    pub fold_mean: PooledMetrics,
    pub per_subject: Vec<SubjectReport>,
}

impl MetricReport {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Evaluation(format!("report serialization failed: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<MetricReport> {
        toml::from_str(text).map_err(|e| Error::Evaluation(format!("report parse failed: {e}")))
    }

    /// Flat CSV: one row per (scope, metric).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,scope,subject,metric,value,ci95_lo,ci95_hi\n");
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let pooled_row = |name: &str, m: &MetricValue, out: &mut String| {
            let _ = writeln!(
                out,
                "{},pooled,,{},{},{},{}",
                self.model_kind,
                name,
                fmt_opt(m.value),
                fmt_opt(m.ci95_lo),
                fmt_opt(m.ci95_hi)
            );
        };
        pooled_row("sensitivity", &self.pooled.sensitivity, &mut out);
        pooled_row("specificity", &self.pooled.specificity, &mut out);
        pooled_row("precision", &self.pooled.precision, &mut out);
        pooled_row("f1", &self.pooled.f1, &mut out);
        pooled_row("accuracy", &self.pooled.accuracy, &mut out);
        pooled_row("auc", &self.pooled.auc, &mut out);
        for s in &self.per_subject {
            for (name, v) in [
                ("sensitivity", s.sensitivity),
                ("specificity", s.specificity),
                ("f1", s.f1),
                ("accuracy", s.accuracy),
                ("auc", s.auc),
            ] {
                let _ = writeln!(
                    out,
                    "{},subject,{},{},{},,",
                    self.model_kind,
                    s.subject_id,
                    name,
                    fmt_opt(v)
                );
            }
        }
        out
    }
}
