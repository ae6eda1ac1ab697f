//! Modality ablation: leave-one-out evaluation over modality subsets, with
//! the head rebuilt and the whole model re-trained per subset.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::nn::ModelSpec;
use crate::signal::{ModalityKind, Recording};

use super::loo::{loo_evaluate, EvalConfig, LooOutcome};

/// Which modality subsets to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationSpec {
    pub subsets: Vec<Vec<ModalityKind>>,
}

impl Default for AblationSpec {
    fn default() -> Self {
        AblationSpec {
            subsets: vec![
                vec![ModalityKind::Eeg],
                vec![ModalityKind::Emg],
                vec![ModalityKind::Acc],
                vec![ModalityKind::Eeg, ModalityKind::Emg, ModalityKind::Acc],
            ],
        }
    }
}

impl AblationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.subsets.is_empty() {
            return Err(Error::InvalidConfig("ablation needs at least one subset".into()));
        }
        for s in &self.subsets {
            if s.is_empty() {
                return Err(Error::InvalidConfig("empty modality subset".into()));
            }
        }
        Ok(())
    }
}

/// `EEG+EMG+ACC`-style label for a subset.
pub fn subset_label(subset: &[ModalityKind]) -> String {
    subset
        .iter()
        .map(|m| m.tag())
        .collect::<Vec<_>>()
        .join("+")
}

/// Parse a subset label such as `EEG+ACC`.
pub fn parse_subset(label: &str) -> Result<Vec<ModalityKind>> {
    label
        .split('+')
        .map(|tag| {
            ModalityKind::from_tag(tag.trim())
                .ok_or_else(|| Error::InvalidConfig(format!("unknown modality tag {tag:?}")))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct AblationOutcome {
    pub subset: Vec<ModalityKind>,
    pub outcome: LooOutcome,
}

/// Run LOO per modality subset. Each subset gets a freshly built spec
/// (branches filtered, head dimensions rebuilt) and full re-training, so no
/// weights carry over between subsets.
pub fn ablation(
    cohort: &[Recording],
    base_spec: &ModelSpec,
    ablation_spec: &AblationSpec,
    cfg: &EvalConfig,
) -> Result<Vec<AblationOutcome>> {
    ablation_spec.validate()?;
    let mut out = Vec::with_capacity(ablation_spec.subsets.len());
    for subset in &ablation_spec.subsets {
        let spec = base_spec.restrict_to(subset)?;
        let outcome = loo_evaluate(cohort, &spec, cfg)?;
        out.push(AblationOutcome {
            subset: subset.clone(),
            outcome,
        });
    }
    Ok(out)
}

/// Flat CSV over ablation outcomes: one row per (subset, model kind).
pub fn ablation_csv(outcomes: &[AblationOutcome]) -> String {
    let mut out =
        String::from("subset,model,auc,f1,sensitivity,specificity,accuracy\n");
    for o in outcomes {
        let mut reports = vec![&o.outcome.float_report];
        if let Some(q) = &o.outcome.quantized_report {
            reports.push(q);
        }
        for r in reports {
            let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                subset_label(&o.subset),
                r.model_kind,
                fmt(r.pooled.auc.value),
                fmt(r.pooled.f1.value),
                fmt(r.pooled.sensitivity.value),
                fmt(r.pooled.specificity.value),
                fmt(r.pooled.accuracy.value),
            );
        }
    }
    out
}
