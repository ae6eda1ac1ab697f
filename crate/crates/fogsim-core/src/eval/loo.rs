//! Leave-one-out cross-testing.
//!
//! One fold per subject: the model trains on every other subject's windows,
//! the operating threshold is frozen on that training data by Youden's J,
//! and the held-out subject is scored. Nothing from the test subject
//! touches training, calibration or pruning. Global metrics pool the test
//! windows across folds; per-fold metrics are reported alongside.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::compress::{compress, quantized_forward, CompressionConfig};
use crate::error::{Error, Result};
use crate::nn::{predict, train, ModelSpec, TrainConfig};
use crate::seed;
use crate::signal::{assign_label, segment_windows, Recording, Window};

use super::metrics::{
    bootstrap_ci, confusion, metrics_from_confusion, roc_auc, youden_threshold, ConfusionCounts,
};
use super::report::{
    MetricReport, MetricValue, PooledMetrics, SubjectReport, REPORT_SCHEMA_VERSION,
};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalConfig {
    pub window_length_s: f64,
    pub stride_s: f64,
    pub label_threshold: f64,
    pub train: TrainConfig,
    pub compression: Option<CompressionConfig>,
    pub bootstrap_samples: usize,
    pub bootstrap_seed: u64,
    /// Fold-level worker cap; folds are independent and merge in subject
    /// order, so results do not depend on scheduling.
    pub jobs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            window_length_s: 3.0,
            stride_s: 1.5,
            label_threshold: 0.25,
            train: TrainConfig::default(),
            compression: None,
            bootstrap_samples: 1000,
            bootstrap_seed: 99,
            jobs: 1,
        }
    }
}

/// Scores and bookkeeping from one fold.
#[derive(Debug, Clone)]
pub struct FoldOutput {
    pub subject_id: String,
    pub threshold: f64,
    pub q_threshold: Option<f64>,
    pub labels: Vec<bool>,
    pub scores: Vec<f64>,
    pub q_scores: Option<Vec<f64>>,
    pub train_manifest_hash: u64,
}

/// Result of a LOO run: the float report, and when compression was
/// configured, the int8 report plus the float/int8 decision agreement at
/// threshold 0.5.
#[derive(Debug, Clone)]
pub struct LooOutcome {
    pub float_report: MetricReport,
    pub quantized_report: Option<MetricReport>,
    pub decision_agreement: Option<f64>,
    pub folds: Vec<FoldOutput>,
}

/// FNV-1a hash over the sorted training-window manifest. Any change to the
/// training set membership (a leaked test window included) changes the hash.
pub fn training_manifest_hash(windows: &[&Window]) -> u64 {
    let mut keys: Vec<String> = windows
        .iter()
        .map(|w| {
            format!(
                "{}|{:.6}|{}",
                w.subject_id,
                w.start_s,
                w.label.map(u8::from).map_or(-1i8, |v| v as i8)
            )
        })
        .collect();
    keys.sort();
    seed::fnv1a64(keys.join(";").as_bytes())
}

/// Window and label one subject's recording.
fn subject_windows(rec: &Recording, cfg: &EvalConfig) -> Result<Vec<Window>> {
    let ws = segment_windows(rec, cfg.window_length_s, cfg.stride_s)?;
    if ws.is_empty() {
        return Err(Error::Evaluation(format!(
            "subject {} yields zero windows",
            rec.subject_id
        )));
    }
    Ok(ws
        .into_iter()
        .map(|w| assign_label(w, &rec.fog_intervals, cfg.label_threshold))
        .collect())
}

fn run_fold(
    cohort_windows: &[Vec<Window>],
    fold: usize,
    spec: &ModelSpec,
    cfg: &EvalConfig,
) -> Result<FoldOutput> {
    let subject_id = cohort_windows[fold][0].subject_id.clone();
    let mut train_set: Vec<Window> = Vec::new();
    for (i, ws) in cohort_windows.iter().enumerate() {
        if i != fold {
            train_set.extend(ws.iter().cloned());
        }
    }
    let test_set = &cohort_windows[fold];

    let train_refs: Vec<&Window> = train_set.iter().collect();
    let train_manifest_hash = training_manifest_hash(&train_refs);

    let fold_train_cfg = TrainConfig {
        seed: seed::derive_labeled(cfg.train.seed, &format!("fold/{subject_id}")),
        ..cfg.train.clone()
    };
    let outcome = train(spec, &train_set, &fold_train_cfg)?;

    let train_scores = predict(spec, &outcome.params, &train_set)?;
    let train_labels: Vec<bool> = train_set.iter().map(|w| w.label == Some(true)).collect();
    let threshold = youden_threshold(&train_scores, &train_labels)?;

    let scores = predict(spec, &outcome.params, test_set)?;
    let labels: Vec<bool> = test_set.iter().map(|w| w.label == Some(true)).collect();

    let (q_scores, q_threshold) = match &cfg.compression {
        Some(comp_cfg) => {
            let (qm, _) = compress(spec, &outcome.params, &train_set, comp_cfg)?;
            let q_train: Vec<f64> = train_set
                .iter()
                .map(|w| quantized_forward(&qm, w))
                .collect::<Result<_>>()?;
            let q_thr = youden_threshold(&q_train, &train_labels)?;
            let q_test: Vec<f64> = test_set
                .iter()
                .map(|w| quantized_forward(&qm, w))
                .collect::<Result<_>>()?;
            (Some(q_test), Some(q_thr))
        }
        None => (None, None),
    };

    Ok(FoldOutput {
        subject_id,
        threshold,
        q_threshold,
        labels,
        scores,
        q_scores,
        train_manifest_hash,
    })
}

/// Leave-one-out evaluation over a cohort of at least two subjects.
pub fn loo_evaluate(
    cohort: &[Recording],
    spec: &ModelSpec,
    cfg: &EvalConfig,
) -> Result<LooOutcome> {
    if cohort.len() < 2 {
        return Err(Error::Evaluation(format!(
            "leave-one-out needs at least 2 subjects, got {}",
            cohort.len()
        )));
    }
    spec.validate()?;
    let cohort_windows: Vec<Vec<Window>> = cohort
        .iter()
        .map(|rec| subject_windows(rec, cfg))
        .collect::<Result<_>>()?;

    let n_folds = cohort_windows.len();
    let jobs = cfg.jobs.max(1).min(n_folds);
    let results: Mutex<Vec<Option<Result<FoldOutput>>>> =
        Mutex::new((0..n_folds).map(|_| None).collect());
    let next = AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let fold = next.fetch_add(1, Ordering::Relaxed);
                if fold >= n_folds {
                    break;
                }
                let out = run_fold(&cohort_windows, fold, spec, cfg);
                results.lock().expect("fold results lock")[fold] = Some(out);
            });
        }
    });

    let mut folds = Vec::with_capacity(n_folds);
    for slot in results.into_inner().expect("fold results lock") {
        folds.push(slot.expect("every fold ran")?);
    }
    // Merge in subject order for reproducible output.
    folds.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));

    let float_report = assemble_report(&folds, "float", cfg, false)?;
    let (quantized_report, decision_agreement) = if cfg.compression.is_some() {
        let report = assemble_report(&folds, "int8", cfg, true)?;
        let mut agree = 0usize;
        let mut total = 0usize;
        for f in &folds {
            let q = f.q_scores.as_ref().expect("compression ran");
            for (s, qs) in f.scores.iter().zip(q) {
                total += 1;
                if (*s >= 0.5) == (*qs >= 0.5) {
                    agree += 1;
                }
            }
        }
        (Some(report), Some(agree as f64 / total as f64))
    } else {
        (None, None)
    };

    Ok(LooOutcome {
        float_report,
        quantized_report,
        decision_agreement,
        folds,
    })
}

fn assemble_report(
    folds: &[FoldOutput],
    model_kind: &str,
    cfg: &EvalConfig,
    quantized: bool,
) -> Result<MetricReport> {
    let fold_scores = |f: &FoldOutput| -> Vec<f64> {
        if quantized {
            f.q_scores.clone().expect("quantized scores present")
        } else {
            f.scores.clone()
        }
    };
    let fold_threshold = |f: &FoldOutput| -> f64 {
        if quantized {
            f.q_threshold.expect("quantized threshold present")
        } else {
            f.threshold
        }
    };

    // Pooled confusion at per-fold frozen thresholds, pooled scores for AUC.
    let mut pooled_confusion = ConfusionCounts::default();
    let mut pooled_scores: Vec<f64> = Vec::new();
    let mut pooled_labels: Vec<bool> = Vec::new();
    let mut pooled_pred: Vec<(bool, bool)> = Vec::new(); // (prediction, label)
    let mut per_subject = Vec::with_capacity(folds.len());
    let mut fold_metric_sums = [0.0f64; 6];
    let mut fold_metric_counts = [0usize; 6];

    for f in folds {
        let scores = fold_scores(f);
        let threshold = fold_threshold(f);
        let c = confusion(&scores, &f.labels, threshold)?;
        pooled_confusion.add(&c);
        pooled_scores.extend_from_slice(&scores);
        pooled_labels.extend_from_slice(&f.labels);
        for (&s, &y) in scores.iter().zip(&f.labels) {
            pooled_pred.push((s >= threshold, y));
        }

        let m = metrics_from_confusion(&c);
        let positives = f.labels.iter().filter(|&&y| y).count();
        let single_class = positives == 0 || positives == f.labels.len();
        let auc = if single_class {
            None
        } else {
            Some(roc_auc(&scores, &f.labels)?)
        };
        for (i, v) in [m.sensitivity, m.specificity, m.precision, m.f1, m.accuracy, auc]
            .into_iter()
            .enumerate()
        {
            if let Some(v) = v {
                fold_metric_sums[i] += v;
                fold_metric_counts[i] += 1;
            }
        }
        per_subject.push(SubjectReport {
            subject_id: f.subject_id.clone(),
            threshold,
            windows: f.labels.len(),
            positives,
            single_class,
            sensitivity: m.sensitivity,
            specificity: m.specificity,
            f1: m.f1,
            accuracy: m.accuracy,
            auc,
            train_manifest_hash: format!("{:016x}", f.train_manifest_hash),
        });
    }

    let pooled_m = metrics_from_confusion(&pooled_confusion);
    let pooled_auc = roc_auc(&pooled_scores, &pooled_labels).ok();

    // Bootstrap CIs over pooled windows. Degenerate resamples fall back to
    // the point estimate so the draw stays deterministic.
    let boot_seed = seed::derive_labeled(
        cfg.bootstrap_seed,
        if quantized { "boot/int8" } else { "boot/float" },
    );
    let ci_for = |point: Option<f64>,
                  which: usize|
     -> Result<Option<(f64, f64)>> {
        let Some(point_v) = point else { return Ok(None) };
        if pooled_pred.len() < 10 {
            return Ok(None);
        }
        let stat = move |xs: &[(bool, bool)]| -> f64 {
            let mut c = ConfusionCounts::default();
            for &(p, y) in xs {
                match (p, y) {
                    (true, true) => c.tp += 1,
                    (true, false) => c.fp += 1,
                    (false, false) => c.tn += 1,
                    (false, true) => c.fn_ += 1,
                }
            }
            let m = metrics_from_confusion(&c);
            let v = match which {
                0 => m.sensitivity,
                1 => m.specificity,
                2 => m.precision,
                3 => m.f1,
                _ => m.accuracy,
            };
            v.unwrap_or(point_v)
        };
        Ok(Some(bootstrap_ci(
            &pooled_pred,
            stat,
            cfg.bootstrap_samples,
            seed::derive(boot_seed, which as u64),
        )?))
    };

    let auc_ci = match pooled_auc {
        Some(point) if pooled_labels.len() >= 10 => {
            let pairs: Vec<(f64, bool)> = pooled_scores
                .iter()
                .copied()
                .zip(pooled_labels.iter().copied())
                .collect();
            let stat = move |xs: &[(f64, bool)]| -> f64 {
                let s: Vec<f64> = xs.iter().map(|(a, _)| *a).collect();
                let l: Vec<bool> = xs.iter().map(|(_, b)| *b).collect();
                roc_auc(&s, &l).unwrap_or(point)
            };
            Some(bootstrap_ci(
                &pairs,
                stat,
                cfg.bootstrap_samples,
                seed::derive(boot_seed, 5),
            )?)
        }
        _ => None,
    };

    let pooled = PooledMetrics {
        sensitivity: MetricValue::with_ci(pooled_m.sensitivity, ci_for(pooled_m.sensitivity, 0)?),
        specificity: MetricValue::with_ci(pooled_m.specificity, ci_for(pooled_m.specificity, 1)?),
        precision: MetricValue::with_ci(pooled_m.precision, ci_for(pooled_m.precision, 2)?),
        f1: MetricValue::with_ci(pooled_m.f1, ci_for(pooled_m.f1, 3)?),
        accuracy: MetricValue::with_ci(pooled_m.accuracy, ci_for(pooled_m.accuracy, 4)?),
        auc: MetricValue::with_ci(pooled_auc, auc_ci),
    };

    let fold_mean_value = |i: usize| -> MetricValue {
        MetricValue::point(if fold_metric_counts[i] == 0 {
            None
        } else {
            Some(fold_metric_sums[i] / fold_metric_counts[i] as f64)
        })
    };
    let fold_mean = PooledMetrics {
        sensitivity: fold_mean_value(0),
        specificity: fold_mean_value(1),
        precision: fold_mean_value(2),
        f1: fold_mean_value(3),
        accuracy: fold_mean_value(4),
        auc: fold_mean_value(5),
    };

    Ok(MetricReport {
        schema_version: REPORT_SCHEMA_VERSION,
        model_kind: model_kind.to_string(),
        pooled,
        pooled_confusion,
        fold_mean,
        per_subject,
    })
}
