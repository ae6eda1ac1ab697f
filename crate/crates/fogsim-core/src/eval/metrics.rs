//! Classification metrics: confusion counts, sensitivity/specificity/F1,
//! ROC AUC with tie handling, percentile bootstrap CIs, and operating-point
//! selection by Youden's J.

use crate::error::{Error, Result};
use crate::seed;
use rand::Rng;

/// Confusion counts at a fixed threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

/// Count outcomes with `prediction = score >= threshold`.
pub fn confusion(scores: &[f64], labels: &[bool], threshold: f64) -> Result<ConfusionCounts> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::Evaluation(format!(
            "scores ({}) and labels ({}) must be equal-length and non-empty",
            scores.len(),
            labels.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Threshold metrics; a metric whose denominator is zero is reported as
/// `None` (undefined), never as 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ThresholdMetrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
}

pub fn metrics_from_confusion(c: &ConfusionCounts) -> ThresholdMetrics {
    let ratio = |num: usize, den: usize| -> Option<f64> {
        if den == 0 {
            None
        } else {
            Some(num as f64 / den as f64)
        }
    };
    let sensitivity = ratio(c.tp, c.tp + c.fn_);
    let specificity = ratio(c.tn, c.tn + c.fp);
    let precision = ratio(c.tp, c.tp + c.fp);
    let f1 = match (precision, sensitivity) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    let accuracy = ratio(c.tp + c.tn, c.total());
    ThresholdMetrics {
        sensitivity,
        specificity,
        precision,
        f1,
        accuracy,
    }
}

/// Area under the ROC curve via the rank statistic (Mann-Whitney), with
/// ties counted as half. Equivalent to the trapezoidal area under the ROC
/// traced over all distinct thresholds.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::Evaluation("scores and labels must match".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Evaluation(
            "AUC needs both classes present".into(),
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    // Average ranks over tie groups (ranks are 1-based).
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0usize;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }

    let p = positives as f64;
    let n = negatives as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// Percentile bootstrap confidence interval (2.5%, 97.5%) of a statistic
/// over resampled outcomes. Deterministic per seed.
pub fn bootstrap_ci<T: Clone, F: Fn(&[T]) -> f64>(
    outcomes: &[T],
    metric_fn: F,
    n_boot: usize,
    seed_value: u64,
) -> Result<(f64, f64)> {
    if outcomes.len() < 10 {
        return Err(Error::Evaluation(format!(
            "bootstrap needs at least 10 outcomes, got {}",
            outcomes.len()
        )));
    }
    let mut rng = seed::rng(seed_value);
    let mut stats = Vec::with_capacity(n_boot);
    let mut resample = Vec::with_capacity(outcomes.len());
    for _ in 0..n_boot {
        resample.clear();
        for _ in 0..outcomes.len() {
            let idx = rng.random_range(0..outcomes.len());
            resample.push(outcomes[idx].clone());
        }
        stats.push(metric_fn(&resample));
    }
    stats.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    Ok((percentile(&stats, 0.025), percentile(&stats, 0.975)))
}

/// Linear-interpolation percentile of a sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Operating threshold maximizing Youden's J = sensitivity + specificity - 1
/// over the distinct score values; ties resolve to the lowest threshold.
pub fn youden_threshold(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::Evaluation("scores and labels must match".into()));
    }
    let mut candidates: Vec<f64> = scores.to_vec();
    candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    candidates.dedup();
    // One candidate above the max puts everything in the negative class.
    candidates.push(candidates.last().unwrap() + 1.0);

    let mut best_t = candidates[0];
    let mut best_j = f64::NEG_INFINITY;
    for &t in &candidates {
        let c = confusion(scores, labels, t)?;
        let m = metrics_from_confusion(&c);
        let j = match (m.sensitivity, m.specificity) {
            (Some(se), Some(sp)) => se + sp - 1.0,
            _ => continue,
        };
        if j > best_j + 1e-15 {
            best_j = j;
            best_t = t;
        }
    }
    Ok(best_t)
}
