//! Shared fixtures for the engine's unit tests: tiny models, synthetic
//! windows, and the finite-difference gradient oracle.
#![cfg(test)]

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::backward::backward;
use super::params::Parameters;
use super::spec::ModelSpec;
use crate::seed;
use crate::signal::{ModalityBlock, ModalityKind, Window};

/// EMG-only model: 2 channels x 8 samples, one conv (K=3, stride 1),
/// small head.
pub fn tiny_spec() -> ModelSpec {
    let mut g = BTreeMap::new();
    g.insert(ModalityKind::Emg, (2, 8));
    let spec = ModelSpec::for_geometry_sized(g, &[4, 2], 3, 3, 1, 1, &[4, 2]);
    spec.validate().expect("tiny spec is valid");
    spec
}

/// Branches reduced to pooling; all learning happens in the head.
pub fn head_only_spec() -> ModelSpec {
    let mut g = BTreeMap::new();
    g.insert(ModalityKind::Emg, (2, 8));
    let mut spec = ModelSpec::for_geometry_sized(g, &[4, 2], 3, 3, 0, 1, &[4, 2]);
    spec.validate().expect("head-only spec is valid");
    // for_geometry_sized with zero conv layers leaves just GlobalStats.
    assert_eq!(spec.branches[0].layers.len(), 1);
    spec.branches[0].name = "emg".into();
    spec
}

/// Gaussian-noise window matching the spec's geometry. Label left unset.
pub fn window_for_spec(spec: &ModelSpec, seed_value: u64) -> Window {
    noise_window(spec, seed_value, 1.0, 0.0)
}

pub fn tiny_window(seed_value: u64) -> Window {
    window_for_spec(&tiny_spec(), seed_value)
}

fn noise_window(spec: &ModelSpec, seed_value: u64, rms: f64, mean: f64) -> Window {
    let mut rng = seed::rng(seed_value);
    let normal = Normal::new(mean, rms).unwrap();
    let mut blocks = BTreeMap::new();
    for (&modality, &(channels, samples)) in &spec.input_geometry {
        let data: Vec<f64> = (0..channels * samples)
            .map(|_| normal.sample(&mut rng))
            .collect();
        blocks.insert(
            modality,
            ModalityBlock {
                channels: (0..channels).map(|i| format!("{modality}_{i}")).collect(),
                sample_rate_hz: samples as f64 / 3.0,
                data,
                samples_per_channel: samples,
            },
        );
    }
    Window {
        subject_id: format!("fixture_{seed_value}"),
        start_s: 0.0,
        length_s: 3.0,
        blocks,
        label: None,
        label_overlap_fraction: 0.0,
    }
}

/// `n` noise windows with labels independent of content; exactly
/// `round(n * positive_fraction)` positives.
pub fn labeled_noise_set(
    spec: &ModelSpec,
    n: usize,
    positive_fraction: f64,
    seed_value: u64,
) -> Vec<Window> {
    let positives = (n as f64 * positive_fraction).round() as usize;
    (0..n)
        .map(|i| {
            let mut w = noise_window(spec, seed::derive(seed_value, i as u64), 1.0, 0.0);
            w.label = Some(i < positives);
            w
        })
        .collect()
}

/// Linearly separable set: positive windows carry 3x the noise amplitude.
pub fn separable_set(spec: &ModelSpec, n: usize, seed_value: u64) -> Vec<Window> {
    (0..n)
        .map(|i| {
            let positive = i % 2 == 0;
            let rms = if positive { 3.0 } else { 1.0 };
            let mut w = noise_window(spec, seed::derive(seed_value, i as u64), rms, 0.0);
            w.label = Some(positive);
            w
        })
        .collect()
}

/// Mean-shifted separable set for head-only models (pooling keeps only the
/// channel means, so the class signal must live in the mean).
pub fn mean_shift_set(spec: &ModelSpec, n: usize, seed_value: u64) -> Vec<Window> {
    (0..n)
        .map(|i| {
            let positive = i % 2 == 0;
            let mean = if positive { 1.0 } else { -1.0 };
            let mut w = noise_window(spec, seed::derive(seed_value, i as u64), 0.5, mean);
            w.label = Some(positive);
            w
        })
        .collect()
}

/// Central-difference gradient check; returns the worst relative error over
/// every parameter entry.
pub fn gradient_check(
    spec: &ModelSpec,
    params: &Parameters,
    batch: &[&Window],
    pos_weight: f64,
    eps: f64,
) -> f64 {
    let (analytic, _) = backward(spec, params, batch, pos_weight).expect("analytic grads");
    let mut work = params.clone();
    let paths: Vec<String> = params.paths().cloned().collect();
    let mut max_rel = 0.0f64;
    for path in paths {
        let numel = work.get(&path).unwrap().numel();
        for i in 0..numel {
            let orig = work.get(&path).unwrap().data()[i];
            set(&mut work, &path, i, orig + eps);
            let plus = backward(spec, &work, batch, pos_weight).unwrap().1;
            set(&mut work, &path, i, orig - eps);
            let minus = backward(spec, &work, batch, pos_weight).unwrap().1;
            set(&mut work, &path, i, orig);
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.get(&path).unwrap().data()[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            max_rel = max_rel.max(rel);
        }
    }
    max_rel
}

fn set(params: &mut Parameters, path: &str, idx: usize, value: f64) {
    params.get_mut(path).unwrap().data_mut()[idx] = value;
}

/// Kaiming init plus uniform jitter on every entry (biases included).
/// Gradient checks run here rather than at the raw init point: zero biases
/// park ReLU-dead units exactly on the kink, where central differences and
/// the subgradient legitimately disagree.
pub fn jittered_params(spec: &ModelSpec, seed_value: u64) -> Parameters {
    let mut params = super::params::init_parameters(spec, seed_value);
    let mut rng = seed::rng(seed_value ^ 0xD1F7_AA11);
    for (_, t) in params.iter_mut() {
        for v in t.data_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    params
}

/// Random tiny spec for fuzzing: 1-3 channels, kernels 2-5, sample counts
/// sized so two stride-2 layers always fit.
pub fn random_tiny_spec(rng: &mut impl Rng) -> ModelSpec {
    let mut g = BTreeMap::new();
    let with_eeg = rng.random_bool(0.5);
    if with_eeg {
        g.insert(
            ModalityKind::Eeg,
            (rng.random_range(1..=3), rng.random_range(13..=20)),
        );
    }
    g.insert(
        ModalityKind::Emg,
        (rng.random_range(1..=2), rng.random_range(13..=20)),
    );
    if rng.random_bool(0.5) {
        g.insert(
            ModalityKind::Acc,
            (rng.random_range(1..=3), rng.random_range(13..=20)),
        );
    }
    let k1 = rng.random_range(3..=5);
    let k2 = rng.random_range(2..=k1 - 1);
    let spec = ModelSpec::for_geometry_sized(
        g,
        &[k1, k2],
        rng.random_range(2..=4),
        rng.random_range(2..=4),
        rng.random_range(1..=2),
        rng.random_range(1..=2),
        &[rng.random_range(3..=6), rng.random_range(2..=4)],
    );
    spec.validate().expect("random tiny spec is valid");
    spec
}
