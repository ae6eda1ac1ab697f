//! Synthetic cohort generator for desk-scale experiments.
//!
//! Each subject gets a planted schedule of FoG episodes. During an episode
//! EEG gains a theta-band power shift, EMG gains amplitude bursts, and ACC
//! gains a low-frequency tremor component. Every channel then traverses the
//! analog front-end model, so the dataset carries realistic noise, band
//! limits and quantization. Per-subject baseline and effect-size jitter
//! keep leave-one-out evaluation from being trivial.

use rand::Rng;

use crate::error::{Error, Result};
use crate::frontend::{front_end_pipeline, FrontEndConfig};
use crate::seed;
use crate::signal::{ModalityKind, Recording, Stream, Window};
use crate::wavegen;

/// How strongly the planted FoG signature expresses per modality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectProfile {
    /// No planted effect; any detector should score at chance level.
    Null,
    /// Each modality alone separates strongly.
    Strong,
    /// Each modality alone is weakly separable; jointly they separate well.
    Complementary,
    /// Only EEG carries the FoG signature; EMG and ACC are pure noise.
    EegOnly,
}

impl std::str::FromStr for EffectProfile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "null" => Ok(EffectProfile::Null),
            "strong" => Ok(EffectProfile::Strong),
            "complementary" => Ok(EffectProfile::Complementary),
            "eeg-only" => Ok(EffectProfile::EegOnly),
            other => Err(Error::InvalidConfig(format!(
                "unknown effect profile {other:?} (expected null|strong|complementary|eeg-only)"
            ))),
        }
    }
}

impl std::fmt::Display for EffectProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EffectProfile::Null => "null",
            EffectProfile::Strong => "strong",
            EffectProfile::Complementary => "complementary",
            EffectProfile::EegOnly => "eeg-only",
        };
        f.write_str(s)
    }
}

impl EffectProfile {
    /// Relative effect sizes (EEG theta shift, EMG burst gain, ACC tremor).
    fn effect_sizes(self) -> (f64, f64, f64) {
        match self {
            EffectProfile::Null => (0.0, 0.0, 0.0),
            EffectProfile::Strong => (0.40, 1.8, 0.90),
            EffectProfile::Complementary => (0.13, 0.90, 0.24),
            EffectProfile::EegOnly => (0.30, 0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub windows_per_subject: usize,
    pub effect_profile: EffectProfile,
    pub seed: u64,
    pub window_length_s: f64,
    pub stride_s: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_subjects: 12,
            windows_per_subject: 40,
            effect_profile: EffectProfile::Complementary,
            seed: 7,
            window_length_s: 3.0,
            stride_s: 1.5,
        }
    }
}

/// Default sample rates of the generated channels.
pub const EEG_RATE_HZ: f64 = 500.0;
pub const EMG_RATE_HZ: f64 = 1000.0;
pub const ACC_RATE_HZ: f64 = 100.0;

const EEG_BASE_RMS_UV: f64 = 20.0;
const EMG_BASE_RMS_UV: f64 = 30.0;
const ACC_BASE_RMS_G: f64 = 0.05;

/// Generate a deterministic synthetic cohort. Recording durations are sized
/// so segmentation yields exactly `windows_per_subject` windows.
pub fn generate_synthetic_cohort(cfg: &SynthConfig) -> Result<Vec<Recording>> {
    if cfg.n_subjects < 2 {
        return Err(Error::InvalidConfig(format!(
            "a cohort needs at least 2 subjects for leave-one-out, got {}",
            cfg.n_subjects
        )));
    }
    if cfg.windows_per_subject == 0 {
        return Err(Error::InvalidConfig("windows_per_subject must be >= 1".into()));
    }
    (0..cfg.n_subjects)
        .map(|idx| generate_subject(cfg, idx))
        .collect()
}

fn generate_subject(cfg: &SynthConfig, subject_idx: usize) -> Result<Recording> {
    let subject_id = format!("s{:02}", subject_idx + 1);
    let duration_s =
        cfg.window_length_s + (cfg.windows_per_subject - 1) as f64 * cfg.stride_s;
    let subject_seed = seed::derive_labeled(cfg.seed, &format!("subject/{subject_idx}"));
    let mut rng = seed::rng(subject_seed);

    // Per-subject covariate shift: baseline amplitude per modality (drawn
    // independently, as electrode sites vary independently) and per-modality
    // effect-size jitter.
    let baseline = (
        rng.random_range(0.88..1.12),
        rng.random_range(0.88..1.12),
        rng.random_range(0.88..1.12),
    );
    let effect_jitter = (
        rng.random_range(0.75..1.25),
        rng.random_range(0.75..1.25),
        rng.random_range(0.75..1.25),
    );
    let tremor_hz = rng.random_range(4.5..5.5);

    let fog_intervals = plant_episodes(duration_s, seed::derive(subject_seed, 1), &mut rng);
    let (e_eeg, e_emg, e_acc) = cfg.effect_profile.effect_sizes();

    let mut streams = Vec::new();

    // EEG: 4 channels at 500 Hz; FoG adds a theta-band power shift.
    for ch in 1..=4 {
        let channel = format!("EEG_{ch}");
        let ch_seed = seed::derive_labeled(subject_seed, &channel);
        let n = (duration_s * EEG_RATE_HZ).round() as usize;
        let mut signal = wavegen::white_noise(n, EEG_BASE_RMS_UV * baseline.0, ch_seed);
        if e_eeg > 0.0 {
            let shift_rms = e_eeg * effect_jitter.0 * EEG_BASE_RMS_UV * baseline.0;
            let theta = wavegen::band_noise(
                n,
                shift_rms,
                4.0,
                8.0,
                EEG_RATE_HZ,
                seed::derive(ch_seed, 2),
            )?;
            add_during_episodes(&mut signal, &theta, &fog_intervals, EEG_RATE_HZ);
        }
        let out = front_end_pipeline(
            &signal,
            &FrontEndConfig::eeg(),
            EEG_RATE_HZ,
            seed::derive(ch_seed, 3),
        )?;
        streams.push(Stream {
            modality: ModalityKind::Eeg,
            channel,
            sample_rate_hz: EEG_RATE_HZ,
            samples: out.samples_uv,
        });
    }

    // EMG: 2 tibialis channels at 1 kHz; FoG adds trembling amplitude bursts.
    for leg in ["LT", "RT"] {
        let channel = format!("EMG_{leg}");
        let ch_seed = seed::derive_labeled(subject_seed, &channel);
        let n = (duration_s * EMG_RATE_HZ).round() as usize;
        let mut signal = wavegen::white_noise(n, EMG_BASE_RMS_UV * baseline.1, ch_seed);
        if e_emg > 0.0 {
            // Trembling bursts: slow on/off cycles keep the per-window
            // burst power noisy, like real muscle activity.
            let burst_rms = e_emg * effect_jitter.1 * EMG_BASE_RMS_UV * baseline.1;
            let mut bursts = wavegen::white_noise(n, burst_rms, seed::derive(ch_seed, 2));
            let gate = wavegen::burst_gate(n, EMG_RATE_HZ, 0.4, 0.5, seed::derive(ch_seed, 4));
            for (b, g) in bursts.iter_mut().zip(&gate) {
                *b *= g;
            }
            add_during_episodes(&mut signal, &bursts, &fog_intervals, EMG_RATE_HZ);
        }
        let out = front_end_pipeline(
            &signal,
            &FrontEndConfig::emg_at_rate(EMG_RATE_HZ),
            EMG_RATE_HZ,
            seed::derive(ch_seed, 3),
        )?;
        streams.push(Stream {
            modality: ModalityKind::Emg,
            channel,
            sample_rate_hz: EMG_RATE_HZ,
            samples: out.samples_uv,
        });
    }

    // ACC: 3 axes x 2 legs at 100 Hz; FoG adds a tremor tone.
    for leg in ["LT", "RT"] {
        for axis in ["X", "Y", "Z"] {
            let channel = format!("ACC_{leg}_{axis}");
            let ch_seed = seed::derive_labeled(subject_seed, &channel);
            let n = (duration_s * ACC_RATE_HZ).round() as usize;
            let mut signal =
                wavegen::white_noise(n, ACC_BASE_RMS_G * baseline.2, ch_seed);
            if e_acc > 0.0 {
                let amplitude = e_acc * effect_jitter.2 * ACC_BASE_RMS_G * baseline.2;
                let phase =
                    seed::derive(ch_seed, 5) as f64 / u64::MAX as f64 * std::f64::consts::TAU;
                let tremor = wavegen::tone(n, tremor_hz, amplitude, phase, ACC_RATE_HZ);
                add_during_episodes(&mut signal, &tremor, &fog_intervals, ACC_RATE_HZ);
            }
            let out = front_end_pipeline(
                &signal,
                &FrontEndConfig::acc(),
                ACC_RATE_HZ,
                seed::derive(ch_seed, 3),
            )?;
            streams.push(Stream {
                modality: ModalityKind::Acc,
                channel,
                sample_rate_hz: ACC_RATE_HZ,
                samples: out.samples_uv,
            });
        }
    }

    Recording::new(subject_id, streams, fog_intervals, duration_s)
}

/// Alternate walking and freezing episodes over the recording; roughly a
/// third of the time is frozen.
fn plant_episodes(
    duration_s: f64,
    _plan_seed: u64,
    rng: &mut impl Rng,
) -> Vec<(f64, f64)> {
    let mut intervals = Vec::new();
    let mut t = rng.random_range(2.0..6.0);
    while t < duration_s {
        let fog_len = rng.random_range(3.0..8.0);
        let end = (t + fog_len).min(duration_s - 1e-6);
        if end > t {
            intervals.push((t, end));
        }
        t = end + rng.random_range(6.0..12.0);
    }
    intervals
}

fn add_during_episodes(
    signal: &mut [f64],
    effect: &[f64],
    intervals: &[(f64, f64)],
    rate_hz: f64,
) {
    for &(a, b) in intervals {
        let lo = (a * rate_hz).round() as usize;
        let hi = ((b * rate_hz).round() as usize).min(signal.len());
        for i in lo..hi {
            signal[i] += effect[i];
        }
    }
}

/// One band-power feature per modality, used by the generator's
/// self-check oracle (independent of the CNN).
pub fn modality_feature(window: &Window, modality: ModalityKind) -> Option<f64> {
    let block = window.block(modality)?;
    let rate = block.sample_rate_hz;
    let (lo, hi) = match modality {
        ModalityKind::Eeg => (4.0, 8.0),
        ModalityKind::Emg => (20.0, 0.45 * rate),
        ModalityKind::Acc => (3.0, 8.0),
    };
    let mut acc = 0.0;
    for c in 0..block.channels.len() {
        let row = block.channel_row(c);
        let filtered = crate::frontend::bandpass(row, lo, hi, rate).ok()?;
        let power: f64 =
            filtered.iter().map(|v| v * v).sum::<f64>() / filtered.len() as f64;
        acc += power;
    }
    Some((acc / block.channels.len() as f64).max(1e-30).ln())
}

/// Rank AUC of a standardized band-power score over the given modalities.
/// This is the generator's separability oracle: it validates planted
/// effects without involving the neural network.
pub fn feature_oracle_auc(windows: &[Window], modalities: &[ModalityKind]) -> Result<f64> {
    let labels: Vec<bool> = windows
        .iter()
        .map(|w| w.label.ok_or_else(|| Error::Evaluation("unlabeled window".into())))
        .collect::<Result<_>>()?;
    let mut combined = vec![0.0f64; windows.len()];
    for &modality in modalities {
        let feats: Vec<f64> = windows
            .iter()
            .map(|w| {
                modality_feature(w, modality)
                    .ok_or_else(|| Error::Evaluation(format!("window missing {modality}")))
            })
            .collect::<Result<_>>()?;
        let mean = feats.iter().sum::<f64>() / feats.len() as f64;
        let var = feats.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>()
            / feats.len() as f64;
        let std = var.sqrt().max(1e-12);
        for (c, f) in combined.iter_mut().zip(&feats) {
            *c += (f - mean) / std;
        }
    }
    super::metrics::roc_auc(&combined, &labels)
}

/// Window and label a whole cohort with one configuration.
pub fn windows_for_cohort(
    cohort: &[Recording],
    window_length_s: f64,
    stride_s: f64,
    label_threshold: f64,
) -> Result<Vec<Window>> {
    let mut out = Vec::new();
    for rec in cohort {
        for w in crate::signal::segment_windows(rec, window_length_s, stride_s)? {
            out.push(crate::signal::assign_label(
                w,
                &rec.fog_intervals,
                label_threshold,
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(profile: EffectProfile) -> SynthConfig {
        SynthConfig {
            n_subjects: 4,
            windows_per_subject: 30,
            effect_profile: profile,
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn cohort_is_deterministic() {
        let cfg = small_cfg(EffectProfile::Complementary);
        let a = generate_synthetic_cohort(&cfg).unwrap();
        let b = generate_synthetic_cohort(&cfg).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_cohort(&SynthConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn window_count_matches_request() {
        let cfg = small_cfg(EffectProfile::Null);
        let cohort = generate_synthetic_cohort(&cfg).unwrap();
        for rec in &cohort {
            let ws = crate::signal::segment_windows(rec, 3.0, 1.5).unwrap();
            assert_eq!(ws.len(), 30);
        }
    }

    #[test]
    fn single_subject_rejected() {
        let cfg = SynthConfig {
            n_subjects: 1,
            ..Default::default()
        };
        assert!(generate_synthetic_cohort(&cfg).is_err());
    }

    #[test]
    fn null_profile_is_chance_level() {
        let cohort = generate_synthetic_cohort(&small_cfg(EffectProfile::Null)).unwrap();
        let windows = windows_for_cohort(&cohort, 3.0, 1.5, 0.25).unwrap();
        let auc = feature_oracle_auc(&windows, &ModalityKind::ALL).unwrap();
        assert!((0.45..=0.55).contains(&auc), "null-profile oracle AUC {auc}");
    }

    #[test]
    fn strong_profile_separates_per_modality() {
        let cohort = generate_synthetic_cohort(&small_cfg(EffectProfile::Strong)).unwrap();
        let windows = windows_for_cohort(&cohort, 3.0, 1.5, 0.25).unwrap();
        for modality in ModalityKind::ALL {
            let auc = feature_oracle_auc(&windows, &[modality]).unwrap();
            assert!(auc >= 0.9, "{modality} oracle AUC {auc}");
        }
    }

    #[test]
    fn complementary_profile_is_weak_alone_strong_jointly() {
        let cfg = SynthConfig {
            n_subjects: 8,
            windows_per_subject: 40,
            ..small_cfg(EffectProfile::Complementary)
        };
        let cohort = generate_synthetic_cohort(&cfg).unwrap();
        let windows = windows_for_cohort(&cohort, 3.0, 1.5, 0.25).unwrap();
        let joint = feature_oracle_auc(&windows, &ModalityKind::ALL).unwrap();
        let mut best_single = 0.0f64;
        for modality in ModalityKind::ALL {
            let auc = feature_oracle_auc(&windows, &[modality]).unwrap();
            assert!(auc < 0.9, "{modality} alone too strong: {auc}");
            assert!(auc > 0.55, "{modality} alone carries no signal: {auc}");
            best_single = best_single.max(auc);
        }
        assert!(
            joint >= best_single + 0.03,
            "joint {joint} vs best single {best_single}"
        );
    }

    #[test]
    fn planted_intervals_are_valid_and_cover_both_classes() {
        let cohort = generate_synthetic_cohort(&small_cfg(EffectProfile::Strong)).unwrap();
        for rec in &cohort {
            assert!(!rec.fog_intervals.is_empty());
            rec.validate().unwrap();
            let windows = windows_for_cohort(&[rec.clone()], 3.0, 1.5, 0.25).unwrap();
            let pos = windows.iter().filter(|w| w.label == Some(true)).count();
            assert!(pos > 0 && pos < windows.len(), "{}: {pos}", rec.subject_id);
        }
    }
}

