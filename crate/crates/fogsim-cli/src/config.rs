//! Experiment configuration: one TOML document drives every subcommand.
//! All fields have defaults; a run always writes the fully resolved
//! configuration next to its outputs so results are reproducible from the
//! artifact directory alone.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use fogsim_core::compress::CompressionConfig;
use fogsim_core::eval::{EffectProfile, EvalConfig, SynthConfig};
use fogsim_core::netsim::{ChannelModel, LossPolicy, Scenario};
use fogsim_core::nn::{ModelSpec, OptimizerKind, TrainConfig};
use fogsim_core::signal::ModalityKind;
use fogsim_core::{Error, Result};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub output_dir: PathBuf,
    pub dataset: DatasetSection,
    pub channels: ChannelSection,
    pub windowing: WindowingSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub compression: CompressionSection,
    pub evaluation: EvaluationSection,
    pub netsim: NetsimSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            output_dir: PathBuf::from("out"),
            dataset: DatasetSection::default(),
            channels: ChannelSection::default(),
            windowing: WindowingSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            compression: CompressionSection::default(),
            evaluation: EvaluationSection::default(),
            netsim: NetsimSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSection {
    /// `synthetic` or `manifest`.
    pub source: String,
    pub manifest_path: PathBuf,
    pub synthetic: SyntheticSection,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            source: "synthetic".into(),
            manifest_path: PathBuf::new(),
            synthetic: SyntheticSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSection {
    pub subjects: usize,
    pub windows_per_subject: usize,
    pub effect_profile: String,
    pub seed: u64,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        SyntheticSection {
            subjects: 12,
            windows_per_subject: 40,
            effect_profile: "complementary".into(),
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ChannelSection {
    /// Channel selection as `MODALITY/name` entries; empty means the
    /// default complement (4 EEG, 2 EMG, 6 ACC).
    pub select: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowingSection {
    pub length_s: f64,
    pub stride_s: f64,
    pub label_threshold: f64,
}

impl Default for WindowingSection {
    fn default() -> Self {
        WindowingSection {
            length_s: 3.0,
            stride_s: 1.5,
            label_threshold: 0.25,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    pub eeg_kernels: Vec<usize>,
    pub emg_kernel: usize,
    pub acc_kernel: usize,
    pub conv_layers: usize,
    pub stride: usize,
    pub head_dims: Vec<usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            eeg_kernels: vec![32, 8],
            emg_kernel: 16,
            acc_kernel: 16,
            conv_layers: 2,
            stride: 2,
            head_dims: vec![64, 32],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub optimizer: String,
    pub lr: f64,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub auto_pos_weight: bool,
    pub pos_weight: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            optimizer: "adam".into(),
            lr: 1e-3,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 64,
            epochs: 30,
            seed: 42,
            auto_pos_weight: true,
            pos_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CompressionSection {
    pub sparsity: f64,
    pub quantize: bool,
    pub calibration_windows: usize,
    pub sparse_encoding: bool,
}

impl Default for CompressionSection {
    fn default() -> Self {
        let d = CompressionConfig::default();
        CompressionSection {
            sparsity: d.sparsity,
            quantize: d.quantize,
            calibration_windows: d.calibration_windows,
            sparse_encoding: d.sparse_encoding,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationSection {
    /// Also evaluate the compressed model and report float/int8 agreement.
    pub compress: bool,
    /// Modality subsets for the ablation run; empty skips ablation.
    pub ablation: Vec<String>,
    pub bootstrap_samples: usize,
    pub bootstrap_seed: u64,
    /// Fold workers; 0 uses the available parallelism.
    pub jobs: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            compress: true,
            ablation: vec![
                "EEG".into(),
                "EMG".into(),
                "ACC".into(),
                "EEG+EMG+ACC".into(),
            ],
            bootstrap_samples: 1000,
            bootstrap_seed: 99,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NetsimSection {
    pub slot_duration_us: f64,
    pub guard_time_us: f64,
    pub link_rate_bps: u64,
    pub drift_ppm: f64,
    /// Per-pulse error probability; overridden by `target_ber` when set.
    pub p_pulse: f64,
    /// When positive, solve the pulse error probability for this BER.
    pub target_ber: f64,
    pub pulses_per_bit: u32,
    pub inference_time_s: f64,
    pub sim_duration_s: f64,
    pub seed: u64,
    pub loss_policy: String,
    pub alert_threshold: f64,
    pub record_frame_events: bool,
    pub fog_modulation: bool,
}

impl Default for NetsimSection {
    fn default() -> Self {
        NetsimSection {
            slot_duration_us: 1000.0,
            guard_time_us: 20.0,
            link_rate_bps: 40_000_000,
            drift_ppm: 20.0,
            p_pulse: 0.0,
            target_ber: 0.0,
            pulses_per_bit: 5,
            inference_time_s: 2.3,
            sim_duration_s: 120.0,
            seed: 11,
            loss_policy: "zero-fill".into(),
            alert_threshold: 0.5,
            record_frame_events: true,
            fog_modulation: true,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported config schema version {}",
                self.schema_version
            )));
        }
        if self.dataset.source != "synthetic" && self.dataset.source != "manifest" {
            return Err(Error::InvalidConfig(format!(
                "dataset.source must be 'synthetic' or 'manifest', got {:?}",
                self.dataset.source
            )));
        }
        if self.dataset.source == "manifest" && self.dataset.manifest_path.as_os_str().is_empty()
        {
            return Err(Error::InvalidConfig(
                "dataset.source = 'manifest' needs dataset.manifest_path".into(),
            ));
        }
        self.effect_profile()?;
        self.train_config()?;
        self.loss_policy()?;
        self.channel_selection()?;
        if self.model.eeg_kernels.len() != 2 {
            return Err(Error::InvalidConfig(
                "model.eeg_kernels needs exactly two kernel lengths".into(),
            ));
        }
        if !(0.0 < self.windowing.label_threshold && self.windowing.label_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "windowing.label_threshold must be in (0, 1], got {}",
                self.windowing.label_threshold
            )));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::InvalidConfig(format!("config serialization failed: {e}")))
    }

    /// Write the fully resolved configuration next to a command's outputs.
    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("resolved_config.toml");
        std::fs::write(&path, self.to_toml()?).map_err(|e| Error::io(&path, e))
    }

    pub fn effect_profile(&self) -> Result<EffectProfile> {
        self.dataset.synthetic.effect_profile.parse()
    }

    pub fn synth_config(&self) -> Result<SynthConfig> {
        Ok(SynthConfig {
            n_subjects: self.dataset.synthetic.subjects,
            windows_per_subject: self.dataset.synthetic.windows_per_subject,
            effect_profile: self.effect_profile()?,
            seed: self.dataset.synthetic.seed,
            window_length_s: self.windowing.length_s,
            stride_s: self.windowing.stride_s,
        })
    }

    pub fn channel_selection(&self) -> Result<Vec<(ModalityKind, String)>> {
        if self.channels.select.is_empty() {
            return Ok(fogsim_core::signal::default_channel_complement());
        }
        self.channels
            .select
            .iter()
            .map(|entry| {
                let (tag, name) = entry.split_once('/').ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "channel selection entry {entry:?} must be MODALITY/name"
                    ))
                })?;
                let modality = ModalityKind::from_tag(tag).ok_or_else(|| {
                    Error::InvalidConfig(format!("unknown modality tag {tag:?}"))
                })?;
                Ok((modality, name.to_string()))
            })
            .collect()
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let optimizer = match self.train.optimizer.as_str() {
            "adam" => OptimizerKind::Adam {
                lr: self.train.lr,
                beta1: self.train.beta1,
                beta2: self.train.beta2,
                epsilon: self.train.epsilon,
            },
            "sgd" => OptimizerKind::Sgd {
                lr: self.train.lr,
                momentum: self.train.momentum,
            },
            other => {
                return Err(Error::InvalidConfig(format!(
                    "train.optimizer must be 'adam' or 'sgd', got {other:?}"
                )))
            }
        };
        let cfg = TrainConfig {
            optimizer,
            batch_size: self.train.batch_size,
            epochs: self.train.epochs,
            seed: self.train.seed,
            pos_weight: if self.train.auto_pos_weight {
                None
            } else {
                Some(self.train.pos_weight)
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn compression_config(&self) -> CompressionConfig {
        CompressionConfig {
            sparsity: self.compression.sparsity,
            quantize: self.compression.quantize,
            calibration_windows: self.compression.calibration_windows,
            sparse_encoding: self.compression.sparse_encoding,
        }
    }

    pub fn eval_config(&self) -> Result<EvalConfig> {
        Ok(EvalConfig {
            window_length_s: self.windowing.length_s,
            stride_s: self.windowing.stride_s,
            label_threshold: self.windowing.label_threshold,
            train: self.train_config()?,
            compression: self
                .evaluation
                .compress
                .then(|| self.compression_config()),
            bootstrap_samples: self.evaluation.bootstrap_samples,
            bootstrap_seed: self.evaluation.bootstrap_seed,
            jobs: if self.evaluation.jobs == 0 {
                std::thread::available_parallelism()
                    .map(|n| n.get())
                    .unwrap_or(1)
            } else {
                self.evaluation.jobs
            },
        })
    }

    /// Model spec for the geometry implied by the channel selection and
    /// windowing, using the configured architecture knobs.
    pub fn model_spec(
        &self,
        rates: &BTreeMap<ModalityKind, f64>,
    ) -> Result<ModelSpec> {
        let selection = self.channel_selection()?;
        let mut geometry = BTreeMap::new();
        for (modality, _) in &selection {
            let rate = rates.get(modality).ok_or_else(|| {
                Error::InvalidConfig(format!("dataset has no {modality} streams"))
            })?;
            let samples = (rate * self.windowing.length_s).round() as usize;
            let channels = selection.iter().filter(|(m, _)| m == modality).count();
            geometry.insert(*modality, (channels, samples));
        }
        let mut spec = ModelSpec::for_geometry_sized(
            geometry,
            &self.model.eeg_kernels,
            self.model.emg_kernel,
            self.model.acc_kernel,
            self.model.conv_layers,
            self.model.stride,
            &self.model.head_dims,
        );
        spec.input_scales = ModelSpec::default_input_scales();
        spec.validate()?;
        Ok(spec)
    }

    pub fn loss_policy(&self) -> Result<LossPolicy> {
        match self.netsim.loss_policy.as_str() {
            "zero-fill" => Ok(LossPolicy::ZeroFill),
            "hold-last" => Ok(LossPolicy::HoldLast),
            other => Err(Error::InvalidConfig(format!(
                "netsim.loss_policy must be 'zero-fill' or 'hold-last', got {other:?}"
            ))),
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let mut scenario =
            fogsim_core::netsim::default_scenario(self.netsim.sim_duration_s, self.netsim.seed)?;
        let nodes = scenario.nodes.clone();
        scenario.schedule = fogsim_core::netsim::build_schedule(
            &nodes,
            self.netsim.slot_duration_us * 1e-6,
            self.netsim.link_rate_bps,
            self.netsim.guard_time_us * 1e-6,
            self.netsim.drift_ppm,
        )?;
        let p_pulse = if self.netsim.target_ber > 0.0 {
            fogsim_core::netsim::solve_pulse_error_for_ber(
                self.netsim.target_ber,
                self.netsim.pulses_per_bit,
            )?
        } else {
            self.netsim.p_pulse
        };
        scenario.channel = ChannelModel::new(p_pulse, self.netsim.pulses_per_bit)?;
        scenario.inference_time_s = self.netsim.inference_time_s;
        scenario.loss_policy = self.loss_policy()?;
        scenario.alert_threshold = self.netsim.alert_threshold;
        scenario.record_frame_events = self.netsim.record_frame_events;
        scenario.fog_modulation = self.netsim.fog_modulation;
        scenario.window_length_s = self.windowing.length_s;
        Ok(scenario)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml().unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg: ExperimentConfig =
            toml::from_str("output_dir = \"work\"\n[train]\nepochs = 5\n").unwrap();
        assert_eq!(cfg.output_dir, PathBuf::from("work"));
        assert_eq!(cfg.train.epochs, 5);
        assert_eq!(cfg.train.batch_size, 64);
        cfg.validate().unwrap();
    }

    #[test]
    fn bad_values_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.dataset.source = "parquet".into();
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.train.optimizer = "lbfgs".into();
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.netsim.loss_policy = "drop".into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn selection_parses_modality_slash_name() {
        let mut cfg = ExperimentConfig::default();
        cfg.channels.select = vec!["EEG/EEG_1".into(), "ACC/ACC_LT_X".into()];
        let sel = cfg.channel_selection().unwrap();
        assert_eq!(sel[0], (ModalityKind::Eeg, "EEG_1".to_string()));
        cfg.channels.select = vec!["EEG_1".into()];
        assert!(cfg.channel_selection().is_err());
    }
}
