//! Desk-scale sandbox for a wearable freezing-of-gait (FoG) detector.
//!
//! The crate models the full signal path of a multi-modal FoG alerting
//! system in software:
//!
//! - [`signal`] -- canonical data model for EEG/EMG/ACC recordings, dataset
//!   ingestion, sliding-window segmentation and labeling
//! - [`frontend`] -- behavioral model of the analog recording chain
//!   (gain, Butterworth band-pass, input-referred noise, 12-bit ADC)
//! - [`nn`] -- minimal neural-network engine: tensors, the multi-branch
//!   depth-wise 1-D CNN, backpropagation and a deterministic trainer
//! - [`compress`] -- magnitude pruning, post-training int8 quantization,
//!   an integer inference path and container size accounting
//! - [`eval`] -- leave-one-out cross-testing, modality ablation,
//!   ROC/AUC metrics with bootstrap confidence intervals, and a synthetic
//!   cohort generator
//! - [`netsim`] -- discrete-event simulation of the TDMA body-area
//!   network feeding the detector under a latency budget

pub mod compress;
pub mod error;
pub mod eval;
pub mod frontend;
pub mod netsim;
pub mod nn;
pub mod seed;
pub mod signal;
pub mod wavegen;

pub use error::{Error, Result};
pub use eval::{AblationSpec, ConfusionCounts, EffectProfile, MetricReport};

pub use frontend::FrontEndConfig;
pub use nn::{LayerSpec, ModelSpec, Parameters, Tensor, TrainConfig};
pub use signal::{DatasetManifest, ModalityKind, Recording, Window};
