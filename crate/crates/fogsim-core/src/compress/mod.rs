//! Model compression: magnitude pruning, post-training int8 quantization,
//! an integer inference path and container size accounting against the
//! on-device memory budget.

mod container;
mod integer;
mod prune;
mod quant;

pub use container::{
    deserialize_float, deserialize_quantized, float_size_bytes, load_quantized,
    quantized_size_bytes, save_quantized, serialize_float, serialize_quantized,
    FLOAT_HEADER_BYTES, QUANT_HEADER_BYTES, QUANT_MAGIC, QUANT_VERSION,
};
pub use integer::{quantize_multiplier, quantized_forward, requantize};
pub use prune::{apply_mask, prune_magnitude, PruneMask};
pub use quant::{
    calibrate_activations, calibrate_statistics, conv_site, dense_site, input_site, pool_site,
    quantize_model, quantize_model_corrected, ActRange, ActivationStats, BiasTensor,
    QuantParams, QuantTensor, QuantizedModel, CONCAT_SITE, LOGIT_SITE, SCALE_FLOOR,
};

use crate::error::Result;
use crate::nn::{ModelSpec, Parameters};
use crate::signal::Window;

/// Compression settings for one experiment.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CompressionConfig {
    /// Fraction of weights to prune globally by magnitude.
    pub sparsity: f64,
    /// Quantize to int8 after pruning.
    pub quantize: bool,
    /// Number of calibration windows drawn from the training set.
    pub calibration_windows: usize,
    /// Allow sparse blocks in the serialized container.
    pub sparse_encoding: bool,
}

impl Default for CompressionConfig {
    fn default() -> Self {
        CompressionConfig {
            sparsity: 0.5,
            quantize: true,
            calibration_windows: 256,
            sparse_encoding: true,
        }
    }
}

/// Prune, calibrate and quantize in one step.
pub fn compress(
    spec: &ModelSpec,
    params: &Parameters,
    calibration: &[Window],
    cfg: &CompressionConfig,
) -> Result<(QuantizedModel, PruneMask)> {
    let (pruned, mask) = prune_magnitude(params, cfg.sparsity)?;
    let take = cfg.calibration_windows.min(calibration.len()).max(1);
    let stats =
        calibrate_statistics(spec, &pruned, &calibration[..take.min(calibration.len())])?;
    let qm = quantize_model_corrected(spec, &pruned, &stats)?;
    Ok((qm, mask))
}
