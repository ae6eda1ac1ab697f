//! Post-training affine int8 quantization: activation calibration and
//! model conversion.
//!
//! Weights use per-tensor symmetric quantization (`scale = max|w| / 127`,
//! zero point 0); activations use ranges observed on a calibration set,
//! symmetric for signed sites (model input, the final logit) and affine
//! min/max for post-ReLU sites. Ranges are extended to include zero so the
//! zero point is always representable, and every scale is rounded to f32
//! so a container round-trip reproduces the arithmetic exactly.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::{
    branch_input, dense_forward, depthwise_conv1d_forward, global_mean, relu, BranchSpec,
    LayerSpec, ModelSpec, Padding, Parameters, Tensor,
};
use crate::signal::{ModalityKind, Window};

/// Scales never drop below this floor (degenerate all-equal ranges).
pub const SCALE_FLOOR: f64 = 1e-8;

/// Per-tensor quantization parameters: `dequant(q) = scale * (q - zero_point)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuantParams {
    pub scale: f64,
    pub zero_point: i32,
}

impl QuantParams {
    /// Symmetric parameters for a signed tensor with the given max |value|.
    pub fn symmetric(max_abs: f64) -> QuantParams {
        let scale = f32_clean((max_abs / 127.0).max(SCALE_FLOOR));
        QuantParams {
            scale,
            zero_point: 0,
        }
    }

    /// Affine parameters covering `[min, max]`; the range is extended to
    /// include zero so that zero quantizes exactly.
    pub fn affine(min: f64, max: f64) -> QuantParams {
        let lo = min.min(0.0);
        let hi = max.max(0.0);
        let scale = f32_clean(((hi - lo) / 255.0).max(SCALE_FLOOR));
        let zero_point = (-128.0 - (lo / scale).round()) as i32;
        QuantParams {
            scale,
            zero_point: zero_point.clamp(-128, 127),
        }
    }

    pub fn quantize(&self, v: f64) -> i8 {
        let q = (v / self.scale).round() + self.zero_point as f64;
        q.clamp(-128.0, 127.0) as i8
    }

    pub fn dequantize(&self, q: i8) -> f64 {
        self.scale * (i32::from(q) - self.zero_point) as f64
    }
}

/// Round a scale to f32 precision so serialized and in-memory models
/// compute identically.
fn f32_clean(v: f64) -> f64 {
    f64::from(v as f32)
}

/// Running min/max over a calibration pass.
#[derive(Debug, Clone, Copy)]
pub struct ActRange {
    pub min: f64,
    pub max: f64,
}

impl Default for ActRange {
    fn default() -> Self {
        ActRange {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

impl ActRange {
    fn update(&mut self, data: &[f64]) {
        for &v in data {
            self.min = self.min.min(v);
            self.max = self.max.max(v);
        }
    }

    fn max_abs(&self) -> f64 {
        self.min.abs().max(self.max.abs())
    }
}

// Activation-site keys. The integer path reads the same keys the
// calibration pass writes.
pub fn input_site(modality: ModalityKind) -> String {
    format!("input/{modality}")
}

pub fn conv_site(branch: &str, conv_idx: usize) -> String {
    format!("branch/{branch}/conv{conv_idx}")
}

pub fn pool_site(branch: &str) -> String {
    format!("branch/{branch}/pool")
}

pub const CONCAT_SITE: &str = "head/concat";

pub fn dense_site(dense_idx: usize) -> String {
    format!("head/dense{dense_idx}")
}

pub const LOGIT_SITE: &str = "head/logit";

/// One conv stage of a canonical branch.
pub(crate) struct ConvStage {
    pub kernel_len: usize,
    pub stride: usize,
    pub padding: Padding,
}

/// The integer path supports the canonical deployed topology: zero or more
/// `Conv -> ReLU` pairs followed by `GlobalStats` in each branch.
pub(crate) fn canonical_branch(branch: &BranchSpec) -> Result<Vec<ConvStage>> {
    let mut stages = Vec::new();
    let mut it = branch.layers.iter().peekable();
    while let Some(layer) = it.next() {
        match layer {
            LayerSpec::DepthwiseConv1D {
                kernel_len,
                stride,
                padding,
                ..
            } => {
                if !matches!(it.next(), Some(LayerSpec::ReLU)) {
                    return Err(Error::InvalidConfig(format!(
                        "branch {}: integer path needs Conv followed by ReLU",
                        branch.name
                    )));
                }
                stages.push(ConvStage {
                    kernel_len: *kernel_len,
                    stride: *stride,
                    padding: *padding,
                });
            }
            LayerSpec::GlobalStats => {
                if it.next().is_some() {
                    return Err(Error::InvalidConfig(format!(
                        "branch {}: layers after pooling are not supported",
                        branch.name
                    )));
                }
                return Ok(stages);
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "branch {}: integer path does not support {other:?}",
                    branch.name
                )));
            }
        }
    }
    Err(Error::InvalidConfig(format!(
        "branch {} has no pooling stage",
        branch.name
    )))
}

/// Head shape for the integer path: Concat, (Dense, ReLU) x N, Dense,
/// Sigmoid. Returns the dense dimensions.
pub(crate) fn canonical_head(spec: &ModelSpec) -> Result<Vec<(usize, usize)>> {
    let mut dims = Vec::new();
    for layer in &spec.head {
        match layer {
            LayerSpec::Concat { .. } | LayerSpec::ReLU | LayerSpec::Sigmoid => {}
            LayerSpec::Dense { in_dim, out_dim } => dims.push((*in_dim, *out_dim)),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "integer path does not support head layer {other:?}"
                )))
            }
        }
    }
    Ok(dims)
}

/// Per-site calibration output: quantization parameters plus the mean
/// activation vector (used for post-training bias correction).
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationStats {
    /// Per-site quantization parameters: one entry per channel on the
    /// depth-wise chain (input and conv sites), a single entry for vector
    /// sites (concat, dense, logit).
    pub qparams: BTreeMap<String, Vec<QuantParams>>,
    pub means: BTreeMap<String, Vec<f64>>,
}

/// Observe activation ranges over a calibration set and derive per-site
/// quantization parameters.
pub fn calibrate_activations(
    spec: &ModelSpec,
    params: &Parameters,
    calibration: &[Window],
) -> Result<BTreeMap<String, Vec<QuantParams>>> {
    Ok(calibrate_statistics(spec, params, calibration)?.qparams)
}

/// Calibration pass that also accumulates per-site mean activations.
/// Means are per channel for convolutional sites (averaged over time) and
/// per element for vector sites.
pub fn calibrate_statistics(
    spec: &ModelSpec,
    params: &Parameters,
    calibration: &[Window],
) -> Result<ActivationStats> {
    if calibration.is_empty() {
        return Err(Error::Evaluation("empty calibration set".into()));
    }
    spec.validate()?;
    // Ranges per site, one slot per channel (vector sites use one slot).
    let mut ranges: BTreeMap<String, Vec<ActRange>> = BTreeMap::new();
    let upd = |key: String,
               data: &[f64],
               rows: usize,
               ranges: &mut BTreeMap<String, Vec<ActRange>>| {
        let cols = data.len() / rows.max(1);
        let entry = ranges
            .entry(key)
            .or_insert_with(|| vec![ActRange::default(); rows]);
        for (r, slot) in entry.iter_mut().enumerate() {
            slot.update(&data[r * cols..(r + 1) * cols]);
        }
    };
    // Running per-site mean accumulators: (sums, observation count).
    let mut mean_acc: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    let mean_rows = |key: String,
                     data: &[f64],
                     rows: usize,
                     acc: &mut BTreeMap<String, (Vec<f64>, usize)>| {
        let cols = data.len() / rows.max(1);
        let entry = acc.entry(key).or_insert_with(|| (vec![0.0; rows], 0));
        for r in 0..rows {
            entry.0[r] += data[r * cols..(r + 1) * cols].iter().sum::<f64>() / cols as f64;
        }
        entry.1 += 1;
    };

    for window in calibration {
        let mut features: Vec<f64> = Vec::with_capacity(spec.feature_dim());
        for branch in &spec.branches {
            let stages = canonical_branch(branch)?;
            let mut x = branch_input(spec, branch, window)?;
            let channels = x.shape()[0];
            upd(input_site(branch.modality), x.data(), channels, &mut ranges);
            mean_rows(input_site(branch.modality), x.data(), channels, &mut mean_acc);
            for (i, stage) in stages.iter().enumerate() {
                let (w_path, b_path) = crate::nn::conv_paths(&branch.name, i);
                let conv = depthwise_conv1d_forward(
                    &x,
                    params.expect(&w_path)?,
                    params.expect(&b_path)?,
                    stage.stride,
                    stage.padding,
                )?;
                x = relu(&conv);
                upd(conv_site(&branch.name, i), x.data(), channels, &mut ranges);
                mean_rows(conv_site(&branch.name, i), x.data(), channels, &mut mean_acc);
            }
            let pooled = global_mean(&x)?;
            upd(pool_site(&branch.name), pooled.data(), 1, &mut ranges);
            features.extend_from_slice(pooled.data());
        }
        upd(CONCAT_SITE.to_string(), &features, 1, &mut ranges);
        mean_rows(CONCAT_SITE.to_string(), &features, features.len(), &mut mean_acc);

        let dims = canonical_head(spec)?;
        let mut x = Tensor::from_vec(&[features.len()], features)?;
        for (i, _) in dims.iter().enumerate() {
            let (w_path, b_path) = crate::nn::dense_paths(i);
            x = dense_forward(&x, params.expect(&w_path)?, params.expect(&b_path)?)?;
            if i + 1 < dims.len() {
                x = relu(&x);
                upd(dense_site(i), x.data(), 1, &mut ranges);
                mean_rows(dense_site(i), x.data(), x.numel(), &mut mean_acc);
            } else {
                upd(LOGIT_SITE.to_string(), x.data(), 1, &mut ranges);
            }
        }
    }

    let mut qparams = BTreeMap::new();
    for (site, channel_ranges) in ranges {
        let symmetric = site.starts_with("input/") || site == LOGIT_SITE;
        let qps = channel_ranges
            .into_iter()
            .map(|range| {
                if symmetric {
                    QuantParams::symmetric(range.max_abs())
                } else {
                    QuantParams::affine(range.min, range.max)
                }
            })
            .collect();
        qparams.insert(site, qps);
    }
    let means = mean_acc
        .into_iter()
        .map(|(site, (sums, n))| {
            (site, sums.into_iter().map(|s| s / n.max(1) as f64).collect())
        })
        .collect();
    Ok(ActivationStats { qparams, means })
}

/// Int8 weight tensor. Depth-wise conv kernels carry one scale per
/// channel (their per-channel ranges differ too much for a shared scale);
/// dense layers carry a single scale. Zero point is always 0 (symmetric).
#[derive(Debug, Clone, PartialEq)]
pub struct QuantTensor {
    pub shape: Vec<usize>,
    pub data: Vec<i8>,
    /// One entry (per-tensor) or `shape[0]` entries (per-channel).
    pub scales: Vec<f64>,
}

impl QuantTensor {
    pub fn row_scale(&self, row: usize) -> f64 {
        if self.scales.len() == 1 {
            self.scales[0]
        } else {
            self.scales[row]
        }
    }

    /// Dequantize entry `idx` of a row-major tensor.
    pub fn dequantize_at(&self, idx: usize) -> f64 {
        let cols = if self.shape.len() == 2 { self.shape[1] } else { self.data.len() };
        self.row_scale(idx / cols.max(1)) * f64::from(self.data[idx])
    }
}

/// Bias tensor held in i32; each entry carries its combined scale
/// `s_weight(row) * s_input`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasTensor {
    pub shape: Vec<usize>,
    pub data: Vec<i32>,
    pub scales: Vec<f64>,
}

impl BiasTensor {
    pub fn row_scale(&self, row: usize) -> f64 {
        if self.scales.len() == 1 {
            self.scales[0]
        } else {
            self.scales[row]
        }
    }
}

/// Pruned, int8-quantized model plus everything the integer inference path
/// needs.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedModel {
    pub spec: ModelSpec,
    pub weights: BTreeMap<String, QuantTensor>,
    pub biases: BTreeMap<String, BiasTensor>,
    /// Per-site activation parameters; one entry per channel on the
    /// depth-wise chain, a single entry for vector sites.
    pub activations: BTreeMap<String, Vec<QuantParams>>,
    /// Nonzero count per weight tensor (pruning summary).
    pub nonzero_counts: BTreeMap<String, usize>,
}

fn quantize_weight_tensor(t: &Tensor, per_channel: bool) -> QuantTensor {
    if per_channel && t.shape().len() == 2 {
        let (rows, cols) = (t.shape()[0], t.shape()[1]);
        let mut scales = Vec::with_capacity(rows);
        let mut data = Vec::with_capacity(t.numel());
        for r in 0..rows {
            let row = &t.data()[r * cols..(r + 1) * cols];
            let max_abs = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let qp = QuantParams::symmetric(max_abs);
            scales.push(qp.scale);
            data.extend(row.iter().map(|&v| qp.quantize(v)));
        }
        QuantTensor {
            shape: t.shape().to_vec(),
            data,
            scales,
        }
    } else {
        let max_abs = t.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let qp = QuantParams::symmetric(max_abs);
        QuantTensor {
            shape: t.shape().to_vec(),
            data: t.data().iter().map(|&v| qp.quantize(v)).collect(),
            scales: vec![qp.scale],
        }
    }
}

fn quantize_bias_tensor(t: &Tensor, weight: &QuantTensor, s_in: &[QuantParams]) -> BiasTensor {
    // The container stores scales as f32; keep combined scales at f32
    // precision so save/load is lossless.
    let in_scale = |i: usize| {
        if s_in.len() == 1 {
            s_in[0].scale
        } else {
            s_in[i].scale
        }
    };
    let mut scales: Vec<f64> = (0..t.numel())
        .map(|i| f32_clean(weight.row_scale(i) * in_scale(i)))
        .collect();
    let data = t
        .data()
        .iter()
        .zip(&scales)
        .map(|(&v, &s)| {
            let q = (v / s).round();
            q.clamp(f64::from(i32::MIN), f64::from(i32::MAX)) as i32
        })
        .collect();
    // Collapse to a single entry when every element shares one scale.
    if scales.windows(2).all(|p| p[0] == p[1]) {
        scales.truncate(1);
    }
    BiasTensor {
        shape: t.shape().to_vec(),
        data,
        scales,
    }
}

/// Quantize trained (optionally pruned) parameters into a [`QuantizedModel`].
/// Pruned zeros stay exactly zero (symmetric weights, zero point 0).
pub fn quantize_model(
    spec: &ModelSpec,
    params: &Parameters,
    act_qparams: &BTreeMap<String, Vec<QuantParams>>,
) -> Result<QuantizedModel> {
    quantize_model_impl(spec, params, act_qparams, None)
}

/// Quantization with post-training bias correction: the systematic output
/// shift each layer inherits from weight rounding,
/// `sum((dequant(q_w) - w) * mean_input)`, folds into that layer's integer
/// bias using the calibration means.
pub fn quantize_model_corrected(
    spec: &ModelSpec,
    params: &Parameters,
    stats: &ActivationStats,
) -> Result<QuantizedModel> {
    quantize_model_impl(spec, params, &stats.qparams, Some(&stats.means))
}

fn quantize_model_impl(
    spec: &ModelSpec,
    params: &Parameters,
    act_qparams: &BTreeMap<String, Vec<QuantParams>>,
    means: Option<&BTreeMap<String, Vec<f64>>>,
) -> Result<QuantizedModel> {
    spec.validate()?;
    crate::nn::check_layout(spec, params)?;
    let need = |site: &str| -> Result<&Vec<QuantParams>> {
        act_qparams
            .get(site)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| Error::Evaluation(format!("missing calibration for site {site:?}")))
    };

    let mut weights = BTreeMap::new();
    let mut biases = BTreeMap::new();
    let mut nonzero_counts = BTreeMap::new();

    // Bias correction: shift a layer's i32 bias by the systematic output
    // offset its rounded weights produce on mean inputs. Conv rows see the
    // channel's mean at every tap; dense rows use the element-wise mean.
    let conv_correction = |qt: &QuantTensor, w: &Tensor, mean_in: &[f64]| -> Vec<f64> {
        let k = qt.shape[1];
        (0..qt.shape[0])
            .map(|c| {
                let mut delta = 0.0;
                for ki in 0..k {
                    let idx = c * k + ki;
                    delta += qt.dequantize_at(idx) - w.data()[idx];
                }
                delta * mean_in[c]
            })
            .collect()
    };
    let dense_correction = |qt: &QuantTensor, w: &Tensor, mean_in: &[f64]| -> Vec<f64> {
        let n = qt.shape[1];
        (0..qt.shape[0])
            .map(|m| {
                let mut delta = 0.0;
                for (j, &mu) in mean_in.iter().enumerate().take(n) {
                    let idx = m * n + j;
                    delta += (qt.dequantize_at(idx) - w.data()[idx]) * mu;
                }
                delta
            })
            .collect()
    };
    let apply_correction = |bt: &mut BiasTensor, offsets: &[f64]| {
        let scales = bt.scales.clone();
        let row_scale = |i: usize| if scales.len() == 1 { scales[0] } else { scales[i] };
        for (i, (b, off)) in bt.data.iter_mut().zip(offsets).enumerate() {
            let shift = (off / row_scale(i)).round();
            *b = (f64::from(*b) - shift).clamp(f64::from(i32::MIN), f64::from(i32::MAX)) as i32;
        }
    };

    for branch in &spec.branches {
        let stages = canonical_branch(branch)?;
        let mut in_site = input_site(branch.modality);
        for (i, _) in stages.iter().enumerate() {
            let (w_path, b_path) = crate::nn::conv_paths(&branch.name, i);
            let w_float = params.expect(&w_path)?;
            let qt = quantize_weight_tensor(w_float, true);
            let s_in = need(&in_site)?;
            let mut bt = quantize_bias_tensor(params.expect(&b_path)?, &qt, s_in);
            if let Some(mean_in) = means.and_then(|m| m.get(&in_site)) {
                apply_correction(&mut bt, &conv_correction(&qt, w_float, mean_in));
            }
            biases.insert(b_path.clone(), bt);
            nonzero_counts.insert(
                w_path.clone(),
                qt.data.iter().filter(|&&q| q != 0).count(),
            );
            weights.insert(w_path, qt);
            in_site = conv_site(&branch.name, i);
        }
    }

    let dims = canonical_head(spec)?;
    let mut in_site = CONCAT_SITE.to_string();
    for (i, _) in dims.iter().enumerate() {
        let (w_path, b_path) = crate::nn::dense_paths(i);
        let w_float = params.expect(&w_path)?;
        let qt = quantize_weight_tensor(w_float, false);
        let s_in = need(&in_site)?;
        let mut bt = quantize_bias_tensor(params.expect(&b_path)?, &qt, s_in);
        if let Some(mean_in) = means.and_then(|m| m.get(&in_site)) {
            apply_correction(&mut bt, &dense_correction(&qt, w_float, mean_in));
        }
        biases.insert(b_path.clone(), bt);
        nonzero_counts.insert(w_path.clone(), qt.data.iter().filter(|&&q| q != 0).count());
        weights.insert(w_path, qt);
        in_site = dense_site(i);
    }

    // Fail early if any required activation site is missing.
    for branch in &spec.branches {
        need(&input_site(branch.modality))?;
        need(&pool_site(&branch.name))?;
    }
    need(CONCAT_SITE)?;
    need(LOGIT_SITE)?;

    Ok(QuantizedModel {
        spec: spec.clone(),
        weights,
        biases,
        activations: act_qparams.clone(),
        nonzero_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::test_fixtures::{tiny_spec, window_for_spec};
    use crate::nn::{init_parameters, zeros_like_spec};
    use proptest::prelude::*;

    #[test]
    fn symmetric_example() {
        let qp = QuantParams::symmetric(1.0);
        assert_eq!(qp.scale, f64::from((1.0f64 / 127.0) as f32));
        assert_eq!(qp.zero_point, 0);
        let q = qp.quantize(0.5);
        assert_eq!(q, 64); // 63.5 rounds away from zero
        let back = qp.dequantize(q);
        assert!((back - 0.50394).abs() < 1e-5);
        assert!((back - 0.5).abs() <= qp.scale / 2.0 + 1e-12);
    }

    #[test]
    fn affine_post_relu_range() {
        let qp = QuantParams::affine(0.0, 6.35);
        assert_eq!(qp.zero_point, -128);
        assert!((qp.dequantize(-128) - 0.0).abs() < 1e-12);
        assert!((qp.dequantize(127) - 6.35).abs() <= qp.scale);
    }

    #[test]
    fn degenerate_range_hits_scale_floor() {
        let qp = QuantParams::symmetric(0.0);
        assert_eq!(qp.scale, f64::from(SCALE_FLOOR as f32));
        assert_eq!(qp.zero_point, 0);
        let qp = QuantParams::affine(0.0, 0.0);
        assert!(qp.scale >= SCALE_FLOOR * 0.99);
        assert_eq!(qp.quantize(0.0), i8::try_from(qp.zero_point).unwrap());
    }

    #[test]
    fn all_zero_tensor_quantizes_to_zero() {
        let t = Tensor::zeros(&[8]);
        let qt = quantize_weight_tensor(&t, false);
        assert!(qt.data.iter().all(|&q| q == 0));
        assert!(qt.scales[0] >= SCALE_FLOOR * 0.99);
    }

    #[test]
    fn per_channel_conv_scales_follow_row_ranges() {
        let t = Tensor::from_vec(&[2, 3], vec![0.1, -0.2, 0.05, 10.0, -5.0, 2.5]).unwrap();
        let qt = quantize_weight_tensor(&t, true);
        assert_eq!(qt.scales.len(), 2);
        assert!(qt.scales[1] > qt.scales[0] * 10.0);
        // The small-range channel keeps fine resolution.
        for (i, &v) in t.data().iter().enumerate() {
            assert!((qt.dequantize_at(i) - v).abs() <= qt.row_scale(i / 3) / 2.0 + 1e-12);
        }
    }

    #[test]
    fn calibration_is_invariant_to_duplication() {
        let spec = tiny_spec();
        let params = init_parameters(&spec, 3);
        let w = window_for_spec(&spec, 5);
        let once = calibrate_activations(&spec, &params, &[w.clone()]).unwrap();
        let many = calibrate_activations(&spec, &params, &vec![w; 100]).unwrap();
        assert_eq!(once, many);
    }

    #[test]
    fn empty_calibration_rejected() {
        let spec = tiny_spec();
        let params = init_parameters(&spec, 3);
        assert!(calibrate_activations(&spec, &params, &[]).is_err());
    }

    #[test]
    fn constant_zero_activations_get_floor_params() {
        let spec = tiny_spec();
        let params = zeros_like_spec(&spec);
        let mut w = window_for_spec(&spec, 5);
        for block in w.blocks.values_mut() {
            block.data.iter_mut().for_each(|v| *v = 0.0);
        }
        let qp = calibrate_activations(&spec, &params, &[w]).unwrap();
        for conv0 in qp.get("branch/emg/conv0").unwrap() {
            assert!(conv0.scale >= SCALE_FLOOR * 0.99);
        }
        for input in qp.get("input/EMG").unwrap() {
            assert_eq!(input.zero_point, 0);
        }
    }

    #[test]
    fn pruned_zeros_survive_quantization() {
        let spec = tiny_spec();
        let params = init_parameters(&spec, 11);
        let (pruned, mask) = crate::compress::prune_magnitude(&params, 0.5).unwrap();
        let windows: Vec<_> = (0..4).map(|i| window_for_spec(&spec, i)).collect();
        let acts = calibrate_activations(&spec, &pruned, &windows).unwrap();
        let qm = quantize_model(&spec, &pruned, &acts).unwrap();
        for (path, qt) in &qm.weights {
            let m = &mask.masks[path];
            for (q, &keep) in qt.data.iter().zip(m) {
                if keep == 0 {
                    assert_eq!(*q, 0, "{path}");
                }
            }
            assert_eq!(
                qm.nonzero_counts[path],
                qt.data.iter().filter(|&&q| q != 0).count()
            );
        }
    }

    proptest! {
        #[test]
        fn round_trip_error_within_half_scale(vs in proptest::collection::vec(-5.0f64..5.0, 1..40)) {
            let t = Tensor::from_vec(&[vs.len()], vs.clone()).unwrap();
            let qt = quantize_weight_tensor(&t, false);
            for (i, &v) in vs.iter().enumerate() {
                let back = qt.dequantize_at(i);
                prop_assert!((back - v).abs() <= qt.scales[0] / 2.0 + 1e-12);
            }
        }

        #[test]
        fn affine_round_trip_in_range(lo in -4.0f64..0.0, width in 0.1f64..8.0, frac in 0.0f64..1.0) {
            let qp = QuantParams::affine(lo, lo + width);
            let v = lo + frac * width;
            let back = qp.dequantize(qp.quantize(v));
            prop_assert!((back - v).abs() <= qp.scale / 2.0 + 1e-12);
        }
    }
}
