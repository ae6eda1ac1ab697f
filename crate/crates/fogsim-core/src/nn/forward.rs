//! Forward pass: layer primitives and the full multi-branch network.

use super::params::{conv_paths, dense_paths, Parameters};
use super::spec::{conv_out_len, same_padding, BranchSpec, LayerSpec, ModelSpec, Padding};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::signal::Window;

/// Per-channel 1-D correlation:
/// `out[c,t] = bias[c] + sum_k x[c, t*stride + k] * kernel[c,k]`.
pub fn depthwise_conv1d_forward(
    x: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: Padding,
) -> Result<Tensor> {
    let [c, t] = two_dims(x, "conv input")?;
    let [kc, k] = two_dims(kernel, "conv kernel")?;
    if kc != c || bias.shape() != [c] {
        return Err(Error::ShapeMismatch(format!(
            "conv: input {c} channels, kernel {kc} channels, bias {:?}",
            bias.shape()
        )));
    }
    if stride == 0 {
        return Err(Error::ShapeMismatch("conv stride must be >= 1".into()));
    }
    let t_out = conv_out_len(t, k, stride, padding);
    if t_out == 0 {
        return Err(Error::ShapeMismatch(format!(
            "conv: kernel {k} does not fit {t} samples"
        )));
    }
    let (pad_left, _) = match padding {
        Padding::Valid => (0usize, 0usize),
        Padding::Same => same_padding(t, k, stride),
    };

    let mut out = Tensor::zeros(&[c, t_out]);
    for ch in 0..c {
        let row = x.row(ch);
        let taps = kernel.row(ch);
        let b = bias.data()[ch];
        let out_row = out.row_mut(ch);
        for (ti, o) in out_row.iter_mut().enumerate() {
            let start = (ti * stride) as isize - pad_left as isize;
            let mut acc = b;
            for (ki, &w) in taps.iter().enumerate() {
                let idx = start + ki as isize;
                if idx >= 0 && (idx as usize) < t {
                    acc += row[idx as usize] * w;
                }
            }
            *o = acc;
        }
    }
    Ok(out)
}

/// Affine layer `out = W x + b` with `W: [M, N]`, `x: [N]`, `b: [M]`.
pub fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let [m, n] = two_dims(w, "dense weight")?;
    if x.shape() != [n] || b.shape() != [m] {
        return Err(Error::ShapeMismatch(format!(
            "dense: W {:?}, x {:?}, b {:?}",
            w.shape(),
            x.shape(),
            b.shape()
        )));
    }
    let mut out = Tensor::zeros(&[m]);
    let xs = x.data();
    for (i, o) in out.data_mut().iter_mut().enumerate() {
        let row = w.row(i);
        let mut acc = b.data()[i];
        for (wv, xv) in row.iter().zip(xs) {
            acc += wv * xv;
        }
        *o = acc;
    }
    Ok(out)
}

pub fn relu(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor::from_vec(x.shape(), data).expect("same shape")
}

/// Mean pool over time: `[C, T] -> [C]`.
pub fn global_mean(x: &Tensor) -> Result<Tensor> {
    let [c, t] = two_dims(x, "pool input")?;
    let mut out = Tensor::zeros(&[c]);
    for ch in 0..c {
        out.data_mut()[ch] = x.row(ch).iter().sum::<f64>() / t as f64;
    }
    Ok(out)
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn two_dims(t: &Tensor, what: &str) -> Result<[usize; 2]> {
    match t.shape() {
        [a, b] => Ok([*a, *b]),
        other => Err(Error::ShapeMismatch(format!(
            "{what} must be 2-D, got {other:?}"
        ))),
    }
}

/// Extract one branch's input tensor from a window, checking geometry.
pub fn branch_input(spec: &ModelSpec, branch: &BranchSpec, window: &Window) -> Result<Tensor> {
    let (channels, samples) = spec.input_geometry[&branch.modality];
    let block = window.block(branch.modality).ok_or_else(|| {
        Error::ShapeMismatch(format!(
            "window has no {} block for branch {}",
            branch.modality, branch.name
        ))
    })?;
    if block.channels.len() != channels || block.samples_per_channel != samples {
        return Err(Error::ShapeMismatch(format!(
            "window {} block is {}x{}, model expects {channels}x{samples}",
            branch.modality,
            block.channels.len(),
            block.samples_per_channel
        )));
    }
    let scale = spec.input_scale(branch.modality);
    if scale == 1.0 {
        Tensor::from_vec(&[channels, samples], block.data.clone())
    } else {
        Tensor::from_vec(
            &[channels, samples],
            block.data.iter().map(|v| v / scale).collect(),
        )
    }
}

/// All intermediate activations of one forward pass, kept for backprop.
pub struct ForwardCache {
    /// Per branch: the input to each layer, in layer order.
    pub branch_layer_inputs: Vec<Vec<Tensor>>,
    /// Per branch: pooled output.
    pub branch_outputs: Vec<Tensor>,
    /// Concatenated feature vector.
    pub features: Tensor,
    /// Input to each head layer after the concat.
    pub head_layer_inputs: Vec<Tensor>,
    /// Pre-sigmoid output.
    pub logit: f64,
    pub prob: f64,
}

fn run_branch(
    spec: &ModelSpec,
    branch: &BranchSpec,
    params: &Parameters,
    window: &Window,
    cache: Option<&mut Vec<Tensor>>,
) -> Result<Tensor> {
    let mut x = branch_input(spec, branch, window)?;
    let mut conv_idx = 0usize;
    let mut inputs = cache;
    for layer in &branch.layers {
        if let Some(inputs) = inputs.as_deref_mut() {
            inputs.push(x.clone());
        }
        x = match layer {
            LayerSpec::DepthwiseConv1D {
                stride, padding, ..
            } => {
                let (w_path, b_path) = conv_paths(&branch.name, conv_idx);
                conv_idx += 1;
                depthwise_conv1d_forward(
                    &x,
                    params.expect(&w_path)?,
                    params.expect(&b_path)?,
                    *stride,
                    *padding,
                )?
            }
            LayerSpec::ReLU => relu(&x),
            LayerSpec::GlobalStats => global_mean(&x)?,
            other => {
                return Err(Error::ShapeMismatch(format!(
                    "layer {other:?} not valid inside a branch"
                )))
            }
        };
    }
    Ok(x)
}

fn run_model(
    spec: &ModelSpec,
    params: &Parameters,
    window: &Window,
    mut cache: Option<&mut ForwardCache>,
) -> Result<(f64, f64)> {
    // Branches, in spec order.
    let mut branch_outputs = Vec::with_capacity(spec.branches.len());
    for branch in &spec.branches {
        let layer_inputs = match cache.as_deref_mut() {
            Some(c) => {
                c.branch_layer_inputs.push(Vec::with_capacity(branch.layers.len()));
                Some(c.branch_layer_inputs.last_mut().expect("just pushed"))
            }
            None => None,
        };
        let out = run_branch(spec, branch, params, window, layer_inputs)?;
        branch_outputs.push(out);
    }

    // Concat along the feature axis.
    let mut feature_data = Vec::with_capacity(spec.feature_dim());
    for out in &branch_outputs {
        feature_data.extend_from_slice(out.data());
    }
    let features = Tensor::from_vec(&[feature_data.len()], feature_data)?;

    if let Some(c) = cache.as_deref_mut() {
        c.branch_outputs = branch_outputs;
        c.features = features.clone();
    }

    // Head.
    let mut x = features;
    let mut dense_idx = 0usize;
    let mut logit = f64::NAN;
    for layer in &spec.head {
        match layer {
            LayerSpec::Concat { .. } => continue,
            LayerSpec::Dense { .. } => {
                if let Some(c) = cache.as_deref_mut() {
                    c.head_layer_inputs.push(x.clone());
                }
                let (w_path, b_path) = dense_paths(dense_idx);
                dense_idx += 1;
                x = dense_forward(&x, params.expect(&w_path)?, params.expect(&b_path)?)?;
            }
            LayerSpec::ReLU => {
                if let Some(c) = cache.as_deref_mut() {
                    c.head_layer_inputs.push(x.clone());
                }
                x = relu(&x);
            }
            LayerSpec::Sigmoid => {
                logit = x.data()[0];
            }
            other => {
                return Err(Error::ShapeMismatch(format!(
                    "unsupported head layer {other:?}"
                )))
            }
        }
    }
    if logit.is_nan() && x.numel() == 1 {
        logit = x.data()[0];
    }
    let prob = sigmoid(logit);
    if let Some(c) = cache {
        c.logit = logit;
        c.prob = prob;
    }
    Ok((logit, prob))
}

/// Run the model on one window, returning the FoG probability.
pub fn forward(spec: &ModelSpec, params: &Parameters, window: &Window) -> Result<f64> {
    Ok(run_model(spec, params, window, None)?.1)
}

/// Forward pass that also returns every intermediate needed by backprop.
pub fn forward_cached(
    spec: &ModelSpec,
    params: &Parameters,
    window: &Window,
) -> Result<ForwardCache> {
    let mut cache = ForwardCache {
        branch_layer_inputs: Vec::with_capacity(spec.branches.len()),
        branch_outputs: Vec::new(),
        features: Tensor::zeros(&[0]),
        head_layer_inputs: Vec::new(),
        logit: 0.0,
        prob: 0.0,
    };
    run_model(spec, params, window, Some(&mut cache))?;
    Ok(cache)
}

/// Pooled activations of every branch; used to check branch isolation.
pub fn branch_activations(
    spec: &ModelSpec,
    params: &Parameters,
    window: &Window,
) -> Result<Vec<(String, Tensor)>> {
    let mut out = Vec::with_capacity(spec.branches.len());
    for branch in &spec.branches {
        let act = run_branch(spec, branch, params, window, None)?;
        out.push((branch.name.clone(), act));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::init_parameters;
    use crate::nn::test_fixtures::{tiny_spec, tiny_window};
    use crate::signal::ModalityKind;

    fn t2(shape: [usize; 2], data: &[f64]) -> Tensor {
        Tensor::from_vec(&shape, data.to_vec()).unwrap()
    }

    fn t1(data: &[f64]) -> Tensor {
        Tensor::from_vec(&[data.len()], data.to_vec()).unwrap()
    }

    #[test]
    fn conv_identity_tap() {
        let x = t2([1, 4], &[1.0, 2.0, 3.0, 4.0]);
        let k = t2([1, 3], &[0.0, 1.0, 0.0]);
        let b = t1(&[0.0]);
        let out = depthwise_conv1d_forward(&x, &k, &b, 1, Padding::Valid).unwrap();
        assert_eq!(out.data(), &[2.0, 3.0]);
    }

    #[test]
    fn conv_difference_kernel() {
        let x = t2([1, 4], &[1.0, 2.0, 3.0, 4.0]);
        let k = t2([1, 3], &[1.0, 0.0, -1.0]);
        let b = t1(&[0.0]);
        let out = depthwise_conv1d_forward(&x, &k, &b, 1, Padding::Valid).unwrap();
        assert_eq!(out.data(), &[-2.0, -2.0]);
    }

    #[test]
    fn conv_zero_kernel_gives_bias() {
        let x = t2([2, 5], &[1.0, -2.0, 3.0, 0.5, 9.0, 4.0, 4.0, 4.0, 4.0, 4.0]);
        let k = t2([2, 2], &[0.0; 4]);
        let b = t1(&[3.5, -1.0]);
        let out = depthwise_conv1d_forward(&x, &k, &b, 2, Padding::Valid).unwrap();
        assert_eq!(out.row(0), &[3.5, 3.5]);
        assert_eq!(out.row(1), &[-1.0, -1.0]);
    }

    #[test]
    fn conv_same_padding_covers_all_positions() {
        let x = t2([1, 5], &[1.0, 1.0, 1.0, 1.0, 1.0]);
        let k = t2([1, 3], &[1.0, 1.0, 1.0]);
        let b = t1(&[0.0]);
        let out = depthwise_conv1d_forward(&x, &k, &b, 1, Padding::Same).unwrap();
        // Edges see two taps, the middle sees three.
        assert_eq!(out.data(), &[2.0, 3.0, 3.0, 3.0, 2.0]);
    }

    #[test]
    fn conv_shape_mismatch_rejected() {
        let x = t2([2, 4], &[0.0; 8]);
        let k = t2([1, 3], &[0.0; 3]);
        let b = t1(&[0.0]);
        assert!(depthwise_conv1d_forward(&x, &k, &b, 1, Padding::Valid).is_err());
    }

    #[test]
    fn dense_identity() {
        let x = t1(&[3.0, -1.5]);
        let w = t2([2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let b = t1(&[0.0, 0.0]);
        assert_eq!(dense_forward(&x, &w, &b).unwrap().data(), x.data());
    }

    #[test]
    fn dense_hand_example() {
        let x = t1(&[1.0, 2.0]);
        let w = t2([2, 2], &[1.0, 1.0, 1.0, -1.0]);
        let b = t1(&[0.0, 1.0]);
        assert_eq!(dense_forward(&x, &w, &b).unwrap().data(), &[3.0, 0.0]);
    }

    #[test]
    fn dense_dimension_mismatch_rejected() {
        let x = t1(&[1.0, 2.0, 3.0]);
        let w = t2([2, 2], &[0.0; 4]);
        let b = t1(&[0.0, 0.0]);
        assert!(dense_forward(&x, &w, &b).is_err());
    }

    #[test]
    fn zero_parameters_give_half() {
        let spec = tiny_spec();
        let params = crate::nn::params::zeros_like_spec(&spec);
        let w = tiny_window(1);
        assert_eq!(forward(&spec, &params, &w).unwrap(), 0.5);
    }

    #[test]
    fn branches_are_isolated() {
        // Perturbing an EMG-branch weight changes the output but leaves the
        // other branches' activations untouched.
        let spec = ModelSpec::for_geometry_sized(
            {
                let mut g = std::collections::BTreeMap::new();
                g.insert(ModalityKind::Eeg, (2, 16));
                g.insert(ModalityKind::Emg, (1, 16));
                g
            },
            &[4, 2],
            3,
            3,
            1,
            1,
            &[4, 2],
        );
        spec.validate().unwrap();
        let params = init_parameters(&spec, 42);
        let w = crate::nn::test_fixtures::window_for_spec(&spec, 7);

        let before_out = forward(&spec, &params, &w).unwrap();
        let before_acts = branch_activations(&spec, &params, &w).unwrap();

        let mut perturbed = params.clone();
        perturbed
            .get_mut("branch/emg/conv0/weight")
            .unwrap()
            .data_mut()[0] += 0.5;

        let after_out = forward(&spec, &perturbed, &w).unwrap();
        let after_acts = branch_activations(&spec, &perturbed, &w).unwrap();

        assert_ne!(before_out, after_out);
        for ((name_a, a), (_, b)) in before_acts.iter().zip(&after_acts) {
            if name_a.starts_with("eeg") {
                assert_eq!(a.data(), b.data(), "EEG branch {name_a} changed");
            }
        }
        assert_ne!(
            before_acts.last().unwrap().1.data(),
            after_acts.last().unwrap().1.data(),
            "EMG branch activation should change"
        );
    }

    #[test]
    fn geometry_mismatch_rejected() {
        let spec = tiny_spec();
        let params = init_parameters(&spec, 1);
        let mut w = tiny_window(1);
        // Corrupt the window: wrong sample count.
        let block = w.blocks.get_mut(&ModalityKind::Emg).unwrap();
        block.samples_per_channel -= 1;
        block.data.truncate(block.data.len() - block.channels.len());
        assert!(forward(&spec, &params, &w).is_err());
    }
}
