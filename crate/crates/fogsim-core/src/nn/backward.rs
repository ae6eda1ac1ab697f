//! Backpropagation: weighted binary cross-entropy loss and gradients for
//! every parameter.

use super::forward::{forward_cached, sigmoid};
use super::params::{conv_paths, dense_paths, zeros_like_spec, Parameters};
use super::spec::{same_padding, LayerSpec, ModelSpec, Padding};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::signal::Window;

/// Logits are clamped to this magnitude before the loss; beyond it the
/// sigmoid saturates past f64 resolution anyway.
pub const LOGIT_CLAMP: f64 = 30.0;

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Per-sample weighted BCE on the logit, plus its derivative w.r.t. the
/// logit. The positive class is weighted by `pos_weight`.
pub fn bce_loss_and_dlogit(logit: f64, target: f64, pos_weight: f64) -> (f64, f64) {
    let clamped = logit.abs() > LOGIT_CLAMP;
    let z = logit.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    let loss = pos_weight * target * softplus(-z) + (1.0 - target) * softplus(z);
    let dz = if clamped {
        0.0
    } else {
        let p = sigmoid(z);
        (1.0 - target) * p - pos_weight * target * (1.0 - p)
    };
    (loss, dz)
}

/// Mean loss and mean gradients over a labeled batch.
///
/// Gradients come back in a [`Parameters`] container with the same keying
/// as the weights. Windows must have labels assigned.
pub fn backward(
    spec: &ModelSpec,
    params: &Parameters,
    batch: &[&Window],
    pos_weight: f64,
) -> Result<(Parameters, f64)> {
    if batch.is_empty() {
        return Err(Error::Training("empty batch".into()));
    }
    let mut grads = zeros_like_spec(spec);
    let mut total_loss = 0.0;
    for window in batch {
        let target = match window.label {
            Some(l) => f64::from(u8::from(l)),
            None => return Err(Error::Training("window has no label assigned".into())),
        };
        let cache = forward_cached(spec, params, window)?;
        let (loss, dlogit) = bce_loss_and_dlogit(cache.logit, target, pos_weight);
        if !loss.is_finite() {
            return Err(Error::Training(format!(
                "non-finite loss on subject {} window at {} s",
                window.subject_id, window.start_s
            )));
        }
        total_loss += loss;
        accumulate_sample_grads(spec, params, &cache, dlogit, &mut grads)?;
    }
    let scale = 1.0 / batch.len() as f64;
    for (_, g) in grads.iter_mut() {
        for v in g.data_mut() {
            *v *= scale;
        }
    }
    Ok((grads, total_loss * scale))
}

fn accumulate_sample_grads(
    spec: &ModelSpec,
    params: &Parameters,
    cache: &super::forward::ForwardCache,
    dlogit: f64,
    grads: &mut Parameters,
) -> Result<()> {
    // Head, walked backwards. `head_layer_inputs` recorded one entry per
    // Dense and ReLU layer in forward order.
    let n_dense = spec
        .head
        .iter()
        .filter(|l| matches!(l, LayerSpec::Dense { .. }))
        .count();
    let mut dense_idx = n_dense;
    let mut input_idx = cache.head_layer_inputs.len();
    let mut grad = Tensor::from_vec(&[1], vec![dlogit])?;

    for layer in spec.head.iter().rev() {
        match layer {
            LayerSpec::Sigmoid => {} // folded into dlogit
            LayerSpec::ReLU => {
                input_idx -= 1;
                let input = &cache.head_layer_inputs[input_idx];
                let data = grad
                    .data()
                    .iter()
                    .zip(input.data())
                    .map(|(&g, &x)| if x > 0.0 { g } else { 0.0 })
                    .collect();
                grad = Tensor::from_vec(grad.shape(), data)?;
            }
            LayerSpec::Dense { in_dim, out_dim } => {
                dense_idx -= 1;
                input_idx -= 1;
                let input = &cache.head_layer_inputs[input_idx];
                let (w_path, b_path) = dense_paths(dense_idx);
                let w = params.expect(&w_path)?;
                {
                    let gw = grads.get_mut(&w_path).expect("layout");
                    for i in 0..*out_dim {
                        let gi = grad.data()[i];
                        let row = gw.row_mut(i);
                        for (rv, xv) in row.iter_mut().zip(input.data()) {
                            *rv += gi * xv;
                        }
                    }
                }
                {
                    let gb = grads.get_mut(&b_path).expect("layout");
                    for (bv, gv) in gb.data_mut().iter_mut().zip(grad.data()) {
                        *bv += gv;
                    }
                }
                // dL/dx = W^T g
                let mut dx = vec![0.0; *in_dim];
                for i in 0..*out_dim {
                    let gi = grad.data()[i];
                    for (dv, wv) in dx.iter_mut().zip(w.row(i)) {
                        *dv += gi * wv;
                    }
                }
                grad = Tensor::from_vec(&[*in_dim], dx)?;
            }
            LayerSpec::Concat { .. } => {
                // Split the feature gradient back to the branches.
                let mut offset = 0usize;
                for (b_idx, branch) in spec.branches.iter().enumerate() {
                    let dim = spec.branch_output_dim(branch);
                    let slice = grad.data()[offset..offset + dim].to_vec();
                    offset += dim;
                    let gout = Tensor::from_vec(&[dim], slice)?;
                    backprop_branch(spec, params, cache, b_idx, gout, grads)?;
                }
            }
            other => {
                return Err(Error::ShapeMismatch(format!(
                    "unsupported head layer {other:?}"
                )))
            }
        }
    }
    Ok(())
}

fn backprop_branch(
    spec: &ModelSpec,
    params: &Parameters,
    cache: &super::forward::ForwardCache,
    branch_idx: usize,
    mut grad: Tensor,
    grads: &mut Parameters,
) -> Result<()> {
    let branch = &spec.branches[branch_idx];
    let inputs = &cache.branch_layer_inputs[branch_idx];
    let mut conv_idx = branch
        .layers
        .iter()
        .filter(|l| matches!(l, LayerSpec::DepthwiseConv1D { .. }))
        .count();

    for (layer_idx, layer) in branch.layers.iter().enumerate().rev() {
        let input = &inputs[layer_idx];
        match layer {
            LayerSpec::GlobalStats => {
                // out[c] = mean_t in[c,t]  =>  dx[c,t] = g[c]/T
                let [c, t] = [input.shape()[0], input.shape()[1]];
                let mut dx = Tensor::zeros(&[c, t]);
                for ch in 0..c {
                    let g = grad.data()[ch] / t as f64;
                    for v in dx.row_mut(ch) {
                        *v = g;
                    }
                }
                grad = dx;
            }
            LayerSpec::ReLU => {
                let data = grad
                    .data()
                    .iter()
                    .zip(input.data())
                    .map(|(&g, &x)| if x > 0.0 { g } else { 0.0 })
                    .collect();
                grad = Tensor::from_vec(grad.shape(), data)?;
            }
            LayerSpec::DepthwiseConv1D {
                kernel_len,
                stride,
                padding,
                ..
            } => {
                conv_idx -= 1;
                let (w_path, b_path) = conv_paths(&branch.name, conv_idx);
                let w = params.expect(&w_path)?;
                let [c, t_in] = [input.shape()[0], input.shape()[1]];
                let t_out = grad.shape()[1];
                let pad_left = match padding {
                    Padding::Valid => 0usize,
                    Padding::Same => same_padding(t_in, *kernel_len, *stride).0,
                };
                let mut dx = Tensor::zeros(&[c, t_in]);
                {
                    let gw = grads.get_mut(&w_path).expect("layout");
                    for ch in 0..c {
                        let x_row = input.row(ch);
                        let g_row = grad.row(ch);
                        let gw_row = gw.row_mut(ch);
                        for ti in 0..t_out {
                            let g = g_row[ti];
                            if g == 0.0 {
                                continue;
                            }
                            let start = (ti * stride) as isize - pad_left as isize;
                            for (ki, gw_k) in gw_row.iter_mut().enumerate() {
                                let idx = start + ki as isize;
                                if idx >= 0 && (idx as usize) < t_in {
                                    *gw_k += g * x_row[idx as usize];
                                }
                            }
                        }
                    }
                }
                {
                    let gb = grads.get_mut(&b_path).expect("layout");
                    for ch in 0..c {
                        gb.data_mut()[ch] += grad.row(ch).iter().sum::<f64>();
                    }
                }
                for ch in 0..c {
                    let w_row = w.row(ch);
                    let g_row = grad.row(ch);
                    let dx_row = dx.row_mut(ch);
                    for ti in 0..t_out {
                        let g = g_row[ti];
                        if g == 0.0 {
                            continue;
                        }
                        let start = (ti * stride) as isize - pad_left as isize;
                        for (ki, &wv) in w_row.iter().enumerate() {
                            let idx = start + ki as isize;
                            if idx >= 0 && (idx as usize) < t_in {
                                dx_row[idx as usize] += g * wv;
                            }
                        }
                    }
                }
                grad = dx;
            }
            other => {
                return Err(Error::ShapeMismatch(format!(
                    "unsupported branch layer {other:?}"
                )))
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::{init_parameters, zeros_like_spec};
    use crate::nn::test_fixtures::{gradient_check, tiny_spec, tiny_window};

    #[test]
    fn zero_params_single_sample_loss_is_ln2() {
        let spec = tiny_spec();
        let params = zeros_like_spec(&spec);
        let mut w = tiny_window(3);
        w.label = Some(true);
        let (_, loss) = backward(&spec, &params, &[&w], 1.0).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        w.label = Some(false);
        let (_, loss) = backward(&spec, &params, &[&w], 1.0).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn duplicated_batch_leaves_loss_and_grads_unchanged() {
        let spec = tiny_spec();
        let params = init_parameters(&spec, 17);
        let mut a = tiny_window(4);
        a.label = Some(true);
        let mut b = tiny_window(5);
        b.label = Some(false);

        let (g1, l1) = backward(&spec, &params, &[&a, &b], 2.0).unwrap();
        let (g2, l2) = backward(&spec, &params, &[&a, &b, &a, &b], 2.0).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (path, t1) in g1.iter() {
            let t2 = g2.get(path).unwrap();
            for (x, y) in t1.data().iter().zip(t2.data()) {
                assert!((x - y).abs() < 1e-12, "{path}");
            }
        }
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let spec = tiny_spec();
        let params = crate::nn::test_fixtures::jittered_params(&spec, 29);
        let mut w1 = tiny_window(6);
        w1.label = Some(true);
        let mut w2 = tiny_window(7);
        w2.label = Some(false);
        let max_rel = gradient_check(&spec, &params, &[&w1, &w2], 1.3, 1e-5);
        assert!(max_rel <= 1e-4, "max relative error {max_rel}");
    }

    #[test]
    fn unlabeled_window_rejected() {
        let spec = tiny_spec();
        let params = init_parameters(&spec, 1);
        let w = tiny_window(1); // label unset
        assert!(backward(&spec, &params, &[&w], 1.0).is_err());
    }

    #[test]
    fn clamped_logit_keeps_loss_finite() {
        let (loss, dz) = bce_loss_and_dlogit(1e6, 0.0, 1.0);
        assert!(loss.is_finite());
        assert_eq!(dz, 0.0);
        let (loss, _) = bce_loss_and_dlogit(-1e6, 1.0, 3.0);
        assert!(loss.is_finite());
    }
}
