//! Integer inference path: int8 x int8 -> i32 accumulation with fixed-point
//! requantization. Float arithmetic appears only at the final sigmoid.
//!
//! Requantization multipliers are decomposed into a Q31 mantissa and a
//! right shift; division rounds half away from zero. This is the single
//! rounding rule of the path and makes results bit-reproducible across
//! platforms.

use crate::error::{Error, Result};
use crate::nn::{same_padding, sigmoid, Padding};
use crate::signal::Window;

use super::quant::{
    canonical_branch, canonical_head, conv_site, dense_site, input_site, pool_site,
    QuantParams, QuantizedModel, CONCAT_SITE, LOGIT_SITE,
};

/// Decompose a positive multiplier into `(mantissa, right_shift)` with
/// `multiplier ~= mantissa * 2^-31 * 2^-right_shift` and mantissa in
/// `[2^30, 2^31)`.
pub fn quantize_multiplier(multiplier: f64) -> (i32, i32) {
    assert!(
        multiplier > 0.0 && multiplier.is_finite(),
        "requant multiplier must be positive and finite"
    );
    let mut m = multiplier;
    let mut shift = 0i32;
    while m < 0.5 {
        m *= 2.0;
        shift += 1;
    }
    while m >= 1.0 {
        m /= 2.0;
        shift -= 1;
    }
    let mut mantissa = (m * f64::from(1u32 << 31) as f64).round() as i64;
    if mantissa == 1i64 << 31 {
        mantissa >>= 1;
        shift -= 1;
    }
    (mantissa as i32, shift)
}

/// `round_half_away(acc * mantissa / 2^(31 + right_shift))` in pure integer
/// arithmetic.
pub fn requantize(acc: i32, mantissa: i32, right_shift: i32) -> i32 {
    let prod = i64::from(acc) * i64::from(mantissa);
    let total_shift = 31 + right_shift;
    debug_assert!((0..63).contains(&total_shift), "shift {total_shift} out of range");
    let denom = 1i64 << total_shift;
    let q = prod / denom;
    let r = prod % denom;
    if 2 * r.abs() >= denom {
        (q + prod.signum()) as i32
    } else {
        q as i32
    }
}

struct Requant {
    mantissa: i32,
    right_shift: i32,
    zero_point: i32,
}

impl Requant {
    fn new(multiplier: f64, out: QuantParams) -> Requant {
        let (mantissa, right_shift) = quantize_multiplier(multiplier);
        Requant {
            mantissa,
            right_shift,
            zero_point: out.zero_point,
        }
    }

    fn apply(&self, acc: i32) -> i8 {
        let q = requantize(acc, self.mantissa, self.right_shift) + self.zero_point;
        q.clamp(-128, 127) as i8
    }
}

/// Run the integer path on one window, returning the FoG probability.
///
/// Per layer: int8 weights (zero point 0) against int8 activations,
/// i32 accumulators with the i32 bias folded in, then requantization to
/// the next site's parameters. Post-ReLU sites have their zero at the
/// quantized range floor, so the saturating clamp doubles as the ReLU.
pub fn quantized_forward(qm: &QuantizedModel, window: &Window) -> Result<f64> {
    let spec = &qm.spec;
    let act = |site: &str| -> Result<&[QuantParams]> {
        qm.activations
            .get(site)
            .map(Vec::as_slice)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| Error::Evaluation(format!("missing activation params for {site:?}")))
    };
    // Channel `c`'s parameters at a site (vector sites broadcast one entry).
    fn chan(qps: &[QuantParams], c: usize) -> QuantParams {
        if qps.len() == 1 {
            qps[0]
        } else {
            qps[c]
        }
    }

    let mut features: Vec<i8> = Vec::with_capacity(spec.feature_dim());
    let concat_qp = act(CONCAT_SITE)?[0];

    for branch in &spec.branches {
        let stages = canonical_branch(branch)?;
        let (channels, samples) = spec.input_geometry[&branch.modality];

        // Same normalized input the float path sees, quantized at the
        // input site with per-channel parameters.
        let input = crate::nn::branch_input(spec, branch, window)?;
        let mut in_qps = act(&input_site(branch.modality))?;
        let mut x: Vec<i8> = Vec::with_capacity(channels * samples);
        for c in 0..channels {
            let qp = chan(in_qps, c);
            x.extend(
                input.data()[c * samples..(c + 1) * samples]
                    .iter()
                    .map(|&v| qp.quantize(v)),
            );
        }
        let mut t_len = samples;

        for (i, stage) in stages.iter().enumerate() {
            let (w_path, b_path) = crate::nn::conv_paths(&branch.name, i);
            let w = &qm.weights[&w_path];
            let bias = &qm.biases[&b_path];
            let out_qps = act(&conv_site(&branch.name, i))?;

            let t_out = crate::nn::conv_out_len(t_len, stage.kernel_len, stage.stride, stage.padding);
            let pad_left = match stage.padding {
                Padding::Valid => 0usize,
                Padding::Same => same_padding(t_len, stage.kernel_len, stage.stride).0,
            };
            let mut out = vec![0i8; channels * t_out];
            for c in 0..channels {
                let in_qp = chan(in_qps, c);
                let out_qp = chan(out_qps, c);
                // Depth-wise channels never mix, so each channel carries
                // its own weight scale and activation parameters.
                let requant =
                    Requant::new(w.row_scale(c) * in_qp.scale / out_qp.scale, out_qp);
                let zp_in = in_qp.zero_point;
                let x_row = &x[c * t_len..(c + 1) * t_len];
                let w_row = &w.data[c * stage.kernel_len..(c + 1) * stage.kernel_len];
                let b = bias.data[c];
                let out_row = &mut out[c * t_out..(c + 1) * t_out];
                for (ti, o) in out_row.iter_mut().enumerate() {
                    let start = (ti * stage.stride) as isize - pad_left as isize;
                    let mut acc: i32 = b;
                    for (ki, &wv) in w_row.iter().enumerate() {
                        let idx = start + ki as isize;
                        if idx >= 0 && (idx as usize) < t_len {
                            let xv = i32::from(x_row[idx as usize]) - zp_in;
                            acc += i32::from(wv) * xv;
                        }
                    }
                    *o = requant.apply(acc);
                }
            }
            x = out;
            t_len = t_out;
            in_qps = out_qps;
        }

        // Integer mean pool: each channel's i32 sum requantizes directly
        // into the concat site, so the pooled value never drops to 8 bits
        // on the way there. The pool site stays calibrated for diagnostics.
        act(&pool_site(&branch.name))?;
        for c in 0..channels {
            let in_qp = chan(in_qps, c);
            let pool_requant = Requant::new(
                in_qp.scale / (concat_qp.scale * t_len as f64),
                concat_qp,
            );
            let row = &x[c * t_len..(c + 1) * t_len];
            let sum: i32 = row.iter().map(|&q| i32::from(q) - in_qp.zero_point).sum();
            features.push(pool_requant.apply(sum));
        }
    }

    // Head. Hidden layers requantize to their calibrated sites; the final
    // layer's i32 accumulator converts to float directly at the sigmoid,
    // so the logit never narrows to 8 bits.
    let dims = canonical_head(spec)?;
    act(LOGIT_SITE)?;
    let mut x = features;
    let mut in_qp = concat_qp;
    let mut logit = 0.0f64;
    for (i, &(in_dim, out_dim)) in dims.iter().enumerate() {
        if x.len() != in_dim {
            return Err(Error::ShapeMismatch(format!(
                "head dense {i}: got {} features, expected {in_dim}",
                x.len()
            )));
        }
        let (w_path, b_path) = crate::nn::dense_paths(i);
        let w = &qm.weights[&w_path];
        let bias = &qm.biases[&b_path];
        let last = i + 1 == dims.len();
        let zp_in = in_qp.zero_point;
        if last {
            let w_row = &w.data[..in_dim];
            let mut acc: i32 = bias.data[0];
            for (&wv, &xv) in w_row.iter().zip(&x) {
                acc += i32::from(wv) * (i32::from(xv) - zp_in);
            }
            logit = w.row_scale(0) * in_qp.scale * f64::from(acc);
        } else {
            let out_qp = act(&dense_site(i))?[0];
            let requant = Requant::new(w.row_scale(0) * in_qp.scale / out_qp.scale, out_qp);
            let mut out = vec![0i8; out_dim];
            for (m, o) in out.iter_mut().enumerate() {
                let w_row = &w.data[m * in_dim..(m + 1) * in_dim];
                let mut acc: i32 = bias.data[m];
                for (&wv, &xv) in w_row.iter().zip(&x) {
                    acc += i32::from(wv) * (i32::from(xv) - zp_in);
                }
                *o = requant.apply(acc);
            }
            x = out;
            in_qp = out_qp;
        }
    }

    // Float only at the sigmoid.
    Ok(sigmoid(logit))
}
