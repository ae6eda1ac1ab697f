//! Global magnitude pruning.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::{Parameters, Tensor};

/// Per-tensor keep mask (1 = kept, 0 = pruned), keyed like the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PruneMask {
    pub masks: BTreeMap<String, Vec<u8>>,
}

impl PruneMask {
    /// All-ones mask for the given parameters.
    pub fn full(params: &Parameters) -> Self {
        let masks = params
            .weight_paths()
            .into_iter()
            .map(|p| {
                let n = params.get(&p).expect("weight path").numel();
                (p, vec![1u8; n])
            })
            .collect();
        PruneMask { masks }
    }

    pub fn nonzero_count(&self) -> usize {
        self.masks
            .values()
            .map(|m| m.iter().filter(|&&b| b == 1).count())
            .sum()
    }

    pub fn total(&self) -> usize {
        self.masks.values().map(Vec::len).sum()
    }
}

/// Zero out the smallest-magnitude fraction of the weights, ranked globally
/// across all weight tensors. Biases are exempt. Returns the pruned
/// parameters and the keep mask; the achieved sparsity is within one
/// weight of the target.
pub fn prune_magnitude(params: &Parameters, sparsity: f64) -> Result<(Parameters, PruneMask)> {
    if !(0.0..1.0).contains(&sparsity) {
        return Err(Error::InvalidConfig(format!(
            "sparsity must be in [0, 1), got {sparsity}"
        )));
    }
    let mut pruned = params.clone();
    let mut mask = PruneMask::full(params);
    if sparsity == 0.0 {
        return Ok((pruned, mask));
    }

    // Global ranking by |w|; ties broken by (path, index) so the result is
    // deterministic.
    let weight_paths = params.weight_paths();
    let mut ranked: Vec<(f64, usize, usize)> = Vec::new(); // (|w|, path idx, elem idx)
    for (pi, path) in weight_paths.iter().enumerate() {
        let t = params.get(path).expect("weight path");
        for (i, &v) in t.data().iter().enumerate() {
            ranked.push((v.abs(), pi, i));
        }
    }
    let to_zero = ((ranked.len() as f64) * sparsity).round() as usize;
    ranked.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("finite weights")
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    for &(_, pi, i) in ranked.iter().take(to_zero) {
        let path = &weight_paths[pi];
        pruned.get_mut(path).expect("weight path").data_mut()[i] = 0.0;
        mask.masks.get_mut(path).expect("mask path")[i] = 0;
    }
    Ok((pruned, mask))
}

/// Re-apply a mask: `out = mask .* tensor` elementwise.
pub fn apply_mask(tensor: &Tensor, mask: &[u8]) -> Tensor {
    let data = tensor
        .data()
        .iter()
        .zip(mask)
        .map(|(&v, &m)| if m == 1 { v } else { 0.0 })
        .collect();
    Tensor::from_vec(tensor.shape(), data).expect("same shape")
}
