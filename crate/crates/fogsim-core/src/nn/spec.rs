//! Architecture description of the multi-branch depth-wise CNN.
//!
//! Each modality feeds one or more branches of depth-wise 1-D convolutions
//! (EEG gets two parallel branches with different kernel lengths, one tuned
//! to slow content and one to fast local structure; EMG and ACC get one
//! branch each). Branch outputs are mean-pooled over time, concatenated,
//! and fed to a three-layer fully connected head with a sigmoid output.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::signal::ModalityKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Valid,
    Same,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum LayerSpec {
    DepthwiseConv1D {
        kernel_len: usize,
        stride: usize,
        channels: usize,
        padding: Padding,
    },
    ReLU,
    Concat {
        axis: usize,
    },
    Dense {
        in_dim: usize,
        out_dim: usize,
    },
    /// Mean pool over the time axis: `[C, T] -> [C]`.
    GlobalStats,
    Sigmoid,
}

/// One convolutional path for one modality.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BranchSpec {
    pub modality: ModalityKind,
    /// Stable name used in parameter paths, e.g. `eeg_slow`.
    pub name: String,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelSpec {
    pub branches: Vec<BranchSpec>,
    /// Head sequence: `Concat` then Dense/ReLU pairs ending in a single
    /// sigmoid output.
    pub head: Vec<LayerSpec>,
    /// Input geometry per modality: (channels, samples) for one window.
    pub input_geometry: BTreeMap<ModalityKind, (usize, usize)>,
    /// Per-modality input normalization: samples are divided by this
    /// constant on entry so all branches see O(1) inputs regardless of the
    /// sensor's native unit.
    #[serde(default = "default_input_scales")]
    pub input_scales: BTreeMap<ModalityKind, f64>,
}

fn default_input_scales() -> BTreeMap<ModalityKind, f64> {
    BTreeMap::new()
}

/// Output length of a 1-D convolution.
pub fn conv_out_len(t: usize, kernel_len: usize, stride: usize, padding: Padding) -> usize {
    match padding {
        Padding::Valid => {
            if t < kernel_len {
                0
            } else {
                (t - kernel_len) / stride + 1
            }
        }
        Padding::Same => t.div_ceil(stride),
    }
}

/// Symmetric zero padding for `same` convolutions: total pad so the output
/// covers `ceil(T/stride)` positions; the left side gets the smaller half.
pub fn same_padding(t: usize, kernel_len: usize, stride: usize) -> (usize, usize) {
    let out = t.div_ceil(stride);
    let needed = ((out - 1) * stride + kernel_len).saturating_sub(t);
    let left = needed / 2;
    (left, needed - left)
}

impl ModelSpec {
    /// Default architecture for the given input geometry.
    pub fn for_geometry(geometry: BTreeMap<ModalityKind, (usize, usize)>) -> ModelSpec {
        Self::for_geometry_sized(geometry, &[32, 8], 16, 16, 2, 2, &[64, 32])
    }

    /// Default architecture with explicit sizing knobs.
    pub fn for_geometry_sized(
        geometry: BTreeMap<ModalityKind, (usize, usize)>,
        eeg_kernels: &[usize],
        emg_kernel: usize,
        acc_kernel: usize,
        conv_layers: usize,
        stride: usize,
        head_hidden: &[usize],
    ) -> ModelSpec {
        let mut branches = Vec::new();
        let mut push_branch = |modality: ModalityKind, name: &str, kernel: usize| {
            let Some(&(channels, _)) = geometry.get(&modality) else {
                return;
            };
            let mut layers = Vec::new();
            for _ in 0..conv_layers {
                layers.push(LayerSpec::DepthwiseConv1D {
                    kernel_len: kernel,
                    stride,
                    channels,
                    padding: Padding::Valid,
                });
                layers.push(LayerSpec::ReLU);
            }
            layers.push(LayerSpec::GlobalStats);
            branches.push(BranchSpec {
                modality,
                name: name.to_string(),
                layers,
            });
        };
        push_branch(ModalityKind::Eeg, "eeg_slow", eeg_kernels[0]);
        push_branch(ModalityKind::Eeg, "eeg_fast", eeg_kernels[1]);
        push_branch(ModalityKind::Emg, "emg", emg_kernel);
        push_branch(ModalityKind::Acc, "acc", acc_kernel);

        let feature_dim: usize = branches
            .iter()
            .map(|b| geometry[&b.modality].0)
            .sum();

        let mut head = vec![LayerSpec::Concat { axis: 0 }];
        let mut in_dim = feature_dim;
        for &h in head_hidden {
            head.push(LayerSpec::Dense {
                in_dim,
                out_dim: h,
            });
            head.push(LayerSpec::ReLU);
            in_dim = h;
        }
        head.push(LayerSpec::Dense { in_dim, out_dim: 1 });
        head.push(LayerSpec::Sigmoid);

        ModelSpec {
            branches,
            head,
            input_geometry: geometry,
            input_scales: BTreeMap::new(),
        }
    }

    /// Normalization constant for a modality; 1.0 when unset.
    pub fn input_scale(&self, modality: ModalityKind) -> f64 {
        self.input_scales.get(&modality).copied().unwrap_or(1.0)
    }

    /// The default per-modality normalization, matching the synthetic
    /// cohort's baseline amplitudes (microvolts for EEG/EMG, g for ACC).
    pub fn default_input_scales() -> BTreeMap<ModalityKind, f64> {
        let mut s = BTreeMap::new();
        s.insert(ModalityKind::Eeg, 20.0);
        s.insert(ModalityKind::Emg, 30.0);
        s.insert(ModalityKind::Acc, 0.05);
        s
    }

    /// The default geometry of a 3 s window: 4 EEG channels at 500 Hz,
    /// 2 EMG channels at 1 kHz, 6 ACC channels at 100 Hz.
    pub fn default_geometry() -> BTreeMap<ModalityKind, (usize, usize)> {
        let mut g = BTreeMap::new();
        g.insert(ModalityKind::Eeg, (4, 1500));
        g.insert(ModalityKind::Emg, (2, 3000));
        g.insert(ModalityKind::Acc, (6, 300));
        g
    }

    pub fn default_spec() -> ModelSpec {
        let mut spec = Self::for_geometry(Self::default_geometry());
        spec.input_scales = Self::default_input_scales();
        spec
    }

    /// Restrict the spec to a subset of modalities, rebuilding the head for
    /// the reduced feature dimension. Branch layer structure is preserved.
    pub fn restrict_to(&self, modalities: &[ModalityKind]) -> Result<ModelSpec> {
        if modalities.is_empty() {
            return Err(Error::InvalidConfig("empty modality subset".into()));
        }
        let branches: Vec<BranchSpec> = self
            .branches
            .iter()
            .filter(|b| modalities.contains(&b.modality))
            .cloned()
            .collect();
        if branches.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "no branches left for modality subset {modalities:?}"
            )));
        }
        let geometry: BTreeMap<_, _> = self
            .input_geometry
            .iter()
            .filter(|(m, _)| modalities.contains(m))
            .map(|(m, g)| (*m, *g))
            .collect();
        let feature_dim: usize = branches.iter().map(|b| geometry[&b.modality].0).sum();

        // Rebuild the head: same hidden sizes, new input width.
        let mut head = Vec::with_capacity(self.head.len());
        let mut in_dim = feature_dim;
        for layer in &self.head {
            match layer {
                LayerSpec::Concat { axis } => head.push(LayerSpec::Concat { axis: *axis }),
                LayerSpec::Dense { out_dim, .. } => {
                    head.push(LayerSpec::Dense {
                        in_dim,
                        out_dim: *out_dim,
                    });
                    in_dim = *out_dim;
                }
                other => head.push(other.clone()),
            }
        }
        let input_scales: BTreeMap<_, _> = self
            .input_scales
            .iter()
            .filter(|(m, _)| modalities.contains(m))
            .map(|(m, s)| (*m, *s))
            .collect();
        let spec = ModelSpec {
            branches,
            head,
            input_geometry: geometry,
            input_scales,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn modalities(&self) -> Vec<ModalityKind> {
        let mut seen = Vec::new();
        for b in &self.branches {
            if !seen.contains(&b.modality) {
                seen.push(b.modality);
            }
        }
        seen
    }

    /// Feature length a branch contributes after pooling.
    pub fn branch_output_dim(&self, branch: &BranchSpec) -> usize {
        self.input_geometry[&branch.modality].0
    }

    pub fn feature_dim(&self) -> usize {
        self.branches.iter().map(|b| self.branch_output_dim(b)).sum()
    }

    /// Check that dimensions chain consistently and the topology rules hold.
    pub fn validate(&self) -> Result<()> {
        if self.branches.is_empty() {
            return Err(Error::InvalidConfig("model needs at least one branch".into()));
        }

        // Per-modality branch-count rules: EEG carries two branches with
        // distinct kernel lengths, EMG and ACC one each.
        for modality in ModalityKind::ALL {
            let of_modality: Vec<&BranchSpec> = self
                .branches
                .iter()
                .filter(|b| b.modality == modality)
                .collect();
            if of_modality.is_empty() {
                continue;
            }
            if !self.input_geometry.contains_key(&modality) {
                return Err(Error::InvalidConfig(format!(
                    "branch for {modality} has no input geometry"
                )));
            }
            match modality {
                ModalityKind::Eeg => {
                    if of_modality.len() != 2 {
                        return Err(Error::InvalidConfig(format!(
                            "EEG needs exactly 2 branches, got {}",
                            of_modality.len()
                        )));
                    }
                    let k0 = first_kernel(of_modality[0]);
                    let k1 = first_kernel(of_modality[1]);
                    if k0.is_some() && k0 == k1 {
                        return Err(Error::InvalidConfig(
                            "EEG branches must use different kernel lengths".into(),
                        ));
                    }
                }
                ModalityKind::Emg | ModalityKind::Acc => {
                    if of_modality.len() != 1 {
                        return Err(Error::InvalidConfig(format!(
                            "{modality} needs exactly 1 branch, got {}",
                            of_modality.len()
                        )));
                    }
                }
            }
        }

        for (m, s) in &self.input_scales {
            if !(*s > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "input scale for {m} must be positive, got {s}"
                )));
            }
        }

        // Unique branch names (they key the parameter paths).
        let mut names = std::collections::BTreeSet::new();
        for b in &self.branches {
            if !names.insert(&b.name) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate branch name {:?}",
                    b.name
                )));
            }
        }

        // Branch dimension chaining.
        for b in &self.branches {
            let (channels, samples) = self.input_geometry[&b.modality];
            let mut t = samples;
            let mut pooled = false;
            for (i, layer) in b.layers.iter().enumerate() {
                match layer {
                    LayerSpec::DepthwiseConv1D {
                        kernel_len,
                        stride,
                        channels: c,
                        padding,
                    } => {
                        if pooled {
                            return Err(Error::InvalidConfig(format!(
                                "branch {}: conv after pooling", b.name
                            )));
                        }
                        if *c != channels {
                            return Err(Error::InvalidConfig(format!(
                                "branch {}: layer {i} expects {c} channels, input has {channels}",
                                b.name
                            )));
                        }
                        if *stride == 0 || *kernel_len == 0 {
                            return Err(Error::InvalidConfig(format!(
                                "branch {}: kernel and stride must be positive", b.name
                            )));
                        }
                        let out = conv_out_len(t, *kernel_len, *stride, *padding);
                        if out == 0 {
                            return Err(Error::InvalidConfig(format!(
                                "branch {}: layer {i} kernel {kernel_len} does not fit {t} samples",
                                b.name
                            )));
                        }
                        t = out;
                    }
                    LayerSpec::ReLU => {}
                    LayerSpec::GlobalStats => {
                        pooled = true;
                    }
                    other => {
                        return Err(Error::InvalidConfig(format!(
                            "branch {}: unsupported layer {other:?}",
                            b.name
                        )));
                    }
                }
            }
            if !pooled {
                return Err(Error::InvalidConfig(format!(
                    "branch {} must end in GlobalStats pooling",
                    b.name
                )));
            }
        }

        // Head: Concat, then exactly three Dense layers, sigmoid output of
        // dimension one.
        let Some(LayerSpec::Concat { axis: 0 }) = self.head.first() else {
            return Err(Error::InvalidConfig(
                "head must start with Concat over the feature axis".into(),
            ));
        };
        let mut dim = self.feature_dim();
        let mut dense_count = 0usize;
        for layer in &self.head[1..] {
            match layer {
                LayerSpec::Dense { in_dim, out_dim } => {
                    if *in_dim != dim {
                        return Err(Error::InvalidConfig(format!(
                            "head dense expects input {in_dim}, chain provides {dim}"
                        )));
                    }
                    dim = *out_dim;
                    dense_count += 1;
                }
                LayerSpec::ReLU => {}
                LayerSpec::Sigmoid => {}
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unsupported head layer {other:?}"
                    )));
                }
            }
        }
        if dense_count != 3 {
            return Err(Error::InvalidConfig(format!(
                "head needs exactly 3 dense layers, got {dense_count}"
            )));
        }
        if dim != 1 {
            return Err(Error::InvalidConfig(format!(
                "head must end in a single output, got {dim}"
            )));
        }
        if !matches!(self.head.last(), Some(LayerSpec::Sigmoid)) {
            return Err(Error::InvalidConfig("head must end with Sigmoid".into()));
        }
        Ok(())
    }
}

fn first_kernel(b: &BranchSpec) -> Option<usize> {
    b.layers.iter().find_map(|l| match l {
        LayerSpec::DepthwiseConv1D { kernel_len, .. } => Some(*kernel_len),
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_validates() {
        let spec = ModelSpec::default_spec();
        spec.validate().unwrap();
        assert_eq!(spec.branches.len(), 4);
        assert_eq!(spec.feature_dim(), 16);
    }

    #[test]
    fn conv_out_len_examples() {
        assert_eq!(conv_out_len(1500, 32, 2, Padding::Valid), 735);
        assert_eq!(conv_out_len(4, 3, 1, Padding::Valid), 2);
        assert_eq!(conv_out_len(10, 3, 2, Padding::Same), 5);
        assert_eq!(conv_out_len(2, 3, 1, Padding::Valid), 0);
    }

    #[test]
    fn eeg_needs_two_distinct_kernels() {
        let mut spec = ModelSpec::default_spec();
        // Make both EEG kernels equal.
        for b in spec.branches.iter_mut().filter(|b| b.modality == ModalityKind::Eeg) {
            for l in &mut b.layers {
                if let LayerSpec::DepthwiseConv1D { kernel_len, .. } = l {
                    *kernel_len = 16;
                }
            }
        }
        assert!(spec.validate().is_err());
    }

    #[test]
    fn restrict_to_rebuilds_head() {
        let spec = ModelSpec::default_spec();
        let emg_only = spec.restrict_to(&[ModalityKind::Emg]).unwrap();
        assert_eq!(emg_only.branches.len(), 1);
        assert_eq!(emg_only.feature_dim(), 2);
        emg_only.validate().unwrap();
        let eeg_only = spec.restrict_to(&[ModalityKind::Eeg]).unwrap();
        assert_eq!(eeg_only.branches.len(), 2);
        assert_eq!(eeg_only.feature_dim(), 8);
    }

    #[test]
    fn empty_subset_rejected() {
        let spec = ModelSpec::default_spec();
        assert!(spec.restrict_to(&[]).is_err());
    }

    #[test]
    fn chained_dims_must_fit() {
        let mut g = BTreeMap::new();
        g.insert(ModalityKind::Emg, (2, 8));
        // Kernel longer than the input after one stride-4 layer.
        let spec = ModelSpec::for_geometry_sized(g, &[32, 8], 16, 16, 2, 4, &[4, 2]);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn same_padding_splits_evenly() {
        assert_eq!(same_padding(10, 3, 1), (1, 1));
        assert_eq!(same_padding(10, 4, 1), (1, 2));
        assert_eq!(same_padding(10, 3, 2), (0, 1));
    }
}
