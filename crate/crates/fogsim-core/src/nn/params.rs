//! Model parameters, initialization and the float parameter container.
//!
//! Container layout (little-endian), versioned:
//!
//! ```text
//! magic   8 bytes  "FGSPARM1"
//! version u32      1
//! count   u32      number of tensors
//! per tensor, sorted by path:
//!   path_len u16, path bytes (UTF-8)
//!   dtype    u8   (0 = f32)
//!   ndim     u8
//!   dims     u32 x ndim
//!   data     f32 x numel
//! ```
//!
//! Training holds f64 tensors in memory; export narrows to f32.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;

use super::spec::{LayerSpec, ModelSpec};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::seed;

pub const PARAM_MAGIC: &[u8; 8] = b"FGSPARM1";
pub const PARAM_VERSION: u32 = 1;
/// Bytes before the first tensor record: magic + version + count.
pub const PARAM_HEADER_BYTES: usize = 16;

/// Per-layer weight and bias tensors keyed by a stable layer path such as
/// `branch/emg/conv0/weight` or `head/dense1/bias`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Parameters {
    entries: BTreeMap<String, Tensor>,
}

impl Parameters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, path: impl Into<String>, tensor: Tensor) {
        self.entries.insert(path.into(), tensor);
    }

    pub fn get(&self, path: &str) -> Option<&Tensor> {
        self.entries.get(path)
    }

    pub fn get_mut(&mut self, path: &str) -> Option<&mut Tensor> {
        self.entries.get_mut(path)
    }

    pub fn expect(&self, path: &str) -> Result<&Tensor> {
        self.entries
            .get(path)
            .ok_or_else(|| Error::ShapeMismatch(format!("missing parameter {path:?}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.entries.iter_mut()
    }

    pub fn paths(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total scalar count across all tensors.
    pub fn scalar_count(&self) -> usize {
        self.entries.values().map(Tensor::numel).sum()
    }

    /// Weight-tensor paths only (biases excluded).
    pub fn weight_paths(&self) -> Vec<String> {
        self.entries
            .keys()
            .filter(|p| p.ends_with("/weight"))
            .cloned()
            .collect()
    }
}

/// Parameter paths for one branch conv layer.
pub fn conv_paths(branch: &str, conv_idx: usize) -> (String, String) {
    (
        format!("branch/{branch}/conv{conv_idx}/weight"),
        format!("branch/{branch}/conv{conv_idx}/bias"),
    )
}

/// Parameter paths for one head dense layer.
pub fn dense_paths(dense_idx: usize) -> (String, String) {
    (
        format!("head/dense{dense_idx}/weight"),
        format!("head/dense{dense_idx}/bias"),
    )
}

/// Walk the spec's parameterized layers in canonical order, yielding
/// `(weight path, bias path, weight shape, fan_in)`.
pub fn parameter_layout(spec: &ModelSpec) -> Vec<(String, String, Vec<usize>, usize)> {
    let mut layout = Vec::new();
    for branch in &spec.branches {
        let mut conv_idx = 0usize;
        for layer in &branch.layers {
            if let LayerSpec::DepthwiseConv1D {
                kernel_len,
                channels,
                ..
            } = layer
            {
                let (w, b) = conv_paths(&branch.name, conv_idx);
                layout.push((w, b, vec![*channels, *kernel_len], *kernel_len));
                conv_idx += 1;
            }
        }
    }
    let mut dense_idx = 0usize;
    for layer in &spec.head {
        if let LayerSpec::Dense { in_dim, out_dim } = layer {
            let (w, b) = dense_paths(dense_idx);
            layout.push((w, b, vec![*out_dim, *in_dim], *in_dim));
            dense_idx += 1;
        }
    }
    layout
}

/// Kaiming-uniform fan-in initialization: weights drawn from
/// `U[-sqrt(2/fan_in), sqrt(2/fan_in)]`, biases zero. Deterministic per seed.
pub fn init_parameters(spec: &ModelSpec, seed_value: u64) -> Parameters {
    let mut rng = seed::rng(seed_value);
    let mut params = Parameters::new();
    for (w_path, b_path, w_shape, fan_in) in parameter_layout(spec) {
        let bound = (2.0 / fan_in as f64).sqrt();
        let numel: usize = w_shape.iter().product();
        let data: Vec<f64> = (0..numel).map(|_| rng.random_range(-bound..=bound)).collect();
        params.insert(w_path, Tensor::from_vec(&w_shape, data).expect("layout shape"));
        params.insert(b_path, Tensor::zeros(&[w_shape[0]]));
    }
    params
}

/// Zero-filled parameters with the spec's layout (useful as a gradient
/// accumulator and in tests).
pub fn zeros_like_spec(spec: &ModelSpec) -> Parameters {
    let mut params = Parameters::new();
    for (w_path, b_path, w_shape, _) in parameter_layout(spec) {
        params.insert(w_path, Tensor::zeros(&w_shape));
        params.insert(b_path, Tensor::zeros(&[w_shape[0]]));
    }
    params
}

/// Check that `params` matches the spec's layout exactly.
pub fn check_layout(spec: &ModelSpec, params: &Parameters) -> Result<()> {
    let layout = parameter_layout(spec);
    let mut expected = 0usize;
    for (w_path, b_path, w_shape, _) in &layout {
        let w = params.expect(w_path)?;
        if w.shape() != w_shape.as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "{w_path}: expected shape {:?}, got {:?}",
                w_shape,
                w.shape()
            )));
        }
        let b = params.expect(b_path)?;
        if b.shape() != [w_shape[0]] {
            return Err(Error::ShapeMismatch(format!(
                "{b_path}: expected shape [{}], got {:?}",
                w_shape[0],
                b.shape()
            )));
        }
        expected += 2;
    }
    if params.len() != expected {
        return Err(Error::ShapeMismatch(format!(
            "parameter count {} does not match spec layout {}",
            params.len(),
            expected
        )));
    }
    Ok(())
}

pub fn serialize_parameters(params: &Parameters) -> Vec<u8> {
    let mut out = Vec::with_capacity(PARAM_HEADER_BYTES + params.scalar_count() * 4);
    out.extend_from_slice(PARAM_MAGIC);
    out.extend_from_slice(&PARAM_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (path, tensor) in params.iter() {
        out.extend_from_slice(&(path.len() as u16).to_le_bytes());
        out.extend_from_slice(path.as_bytes());
        out.push(0u8); // dtype f32
        out.push(tensor.shape().len() as u8);
        for &d in tensor.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn deserialize_parameters(bytes: &[u8]) -> Result<Parameters> {
    let mut cursor = Cursor { bytes, pos: 0 };
    let magic = cursor.take(8)?;
    if magic != PARAM_MAGIC {
        return Err(Error::Container("bad magic bytes".into()));
    }
    let version = cursor.u32()?;
    if version != PARAM_VERSION {
        return Err(Error::Container(format!("unsupported version {version}")));
    }
    let count = cursor.u32()? as usize;
    let mut params = Parameters::new();
    for _ in 0..count {
        let path_len = cursor.u16()? as usize;
        let path = String::from_utf8(cursor.take(path_len)?.to_vec())
            .map_err(|_| Error::Container("non-UTF-8 tensor path".into()))?;
        let dtype = cursor.u8()?;
        if dtype != 0 {
            return Err(Error::Container(format!(
                "unexpected dtype tag {dtype} in float container"
            )));
        }
        let ndim = cursor.u8()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(cursor.u32()? as usize);
        }
        let numel: usize = shape.iter().product();
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            data.push(f64::from(f32::from_le_bytes(
                cursor.take(4)?.try_into().expect("4 bytes"),
            )));
        }
        params.insert(path, Tensor::from_vec(&shape, data)?);
    }
    Ok(params)
}

pub fn save_parameters(path: &Path, params: &Parameters) -> Result<()> {
    std::fs::write(path, serialize_parameters(params)).map_err(|e| Error::io(path, e))
}

pub fn load_parameters(path: &Path) -> Result<Parameters> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    deserialize_parameters(&bytes)
}

pub(crate) struct Cursor<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Container("truncated container".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}
