//! Serialized model containers and exact size accounting.
//!
//! Two container kinds share the record grammar:
//!
//! - float container (magic `FGSPARM1`): dtype 0 = f32 dense,
//!   dtype 1 = f32 sparse
//! - quantized container (magic `FGSQNT01`): dtype 2 = i8 dense,
//!   dtype 3 = i8 sparse, dtype 4 = i32 bias; weight and bias records
//!   carry a scale table (`count: u16, f32 x count` — one entry for
//!   per-tensor scales, one per channel for depth-wise kernels); an
//!   activation table (`name, count: u16, (scale: f32, zero_point: i8) x
//!   count`) follows the tensor records
//!
//! Sparse blocks store `(index delta: u16, value)` pairs over strictly
//! increasing indices (`index_i = index_{i-1} + delta_i`, starting from
//! -1); gaps beyond 65535 are bridged with `(65535, 0)` hop entries.
//! A tensor is stored sparse when more than half its entries are zero and
//! the caller allowed sparse encoding.
//!
//! The architecture description is not part of the container; it travels
//! as a sidecar document next to the artifact.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Cursor, Parameters, Tensor, PARAM_MAGIC, PARAM_VERSION};

use super::quant::{BiasTensor, QuantParams, QuantTensor, QuantizedModel};

pub const QUANT_MAGIC: &[u8; 8] = b"FGSQNT01";
pub const QUANT_VERSION: u32 = 1;
/// Bytes before the first record: magic + version + three table counts.
pub const QUANT_HEADER_BYTES: usize = 24;
/// Float container header: magic + version + count.
pub const FLOAT_HEADER_BYTES: usize = 16;

const DTYPE_F32_DENSE: u8 = 0;
const DTYPE_F32_SPARSE: u8 = 1;
const DTYPE_I8_DENSE: u8 = 2;
const DTYPE_I8_SPARSE: u8 = 3;
const DTYPE_I32_BIAS: u8 = 4;

fn sparse_runs<T: Copy + PartialEq + Default>(data: &[T]) -> Vec<(u16, T)> {
    let zero = T::default();
    let mut runs = Vec::new();
    let mut prev: i64 = -1;
    for (i, &v) in data.iter().enumerate() {
        if v == zero {
            continue;
        }
        let mut delta = i as i64 - prev;
        while delta > 65535 {
            runs.push((65535u16, zero));
            delta -= 65535;
        }
        runs.push((delta as u16, v));
        prev = i as i64;
    }
    runs
}

fn zero_fraction_f64(data: &[f64]) -> f64 {
    data.iter().filter(|&&v| v == 0.0).count() as f64 / data.len().max(1) as f64
}

fn zero_fraction_i8(data: &[i8]) -> f64 {
    data.iter().filter(|&&v| v == 0).count() as f64 / data.len().max(1) as f64
}

fn write_path(out: &mut Vec<u8>, path: &str) {
    out.extend_from_slice(&(path.len() as u16).to_le_bytes());
    out.extend_from_slice(path.as_bytes());
}

fn write_shape(out: &mut Vec<u8>, shape: &[usize]) {
    out.push(shape.len() as u8);
    for &d in shape {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
}

/// Serialize a float parameter container, optionally using sparse blocks
/// for tensors that are more than half zeros.
pub fn serialize_float(params: &Parameters, allow_sparse: bool) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(PARAM_MAGIC);
    out.extend_from_slice(&PARAM_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (path, tensor) in params.iter() {
        write_path(&mut out, path);
        let sparse = allow_sparse && zero_fraction_f64(tensor.data()) > 0.5;
        if sparse {
            out.push(DTYPE_F32_SPARSE);
            write_shape(&mut out, tensor.shape());
            let runs = sparse_runs(&tensor.data().iter().map(|&v| v as f32).collect::<Vec<_>>());
            out.extend_from_slice(&(runs.len() as u32).to_le_bytes());
            for (delta, v) in runs {
                out.extend_from_slice(&delta.to_le_bytes());
                out.extend_from_slice(&v.to_le_bytes());
            }
        } else {
            out.push(DTYPE_F32_DENSE);
            write_shape(&mut out, tensor.shape());
            for &v in tensor.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    out
}

/// Parse a float container produced by [`serialize_float`] or by the
/// trainer's dense writer.
pub fn deserialize_float(bytes: &[u8]) -> Result<Parameters> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8)? != PARAM_MAGIC {
        return Err(Error::Container("bad magic bytes".into()));
    }
    let version = cur.u32()?;
    if version != PARAM_VERSION {
        return Err(Error::Container(format!("unsupported version {version}")));
    }
    let count = cur.u32()? as usize;
    let mut params = Parameters::new();
    for _ in 0..count {
        let path_len = cur.u16()? as usize;
        let path = String::from_utf8(cur.take(path_len)?.to_vec())
            .map_err(|_| Error::Container("non-UTF-8 tensor path".into()))?;
        let dtype = cur.u8()?;
        let ndim = cur.u8()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(cur.u32()? as usize);
        }
        let numel: usize = shape.iter().product();
        let data = match dtype {
            DTYPE_F32_DENSE => {
                let mut data = Vec::with_capacity(numel);
                for _ in 0..numel {
                    data.push(f64::from(cur.f32()?));
                }
                data
            }
            DTYPE_F32_SPARSE => {
                let nnz = cur.u32()? as usize;
                let mut data = vec![0.0f64; numel];
                let mut idx: i64 = -1;
                for _ in 0..nnz {
                    let delta = cur.u16()? as i64;
                    let v = cur.f32()?;
                    idx += delta;
                    if idx as usize >= numel {
                        return Err(Error::Container("sparse index out of range".into()));
                    }
                    data[idx as usize] = f64::from(v);
                }
                data
            }
            other => {
                return Err(Error::Container(format!(
                    "unexpected dtype {other} in float container"
                )))
            }
        };
        params.insert(path, Tensor::from_vec(&shape, data)?);
    }
    Ok(params)
}

/// Serialize a quantized model container.
pub fn serialize_quantized(qm: &QuantizedModel, allow_sparse: bool) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(QUANT_MAGIC);
    out.extend_from_slice(&QUANT_VERSION.to_le_bytes());
    out.extend_from_slice(&(qm.weights.len() as u32).to_le_bytes());
    out.extend_from_slice(&(qm.biases.len() as u32).to_le_bytes());
    out.extend_from_slice(&(qm.activations.len() as u32).to_le_bytes());

    for (path, qt) in &qm.weights {
        write_path(&mut out, path);
        let sparse = allow_sparse && zero_fraction_i8(&qt.data) > 0.5;
        out.push(if sparse { DTYPE_I8_SPARSE } else { DTYPE_I8_DENSE });
        write_shape(&mut out, &qt.shape);
        out.extend_from_slice(&(qt.scales.len() as u16).to_le_bytes());
        for &s in &qt.scales {
            out.extend_from_slice(&(s as f32).to_le_bytes());
        }
        if sparse {
            let runs = sparse_runs(&qt.data);
            out.extend_from_slice(&(runs.len() as u32).to_le_bytes());
            for (delta, v) in runs {
                out.extend_from_slice(&delta.to_le_bytes());
                out.push(v as u8);
            }
        } else {
            out.extend(qt.data.iter().map(|&v| v as u8));
        }
    }

    for (path, bt) in &qm.biases {
        write_path(&mut out, path);
        out.push(DTYPE_I32_BIAS);
        write_shape(&mut out, &bt.shape);
        out.extend_from_slice(&(bt.scales.len() as u16).to_le_bytes());
        for &s in &bt.scales {
            out.extend_from_slice(&(s as f32).to_le_bytes());
        }
        for &v in &bt.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    for (name, qps) in &qm.activations {
        write_path(&mut out, name);
        out.extend_from_slice(&(qps.len() as u16).to_le_bytes());
        for qp in qps {
            out.extend_from_slice(&(qp.scale as f32).to_le_bytes());
            out.push(qp.zero_point as i8 as u8);
        }
    }
    out
}

/// Parse a quantized container. The caller supplies the architecture (it
/// travels as a sidecar document).
pub fn deserialize_quantized(
    bytes: &[u8],
    spec: crate::nn::ModelSpec,
) -> Result<QuantizedModel> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8)? != QUANT_MAGIC {
        return Err(Error::Container("bad magic bytes".into()));
    }
    let version = cur.u32()?;
    if version != QUANT_VERSION {
        return Err(Error::Container(format!("unsupported version {version}")));
    }
    let n_weights = cur.u32()? as usize;
    let n_biases = cur.u32()? as usize;
    let n_acts = cur.u32()? as usize;

    let mut weights = BTreeMap::new();
    for _ in 0..n_weights {
        let path_len = cur.u16()? as usize;
        let path = String::from_utf8(cur.take(path_len)?.to_vec())
            .map_err(|_| Error::Container("non-UTF-8 tensor path".into()))?;
        let dtype = cur.u8()?;
        let ndim = cur.u8()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(cur.u32()? as usize);
        }
        let numel: usize = shape.iter().product();
        let scale_count = cur.u16()? as usize;
        let mut scales = Vec::with_capacity(scale_count);
        for _ in 0..scale_count {
            scales.push(f64::from(cur.f32()?));
        }
        let data = match dtype {
            DTYPE_I8_DENSE => cur.take(numel)?.iter().map(|&b| b as i8).collect(),
            DTYPE_I8_SPARSE => {
                let nnz = cur.u32()? as usize;
                let mut data = vec![0i8; numel];
                let mut idx: i64 = -1;
                for _ in 0..nnz {
                    let delta = cur.u16()? as i64;
                    let v = cur.u8()? as i8;
                    idx += delta;
                    if idx as usize >= numel {
                        return Err(Error::Container("sparse index out of range".into()));
                    }
                    data[idx as usize] = v;
                }
                data
            }
            other => {
                return Err(Error::Container(format!(
                    "unexpected weight dtype {other}"
                )))
            }
        };
        weights.insert(path, QuantTensor { shape, data, scales });
    }

    let mut biases = BTreeMap::new();
    for _ in 0..n_biases {
        let path_len = cur.u16()? as usize;
        let path = String::from_utf8(cur.take(path_len)?.to_vec())
            .map_err(|_| Error::Container("non-UTF-8 tensor path".into()))?;
        let dtype = cur.u8()?;
        if dtype != DTYPE_I32_BIAS {
            return Err(Error::Container(format!("unexpected bias dtype {dtype}")));
        }
        let ndim = cur.u8()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(cur.u32()? as usize);
        }
        let numel: usize = shape.iter().product();
        let scale_count = cur.u16()? as usize;
        let mut scales = Vec::with_capacity(scale_count);
        for _ in 0..scale_count {
            scales.push(f64::from(cur.f32()?));
        }
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            data.push(cur.i32()?);
        }
        biases.insert(path, BiasTensor { shape, data, scales });
    }

    let mut activations = BTreeMap::new();
    for _ in 0..n_acts {
        let name_len = cur.u16()? as usize;
        let name = String::from_utf8(cur.take(name_len)?.to_vec())
            .map_err(|_| Error::Container("non-UTF-8 site name".into()))?;
        let count = cur.u16()? as usize;
        let mut qps = Vec::with_capacity(count);
        for _ in 0..count {
            let scale = f64::from(cur.f32()?);
            let zero_point = i32::from(cur.u8()? as i8);
            qps.push(QuantParams { scale, zero_point });
        }
        activations.insert(name, qps);
    }

    let nonzero_counts = weights
        .iter()
        .map(|(p, qt): (&String, &QuantTensor)| {
            (p.clone(), qt.data.iter().filter(|&&q| q != 0).count())
        })
        .collect();

    Ok(QuantizedModel {
        spec,
        weights,
        biases,
        activations,
        nonzero_counts,
    })
}

/// Exact serialized size of a float container.
pub fn float_size_bytes(params: &Parameters, sparse_encoding: bool) -> usize {
    serialize_float(params, sparse_encoding).len()
}

/// Exact serialized size of a quantized container.
pub fn quantized_size_bytes(qm: &QuantizedModel, sparse_encoding: bool) -> usize {
    serialize_quantized(qm, sparse_encoding).len()
}

pub fn save_quantized(path: &Path, qm: &QuantizedModel, allow_sparse: bool) -> Result<()> {
    std::fs::write(path, serialize_quantized(qm, allow_sparse)).map_err(|e| Error::io(path, e))
}

pub fn load_quantized(path: &Path, spec: crate::nn::ModelSpec) -> Result<QuantizedModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    deserialize_quantized(&bytes, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compress::quant::calibrate_activations;
    use crate::compress::{prune_magnitude, quantize_model};
    use crate::nn::test_fixtures::{jittered_params, tiny_spec, window_for_spec};
    use crate::nn::{init_parameters, ModelSpec};

    #[test]
    fn empty_float_container_is_header_only() {
        let params = Parameters::new();
        assert_eq!(float_size_bytes(&params, false), FLOAT_HEADER_BYTES);
        assert_eq!(float_size_bytes(&params, true), FLOAT_HEADER_BYTES);
    }

    #[test]
    fn float_container_size_is_four_bytes_per_weight_plus_header() {
        // 524288 f32 weights in one tensor = exactly 2 MiB of payload.
        let mut params = Parameters::new();
        let n = 524_288usize;
        params.insert("w/weight", Tensor::from_vec(&[n], vec![1.0; n]).unwrap());
        let record_overhead = 2 + "w/weight".len() + 1 + 1 + 4;
        assert_eq!(
            float_size_bytes(&params, false),
            2 * 1024 * 1024 + FLOAT_HEADER_BYTES + record_overhead
        );
    }

    #[test]
    fn float_sparse_round_trip() {
        let spec = tiny_spec();
        let params = init_parameters(&spec, 3);
        let (pruned, _) = prune_magnitude(&params, 0.8).unwrap();
        let bytes = serialize_float(&pruned, true);
        let back = deserialize_float(&bytes).unwrap();
        for (path, t) in pruned.iter() {
            let r = back.get(path).unwrap();
            for (a, b) in t.data().iter().zip(r.data()) {
                assert_eq!(*a as f32, *b as f32, "{path}");
            }
        }
        // Dense writer output parses through the same reader.
        let dense = crate::nn::serialize_parameters(&pruned);
        assert!(deserialize_float(&dense).is_ok());
    }

    #[test]
    fn quantized_round_trip_preserves_model() {
        let spec = tiny_spec();
        let params = jittered_params(&spec, 8);
        let (pruned, _) = prune_magnitude(&params, 0.6).unwrap();
        let calib: Vec<_> = (0..8).map(|i| window_for_spec(&spec, i)).collect();
        let acts = calibrate_activations(&spec, &pruned, &calib).unwrap();
        let qm = quantize_model(&spec, &pruned, &acts).unwrap();
        for allow_sparse in [false, true] {
            let bytes = serialize_quantized(&qm, allow_sparse);
            let back = deserialize_quantized(&bytes, spec.clone()).unwrap();
            assert_eq!(back.weights, qm.weights);
            assert_eq!(back.biases, qm.biases);
            assert_eq!(back.activations, qm.activations);
            // And the reloaded model computes bit-identically.
            let w = window_for_spec(&spec, 99);
            assert_eq!(
                crate::compress::quantized_forward(&qm, &w).unwrap(),
                crate::compress::quantized_forward(&back, &w).unwrap()
            );
        }
    }

    #[test]
    fn sparse_beats_dense_above_two_thirds_zeros() {
        let spec = tiny_spec();
        let params = init_parameters(&spec, 5);
        let (pruned, _) = prune_magnitude(&params, 0.9).unwrap();
        let calib: Vec<_> = (0..4).map(|i| window_for_spec(&spec, i)).collect();
        let acts = calibrate_activations(&spec, &pruned, &calib).unwrap();
        let qm = quantize_model(&spec, &pruned, &acts).unwrap();
        assert!(quantized_size_bytes(&qm, true) < quantized_size_bytes(&qm, false));
    }

    #[test]
    fn default_architecture_compression_ratio_under_budget() {
        let spec = ModelSpec::default_spec();
        let params = init_parameters(&spec, 7);
        let (pruned, _) = prune_magnitude(&params, 0.5).unwrap();
        let calib: Vec<_> = (0..2).map(|i| window_for_spec_default(&spec, i)).collect();
        let acts = calibrate_activations(&spec, &pruned, &calib).unwrap();
        let qm = quantize_model(&spec, &pruned, &acts).unwrap();
        let float_bytes = float_size_bytes(&params, false);
        let quant_bytes = quantized_size_bytes(&qm, true);
        let ratio = quant_bytes as f64 / float_bytes as f64;
        assert!(ratio <= 0.405, "ratio {ratio} ({quant_bytes}/{float_bytes})");
    }

    fn window_for_spec_default(spec: &ModelSpec, seed: u64) -> crate::signal::Window {
        // The shared fixture builds windows for any spec geometry.
        crate::nn::test_fixtures::window_for_spec(spec, seed)
    }

    #[test]
    fn truncated_quantized_container_rejected() {
        let spec = tiny_spec();
        let params = init_parameters(&spec, 5);
        let calib: Vec<_> = (0..2).map(|i| window_for_spec(&spec, i)).collect();
        let acts = calibrate_activations(&spec, &params, &calib).unwrap();
        let qm = quantize_model(&spec, &params, &acts).unwrap();
        let bytes = serialize_quantized(&qm, false);
        assert!(deserialize_quantized(&bytes[..bytes.len() - 2], spec).is_err());
    }
}
