//! Dense row-major tensors and activation functions.
//!
//! [`Tensor`] is the universal value type of the crate: layer inputs and
//! outputs, dataset cubes, weight blocks, and heatmaps are all tensors of
//! 64-bit floats. Layout is row-major with the innermost axis listed last,
//! so serialized weights are portable across implementations.

use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Dense N-dimensional array of `f64` with an explicit shape.
///
/// Invariant: `data.len() == shape.iter().product()` at all times. Tensors
/// are immutable values in practice: operations return new tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor from a shape and a flat row-major buffer.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!("zero-sized dimension in {shape:?}")));
        }
        if data.len() != expect {
            return Err(Error::Shape(format!(
                "data length {} does not match shape {:?} (= {})",
                data.len(),
                shape,
                expect
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    /// Rank-1 tensor from a slice.
    pub fn vector(values: &[f64]) -> Self {
        Tensor {
            shape: vec![values.len()],
            data: values.to_vec(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Flat row-major offset of a multi-index. Panics on rank mismatch or
    /// out-of-range coordinates in debug builds.
    #[inline]
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut flat = 0;
        for (i, &ix) in index.iter().enumerate() {
            debug_assert!(ix < self.shape[i], "index {ix} out of bounds for axis {i}");
            flat = flat * self.shape[i] + ix;
        }
        flat
    }

    #[inline]
    pub fn at(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    #[inline]
    pub fn set(&mut self, index: &[usize], value: f64) {
        let o = self.offset(index);
        self.data[o] = value;
    }

    /// Reinterprets the buffer under a new shape of equal volume.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        Tensor::new(shape.to_vec(), self.data.clone())
    }

    /// Drops a size-1 axis.
    pub fn squeeze(&self, axis: usize) -> Result<Tensor> {
        if axis >= self.rank() || self.shape[axis] != 1 {
            return Err(Error::Shape(format!(
                "cannot squeeze axis {axis} of shape {:?}",
                self.shape
            )));
        }
        let mut shape = self.shape.clone();
        shape.remove(axis);
        if shape.is_empty() {
            shape.push(1);
        }
        Tensor::new(shape, self.data.clone())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two same-shaped tensors.
    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "shape mismatch {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Surrounds the tensor with zeros: `per_axis_pads[i] = (before, after)`.
    pub fn pad_zero(&self, per_axis_pads: &[(usize, usize)]) -> Result<Tensor> {
        if per_axis_pads.len() != self.rank() {
            return Err(Error::Shape(format!(
                "pad spec has {} axes, tensor has {}",
                per_axis_pads.len(),
                self.rank()
            )));
        }
        let out_shape: Vec<usize> = self
            .shape
            .iter()
            .zip(per_axis_pads)
            .map(|(&d, &(b, a))| d + b + a)
            .collect();
        let mut out = Tensor::zeros(&out_shape);
        let mut index = vec![0usize; self.rank()];
        let mut shifted = vec![0usize; self.rank()];
        for (flat, &v) in self.data.iter().enumerate() {
            self.unravel(flat, &mut index);
            for (i, &ix) in index.iter().enumerate() {
                shifted[i] = ix + per_axis_pads[i].0;
            }
            let o = out.offset(&shifted);
            out.data[o] = v;
        }
        Ok(out)
    }

    /// Inverse of [`Tensor::pad_zero`]: removes `(before, after)` cells per axis.
    pub fn crop(&self, per_axis_pads: &[(usize, usize)]) -> Result<Tensor> {
        if per_axis_pads.len() != self.rank() {
            return Err(Error::Shape(format!(
                "crop spec has {} axes, tensor has {}",
                per_axis_pads.len(),
                self.rank()
            )));
        }
        let mut out_shape = Vec::with_capacity(self.rank());
        for (i, (&d, &(b, a))) in self.shape.iter().zip(per_axis_pads).enumerate() {
            if b + a >= d {
                return Err(Error::Shape(format!(
                    "crop ({b},{a}) exceeds axis {i} of size {d}"
                )));
            }
            out_shape.push(d - b - a);
        }
        let mut out = Tensor::zeros(&out_shape);
        let mut index = vec![0usize; self.rank()];
        let mut shifted = vec![0usize; self.rank()];
        for flat in 0..out.data.len() {
            out.unravel(flat, &mut index);
            for (i, &ix) in index.iter().enumerate() {
                shifted[i] = ix + per_axis_pads[i].0;
            }
            out.data[flat] = self.at(&shifted);
        }
        Ok(out)
    }

    /// Concatenates tensors along `axis`. All other axes must agree.
    pub fn concat(tensors: &[&Tensor], axis: usize) -> Result<Tensor> {
        let first = tensors
            .first()
            .ok_or_else(|| Error::Argument("concat of an empty tensor list".into()))?;
        if axis >= first.rank() {
            return Err(Error::Shape(format!(
                "concat axis {axis} out of range for rank {}",
                first.rank()
            )));
        }
        for t in tensors.iter().skip(1) {
            if t.rank() != first.rank() {
                return Err(Error::Shape("concat rank mismatch".into()));
            }
            for ax in 0..first.rank() {
                if ax != axis && t.shape[ax] != first.shape[ax] {
                    return Err(Error::Shape(format!(
                        "concat shape mismatch on axis {ax}: {:?} vs {:?}",
                        first.shape, t.shape
                    )));
                }
            }
        }
        let mut out_shape = first.shape.clone();
        out_shape[axis] = tensors.iter().map(|t| t.shape[axis]).sum();
        let outer: usize = first.shape[..axis].iter().product();
        let inner: usize = first.shape[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(out_shape.iter().product());
        for o in 0..outer {
            for t in tensors {
                let block = t.shape[axis] * inner;
                data.extend_from_slice(&t.data[o * block..(o + 1) * block]);
            }
        }
        Tensor::new(out_shape, data)
    }

    /// Copies a contiguous slab `[start, start+len)` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        if axis >= self.rank() || start + len > self.shape[axis] {
            return Err(Error::Shape(format!(
                "narrow [{start}, {}) out of range on axis {axis} of {:?}",
                start + len,
                self.shape
            )));
        }
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut out_shape = self.shape.clone();
        out_shape[axis] = len;
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * self.shape[axis] + start) * inner;
            data.extend_from_slice(&self.data[base..base + len * inner]);
        }
        Tensor::new(out_shape, data)
    }

    /// Applies an activation elementwise.
    pub fn activate(&self, a: Activation) -> Tensor {
        self.map(|v| a.apply(v))
    }

    fn unravel(&self, mut flat: usize, index: &mut [usize]) {
        for i in (0..self.shape.len()).rev() {
            index[i] = flat % self.shape[i];
            flat /= self.shape[i];
        }
    }
}

/// Serialized form: JSON header plus a little-endian base64 payload.
#[derive(Serialize, Deserialize)]
struct TensorBlob {
    shape: Vec<usize>,
    dtype: String,
    encoding: String,
    data: String,
}

impl Serialize for Tensor {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut bytes = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let blob = TensorBlob {
            shape: self.shape.clone(),
            dtype: "f64".into(),
            encoding: "le-binary-base64".into(),
            data: base64::engine::general_purpose::STANDARD.encode(bytes),
        };
        blob.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Tensor {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let blob = TensorBlob::deserialize(deserializer)?;
        if blob.dtype != "f64" {
            return Err(D::Error::custom(format!("unsupported dtype {}", blob.dtype)));
        }
        if blob.encoding != "le-binary-base64" {
            return Err(D::Error::custom(format!(
                "unsupported encoding {}",
                blob.encoding
            )));
        }
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(blob.data.as_bytes())
            .map_err(D::Error::custom)?;
        if bytes.len() % 8 != 0 {
            return Err(D::Error::custom("payload length not a multiple of 8"));
        }
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Tensor::new(blob.shape, data).map_err(D::Error::custom)
    }
}

/// Activation functions available to every layer.
///
/// Each kind is a total function on the reals with an exact derivative,
/// expressed in terms of the pre-activation input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
    Elu,
}

impl Activation {
    pub const ALL: [Activation; 5] = [
        Activation::Identity,
        Activation::Relu,
        Activation::Sigmoid,
        Activation::Tanh,
        Activation::Elu,
    ];

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp() - 1.0
                }
            }
        }
    }

    /// Derivative with respect to the pre-activation input.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    z.exp()
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pad_appends_zero() {
        let t = Tensor::vector(&[1.0, 2.0, 3.0]);
        let p = t.pad_zero(&[(0, 1)]).unwrap();
        assert_eq!(p.shape(), &[4]);
        assert_eq!(p.data(), &[1.0, 2.0, 3.0, 0.0]);
    }

    #[test]
    fn pad_noop_is_identity() {
        let t = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(t.pad_zero(&[(0, 0), (0, 0)]).unwrap(), t);
    }

    #[test]
    fn pad_rows_of_ones() {
        // 2x2 ones padded by one row before and after: zero first/last rows.
        let t = Tensor::filled(&[2, 2], 1.0);
        let p = t.pad_zero(&[(1, 1), (0, 0)]).unwrap();
        assert_eq!(p.shape(), &[4, 2]);
        assert_eq!(p.data(), &[0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn pad_rank_mismatch_errors() {
        let t = Tensor::vector(&[1.0]);
        assert!(matches!(t.pad_zero(&[(0, 0), (1, 0)]), Err(Error::Shape(_))));
    }

    #[test]
    fn concat_shapes_add_up() {
        let a = Tensor::zeros(&[2, 1]);
        let b = Tensor::zeros(&[2, 3]);
        let c = Tensor::concat(&[&a, &b], 1).unwrap();
        assert_eq!(c.shape(), &[2, 4]);
    }

    #[test]
    fn concat_single_is_identity() {
        let a = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(Tensor::concat(&[&a], 0).unwrap(), a);
    }

    #[test]
    fn concat_last_axis_orders_cells() {
        let a = Tensor::new(vec![1, 1, 2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::new(vec![1, 1, 2], vec![3.0, 4.0]).unwrap();
        let c = Tensor::concat(&[&a, &b], 2).unwrap();
        assert_eq!(c.shape(), &[1, 1, 4]);
        assert_eq!(c.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn concat_empty_list_errors() {
        assert!(matches!(Tensor::concat(&[], 0), Err(Error::Argument(_))));
    }

    #[test]
    fn concat_incompatible_errors() {
        let a = Tensor::zeros(&[2, 2]);
        let b = Tensor::zeros(&[3, 2]);
        assert!(matches!(Tensor::concat(&[&a, &b], 1), Err(Error::Shape(_))));
    }

    #[test]
    fn activations_match_definitions() {
        let t = Tensor::vector(&[-1.0, 0.0, 2.0]);
        assert_eq!(t.activate(Activation::Relu).data(), &[0.0, 0.0, 2.0]);
        assert_eq!(t.activate(Activation::Identity), t);
        let s = Tensor::vector(&[0.0]).activate(Activation::Sigmoid);
        assert!((s.data()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn narrow_extracts_channel_block() {
        let t = Tensor::new(vec![3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let mid = t.narrow(0, 1, 1).unwrap();
        assert_eq!(mid.shape(), &[1, 2]);
        assert_eq!(mid.data(), &[3.0, 4.0]);
    }

    #[test]
    fn serde_round_trip_is_exact() {
        let t = Tensor::new(vec![2, 3], vec![0.1, -2.5, 3e-17, 4.0, f64::MIN_POSITIVE, 6.7]).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        assert!(json.contains("\"dtype\":\"f64\""));
        assert!(json.contains("le-binary-base64"));
        let back: Tensor = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }
}
