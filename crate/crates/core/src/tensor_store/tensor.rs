use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DType {
    #[serde(rename = "F32")]
    F32,
    #[serde(rename = "F64")]
    F64,
}

impl DType {
    pub const fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }

    pub const fn tag(self) -> &'static str {
        match self {
            DType::F32 => "F32",
            DType::F64 => "F64",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "F32" => Some(DType::F32),
            "F64" => Some(DType::F64),
            _ => None,
        }
    }
}

/// Flat row-major storage. The element type fixes the dtype.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::F32,
            TensorData::F64(_) => DType::F64,
        }
    }

    pub fn get(&self, i: usize) -> f64 {
        match self {
            TensorData::F32(v) => v[i] as f64,
            TensorData::F64(v) => v[i],
        }
    }

    /// Stores `value`, rounding to the element precision.
    pub fn set(&mut self, i: usize, value: f64) {
        match self {
            TensorData::F32(v) => v[i] = value as f32,
            TensorData::F64(v) => v[i] = value,
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::F64(v) => v.clone(),
        }
    }

    pub fn fill_zero(&mut self) {
        match self {
            TensorData::F32(v) => v.iter_mut().for_each(|x| *x = 0.0),
            TensorData::F64(v) => v.iter_mut().for_each(|x| *x = 0.0),
        }
    }

    /// Index of the first NaN/Inf element, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        match self {
            TensorData::F32(v) => v.iter().position(|x| !x.is_finite()),
            TensorData::F64(v) => v.iter().position(|x| !x.is_finite()),
        }
    }

    /// True when element `i` has the same bit pattern in both buffers.
    pub fn bits_eq_at(&self, other: &TensorData, i: usize) -> bool {
        match (self, other) {
            (TensorData::F32(a), TensorData::F32(b)) => a[i].to_bits() == b[i].to_bits(),
            (TensorData::F64(a), TensorData::F64(b)) => a[i].to_bits() == b[i].to_bits(),
            _ => false,
        }
    }

    pub(crate) fn write_le(&self, out: &mut Vec<u8>) {
        match self {
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
    }

    pub(crate) fn read_le(dtype: DType, bytes: &[u8]) -> Self {
        match dtype {
            DType::F32 => TensorData::F32(
                bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            ),
            DType::F64 => TensorData::F64(
                bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
                    .collect(),
            ),
        }
    }
}

/// A named, shaped tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    name: String,
    shape: Vec<usize>,
    data: TensorData,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: TensorData) -> Result<Self> {
        let name = name.into();
        let expected = element_count(&shape).ok_or_else(|| Error::tensor(&name, "shape product overflows"))?;
        if expected != data.len() {
            return Err(Error::tensor(
                &name,
                format!("shape {:?} needs {} elements, data has {}", shape, expected, data.len()),
            ));
        }
        Ok(Tensor { name, shape, data })
    }

    pub fn from_f32(name: impl Into<String>, shape: Vec<usize>, values: Vec<f32>) -> Result<Self> {
        Tensor::new(name, shape, TensorData::F32(values))
    }

    pub fn from_f64(name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        Tensor::new(name, shape, TensorData::F64(values))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dtype(&self) -> DType {
        self.data.dtype()
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut TensorData {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn byte_len(&self) -> usize {
        self.len() * self.dtype().size()
    }

    pub fn values(&self) -> Vec<f64> {
        self.data.to_f64()
    }
}

pub(crate) fn element_count(shape: &[usize]) -> Option<usize> {
    shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}
