use std::ops::Range;

use rand::Rng;

use super::{ModelError, Result};

/// How a tensor is filled by [`ParameterSet::initialize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    Ones,
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
    Glorot { fan_in: usize, fan_out: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub init: Init,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Every trainable weight of a model in one flat buffer, addressed by named tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    tensors: Vec<TensorInfo>,
    values: Vec<f64>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self { tensors: Vec::new(), values: Vec::new() }
    }

    /// Appends a zero-filled tensor and returns its range in the flat buffer.
    pub fn add(&mut self, name: impl Into<String>, shape: &[usize], init: Init) -> Range<usize> {
        let info = TensorInfo {
            name: name.into(),
            shape: shape.to_vec(),
            offset: self.values.len(),
            init,
        };
        let range = info.range();
        self.values.resize(range.end, 0.0);
        self.tensors.push(info);
        range
    }

    pub fn initialize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for info in &self.tensors {
            let slot = &mut self.values[info.range()];
            match info.init {
                Init::Zeros => slot.fill(0.0),
                Init::Ones => slot.fill(1.0),
                Init::Glorot { fan_in, fan_out } => {
                    let limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
                    for v in slot.iter_mut() {
                        *v = rng.random_range(-limit..=limit);
                    }
                }
            }
        }
    }

    pub fn tensors(&self) -> &[TensorInfo] {
        &self.tensors
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn info(&self, name: &str) -> Option<&TensorInfo> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.info(name).map(|t| &self.values[t.range()])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let range = self.info(name)?.range();
        Some(&mut self.values[range])
    }

    /// Name of the tensor holding flat index `idx`.
    pub fn owner_of(&self, idx: usize) -> Option<&TensorInfo> {
        self.tensors.iter().find(|t| t.range().contains(&idx))
    }

    /// Copies values from `other`, which must have an identical layout.
    pub fn copy_from(&mut self, other: &ParameterSet) -> Result<()> {
        self.check_layout(other)?;
        self.values.copy_from_slice(&other.values);
        Ok(())
    }

    pub fn check_layout(&self, other: &ParameterSet) -> Result<()> {
        let same = self.tensors.len() == other.tensors.len()
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|(a, b)| a.name == b.name && a.shape == b.shape);
        if same {
            Ok(())
        } else {
            Err(ModelError::ShapeMismatch("parameter layouts differ".into()))
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl Default for ParameterSet {
    fn default() -> Self {
        Self::new()
    }
}
