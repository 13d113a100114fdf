use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

use super::tensor::Tensor;

pub(crate) const METADATA_KEY: &str = "__metadata__";

/// An ordered collection of uniquely named tensors plus free-form metadata.
///
/// Tensor order is the order of the data section on disk.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
    metadata: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a checkpoint, rejecting duplicate or reserved names.
    pub fn from_tensors(tensors: impl IntoIterator<Item = Tensor>) -> Result<Self> {
        let mut cp = Checkpoint::new();
        for t in tensors {
            cp.push(t)?;
        }
        Ok(cp)
    }

    pub fn push(&mut self, tensor: Tensor) -> Result<()> {
        if tensor.name() == METADATA_KEY {
            return Err(Error::tensor(tensor.name(), "name is reserved"));
        }
        if self.index.contains_key(tensor.name()) {
            return Err(Error::tensor(tensor.name(), "duplicate tensor name"));
        }
        self.index.insert(tensor.name().to_string(), self.tensors.len());
        self.tensors.push(tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index.get(name).map(|&i| &mut self.tensors[i])
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.iter().map(|t| t.name())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn metadata_mut(&mut self) -> &mut BTreeMap<String, String> {
        &mut self.metadata
    }

    pub fn total_elements(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }
}
